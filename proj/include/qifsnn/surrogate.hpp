#pragma once

#include <cstddef>
#include <cstdint>

#include "qifsnn/neuron.hpp"

namespace qifsnn {

// Closed interval [mu_u - sigma_u, mu_u + sigma_u] where the spike derivative is 1.
struct SurrogateWindow {
  double mu_u = 0.0;
  double sigma_u = 0.0;

  double lower() const noexcept { return mu_u - sigma_u; }
  double upper() const noexcept { return mu_u + sigma_u; }
};

struct RectangleSgConfig {
  double alpha = 1.0;
  double u_th = 0.5;
};

struct MembraneMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Membrane mean and variance for inputs I ~ N(0, u_th^2):
//   mean     = a (u_th^2 + u1 u2)
//   variance = u_th^2 (1 + a^2 (2 u_th^2 + (u1 + u2)^2))
// The raw overload accepts degenerate values (a = 0, u_th = 0) that QifParams rejects.
MembraneMoments theorem1_stats(double a, double u1, double u2, double u_th) noexcept;
MembraneMoments theorem1_stats(const QifParams& p) noexcept;

SurrogateWindow qif_window(double a, double u1, double u2, double u_th) noexcept;
SurrogateWindow qif_window(const QifParams& p) noexcept;

// 1 inside the closed window, 0 elsewhere.
double qif_surrogate_derivative(double u, const SurrogateWindow& w) noexcept;

// 1/alpha when |u - u_th| < alpha/2, else 0.
double rectangle_surrogate(double u, const RectangleSgConfig& cfg) noexcept;

struct MonteCarloStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double se_mean = 0.0;
  double se_variance = 0.0;
  std::size_t n = 0;
};

// Samples the one-step membrane model u = a (I1 - u1)(I1 - u2) + I2 with
// I1, I2 ~ N(0, u_th^2) i.i.d. Samples are drawn in fixed-size chunks with
// per-chunk streams and reduced in chunk order, so the result is bit-identical
// for a given (n, seed) regardless of `threads`.
MonteCarloStats monte_carlo_stats(double a, double u1, double u2, double u_th, std::size_t n,
                                  std::uint64_t seed, unsigned threads = 1);
MonteCarloStats monte_carlo_stats(const QifParams& p, std::size_t n, std::uint64_t seed,
                                  unsigned threads = 1);

enum class SurrogateKind { AnalyticalWindow, Rectangle };

const char* to_string(SurrogateKind kind);

struct SurrogateConfig {
  SurrogateKind kind = SurrogateKind::AnalyticalWindow;
  double alpha = 1.0;  // rectangle width

  bool operator==(const SurrogateConfig&) const = default;
};

// Surrogate resolved against a neuron model. Besides the derivative it
// exposes the piecewise-linear ramp whose derivative is exactly that
// surrogate; gradient checking runs the forward pass through the ramp.
class SpikeSurrogate {
 public:
  SpikeSurrogate(const SurrogateConfig& cfg, const NeuronModel& neuron);

  double derivative(double u) const noexcept;
  double ramp(double u) const noexcept;
  // -1 below the active band, 0 inside, +1 above; the ramp is smooth within each.
  int band(double u) const noexcept;

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  double height() const noexcept { return height_; }
  SurrogateKind kind() const noexcept { return kind_; }

 private:
  SurrogateKind kind_;
  double lower_;
  double upper_;
  double height_;
};

}  // namespace qifsnn
