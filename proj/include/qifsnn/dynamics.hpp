#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qifsnn/neuron.hpp"

namespace qifsnn {

// Zero-input analysis of the QIF recurrence u -> a (u - u1) (u - u2).

enum class Stability { Stable, Unstable, Inconclusive };
enum class Region { Green, Blue, Red };
enum class Termination { Converged, MaxSteps, Diverged };

const char* to_string(Stability s);
const char* to_string(Region r);
const char* to_string(Termination t);

struct StabilityVerdict {
  double fixed_point;
  double derivative;
  Stability label;
};

struct TrajectoryPoint {
  std::size_t step;
  double u;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  Termination terminated;
};

struct TrajectoryOptions {
  std::size_t max_steps = 1000;
  double conv_tol = 1e-9;
  double div_bound = 1e3;

  bool operator==(const TrajectoryOptions&) const = default;
};

struct PhaseSample {
  double u;
  double delta;
};

inline constexpr double kInconclusiveBand = 1e-9;

// g(u) = du(t+1)/du(t) = 2 a u - a (u1 + u2).
double stability_derivative(double u, const QifParams& p) noexcept;

// One verdict per distinct fixed point (u_r, u_c), ascending.
std::vector<StabilityVerdict> classify_fixed_points(const QifParams& p,
                                                    double tol = kInconclusiveBand);

// Green: u > max(u1, u2); Blue: closed interval between the roots; Red: below.
Region classify_region(double u, const QifParams& p) noexcept;

// Smallest value the zero-input map can produce: -a (u1 - u2)^2 / 4.
double u_min(const QifParams& p) noexcept;

Trajectory cobweb_trajectory(double u0, const QifParams& p, const TrajectoryOptions& opts = {});

std::vector<PhaseSample> phase_portrait_samples(std::span<const double> grid, const QifParams& p);

// CSV renderings with fixed headers: "step,u,u_next" and "u,delta".
std::string cobweb_csv(const Trajectory& trajectory, const QifParams& p);
std::string phase_csv(std::span<const PhaseSample> samples);

}  // namespace qifsnn
