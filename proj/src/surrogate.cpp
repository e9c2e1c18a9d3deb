#include "qifsnn/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "qifsnn/error.hpp"
#include "qifsnn/rng.hpp"

namespace qifsnn {

namespace {

constexpr std::size_t kChunk = std::size_t{1} << 16;

struct Sampler {
  double a, u1, u2, u_th;

  template <typename F>
  void chunk(std::uint64_t seed, std::size_t index, std::size_t count, F&& consume) const {
    auto rng = make_rng(seed, "monte-carlo", index);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t k = 0; k < count; ++k) {
      const double prev = u_th * normal(rng);
      const double now = u_th * normal(rng);
      consume(a * (prev - u1) * (prev - u2) + now);
    }
  }
};

// Runs body(chunk_index) for every chunk, spreading chunks over threads.
// Results are stored per chunk, so the caller reduces in a fixed order.
template <typename Body>
void for_each_chunk(std::size_t chunks, unsigned threads, Body body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t c = t; c < chunks; c += threads) body(c);
    });
  }
}

}  // namespace

MembraneMoments theorem1_stats(double a, double u1, double u2, double u_th) noexcept {
  const double th2 = u_th * u_th;
  const double f = th2 + u1 * u2;
  const double h = 1.0 + a * a * (2.0 * th2 + (u1 + u2) * (u1 + u2));
  return {a * f, th2 * h};
}

MembraneMoments theorem1_stats(const QifParams& p) noexcept {
  return theorem1_stats(p.a(), p.u1(), p.u2(), p.u_th());
}

SurrogateWindow qif_window(double a, double u1, double u2, double u_th) noexcept {
  const auto m = theorem1_stats(a, u1, u2, u_th);
  return {m.mean, std::sqrt(m.variance)};
}

SurrogateWindow qif_window(const QifParams& p) noexcept {
  return qif_window(p.a(), p.u1(), p.u2(), p.u_th());
}

double qif_surrogate_derivative(double u, const SurrogateWindow& w) noexcept {
  return (u >= w.lower() && u <= w.upper()) ? 1.0 : 0.0;
}

double rectangle_surrogate(double u, const RectangleSgConfig& cfg) noexcept {
  return std::fabs(u - cfg.u_th) < cfg.alpha / 2.0 ? 1.0 / cfg.alpha : 0.0;
}

MonteCarloStats monte_carlo_stats(double a, double u1, double u2, double u_th, std::size_t n,
                                  std::uint64_t seed, unsigned threads) {
  if (n < 1) throw Error(ErrorKind::InvalidParams, "Monte Carlo needs at least one sample");
  const Sampler sampler{a, u1, u2, u_th};
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  auto chunk_size = [&](std::size_t c) { return std::min(kChunk, n - c * kChunk); };

  // Two passes over regenerated samples: mean first, then central moments.
  std::vector<double> sums(chunks, 0.0);
  for_each_chunk(chunks, threads, [&](std::size_t c) {
    double s = 0.0;
    sampler.chunk(seed, c, chunk_size(c), [&](double x) { s += x; });
    sums[c] = s;
  });
  double total = 0.0;
  for (double s : sums) total += s;
  const double mean = total / static_cast<double>(n);

  std::vector<double> m2(chunks, 0.0), m4(chunks, 0.0);
  for_each_chunk(chunks, threads, [&](std::size_t c) {
    double s2 = 0.0, s4 = 0.0;
    sampler.chunk(seed, c, chunk_size(c), [&](double x) {
      const double d = (x - mean) * (x - mean);
      s2 += d;
      s4 += d * d;
    });
    m2[c] = s2;
    m4[c] = s4;
  });
  double sum2 = 0.0, sum4 = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    sum2 += m2[c];
    sum4 += m4[c];
  }

  const double nd = static_cast<double>(n);
  MonteCarloStats out;
  out.n = n;
  out.mean = mean;
  out.variance = n > 1 ? sum2 / (nd - 1.0) : 0.0;
  const double pop_var = sum2 / nd;
  const double fourth = sum4 / nd;
  out.se_mean = std::sqrt(pop_var / nd);
  out.se_variance = std::sqrt(std::max(0.0, fourth - pop_var * pop_var) / nd);
  return out;
}

MonteCarloStats monte_carlo_stats(const QifParams& p, std::size_t n, std::uint64_t seed,
                                  unsigned threads) {
  return monte_carlo_stats(p.a(), p.u1(), p.u2(), p.u_th(), n, seed, threads);
}

const char* to_string(SurrogateKind kind) {
  return kind == SurrogateKind::AnalyticalWindow ? "window" : "rectangle";
}

SpikeSurrogate::SpikeSurrogate(const SurrogateConfig& cfg, const NeuronModel& neuron)
    : kind_(cfg.kind) {
  if (cfg.kind == SurrogateKind::AnalyticalWindow) {
    if (neuron.kind != NeuronKind::Qif) {
      throw Error(ErrorKind::InvalidParams,
                  "the analytical window is defined for QIF neurons; use the rectangle surrogate");
    }
    const auto w = qif_window(neuron.qif);
    lower_ = w.lower();
    upper_ = w.upper();
    height_ = 1.0;
  } else {
    if (!(cfg.alpha > 0.0)) throw Error(ErrorKind::InvalidParams, "rectangle alpha must be positive");
    const double th = neuron.threshold();
    lower_ = th - cfg.alpha / 2.0;
    upper_ = th + cfg.alpha / 2.0;
    height_ = 1.0 / cfg.alpha;
  }
}

double SpikeSurrogate::derivative(double u) const noexcept {
  if (kind_ == SurrogateKind::AnalyticalWindow) {
    return (u >= lower_ && u <= upper_) ? height_ : 0.0;
  }
  return (u > lower_ && u < upper_) ? height_ : 0.0;
}

double SpikeSurrogate::ramp(double u) const noexcept {
  return height_ * std::clamp(u - lower_, 0.0, upper_ - lower_);
}

int SpikeSurrogate::band(double u) const noexcept {
  if (u < lower_) return -1;
  if (u > upper_) return 1;
  return 0;
}

}  // namespace qifsnn
