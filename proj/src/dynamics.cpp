#include "qifsnn/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "qifsnn/error.hpp"
#include "qifsnn/io.hpp"

namespace qifsnn {

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "Stable";
    case Stability::Unstable: return "Unstable";
    case Stability::Inconclusive: return "Inconclusive";
  }
  return "?";
}

const char* to_string(Region r) {
  switch (r) {
    case Region::Green: return "Green";
    case Region::Blue: return "Blue";
    case Region::Red: return "Red";
  }
  return "?";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::MaxSteps: return "MaxSteps";
    case Termination::Diverged: return "Diverged";
  }
  return "?";
}

double stability_derivative(double u, const QifParams& p) noexcept {
  return 2.0 * p.a() * u - p.a() * (p.u1() + p.u2());
}

std::vector<StabilityVerdict> classify_fixed_points(const QifParams& p, double tol) {
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidParams, "stability tolerance must be positive");
  std::vector<double> points{p.u_r()};
  if (p.u_c() != p.u_r()) points.push_back(p.u_c());

  std::vector<StabilityVerdict> verdicts;
  for (double fp : points) {
    const double g = stability_derivative(fp, p);
    const double magnitude = std::fabs(g);
    Stability label = Stability::Inconclusive;
    if (magnitude < 1.0 - tol) {
      label = Stability::Stable;
    } else if (magnitude > 1.0 + tol) {
      label = Stability::Unstable;
    }
    verdicts.push_back({fp, g, label});
  }
  return verdicts;
}

Region classify_region(double u, const QifParams& p) noexcept {
  const double lo = std::min(p.u1(), p.u2());
  const double hi = std::max(p.u1(), p.u2());
  if (u > hi) return Region::Green;
  if (u < lo) return Region::Red;
  return Region::Blue;
}

double u_min(const QifParams& p) noexcept {
  const double gap = p.u1() - p.u2();
  return -p.a() * gap * gap / 4.0;
}

Trajectory cobweb_trajectory(double u0, const QifParams& p, const TrajectoryOptions& opts) {
  if (opts.max_steps < 1) throw Error(ErrorKind::InvalidParams, "max_steps must be >= 1");
  if (!(opts.conv_tol > 0.0)) throw Error(ErrorKind::InvalidParams, "conv_tol must be positive");
  if (!(opts.div_bound > p.u_c())) {
    throw Error(ErrorKind::InvalidParams, "div_bound must exceed the critical fixed point");
  }

  Trajectory traj{{{0, u0}}, Termination::MaxSteps};
  double u = u0;
  if (!(std::fabs(u) <= opts.div_bound)) {
    traj.terminated = Termination::Diverged;
    return traj;
  }
  for (std::size_t k = 1; k <= opts.max_steps; ++k) {
    const double next = qif_step(u, 0.0, p);
    traj.points.push_back({k, next});
    if (!(std::fabs(next) <= opts.div_bound)) {
      traj.terminated = Termination::Diverged;
      return traj;
    }
    if (std::fabs(next - u) < opts.conv_tol) {
      traj.terminated = Termination::Converged;
      return traj;
    }
    u = next;
  }
  return traj;
}

std::vector<PhaseSample> phase_portrait_samples(std::span<const double> grid, const QifParams& p) {
  if (grid.empty()) throw Error(ErrorKind::InvalidParams, "phase-portrait grid is empty");
  std::vector<PhaseSample> out;
  out.reserve(grid.size());
  for (double u : grid) out.push_back({u, qif_step(u, 0.0, p) - u});
  return out;
}

std::string cobweb_csv(const Trajectory& trajectory, const QifParams& p) {
  CsvWriter csv({"step", "u", "u_next"});
  for (const auto& pt : trajectory.points) {
    csv.row(pt.step, pt.u, qif_step(pt.u, 0.0, p));
  }
  return csv.str();
}

std::string phase_csv(std::span<const PhaseSample> samples) {
  CsvWriter csv({"u", "delta"});
  for (const auto& s : samples) csv.row(s.u, s.delta);
  return csv.str();
}

}  // namespace qifsnn
