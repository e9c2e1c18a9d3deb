#include "qifsnn/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qifsnn/error.hpp"

namespace qifsnn {

namespace {

// Slack for comparisons between derived quantities (u_c from 1/a + u2 etc.).
bool leq(double x, double y) { return x <= y + 1e-12 * std::max({1.0, std::fabs(x), std::fabs(y)}); }

void require_conformable(const NeuronState& state, std::span<const double> input) {
  if (state.u.size() != state.o.size() || state.u.size() != input.size()) {
    std::ostringstream msg;
    msg << "neuron state (u=" << state.u.size() << ", o=" << state.o.size() << ") and input ("
        << input.size() << ") are not conformable";
    throw Error(ErrorKind::ShapeMismatch, msg.str());
  }
}

}  // namespace

const char* to_string(NeuronKind kind) { return kind == NeuronKind::Qif ? "qif" : "lif"; }

QifParams::QifParams(double a, double u_r, double u_c, double u1, double u2, double u_th,
                     double u_reset)
    : a_(a), u_r_(u_r), u_c_(u_c), u1_(u1), u2_(u2), u_th_(u_th), u_reset_(u_reset) {
  validate();
}

QifParams QifParams::defaults() { return from_roots(0.25, 0.0, 0.5, 0.5, 0.0); }

QifParams QifParams::from_roots(double a, double u1, double u2, double u_th, double u_reset) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw Error(ErrorKind::InvalidParams, "QIF sharpness a must be positive and finite");
  }
  auto [u_r, u_c] = recover_fixed_points(a, u1, u2);
  return QifParams(a, u_r, u_c, u1, u2, u_th, u_reset);
}

QifParams QifParams::from_fixed_points(double a, double u_r, double u_c, double u_th,
                                       double u_reset) {
  auto [u1, u2] = derive_u1_u2(a, u_r, u_c);
  return QifParams(a, u_r, u_c, u1, u2, u_th, u_reset);
}

void QifParams::validate() const {
  for (double v : {a_, u_r_, u_c_, u1_, u2_, u_th_, u_reset_}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidParams, "QIF parameters must be finite");
  }
  if (!(a_ > 0.0)) throw Error(ErrorKind::InvalidParams, "QIF sharpness a must be positive");
  if (!(u_r_ < u_c_)) {
    throw Error(ErrorKind::InvalidParams, "QIF resting potential must be below the critical one");
  }
  if (!leq(std::max(u1_, u2_), u_th_) || !leq(u_th_, u_c_)) {
    std::ostringstream msg;
    msg << "threshold " << u_th_ << " outside [max(u1, u2), u_c] = [" << std::max(u1_, u2_) << ", "
        << u_c_ << "]";
    throw Error(ErrorKind::InvalidParams, msg.str());
  }
}

void LifParams::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorKind::InvalidParams, "LIF decay beta must lie in (0, 1)");
  }
  if (!(u_th > 0.0) || !std::isfinite(u_th)) {
    throw Error(ErrorKind::InvalidParams, "LIF threshold must be positive");
  }
}

double NeuronModel::recurrence(double u, double o) const noexcept {
  if (kind == NeuronKind::Qif) {
    return qif_step(u, 0.0, qif) * (1.0 - o) + qif.u_reset() * o;
  }
  return lif.beta * u * (1.0 - o) + lif.u_reset * o;
}

double NeuronModel::recurrence_derivative(double u, double o) const noexcept {
  if (kind == NeuronKind::Qif) {
    return (2.0 * qif.a() * u - qif.a() * (qif.u1() + qif.u2())) * (1.0 - o);
  }
  return lif.beta * (1.0 - o);
}

std::pair<double, double> derive_u1_u2(double a, double u_r, double u_c) {
  if (!(a > 0.0)) throw Error(ErrorKind::InvalidParams, "a must be positive");
  if (!(u_r < u_c)) throw Error(ErrorKind::InvalidParams, "u_r must be below u_c");
  const double inv_a = 1.0 / a;
  const double delta = (u_c - u_r) * (u_c - u_r) - 2.0 * (u_r + u_c) * inv_a + inv_a * inv_a;
  if (delta < 0.0) {
    std::ostringstream msg;
    msg << "discriminant " << delta << " < 0 for a=" << a << ", u_r=" << u_r << ", u_c=" << u_c;
    throw Error(ErrorKind::NegativeDiscriminant, msg.str());
  }
  const double centre = 0.5 * ((u_r + u_c) - inv_a);
  const double half_width = 0.5 * std::sqrt(delta);
  return {centre - half_width, centre + half_width};
}

std::pair<double, double> recover_fixed_points(double a, double u1, double u2) {
  if (!(a > 0.0)) throw Error(ErrorKind::InvalidParams, "a must be positive");
  const double sum = u1 + u2 + 1.0 / a;
  const double product = u1 * u2;
  const double disc = sum * sum - 4.0 * product;
  if (disc < 0.0) {
    throw Error(ErrorKind::NegativeDiscriminant, "fixed-point quadratic has complex roots");
  }
  // Cancellation-free form of the quadratic formula.
  const double q = 0.5 * (sum + std::copysign(std::sqrt(disc), sum));
  if (q == 0.0) return {0.0, 0.0};
  double r1 = q;
  double r2 = product / q;
  if (r1 > r2) std::swap(r1, r2);
  return {r1, r2};
}

double qif_step(double u, double i, const QifParams& p) noexcept {
  return p.a() * (u - p.u1()) * (u - p.u2()) + i;
}

NeuronState qif_update(const NeuronState& state, std::span<const double> input, const QifParams& p) {
  require_conformable(state, input);
  NeuronState next{std::vector<double>(input.size()), std::vector<double>(input.size())};
  for (std::size_t n = 0; n < input.size(); ++n) {
    const double o = state.o[n];
    const double f = qif_step(state.u[n], 0.0, p);
    const double u = f * (1.0 - o) + p.u_reset() * o + input[n];
    if (!std::isfinite(u)) {
      throw Error(ErrorKind::NonFiniteValue, "QIF membrane diverged at neuron " + std::to_string(n));
    }
    next.u[n] = u;
    next.o[n] = heaviside(u - p.u_th());
  }
  return next;
}

NeuronState lif_update(const NeuronState& state, std::span<const double> input, const LifParams& p) {
  require_conformable(state, input);
  NeuronState next{std::vector<double>(input.size()), std::vector<double>(input.size())};
  for (std::size_t n = 0; n < input.size(); ++n) {
    const double o = state.o[n];
    const double u = p.beta * state.u[n] * (1.0 - o) + p.u_reset * o + input[n];
    next.u[n] = u;
    next.o[n] = heaviside(u - p.u_th);
  }
  return next;
}

}  // namespace qifsnn
