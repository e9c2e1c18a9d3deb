#pragma once

#include <span>
#include <utility>
#include <vector>

namespace qifsnn {

// Parameters of the discrete quadratic integrate-and-fire neuron
//
//   u(t+1) = a (u(t) - u1) (u(t) - u2) (1 - o(t)) + u_reset o(t) + I(t)
//
// The factored roots (u1, u2) and the fixed points (u_r, u_c) of the
// continuous-time model are two views of the same quadratic; instances are
// always built through one of the factories so both views stay consistent.
class QifParams {
 public:
  // a = 0.25, u1 = 0, u2 = 0.5, u_th = 0.5, u_reset = 0 (u_r = 0, u_c = 4.5).
  static QifParams defaults();
  static QifParams from_roots(double a, double u1, double u2, double u_th, double u_reset = 0.0);
  static QifParams from_fixed_points(double a, double u_r, double u_c, double u_th,
                                     double u_reset = 0.0);

  double a() const noexcept { return a_; }
  double u_r() const noexcept { return u_r_; }
  double u_c() const noexcept { return u_c_; }
  double u1() const noexcept { return u1_; }
  double u2() const noexcept { return u2_; }
  double u_th() const noexcept { return u_th_; }
  double u_reset() const noexcept { return u_reset_; }

  bool operator==(const QifParams&) const = default;

 private:
  QifParams(double a, double u_r, double u_c, double u1, double u2, double u_th, double u_reset);
  void validate() const;

  double a_, u_r_, u_c_, u1_, u2_, u_th_, u_reset_;
};

struct LifParams {
  double beta = 0.5;
  double u_th = 0.5;
  double u_reset = 0.0;

  // Throws InvalidParams unless 0 < beta < 1 and u_th > 0.
  void validate() const;
  bool operator==(const LifParams&) const = default;
};

enum class NeuronKind { Qif, Lif };

const char* to_string(NeuronKind kind);

// Neuron choice for a spiking layer. Only the parameters of `kind` are used.
struct NeuronModel {
  NeuronKind kind = NeuronKind::Qif;
  QifParams qif = QifParams::defaults();
  LifParams lif{};

  double threshold() const noexcept { return kind == NeuronKind::Qif ? qif.u_th() : lif.u_th; }
  double reset_value() const noexcept {
    return kind == NeuronKind::Qif ? qif.u_reset() : lif.u_reset;
  }
  // Membrane value the recurrence starts from before the first timestep.
  double initial_membrane() const noexcept { return kind == NeuronKind::Qif ? qif.u_r() : 0.0; }

  // Membrane update without the input term, given the previous spike.
  double recurrence(double u, double o) const noexcept;
  // d recurrence / du with the reset gate held constant.
  double recurrence_derivative(double u, double o) const noexcept;

  bool operator==(const NeuronModel&) const = default;
};

struct NeuronState {
  std::vector<double> u;
  std::vector<double> o;
};

// Heaviside step with H(0) = 1.
constexpr double heaviside(double x) noexcept { return x < 0.0 ? 0.0 : 1.0; }

// Roots of the factored recurrence, minus branch first (u1 <= u2).
std::pair<double, double> derive_u1_u2(double a, double u_r, double u_c);

// Inverse of derive_u1_u2: roots of x^2 - (u1 + u2 + 1/a) x + u1 u2, ascending.
std::pair<double, double> recover_fixed_points(double a, double u1, double u2);

// a (u - u1) (u - u2) + i, with no spike or reset logic.
double qif_step(double u, double i, const QifParams& p) noexcept;

NeuronState qif_update(const NeuronState& state, std::span<const double> input, const QifParams& p);
NeuronState lif_update(const NeuronState& state, std::span<const double> input, const LifParams& p);

}  // namespace qifsnn
