#include <doctest.h>

#include <functional>

#include <cmath>
#include <random>

#include "qifsnn/error.hpp"
#include "qifsnn/neuron.hpp"

using namespace qifsnn;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::IoError;
}

NeuronState state(double u, double o) { return {{u}, {o}}; }

}  // namespace

TEST_CASE("default parameters") {
  const QifParams p = QifParams::defaults();
  CHECK(p.a() == 0.25);
  CHECK(p.u1() == 0.0);
  CHECK(p.u2() == 0.5);
  CHECK(p.u_r() == 0.0);
  CHECK(p.u_c() == 4.5);
  CHECK(p.u_th() == 0.5);
  CHECK(p.u_reset() == 0.0);
}

TEST_CASE("derive_u1_u2 examples") {
  auto [a1, a2] = derive_u1_u2(0.25, 0.0, 4.5);
  CHECK(a1 == 0.0);
  CHECK(a2 == 0.5);
  auto [b1, b2] = derive_u1_u2(0.25, 0.0, 4.0);
  CHECK(b1 == doctest::Approx(0.0));
  CHECK(b2 == doctest::Approx(0.0));
  auto [c1, c2] = derive_u1_u2(1.0, 0.0, 3.0);
  CHECK(c1 == doctest::Approx(0.0));
  CHECK(c2 == doctest::Approx(2.0));
  CHECK(c1 + c2 + 1.0 == doctest::Approx(3.0));
}

TEST_CASE("derive_u1_u2 errors") {
  CHECK(kind_of([] { derive_u1_u2(0.0, 0.0, 1.0); }) == ErrorKind::InvalidParams);
  CHECK(kind_of([] { derive_u1_u2(1.0, 2.0, 1.0); }) == ErrorKind::InvalidParams);
  // (u_c - u_r)^2 - 2 (u_r + u_c) / a + 1 / a^2 = 1 - 2 * 5 + 1 < 0
  CHECK(kind_of([] { derive_u1_u2(1.0, 2.0, 3.0); }) == ErrorKind::NegativeDiscriminant);
}

TEST_CASE("recover_fixed_points examples") {
  auto [r, c] = recover_fixed_points(0.25, 0.0, 0.5);
  CHECK(r == 0.0);
  CHECK(c == 4.5);
  auto [r2, c2] = recover_fixed_points(0.25, 0.0, 0.0);
  CHECK(r2 == doctest::Approx(0.0));
  CHECK(c2 == doctest::Approx(4.0));
  CHECK(kind_of([] { recover_fixed_points(1.0, -3.0, -3.0); }) == ErrorKind::NegativeDiscriminant);
}

TEST_CASE("fixed points and roots are mutual inverses") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int tested = 0;
  while (tested < 200) {
    const double a = 0.05 + 2.0 * unit(rng);
    const double ur = -2.0 + 4.0 * unit(rng);
    const double uc = ur + 0.01 + 6.0 * unit(rng);
    const double delta = (uc - ur) * (uc - ur) - 2.0 * (ur + uc) / a + 1.0 / (a * a);
    if (delta < 0.0) continue;
    ++tested;
    auto [u1, u2] = derive_u1_u2(a, ur, uc);
    CHECK(u1 <= u2);
    CHECK(u1 + u2 + 1.0 / a == doctest::Approx(ur + uc));
    CHECK(u1 * u2 == doctest::Approx(ur * uc).epsilon(1e-9).scale(1.0));
    auto [r, c] = recover_fixed_points(a, u1, u2);
    CHECK(r == doctest::Approx(ur).epsilon(1e-9).scale(1.0));
    CHECK(c == doctest::Approx(uc).epsilon(1e-9).scale(1.0));
    // zero-input fixed points of the factored map
    CHECK(a * (ur - u1) * (ur - u2) == doctest::Approx(ur).epsilon(1e-9).scale(1.0));
    CHECK(a * (uc - u1) * (uc - u2) == doctest::Approx(uc).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("qif_step examples") {
  const QifParams p = QifParams::defaults();
  CHECK(qif_step(0.0, 0.0, p) == 0.0);
  CHECK(qif_step(4.5, 0.0, p) == 4.5);
  CHECK(qif_step(0.25, 0.0, p) == -0.015625);
  CHECK(qif_step(-1.0, 0.0, p) == 0.375);
}

TEST_CASE("qif_step region behaviour") {
  const QifParams p = QifParams::defaults();
  for (double u = 0.5 + 1e-3; u <= 4.5; u += 1e-3) CHECK(qif_step(u, 0.0, p) <= u);
  for (double u = -3.0; u < 0.0; u += 1e-3) CHECK(qif_step(u, 0.0, p) > 0.0);
}

TEST_CASE("qif_update examples") {
  const QifParams p = QifParams::defaults();
  const double i1[] = {0.2};
  auto s = qif_update(state(0.6, 1.0), i1, p);
  CHECK(s.u[0] == doctest::Approx(0.2));
  CHECK(s.o[0] == 0.0);
  const double i2[] = {0.5};
  s = qif_update(state(0.4, 0.0), i2, p);
  CHECK(s.u[0] == doctest::Approx(0.49));
  CHECK(s.o[0] == 0.0);
  const double i3[] = {0.52};
  s = qif_update(state(0.4, 0.0), i3, p);
  CHECK(s.u[0] == doctest::Approx(0.51));
  CHECK(s.o[0] == 1.0);
}

TEST_CASE("spike at exactly the threshold") {
  const QifParams p = QifParams::defaults();
  const double i[] = {0.5};
  const auto s = qif_update(state(0.0, 0.0), i, p);
  CHECK(s.u[0] == 0.5);
  CHECK(s.o[0] == 1.0);
  CHECK(heaviside(0.0) == 1.0);
  CHECK(heaviside(-1e-300) == 0.0);
}

TEST_CASE("reset makes the next membrane independent of the previous one") {
  const QifParams p = QifParams::defaults();
  const LifParams l;
  const double i[] = {0.3};
  for (double u : {-2.0, 0.1, 0.7, 3.0}) {
    CHECK(qif_update(state(u, 1.0), i, p).u[0] == 0.3);
    CHECK(lif_update(state(u, 1.0), i, l).u[0] == 0.3);
  }
}

TEST_CASE("qif_update errors") {
  const QifParams p = QifParams::defaults();
  const double two[] = {0.0, 0.0};
  CHECK(kind_of([&] { qif_update(state(0.0, 0.0), two, p); }) == ErrorKind::ShapeMismatch);
  const double one[] = {0.0};
  CHECK(kind_of([&] { qif_update(state(1e200, 0.0), one, p); }) == ErrorKind::NonFiniteValue);
  CHECK(kind_of([&] { lif_update(state(0.0, 0.0), two, LifParams{}); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("lif_update examples") {
  const LifParams p{0.5, 0.5, 0.0};
  const double zero[] = {0.0};
  auto s = lif_update(state(0.0, 0.0), zero, p);
  CHECK(s.u[0] == 0.0);
  CHECK(s.o[0] == 0.0);
  const double i2[] = {0.2};
  s = lif_update(state(0.4, 0.0), i2, p);
  CHECK(s.u[0] == doctest::Approx(0.4));
  CHECK(s.o[0] == 0.0);
  const double i3[] = {0.6};
  s = lif_update(state(0.8, 1.0), i3, p);
  CHECK(s.u[0] == doctest::Approx(0.6));
  CHECK(s.o[0] == 1.0);
}

TEST_CASE("spikes are binary") {
  const QifParams p = QifParams::defaults();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  NeuronState s{std::vector<double>(256, 0.0), std::vector<double>(256, 0.0)};
  std::vector<double> in(256);
  for (int t = 0; t < 20; ++t) {
    for (double& v : in) v = n(rng);
    s = qif_update(s, in, p);
    for (double o : s.o) CHECK((o == 0.0 || o == 1.0));
  }
}

TEST_CASE("parameter validation") {
  CHECK(kind_of([] { QifParams::from_roots(-1.0, 0.0, 0.5, 0.5); }) == ErrorKind::InvalidParams);
  // threshold below the larger root
  CHECK(kind_of([] { QifParams::from_roots(0.25, 0.0, 0.5, 0.4); }) == ErrorKind::InvalidParams);
  // threshold above u_c
  CHECK(kind_of([] { QifParams::from_roots(0.25, 0.0, 0.5, 4.6); }) == ErrorKind::InvalidParams);
  // u_th = u_c is admitted
  CHECK_NOTHROW(QifParams::from_roots(0.25, 0.0, 0.5, 4.5));
  CHECK(kind_of([] { LifParams{1.0, 0.5, 0.0}.validate(); }) == ErrorKind::InvalidParams);
  CHECK(kind_of([] { LifParams{0.5, 0.0, 0.0}.validate(); }) == ErrorKind::InvalidParams);
}

TEST_CASE("neuron model recurrence") {
  NeuronModel m;
  CHECK(m.initial_membrane() == 0.0);
  CHECK(m.recurrence(0.25, 0.0) == -0.015625);
  CHECK(m.recurrence(0.25, 1.0) == 0.0);
  CHECK(m.recurrence_derivative(0.25, 0.0) == doctest::Approx(0.0));
  CHECK(m.recurrence_derivative(4.5, 0.0) == 2.125);
  CHECK(m.recurrence_derivative(4.5, 1.0) == 0.0);
  m.kind = NeuronKind::Lif;
  CHECK(m.recurrence(0.8, 0.0) == 0.4);
  CHECK(m.recurrence_derivative(0.8, 0.0) == 0.5);
}
