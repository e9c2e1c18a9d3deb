#include <doctest.h>

#include <cmath>

#include "qifsnn/dynamics.hpp"
#include "qifsnn/error.hpp"

using namespace qifsnn;

TEST_CASE("stability derivative examples") {
  const QifParams p = QifParams::defaults();
  CHECK(stability_derivative(0.0, p) == -0.125);
  CHECK(stability_derivative(4.5, p) == 2.125);
  CHECK(stability_derivative(2.25, p) == 1.0);
}

TEST_CASE("classify_fixed_points default") {
  const auto v = classify_fixed_points(QifParams::defaults());
  REQUIRE(v.size() == 2);
  CHECK(v[0].fixed_point == 0.0);
  CHECK(v[0].derivative == -0.125);
  CHECK(v[0].label == Stability::Stable);
  CHECK(v[1].fixed_point == 4.5);
  CHECK(v[1].derivative == 2.125);
  CHECK(v[1].label == Stability::Unstable);
}

TEST_CASE("classify_fixed_points with a double root of the factored map") {
  // u_r = 0, u_c = 4 gives u1 = u2 = 0, so g(u) = u / 2.
  const QifParams p = QifParams::from_fixed_points(0.25, 0.0, 4.0, 0.0);
  const auto v = classify_fixed_points(p);
  REQUIRE(v.size() == 2);
  CHECK(v[0].derivative == doctest::Approx(2 * 0.25 * 0.0 - 0.25 * (p.u1() + p.u2())));
  CHECK(v[1].derivative == doctest::Approx(2.0));
  CHECK(v[0].label == Stability::Stable);
  CHECK(v[1].label == Stability::Unstable);
}

TEST_CASE("inconclusive band") {
  // g(u_r) = 1 - a (u_c - u_r) = -1 for a = 0.5, u_r = 0, u_c = 4
  const QifParams p = QifParams::from_fixed_points(0.5, 0.0, 4.0, 2.0);
  const auto v = classify_fixed_points(p);
  CHECK(v[0].derivative == -1.0);
  CHECK(v[0].label == Stability::Inconclusive);
  CHECK(v[1].label == Stability::Unstable);

  const auto wide = classify_fixed_points(QifParams::defaults(), 1.2);
  CHECK(wide[0].label == Stability::Inconclusive);
  CHECK(wide[1].label == Stability::Inconclusive);
  CHECK_THROWS_AS(classify_fixed_points(QifParams::defaults(), 0.0), Error);
}

TEST_CASE("regions") {
  const QifParams p = QifParams::defaults();
  CHECK(classify_region(1.0, p) == Region::Green);
  CHECK(classify_region(0.25, p) == Region::Blue);
  CHECK(classify_region(-0.1, p) == Region::Red);
  CHECK(classify_region(0.0, p) == Region::Blue);
  CHECK(classify_region(0.5, p) == Region::Blue);
  CHECK(classify_region(std::nextafter(0.5, 1.0), p) == Region::Green);
  CHECK(classify_region(std::nextafter(0.0, -1.0), p) == Region::Red);
}

TEST_CASE("regions partition a dense grid") {
  const QifParams p = QifParams::defaults();
  for (int i = -2000; i <= 6000; ++i) {
    const double u = i * 1e-3;
    const Region r = classify_region(u, p);
    const int hits = (u > 0.5) + (u >= 0.0 && u <= 0.5) + (u < 0.0);
    CHECK(hits == 1);
    CHECK(r == (u > 0.5 ? Region::Green : u < 0.0 ? Region::Red : Region::Blue));
  }
}

TEST_CASE("u_min examples") {
  CHECK(u_min(QifParams::defaults()) == -0.015625);
  CHECK(u_min(QifParams::from_roots(0.25, 0.3, 0.3, 0.3)) == 0.0);
  CHECK(u_min(QifParams::from_roots(1.0, 0.0, 2.0, 2.0)) == -1.0);
}

TEST_CASE("u_min matches a brute-force grid over the blue interval") {
  const QifParams p = QifParams::from_roots(0.4, -0.3, 0.6, 0.7);
  double lo = 1e300;
  for (int i = 0; i <= 100000; ++i) lo = std::min(lo, qif_step(-0.3 + 0.9 * i / 100000.0, 0.0, p));
  CHECK(lo == doctest::Approx(u_min(p)).epsilon(1e-6));
}

TEST_CASE("cobweb trajectories") {
  const QifParams p = QifParams::defaults();
  const Trajectory a = cobweb_trajectory(0.3, p);
  CHECK(a.terminated == Termination::Converged);
  CHECK(std::fabs(a.points.back().u) < 1e-8);
  CHECK(std::fabs(a.points[3].u) < std::fabs(a.points[0].u));

  const Trajectory b = cobweb_trajectory(4.5, p);
  CHECK(b.terminated == Termination::Converged);
  for (const auto& pt : b.points) CHECK(pt.u == 4.5);

  const Trajectory c = cobweb_trajectory(4.6, p, {1000, 1e-9, 100.0});
  CHECK(c.terminated == Termination::Diverged);
  CHECK(c.points[1].u == doctest::Approx(4.715));

  const Trajectory d = cobweb_trajectory(0.3, p, {2, 1e-30, 1e3});
  CHECK(d.terminated == Termination::MaxSteps);
  CHECK(d.points.size() == 3);

  for (const Trajectory* t : {&a, &c}) {
    for (std::size_t k = 1; k < t->points.size(); ++k) {
      CHECK(t->points[k].step == t->points[k - 1].step + 1);
      CHECK(t->points[k].u == qif_step(t->points[k - 1].u, 0.0, p));
    }
  }
}

TEST_CASE("cobweb option validation") {
  const QifParams p = QifParams::defaults();
  CHECK_THROWS_AS(cobweb_trajectory(0.0, p, {0, 1e-9, 1e3}), Error);
  CHECK_THROWS_AS(cobweb_trajectory(0.0, p, {10, 0.0, 1e3}), Error);
  CHECK_THROWS_AS(cobweb_trajectory(0.0, p, {10, 1e-9, 4.0}), Error);
}

TEST_CASE("basins of the default map") {
  const QifParams p = QifParams::defaults();
  for (double u0 = -0.4; u0 <= 0.4 + 1e-12; u0 += 0.01) {
    double u = u0;
    int k = 0;
    while (std::fabs(u) >= 1e-6 && k < 50) {
      u = qif_step(u, 0.0, p);
      ++k;
    }
    CHECK(std::fabs(u) < 1e-6);
  }
  for (double u0 : {4.5 + 1e-6, 4.6, 5.0}) {
    const Trajectory t = cobweb_trajectory(u0, p);
    for (std::size_t k = 1; k < t.points.size(); ++k) CHECK(t.points[k].u > t.points[k - 1].u);
  }
}

TEST_CASE("phase portrait") {
  const QifParams p = QifParams::defaults();
  const double grid[] = {0.0, -1.0, 2.0, 4.5};
  const auto s = phase_portrait_samples(grid, p);
  REQUIRE(s.size() == 4);
  CHECK(s[0].delta == 0.0);
  CHECK(s[1].delta == 1.375);
  CHECK(s[2].delta == -1.25);
  CHECK(s[3].delta == 0.0);
  CHECK_THROWS_AS(phase_portrait_samples(std::span<const double>{}, p), Error);
}

TEST_CASE("csv renderings") {
  const QifParams p = QifParams::defaults();
  const std::string c = cobweb_csv(cobweb_trajectory(4.5, p), p);
  CHECK(c.rfind("step,u,u_next\n0,4.5,4.5\n", 0) == 0);
  const double grid[] = {0.0};
  CHECK(phase_csv(phase_portrait_samples(grid, p)) == "u,delta\n0,0\n");
}
