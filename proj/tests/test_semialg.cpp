#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "attrax/semialg.hpp"

using namespace attrax;

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

// Same point set, but routed through the Monte Carlo path.
SemialgebraicSet as_generic(const SemialgebraicSet& s) {
  return SemialgebraicSet::make_generic(s.nvars, s.inequalities, s.ball_radius);
}
}  // namespace

TEST_CASE("factories validate and regenerate") {
  const auto box = SemialgebraicSet::make_box({-1, -1}, {1, 1});
  CHECK(box.inequalities.size() == 3);
  CHECK(box.ball_radius == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  box.validate();

  const auto ann = SemialgebraicSet::make_annulus(2, 0.4, 2.0);
  CHECK(ann.inequalities.size() == 3);
  ann.validate();

  const auto ball = SemialgebraicSet::make_ball(2, 1.5);
  CHECK(ball.inequalities.size() == 1);
  ball.validate();

  CHECK_THROWS_AS(SemialgebraicSet::make_box({0}, {0}), Error);
  CHECK_THROWS_AS(SemialgebraicSet::make_annulus(2, 2.0, 0.4), Error);
  CHECK_THROWS_AS(SemialgebraicSet::make_box({-1, -1}, {1, 1}, 1.0), Error);
}

TEST_CASE("generic factory appends the bounding ball once") {
  const auto g = SemialgebraicSet::make_generic(
      2, {parse_polynomial("x1", 2)}, 3.0);
  CHECK(g.inequalities.size() == 2);
  g.validate();
  const auto g2 = SemialgebraicSet::make_generic(2, g.inequalities, 3.0);
  CHECK(g2.inequalities.size() == 2);
}

TEST_CASE("membership is exact and boundary inclusive") {
  const auto box = SemialgebraicSet::make_box({0, 0}, {1, 1});
  CHECK(box.contains(std::vector<double>{0.5, 0.5}));
  CHECK_FALSE(box.contains(std::vector<double>{1.1, 0.0}));
  CHECK(box.contains(std::vector<double>{1.0, 1.0}));

  const auto ann = SemialgebraicSet::make_annulus(2, 0.4, 2.0);
  CHECK_FALSE(ann.contains(std::vector<double>{0.0, 0.0}));
  CHECK(ann.contains(std::vector<double>{1.0, 0.0}));
  CHECK(ann.contains(std::vector<double>{0.4, 0.0}));

  CHECK_THROWS_AS(box.contains(std::vector<double>{0.5}), Error);
}

TEST_CASE("closed-form box moments") {
  const auto unit = SemialgebraicSet::make_box({0, 0}, {1, 1});
  const auto mv = moments(unit, 2);
  CHECK(mv.method == MomentVector::Method::closed_form);
  const auto basis = monomial_basis(2, 2);
  REQUIRE(mv.values.size() == basis.size());
  CHECK(mv.values[0] == doctest::Approx(1.0).epsilon(1e-15));   // volume
  CHECK(mv.values[4] == doctest::Approx(0.25).epsilon(1e-15));  // x1*x2

  const auto sym = SemialgebraicSet::make_box({-1, -1}, {1, 1});
  const auto mv2 = moments(sym, 3);
  CHECK(mv2.values[0] == doctest::Approx(4.0).epsilon(1e-12));
  const auto basis3 = monomial_basis(2, 3);
  for (std::size_t k = 0; k < mv2.values.size(); ++k) {
    const auto& e = basis3[k].exponents;
    if (e[0] % 2 == 1 || e[1] % 2 == 1) CHECK(mv2.values[k] == 0.0);
  }
}

TEST_CASE("closed-form annulus and ball moments") {
  const auto ann = SemialgebraicSet::make_annulus(2, 0.4, 2.0);
  const auto mv = moments(ann, 4);
  CHECK(mv.values[0] == doctest::Approx(3.84 * kPi).epsilon(1e-12));
  const auto basis = monomial_basis(2, 4);
  for (std::size_t k = 0; k < mv.values.size(); ++k) {
    const auto& e = basis[k].exponents;
    if (e[0] % 2 == 1 || e[1] % 2 == 1) CHECK(mv.values[k] == 0.0);
  }
  // integral of x1^2 over the annulus: pi/4 (R^4 - r^4).
  std::size_t idx_x1sq = 0;
  for (std::size_t k = 0; k < basis.size(); ++k)
    if (basis[k].exponents == std::vector<uint32_t>{2, 0}) idx_x1sq = k;
  CHECK(mv.values[idx_x1sq] ==
        doctest::Approx(kPi / 4.0 * (16.0 - 0.0256)).epsilon(1e-12));

  const auto ball = SemialgebraicSet::make_ball(2, 1.5);
  const auto mb = moments(ball, 2);
  CHECK(mb.values[0] == doctest::Approx(kPi * 2.25).epsilon(1e-12));
}

TEST_CASE("monte carlo moments agree with closed form within 3 sigma, degree 8") {
  const long long n = 1'000'000;
  for (const auto& X : {SemialgebraicSet::make_box({-1, -1}, {1, 1}),
                        SemialgebraicSet::make_annulus(2, 0.4, 2.0)}) {
    const auto exact = moments(X, 8);
    const auto mc = moments(as_generic(X), 8, n, 20240814);
    CHECK(mc.method == MomentVector::Method::monte_carlo);
    REQUIRE(mc.standard_errors.has_value());
    REQUIRE(mc.values.size() == exact.values.size());
    for (std::size_t k = 0; k < exact.values.size(); ++k) {
      const double err = std::abs(mc.values[k] - exact.values[k]);
      CHECK(err <= 3.0 * (*mc.standard_errors)[k] + 1e-12);
    }
  }
}

TEST_CASE("moments on a generic set require a sample count") {
  const auto g = SemialgebraicSet::make_generic(2, {parse_polynomial("x1", 2)}, 2.0);
  CHECK_THROWS_AS(moments(g, 2), Error);
  const auto mv = moments(g, 0, 200000, 5);
  // Half-disk of radius 2: area 2 pi.
  CHECK(mv.values[0] == doctest::Approx(2.0 * kPi).epsilon(0.02));
}

TEST_CASE("near-empty sets are detected") {
  // g = -(1 + |x|^2) is everywhere negative.
  const auto empty = SemialgebraicSet::make_generic(
      2, {parse_polynomial("0 - 1 - x1^2 - x2^2", 2)}, 1.0);
  CHECK_THROWS_AS(moments(empty, 2, 10000, 3), Error);
  CHECK_THROWS_AS(empty.sample(5, 3), Error);
}

TEST_CASE("sampling stays inside the set and is deterministic") {
  const auto box = SemialgebraicSet::make_box({0, 0}, {1, 1});
  const auto pts = box.sample(3, 7);
  REQUIRE(pts.size() == 3);
  for (const auto& p : pts) CHECK(box.contains(p));

  const auto again = box.sample(3, 7);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i][0] == again[i][0]);
    CHECK(pts[i][1] == again[i][1]);
  }

  const auto ann = SemialgebraicSet::make_annulus(2, 0.4, 2.0);
  const auto apts = ann.sample(10000, 99);
  double mean_r = 0.0;
  for (const auto& p : apts) {
    CHECK(ann.contains(p));
    mean_r += std::hypot(p[0], p[1]);
  }
  mean_r /= static_cast<double>(apts.size());
  // Uniform-annulus mean radius (2/3)(R^3 - r^3)/(R^2 - r^2) = 1.37778,
  // radial sd 0.4263 so a 3 sigma band at n = 1e4 is +-0.0128.
  CHECK(mean_r > 1.0);
  CHECK(mean_r < 1.6);
  CHECK(std::abs(mean_r - 1.377777777777778) < 0.0128);
}
