#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "attrax/attractor.hpp"
#include "attrax/rng.hpp"

using namespace attrax;

namespace {

DynamicalSystem van_der_pol() {
  return DynamicalSystem::make_continuous(PolynomialMap(
      2, {parse_polynomial("2*x2", 2),
          parse_polynomial("-0.8*x1 - 10*(x1^2 - 0.21)*x2", 2)}));
}

DynamicalSystem henon() {
  const double c = 2.0 / 3.0;
  Polynomial f1 = Polynomial::constant(2, c) + Polynomial::variable(2, 2) * c -
                  parse_polynomial("2.1*x1^2", 2);
  Polynomial f2 = Polynomial::variable(2, 1) * 0.45;
  return DynamicalSystem::make_discrete(PolynomialMap(2, {f1, f2}));
}

DynamicalSystem radial_decay() {
  return DynamicalSystem::make_continuous(
      PolynomialMap(2, {parse_polynomial("-x1", 2), parse_polynomial("-x2", 2)}));
}

Certificate hand_certificate(double epsilon, SystemKind kind = SystemKind::continuous) {
  Certificate cert;
  cert.nvars = 2;
  cert.kind = kind;
  cert.w = Polynomial::constant(2, 1.0);
  cert.J = parse_polynomial("x1^2 + x2^2", 2);
  cert.v = Polynomial::constant(2, 1.0);
  cert.epsilon = epsilon;
  cert.params.k = 2;
  if (kind == SystemKind::continuous) cert.params.beta = 0.5;
  cert.X = SemialgebraicSet::make_box({-1, -1}, {1, 1});
  cert.solver_status = SolveStatus::optimal;
  return cert;
}

double recompute_objective(const Certificate& cert) {
  const auto mom = moments(cert.X, cert.params.k);
  const auto basis = monomial_basis(cert.nvars, cert.params.k);
  double acc = 0.0;
  for (std::size_t a = 0; a < basis.size(); ++a)
    acc += cert.w.coefficient(basis[a]) * mom.values[a];
  return acc + cert.epsilon * mom.values[0];
}

void check_residuals_nonneg(const Certificate& cert, const DynamicalSystem& sys,
                            int n_samples, uint64_t seed) {
  const auto cs = constraint_polynomials(cert, sys);
  const auto pts = cert.X.sample(n_samples, seed);
  for (const auto& c : cs) {
    const double slack = 1e-6 * (1.0 + c.max_abs_coefficient());
    double worst = 0.0;
    for (const auto& p : pts) worst = std::min(worst, c.evaluate(p));
    CHECK(worst >= -slack);
  }
}

}  // namespace

TEST_CASE("continuous program layout for the van der pol setup") {
  const auto sys = van_der_pol();
  const auto X = SemialgebraicSet::make_annulus(2, 0.4, 2.0);
  SolveParams params;
  params.k = 12;
  params.beta = 0.2;

  SosProgram prog = build_continuous(sys, X, params);
  CHECK(prog.num_constraints() == 5);
  CHECK(prog.free_columns() == 3 * 91);
  CHECK(prog.scalar_columns() == 1);
  for (int id = 0; id < 5; ++id) CHECK(prog.gram_sides(id).size() == 4);

  // Static constraints live at budget 12, dynamic ones at 14 (deg f = 3).
  CHECK(prog.gram_sides(0) == std::vector<int>{28, 21, 21, 21});
  CHECK(prog.gram_sides(3) == std::vector<int>{36, 28, 28, 28});
  CHECK(prog.gram_sides(4) == std::vector<int>{36, 28, 28, 28});

  auto problem = prog.to_conic();
  problem.check_well_formed();
  CHECK(prog.constraint_rows(0).second == 91);
  CHECK(prog.constraint_rows(3).second == 120);
}

TEST_CASE("hand certificate satisfies the linear constraints") {
  const auto sys = radial_decay();
  const auto ball = SemialgebraicSet::make_ball(2, 1.0);

  SolveParams params;
  params.k = 2;
  params.beta = 0.5;
  SosProgram prog = build_continuous(sys, ball, params);
  CHECK(prog.num_constraints() == 5);

  Certificate cert;
  cert.nvars = 2;
  cert.kind = SystemKind::continuous;
  cert.w = Polynomial::constant(2, 1.0);
  cert.J = parse_polynomial("x1^2 + x2^2", 2);
  cert.v = Polynomial(2);
  cert.epsilon = 0.0;
  cert.params = params;
  cert.X = ball;

  const auto cs = constraint_polynomials(cert, sys);
  REQUIRE(cs.size() == 5);
  // grad(J).f = -2J, so the decay constraint collapses to J itself.
  CHECK(cs[0] == cert.J);
  CHECK(cs[1] == cert.w);
  CHECK(cs[2] == cert.J);
  CHECK(cs[3] == cert.J);
  CHECK(cs[4].is_zero());
  for (const auto& p : ball.sample(200, 7))
    for (const auto& c : cs) CHECK(c.evaluate(p) >= 0.0);
}

TEST_CASE("radial solve produces a certificate containing the origin") {
  const auto sys = radial_decay();
  const auto ball = SemialgebraicSet::make_ball(2, 1.0);
  SolveParams params;
  params.k = 4;
  params.beta = 0.5;

  // The optimal epsilon here is exactly zero, so the sublevel set only has
  // room for the origin once the solve is pushed well past the defaults.
  SolverSettings tightset;
  tightset.feas_tol = 1e-8;
  tightset.gap_tol = 1e-8;
  const Certificate cert = solve_attractor(sys, ball, params, tightset);
  CHECK(cert.solver_status == SolveStatus::optimal);
  CHECK(cert.epsilon >= 0.0);
  CHECK(cert.d_k >= 0.0);

  const std::vector<double> origin{0.0, 0.0};
  CHECK(member(cert, origin));

  const double recomputed = recompute_objective(cert);
  CHECK(std::abs(recomputed - cert.d_k) <= 1e-8 * (1.0 + std::abs(cert.d_k)));

  check_residuals_nonneg(cert, sys, 2000, 42);

  // A starved iteration budget is a failure, not a certificate.
  SolverSettings starved;
  starved.max_iterations = 1;
  CHECK_THROWS_AS(solve_attractor(sys, ball, params, starved), Error);
}

TEST_CASE("membership geometry of the sublevel set") {
  const Certificate cert = hand_certificate(0.25);

  CHECK(member(cert, std::vector<double>{0.0, 0.0}));
  CHECK_FALSE(member(cert, std::vector<double>{1.0, 1.0}));
  // Boundary J = epsilon is inside.
  CHECK(member(cert, std::vector<double>{0.5, 0.0}));
  // Points outside X are excluded no matter how small J is.
  CHECK_FALSE(member(cert, std::vector<double>{1.5, 0.0},
                     std::optional<double>{100.0}));

  // Raising the scale admits J values between epsilon and scale*epsilon.
  const std::vector<double> mid{0.6, 0.0};
  CHECK_FALSE(member(cert, mid));
  CHECK(member(cert, mid, std::optional<double>{2.0}));

  CHECK(member_interior_variant(cert, std::vector<double>{0.4, 0.0}));
  CHECK_FALSE(member_interior_variant(cert, std::vector<double>{2.0, 2.0}));

  // Inside X with v >= 0 the two tests agree.
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    const std::vector<double> p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    CHECK(member(cert, p) == member_interior_variant(cert, p));
  }

  CHECK_THROWS_AS(member(cert, std::vector<double>{0.0}), Error);
}

TEST_CASE("intersection tightens membership") {
  const Certificate loose = hand_certificate(0.25);
  const Certificate tight = hand_certificate(0.01);
  const std::vector<double> p{0.3, 0.0};  // J = 0.09

  CHECK(member(loose, p));
  CHECK_FALSE(member(tight, p));
  CHECK(intersect_members({loose}, p) == member(loose, p));
  CHECK_FALSE(intersect_members({loose, tight}, p));

  Certificate other_domain = hand_certificate(0.25);
  other_domain.X = SemialgebraicSet::make_ball(2, 1.0);
  CHECK_THROWS_AS(intersect_members({loose, other_domain}, p), Error);
  CHECK_THROWS_AS(intersect_members({}, p), Error);
}

TEST_CASE("discrete constraint assembly") {
  const auto identity = DynamicalSystem::make_discrete(PolynomialMap(
      2, {Polynomial::variable(2, 1), Polynomial::variable(2, 2)}));

  Certificate cert = hand_certificate(0.125, SystemKind::discrete);
  cert.params.alpha = 0.5;
  cert.params.gamma = 0.5;

  const auto cs = constraint_polynomials(cert, identity);
  // With f = id: epsilon - J + gamma*J - v = epsilon - 0.5*J - v.
  const Polynomial expected4 = Polynomial::constant(2, 0.125) - cert.J * 0.5 -
                               cert.v;
  CHECK(cs[3] == expected4);
  CHECK(cs[4] == cert.v * 0.5);

  // K uses the invariant level epsilon/(1-gamma) = 0.25, so J = 0.2025 is in.
  CHECK(sublevel(cert) == doctest::Approx(0.25));
  CHECK(member(cert, std::vector<double>{0.45, 0.0}));
  CHECK_FALSE(member(cert, std::vector<double>{0.55, 0.0}));

  const auto sys = henon();
  const auto box = SemialgebraicSet::make_box({0, 0}, {1, 1});
  SolveParams params;
  params.k = 6;
  params.alpha = 0.002;
  params.gamma = 0.05;
  SosProgram prog = build_discrete(sys, box, params);
  CHECK(prog.num_constraints() == 5);
  // J o f has degree 12, so the dynamic constraints sit at budget 12.
  CHECK(prog.gram_sides(3)[0] == 28);
  prog.to_conic();
  CHECK(prog.constraint_rows(3).second == 91);

  SolveParams capped = params;
  capped.composition_degree_cap = 10;
  CHECK_THROWS_WITH_AS(static_cast<void>(build_discrete(sys, box, capped)),
                       doctest::Contains("cap"), Error);
}

TEST_CASE("parameter and kind validation") {
  const auto sys = radial_decay();
  const auto ball = SemialgebraicSet::make_ball(2, 1.0);
  SolveParams params;
  params.beta = 0.5;

  SolveParams bad = params;
  bad.k = 1;
  CHECK_THROWS_AS(static_cast<void>(build_continuous(sys, ball, bad)), Error);

  bad = params;
  bad.epsilon_scale = -1.0;
  CHECK_THROWS_AS(static_cast<void>(build_continuous(sys, ball, bad)), Error);

  bad = params;
  bad.alpha = 0.5;
  CHECK_THROWS_AS(static_cast<void>(build_continuous(sys, ball, bad)), Error);

  const auto map = henon();
  SolveParams dparams;
  dparams.k = 4;
  dparams.gamma = 1.0;
  const auto box = SemialgebraicSet::make_box({0, 0}, {1, 1});
  CHECK_THROWS_AS(static_cast<void>(build_discrete(map, box, dparams)), Error);
  dparams.gamma = 0.05;
  dparams.beta = 0.2;
  CHECK_THROWS_AS(static_cast<void>(build_discrete(map, box, dparams)), Error);

  CHECK_THROWS_AS(static_cast<void>(build_continuous(map, box, params)), Error);
  CHECK_THROWS_AS(static_cast<void>(build_discrete(sys, ball, dparams)), Error);

  const auto ball3 = SemialgebraicSet::make_ball(3, 1.0);
  CHECK_THROWS_AS(static_cast<void>(build_continuous(sys, ball3, params)), Error);
}

TEST_CASE("certificate json roundtrip is bit-exact") {
  Certificate cert = hand_certificate(0.1);
  cert.w.add_term(Monomial({1, 1}), 1.0 / 3.0);
  cert.J.add_term(Monomial({0, 1}), 3.141592653589793);
  cert.v.add_term(Monomial({2, 0}), -1e-300);
  cert.d_k = 2.0 / 7.0;
  cert.params.moment_seed = 123456789012345ull;

  const std::string text = certificate_to_json(cert);
  const Certificate back = certificate_from_json(text);
  CHECK(back.nvars == cert.nvars);
  CHECK(back.kind == cert.kind);
  CHECK(back.w == cert.w);
  CHECK(back.J == cert.J);
  CHECK(back.v == cert.v);
  CHECK(back.epsilon == cert.epsilon);
  CHECK(back.d_k == cert.d_k);
  CHECK(back.solver_status == cert.solver_status);
  CHECK(back.X.inequalities == cert.X.inequalities);
  CHECK(back.params.k == cert.params.k);
  CHECK(back.params.beta == cert.params.beta);
  CHECK(back.params.epsilon_scale == cert.params.epsilon_scale);
  CHECK(back.params.moment_seed == cert.params.moment_seed);
  CHECK(certificate_to_json(back) == text);

  // Annulus and generic domains survive the trip too.
  cert.X = SemialgebraicSet::make_annulus(2, 0.4, 2.0);
  const Certificate back2 = certificate_from_json(certificate_to_json(cert));
  CHECK(back2.X.inequalities == cert.X.inequalities);

  cert.X = SemialgebraicSet::make_generic(
      2, {parse_polynomial("1 - 0.123456789012345*x1^2*x2^2", 2)}, 3.0);
  const Certificate back3 = certificate_from_json(certificate_to_json(cert));
  CHECK(back3.X.inequalities == cert.X.inequalities);

  CHECK_THROWS_AS(certificate_from_json("{"), Error);
  CHECK_THROWS_AS(certificate_from_json("{\"format\": \"other\"}"), Error);
  CHECK_THROWS_AS(certificate_from_json("{\"format\": \"attractor-certificate\", \"basis\": \"grlex\"}"),
                  Error);
}

TEST_CASE("domain rescaling is transparent to callers") {
  // Attractor {(0.5, 0.5)} inside the unit box shifted away from the origin.
  const auto sys = DynamicalSystem::make_continuous(PolynomialMap(
      2, {parse_polynomial("0.5 - x1", 2), parse_polynomial("0.5 - x2", 2)}));
  const auto X = SemialgebraicSet::make_box({0, 0}, {1, 1});
  SolveParams params;
  params.k = 4;
  params.beta = 0.5;

  const Certificate scaled = solve_attractor(sys, X, params);
  params.rescale_domain = false;
  const Certificate raw = solve_attractor(sys, X, params);

  CHECK(scaled.solver_status == SolveStatus::optimal);
  // The unscaled monomial basis on [0,1]^2 is measurably worse conditioned;
  // near_optimal is an accepted outcome there.
  CHECK((raw.solver_status == SolveStatus::optimal ||
         raw.solver_status == SolveStatus::near_optimal));
  CHECK(std::abs(scaled.d_k - raw.d_k) <= 1e-3 * (1.0 + std::abs(raw.d_k)));

  // The attractor point satisfies the sublevel and sign conditions up to
  // solver residual scale (epsilon* is ~0 here, so exact membership at
  // tau = 1e-9 would be a coin flip on noise).
  const std::vector<double> center{0.5, 0.5};
  for (const Certificate* cert : {&scaled, &raw}) {
    CHECK(cert->J.evaluate(center) <=
          cert->epsilon + 1e-6 * (1.0 + cert->J.max_abs_coefficient()));
    CHECK(cert->v.evaluate(center) >=
          -1e-6 * (1.0 + cert->v.max_abs_coefficient()));
  }

  // The mapped-back certificate still satisfies the program in original
  // coordinates.
  check_residuals_nonneg(scaled, sys, 1000, 5);
  check_residuals_nonneg(raw, sys, 1000, 6);
}

TEST_CASE("tightening over k does not raise the bound") {
  const auto sys = radial_decay();
  const auto ball = SemialgebraicSet::make_ball(2, 1.0);
  SolveParams params;
  params.beta = 0.5;

  params.k = 2;
  const Certificate c2 = solve_attractor(sys, ball, params);
  params.k = 4;
  const Certificate c4 = solve_attractor(sys, ball, params);
  CHECK(c4.d_k <= c2.d_k + 1e-5 * (1.0 + std::abs(c2.d_k)));
}
