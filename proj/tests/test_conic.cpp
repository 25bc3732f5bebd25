#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "attrax/conic.hpp"
#include "attrax/rng.hpp"

using namespace attrax;

namespace {

ConicProblem from_triplets(int m, Eigen::VectorXd c, Eigen::VectorXd b,
                           const std::vector<Eigen::Triplet<double>>& trips,
                           ConeLayout cones) {
  ConicProblem p;
  p.c = std::move(c);
  p.b = std::move(b);
  p.cones = std::move(cones);
  p.A.resize(m, p.cones.total_dim());
  p.A.setFromTriplets(trips.begin(), trips.end());
  return p;
}

// Small well-conditioned instances converge far beyond the shipped defaults;
// ask for full precision so the checks pin what the method can deliver.
SolverSettings tight() {
  SolverSettings st;
  st.feas_tol = 1e-8;
  st.gap_tol = 1e-8;
  return st;
}

// min t such that [[t, 1], [1, t]] is PSD; optimum t = 1.
ConicProblem min_t_psd() {
  const double rt2 = std::sqrt(2.0);
  std::vector<Eigen::Triplet<double>> trips{
      {0, 0, 1.0}, {0, 1, -1.0},   // t - X11 = 0
      {1, 2, 1.0},                 // sqrt2 * X21 = sqrt2
      {2, 0, 1.0}, {2, 3, -1.0},   // t - X22 = 0
  };
  Eigen::VectorXd c(4), b(3);
  c << 1, 0, 0, 0;
  b << 0, rt2, 0;
  ConeLayout cones;
  cones.num_free = 1;
  cones.psd_sides = {2};
  return from_triplets(3, c, b, trips, cones);
}

}  // namespace

TEST_CASE("svec conventions") {
  CHECK(svec_length(3) == 6);
  CHECK(svec_index(3, 0, 0) == 0);
  CHECK(svec_index(3, 2, 0) == 2);
  CHECK(svec_index(3, 1, 1) == 3);
  CHECK(svec_index(3, 2, 2) == 5);

  Eigen::MatrixXd m(2, 2);
  m << 3, -1, -1, 5;
  const Eigen::VectorXd v = svec(m);
  CHECK(v[0] == doctest::Approx(3.0));
  CHECK(v[1] == doctest::Approx(-std::sqrt(2.0)));
  CHECK(v[2] == doctest::Approx(5.0));
  CHECK((unsvec(v) - m).norm() == doctest::Approx(0.0).epsilon(1e-15));

  // Vectorization preserves inner products.
  Eigen::MatrixXd a(3, 3), b(3, 3);
  a << 1, 2, 0, 2, -1, 3, 0, 3, 2;
  b << 0, 1, 1, 1, 4, -2, 1, -2, 1;
  CHECK(svec(a).dot(svec(b)) ==
        doctest::Approx((a * b).trace()).epsilon(1e-14));
}

TEST_CASE("nonnegative scalar with no equalities minimizes to zero") {
  ConeLayout cones;
  cones.num_nonneg = 1;
  Eigen::VectorXd c(1);
  c << 1;
  const auto p = from_triplets(0, c, Eigen::VectorXd(0), {}, cones);
  const auto sol = solve(p, tight());
  CHECK(sol.status == SolveStatus::optimal);
  CHECK(sol.objective_value == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(sol.x[0] >= 0.0);
  CHECK(sol.x[0] <= 1e-6);
}

TEST_CASE("min t with [[t,1],[1,t]] PSD reaches t = 1") {
  const auto p = min_t_psd();
  const auto sol = solve(p, tight());
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective_value ==
        doctest::Approx(p.c.dot(sol.x)).epsilon(1e-10));

  const auto rep = verify_solution(p, sol);
  CHECK(rep.equality_residual <= 1e-8);
  CHECK(rep.min_cone_eigenvalue >= -1e-8);
  CHECK(rep.duality_gap <= 1e-7);

  // Independent residuals within 10x the requested tolerances.
  const SolverSettings st = tight();
  CHECK(rep.equality_residual <= 10 * st.feas_tol);
  CHECK(rep.duality_gap <= 10 * st.gap_tol);
}

TEST_CASE("perturbing a solution is caught by verify_solution") {
  const auto p = min_t_psd();
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::optimal);
  sol.x[0] += 1.0;
  const auto rep = verify_solution(p, sol);
  CHECK(rep.equality_residual >= 0.5);
}

TEST_CASE("equality forcing a nonnegative variable negative is primal infeasible") {
  ConeLayout cones;
  cones.num_nonneg = 1;
  Eigen::VectorXd c(1), b(1);
  c << 0;
  b << -1;
  const auto p = from_triplets(1, c, b, {{0, 0, 1.0}}, cones);
  const auto sol = solve(p);
  CHECK(sol.status == SolveStatus::primal_infeasible);
}

TEST_CASE("unbounded descent is dual infeasible") {
  ConeLayout cones;
  cones.num_nonneg = 1;
  Eigen::VectorXd c(1);
  c << -1;
  const auto p = from_triplets(0, c, Eigen::VectorXd(0), {}, cones);
  const auto sol = solve(p);
  CHECK(sol.status == SolveStatus::dual_infeasible);
}

TEST_CASE("small LP with equality has the right primal and dual") {
  // min 2 x1 + x2 s.t. x1 + x2 = 1, x >= 0; optimum (0,1), value 1, y* = 1.
  ConeLayout cones;
  cones.num_nonneg = 2;
  Eigen::VectorXd c(2), b(1);
  c << 2, 1;
  b << 1;
  const auto p = from_triplets(1, c, b, {{0, 0, 1.0}, {0, 1, 1.0}}, cones);
  const auto sol = solve(p, tight());
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.x[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.y[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("trace-normalized minimization recovers the smallest eigenvalue") {
  const int side = 5;
  Eigen::MatrixXd raw(side, side);
  Rng rng(17);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) raw(i, j) = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd sym = 0.5 * (raw + raw.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const double lam_min = es.eigenvalues().minCoeff();

  const int len = svec_length(side);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < side; ++i) trips.emplace_back(0, svec_index(side, i, i), 1.0);
  Eigen::VectorXd b(1);
  b << 1;
  ConeLayout cones;
  cones.psd_sides = {side};
  auto p = from_triplets(1, svec(sym), b, trips, cones);
  const auto sol = solve(p, tight());
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective_value == doctest::Approx(lam_min).epsilon(1e-6));
  CHECK(sol.x.size() == len);
}

TEST_CASE("randomly generated strictly feasible SDP solves to tolerance") {
  Rng rng(4242);
  const int side = 6, m = 12;
  const int len = svec_length(side);
  const int n = len + 2;  // plus two nonnegative slacks

  Eigen::MatrixXd bmat(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) bmat(i, j) = rng.normal();
  const Eigen::MatrixXd x0m =
      bmat * bmat.transpose() + 0.5 * Eigen::MatrixXd::Identity(side, side);
  Eigen::VectorXd x0(n);
  x0 << svec(x0m), 0.7, 1.3;

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::MatrixXd adense(m, n);
  for (int r = 0; r < m; ++r)
    for (int col = 0; col < n; ++col) {
      adense(r, col) = rng.uniform(-1.0, 1.0);
      trips.emplace_back(r, col, adense(r, col));
    }
  const Eigen::VectorXd b = adense * x0;

  Eigen::VectorXd y0(m);
  for (int r = 0; r < m; ++r) y0[r] = rng.normal();
  Eigen::MatrixXd cmat(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) cmat(i, j) = rng.normal();
  const Eigen::MatrixXd s0m =
      cmat * cmat.transpose() + 0.3 * Eigen::MatrixXd::Identity(side, side);
  Eigen::VectorXd s0(n);
  s0 << svec(s0m), 0.2, 0.9;
  const Eigen::VectorXd c = adense.transpose() * y0 + s0;

  ConeLayout cones;
  cones.psd_sides = {side};
  cones.num_nonneg = 2;
  // layout wants nonneg before PSD; rebuild with slacks first
  Eigen::VectorXd c2(n), x02(n);
  c2 << c.tail(2), c.head(len);
  std::vector<Eigen::Triplet<double>> trips2;
  for (const auto& t : trips) {
    const int col = t.col() < len ? t.col() + 2 : t.col() - len;
    trips2.emplace_back(t.row(), col, t.value());
  }
  auto p = from_triplets(m, c2, b, trips2, cones);
  const auto sol = solve(p, tight());
  REQUIRE(sol.status == SolveStatus::optimal);

  const auto rep = verify_solution(p, sol);
  const SolverSettings st = tight();
  CHECK(rep.equality_residual <= 10 * st.feas_tol);
  CHECK(rep.min_cone_eigenvalue >= -10 * st.feas_tol);
  CHECK(rep.duality_gap <= 10 * st.gap_tol);
  CHECK(sol.objective_value == doctest::Approx(p.c.dot(sol.x)).epsilon(1e-10));
  // weak duality bound against the constructed dual-feasible y0
  CHECK(sol.objective_value >= b.dot(y0) - 1e-5);
}

TEST_CASE("iteration limit surfaces without panicking") {
  SolverSettings st;
  st.max_iterations = 2;
  const auto sol = solve(min_t_psd(), st);
  CHECK((sol.status == SolveStatus::iteration_limit ||
         sol.status == SolveStatus::near_optimal));
  CHECK(sol.iterations <= 2);
}

TEST_CASE("zero-dimensional problem is trivially optimal with zero residuals") {
  ConicProblem p;
  p.c.resize(0);
  p.b.resize(0);
  p.A.resize(0, 0);
  const auto sol = solve(p);
  CHECK(sol.status == SolveStatus::optimal);
  const auto rep = verify_solution(p, sol);
  CHECK(rep.equality_residual == 0.0);
  CHECK(rep.min_cone_eigenvalue == 0.0);
  CHECK(rep.duality_gap == 0.0);
}

TEST_CASE("settings and problem validation") {
  SolverSettings st;
  st.feas_tol = 0.0;
  CHECK_THROWS_AS(st.validate(), Error);
  st = SolverSettings{};
  st.max_iterations = 0;
  CHECK_THROWS_AS(st.validate(), Error);

  // free variable appearing in no equality row is rejected
  ConeLayout cones;
  cones.num_free = 1;
  Eigen::VectorXd c(1);
  c << 1;
  auto p = from_triplets(0, c, Eigen::VectorXd(0), {}, cones);
  CHECK_THROWS_AS(solve(p), Error);

  auto q = min_t_psd();
  q.c.resize(2);
  CHECK_THROWS_AS(solve(q), Error);
}
