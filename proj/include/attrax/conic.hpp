#ifndef ATTRAX_CONIC_HPP
#define ATTRAX_CONIC_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "attrax/polynomial.hpp"

namespace attrax {

// Decision vector layout: [free | nonnegative | PSD blocks]. PSD blocks are
// stored in symmetric vectorization: lower triangle, column by column, with
// off-diagonal entries scaled by sqrt(2) so Euclidean inner products of
// vectorizations equal Frobenius inner products of the matrices.
struct ConeLayout {
  int num_free = 0;
  int num_nonneg = 0;
  std::vector<int> psd_sides;

  int psd_dim() const;
  int total_dim() const;
};

int svec_length(int side);
// Offset of entry (i, j), i >= j, within a block's vectorization.
int svec_index(int side, int i, int j);
Eigen::VectorXd svec(const Eigen::MatrixXd& m);
Eigen::MatrixXd unsvec(const Eigen::VectorXd& v);

// minimize c'x subject to A x = b, x in the cone product.
struct ConicProblem {
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;
  Eigen::VectorXd b;
  ConeLayout cones;

  void check_well_formed() const;
};

enum class SolveStatus {
  optimal,
  near_optimal,
  primal_infeasible,
  dual_infeasible,
  iteration_limit,
  numerical_error,
};

std::string to_string(SolveStatus status);

struct SolverSettings {
  int max_iterations = 100;
  // Defaults reflect what dense double-precision NT scaling can reliably
  // deliver on badly conditioned moment-matching problems: feasibility to
  // 1e-6 and relative objective gap to 1e-5.  Well-conditioned instances
  // overshoot these by orders of magnitude; instances with nonstrict
  // complementarity stall just beyond them.
  double feas_tol = 1e-6;
  double gap_tol = 1e-5;
  int verbosity = 0;

  void validate() const;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::numerical_error;
  Eigen::VectorXd x, y, s;
  double objective_value = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

// Homogeneous self-dual interior-point method with Nesterov-Todd scaling
// and a Mehrotra predictor-corrector. Numerical failure is reported through
// the status, never by throwing; malformed input still throws.
ConicSolution solve(const ConicProblem& problem, const SolverSettings& settings = {});

struct ResidualReport {
  double equality_residual = 0.0;   // |Ax - b| / (1 + |b|)
  double min_cone_eigenvalue = 0.0; // over nonneg entries and PSD spectra
  double duality_gap = 0.0;         // |c'x - b'y| / (1 + |c'x| + |b'y|)
};

// Recomputes feasibility of a returned solution from the problem data,
// independent of anything the solver reported.
ResidualReport verify_solution(const ConicProblem& problem, const ConicSolution& sol);

}  // namespace attrax

#endif
