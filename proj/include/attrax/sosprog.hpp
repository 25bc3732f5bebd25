#ifndef ATTRAX_SOSPROG_HPP
#define ATTRAX_SOSPROG_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "attrax/conic.hpp"
#include "attrax/polynomial.hpp"
#include "attrax/semialg.hpp"

namespace attrax {

// A polynomial unknown: one free scalar per element of basis(nvars, degree).
struct PolyVariable {
  int index = -1;
  std::string name;
  int degree = 0;
  int offset = 0;  // start of the coefficient slice in the free block
  int count = 0;
};

// A scalar unknown constrained to be nonnegative.
struct ScalarVariable {
  int index = -1;
  std::string name;
  int offset = 0;  // position within the nonnegative block
};

// Affine expression in program unknowns whose coefficients are known
// polynomials: sum over poly vars of a linear operator image per basis
// monomial, plus polynomial multiples of scalar vars, plus a known part.
class PolyExpr {
 public:
  explicit PolyExpr(int nvars) : nvars_(nvars), known_(nvars) {}

  PolyExpr& add_poly_term(const PolyVariable& var, std::vector<Polynomial> images);
  PolyExpr& add_scalar_term(const ScalarVariable& var, Polynomial coefficient);
  PolyExpr& add_known(const Polynomial& p);

  PolyExpr& operator+=(const PolyExpr& rhs);
  PolyExpr& operator-=(const PolyExpr& rhs);
  PolyExpr& operator*=(double scale);
  friend PolyExpr operator+(PolyExpr a, const PolyExpr& b) { return a += b; }
  friend PolyExpr operator-(PolyExpr a, const PolyExpr& b) { return a -= b; }
  friend PolyExpr operator*(double s, PolyExpr e) { return e *= s; }

  int nvars() const { return nvars_; }
  // Total degree with every unknown at its declared degree.
  int degree() const;

 private:
  int nvars_;
  std::map<int, std::vector<Polynomial>> poly_terms_;  // var index -> images
  std::map<int, Polynomial> scalar_terms_;             // var index -> coefficient
  Polynomial known_;
  friend class SosProgram;
};

struct GramBlockInfo {
  int constraint_id = -1;
  int multiplier = -1;   // -1 is the sigma_0 block, else index into the g list
  int side = 0;
  int basis_degree = 0;  // degree of the monomial basis spanning the block
  int col_offset = -1;   // assigned by to_conic
};

// Compiles "expr(x) >= 0 on X" constraints into Putinar certificates
// expr = sigma_0 + sum_i sigma_i g_i with SOS multipliers, producing one
// equality row per monomial up to the constraint's degree budget.
class SosProgram {
 public:
  explicit SosProgram(int nvars);

  PolyVariable add_poly_var(const std::string& name, int degree);
  ScalarVariable add_scalar_var(const std::string& name);

  PolyExpr expr_known(Polynomial p) const;
  PolyExpr expr_var(const PolyVariable& var) const;
  PolyExpr expr_scalar(const ScalarVariable& var) const;
  // grad(var) . f as an expression in var's coefficients
  PolyExpr expr_lie(const PolyVariable& var, const PolynomialMap& f) const;
  // var composed with f
  PolyExpr expr_compose(const PolyVariable& var, const PolynomialMap& f) const;

  int add_putinar_constraint(const PolyExpr& expr, const SemialgebraicSet& X,
                             int degree_budget);

  void objective_poly(const PolyVariable& var, const Eigen::VectorXd& weights);
  void objective_scalar(const ScalarVariable& var, double weight);
  void set_zero_objective();

  ConicProblem to_conic();

  int nvars() const { return nvars_; }
  int num_constraints() const { return static_cast<int>(constraints_.size()); }
  int free_columns() const { return free_cols_; }
  int scalar_columns() const { return static_cast<int>(scalar_vars_.size()); }
  int total_columns() const;
  const std::vector<GramBlockInfo>& gram_blocks() const { return gram_blocks_; }
  std::vector<int> gram_sides(int constraint_id) const;
  // (row offset, row count) of a constraint's equality block
  std::pair<int, int> constraint_rows(int constraint_id) const;

  // Reading a solver point; valid once to_conic has run.
  Polynomial extract_poly(const PolyVariable& var, const Eigen::VectorXd& x) const;
  double extract_scalar(const ScalarVariable& var, const Eigen::VectorXd& x) const;
  Eigen::MatrixXd gram_matrix(const GramBlockInfo& block, const Eigen::VectorXd& x) const;
  Polynomial instantiate(const PolyExpr& expr, const Eigen::VectorXd& x) const;
  Polynomial constraint_polynomial(int constraint_id, const Eigen::VectorXd& x) const;

 private:
  struct Constraint {
    PolyExpr expr;
    std::vector<Polynomial> gs;
    int budget = 0;
    std::vector<int> block_ids;
    std::vector<Monomial> row_monomials;
    int row_offset = -1;
  };

  void check_var(const PolyVariable& var) const;
  void check_scalar(const ScalarVariable& var) const;
  void check_compiled() const;

  int nvars_ = 0;
  std::vector<PolyVariable> poly_vars_;
  std::vector<ScalarVariable> scalar_vars_;
  std::vector<Constraint> constraints_;
  std::vector<GramBlockInfo> gram_blocks_;
  std::vector<Eigen::VectorXd> objective_poly_;
  std::vector<double> objective_scalar_;
  bool objective_set_ = false;
  bool compiled_ = false;
  int free_cols_ = 0;
};

// Expanded z' Q z for a monomial list z.
Polynomial reconstruct(const Eigen::MatrixXd& q, const std::vector<Monomial>& z);

}  // namespace attrax

#endif
