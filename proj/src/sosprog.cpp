#include "attrax/sosprog.hpp"

#include <algorithm>
#include <cmath>

namespace attrax {

namespace {
constexpr double kSqrt2 = 1.41421356237309504880168872420969808;

int even_ceil(int d) { return d + (d % 2); }
}  // namespace

PolyExpr& PolyExpr::add_poly_term(const PolyVariable& var, std::vector<Polynomial> images) {
  if (static_cast<int>(images.size()) != var.count)
    throw Error("expression term: image count does not match variable slice");
  for (const auto& p : images)
    if (p.nvars() != nvars_) throw Error("expression term: image over wrong variables");
  auto [it, inserted] = poly_terms_.try_emplace(var.index, std::move(images));
  if (!inserted)
    for (int i = 0; i < var.count; ++i) it->second[i] += images[i];
  return *this;
}

PolyExpr& PolyExpr::add_scalar_term(const ScalarVariable& var, Polynomial coefficient) {
  if (coefficient.nvars() != nvars_)
    throw Error("expression term: coefficient over wrong variables");
  auto [it, inserted] = scalar_terms_.try_emplace(var.index, std::move(coefficient));
  if (!inserted) it->second += coefficient;
  return *this;
}

PolyExpr& PolyExpr::add_known(const Polynomial& p) {
  if (p.nvars() != nvars_) throw Error("expression known part over wrong variables");
  known_ += p;
  return *this;
}

PolyExpr& PolyExpr::operator+=(const PolyExpr& rhs) {
  if (nvars_ != rhs.nvars_) throw Error("expression dimension mismatch");
  for (const auto& [idx, images] : rhs.poly_terms_) {
    auto [it, inserted] = poly_terms_.try_emplace(idx, images);
    if (!inserted)
      for (std::size_t i = 0; i < images.size(); ++i) it->second[i] += images[i];
  }
  for (const auto& [idx, coeff] : rhs.scalar_terms_) {
    auto [it, inserted] = scalar_terms_.try_emplace(idx, coeff);
    if (!inserted) it->second += coeff;
  }
  known_ += rhs.known_;
  return *this;
}

PolyExpr& PolyExpr::operator-=(const PolyExpr& rhs) {
  PolyExpr neg = rhs;
  neg *= -1.0;
  return *this += neg;
}

PolyExpr& PolyExpr::operator*=(double scale) {
  for (auto& [idx, images] : poly_terms_)
    for (auto& p : images) p *= scale;
  for (auto& [idx, coeff] : scalar_terms_) coeff *= scale;
  known_ *= scale;
  return *this;
}

int PolyExpr::degree() const {
  int d = known_.degree();
  if (known_.is_zero()) d = 0;
  for (const auto& [idx, images] : poly_terms_)
    for (const auto& p : images)
      if (!p.is_zero()) d = std::max(d, p.degree());
  for (const auto& [idx, coeff] : scalar_terms_)
    if (!coeff.is_zero()) d = std::max(d, coeff.degree());
  return d;
}

SosProgram::SosProgram(int nvars) : nvars_(nvars) {
  if (nvars < 1) throw Error("program needs at least one variable");
}

PolyVariable SosProgram::add_poly_var(const std::string& name, int degree) {
  if (degree < 0) throw Error("polynomial variable degree must be nonnegative");
  for (const auto& v : poly_vars_)
    if (v.name == name) throw Error("duplicate variable name '" + name + "'");
  for (const auto& v : scalar_vars_)
    if (v.name == name) throw Error("duplicate variable name '" + name + "'");
  PolyVariable var;
  var.index = static_cast<int>(poly_vars_.size());
  var.name = name;
  var.degree = degree;
  var.offset = free_cols_;
  var.count = static_cast<int>(basis_size(nvars_, degree));
  free_cols_ += var.count;
  poly_vars_.push_back(var);
  objective_poly_.push_back(Eigen::VectorXd::Zero(var.count));
  compiled_ = false;
  return var;
}

ScalarVariable SosProgram::add_scalar_var(const std::string& name) {
  for (const auto& v : poly_vars_)
    if (v.name == name) throw Error("duplicate variable name '" + name + "'");
  for (const auto& v : scalar_vars_)
    if (v.name == name) throw Error("duplicate variable name '" + name + "'");
  ScalarVariable var;
  var.index = static_cast<int>(scalar_vars_.size());
  var.name = name;
  var.offset = var.index;
  scalar_vars_.push_back(var);
  objective_scalar_.push_back(0.0);
  compiled_ = false;
  return var;
}

void SosProgram::check_var(const PolyVariable& var) const {
  if (var.index < 0 || var.index >= static_cast<int>(poly_vars_.size()) ||
      poly_vars_[var.index].name != var.name)
    throw Error("unknown polynomial variable '" + var.name + "'");
}

void SosProgram::check_scalar(const ScalarVariable& var) const {
  if (var.index < 0 || var.index >= static_cast<int>(scalar_vars_.size()) ||
      scalar_vars_[var.index].name != var.name)
    throw Error("unknown scalar variable '" + var.name + "'");
}

PolyExpr SosProgram::expr_known(Polynomial p) const {
  PolyExpr e(nvars_);
  e.add_known(p);
  return e;
}

PolyExpr SosProgram::expr_var(const PolyVariable& var) const {
  check_var(var);
  std::vector<Polynomial> images;
  images.reserve(var.count);
  for (const auto& m : monomial_basis(nvars_, var.degree))
    images.push_back(Polynomial::term(nvars_, m, 1.0));
  PolyExpr e(nvars_);
  e.add_poly_term(var, std::move(images));
  return e;
}

PolyExpr SosProgram::expr_scalar(const ScalarVariable& var) const {
  check_scalar(var);
  PolyExpr e(nvars_);
  e.add_scalar_term(var, Polynomial::constant(nvars_, 1.0));
  return e;
}

PolyExpr SosProgram::expr_lie(const PolyVariable& var, const PolynomialMap& f) const {
  check_var(var);
  if (f.nvars != nvars_ || !f.is_square())
    throw Error("lie expression needs a square map over the program variables");
  std::vector<Polynomial> images;
  images.reserve(var.count);
  for (const auto& m : monomial_basis(nvars_, var.degree))
    images.push_back(lie_derivative(Polynomial::term(nvars_, m, 1.0), f));
  PolyExpr e(nvars_);
  e.add_poly_term(var, std::move(images));
  return e;
}

PolyExpr SosProgram::expr_compose(const PolyVariable& var, const PolynomialMap& f) const {
  check_var(var);
  if (f.nvars != nvars_ || !f.is_square())
    throw Error("composition expression needs a square map over the program variables");
  std::vector<Polynomial> images;
  images.reserve(var.count);
  for (const auto& m : monomial_basis(nvars_, var.degree))
    images.push_back(compose(Polynomial::term(nvars_, m, 1.0), f));
  PolyExpr e(nvars_);
  e.add_poly_term(var, std::move(images));
  return e;
}

int SosProgram::add_putinar_constraint(const PolyExpr& expr, const SemialgebraicSet& X,
                                       int degree_budget) {
  if (expr.nvars() != nvars_) throw Error("constraint expression dimension mismatch");
  if (X.nvars != nvars_) throw Error("constraint set dimension mismatch");
  if (degree_budget < 0 || degree_budget % 2 != 0)
    throw Error("degree budget must be a nonnegative even integer");
  if (expr.degree() > degree_budget)
    throw Error("expression degree " + std::to_string(expr.degree()) +
                " exceeds budget " + std::to_string(degree_budget));
  for (const auto& [idx, images] : expr.poly_terms_)
    if (idx < 0 || idx >= static_cast<int>(poly_vars_.size()))
      throw Error("constraint references an unregistered polynomial variable");
  for (const auto& [idx, coeff] : expr.scalar_terms_)
    if (idx < 0 || idx >= static_cast<int>(scalar_vars_.size()))
      throw Error("constraint references an unregistered scalar variable");

  Constraint con{expr, X.inequalities, degree_budget, {}, monomial_basis(nvars_, degree_budget), -1};
  const int id = static_cast<int>(constraints_.size());

  GramBlockInfo sigma0;
  sigma0.constraint_id = id;
  sigma0.multiplier = -1;
  sigma0.basis_degree = degree_budget / 2;
  sigma0.side = static_cast<int>(basis_size(nvars_, sigma0.basis_degree));
  con.block_ids.push_back(static_cast<int>(gram_blocks_.size()));
  gram_blocks_.push_back(sigma0);

  for (std::size_t i = 0; i < con.gs.size(); ++i) {
    const int dg = con.gs[i].degree();
    if (dg > degree_budget) continue;  // no room for this multiplier
    GramBlockInfo blk;
    blk.constraint_id = id;
    blk.multiplier = static_cast<int>(i);
    blk.basis_degree = (degree_budget - dg) / 2;
    blk.side = static_cast<int>(basis_size(nvars_, blk.basis_degree));
    con.block_ids.push_back(static_cast<int>(gram_blocks_.size()));
    gram_blocks_.push_back(blk);
  }

  constraints_.push_back(std::move(con));
  compiled_ = false;
  return id;
}

void SosProgram::objective_poly(const PolyVariable& var, const Eigen::VectorXd& weights) {
  check_var(var);
  if (weights.size() != var.count) throw Error("objective weight length mismatch");
  objective_poly_[var.index] = weights;
  objective_set_ = true;
}

void SosProgram::objective_scalar(const ScalarVariable& var, double weight) {
  check_scalar(var);
  objective_scalar_[var.index] = weight;
  objective_set_ = true;
}

void SosProgram::set_zero_objective() {
  for (auto& w : objective_poly_) w.setZero();
  std::fill(objective_scalar_.begin(), objective_scalar_.end(), 0.0);
  objective_set_ = true;
}

int SosProgram::total_columns() const {
  int cols = free_cols_ + static_cast<int>(scalar_vars_.size());
  for (const auto& blk : gram_blocks_) cols += svec_length(blk.side);
  return cols;
}

ConicProblem SosProgram::to_conic() {
  if (!objective_set_) throw Error("objective not set (set_zero_objective for feasibility)");

  const int nscal = static_cast<int>(scalar_vars_.size());
  int col = free_cols_ + nscal;
  for (auto& blk : gram_blocks_) {
    blk.col_offset = col;
    col += svec_length(blk.side);
  }
  const int ncols = col;

  int row = 0;
  for (auto& con : constraints_) {
    con.row_offset = row;
    row += static_cast<int>(con.row_monomials.size());
  }
  const int nrows = row;

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nrows);

  for (const auto& con : constraints_) {
    std::map<Monomial, int, GrlexLess> row_of;
    for (std::size_t r = 0; r < con.row_monomials.size(); ++r)
      row_of.emplace(con.row_monomials[r], con.row_offset + static_cast<int>(r));

    auto row_for = [&](const Monomial& m) {
      const auto it = row_of.find(m);
      if (it == row_of.end())
        throw Error("internal: constraint monomial exceeds its degree budget");
      return it->second;
    };

    for (const auto& [idx, images] : con.expr.poly_terms_) {
      const PolyVariable& var = poly_vars_[idx];
      for (int a = 0; a < var.count; ++a)
        for (const auto& [m, cf] : images[a].terms())
          trips.emplace_back(row_for(m), var.offset + a, cf);
    }
    for (const auto& [idx, coeff] : con.expr.scalar_terms_) {
      const int column = free_cols_ + scalar_vars_[idx].offset;
      for (const auto& [m, cf] : coeff.terms())
        trips.emplace_back(row_for(m), column, cf);
    }
    for (const auto& [m, cf] : con.expr.known_.terms()) b[row_for(m)] -= cf;

    for (int bid : con.block_ids) {
      const GramBlockInfo& blk = gram_blocks_[bid];
      const Polynomial g = blk.multiplier < 0 ? Polynomial::constant(nvars_, 1.0)
                                              : con.gs[blk.multiplier];
      const auto z = monomial_basis(nvars_, blk.basis_degree);
      for (int p = 0; p < blk.side; ++p)
        for (int q = 0; q <= p; ++q) {
          const int column = blk.col_offset + svec_index(blk.side, p, q);
          const double scale = p == q ? 1.0 : kSqrt2;
          const Monomial zz = z[p] * z[q];
          for (const auto& [mg, cg] : g.terms())
            trips.emplace_back(row_for(zz * mg), column, -scale * cg);
        }
    }
  }

  ConicProblem prob;
  prob.c = Eigen::VectorXd::Zero(ncols);
  for (const auto& var : poly_vars_)
    prob.c.segment(var.offset, var.count) = objective_poly_[var.index];
  for (int i = 0; i < nscal; ++i) prob.c[free_cols_ + i] = objective_scalar_[i];
  prob.b = std::move(b);
  prob.A.resize(nrows, ncols);
  prob.A.setFromTriplets(trips.begin(), trips.end());
  prob.cones.num_free = free_cols_;
  prob.cones.num_nonneg = nscal;
  for (const auto& blk : gram_blocks_) prob.cones.psd_sides.push_back(blk.side);
  compiled_ = true;
  return prob;
}

std::vector<int> SosProgram::gram_sides(int constraint_id) const {
  if (constraint_id < 0 || constraint_id >= num_constraints())
    throw Error("constraint id out of range");
  std::vector<int> sides;
  for (int bid : constraints_[constraint_id].block_ids)
    sides.push_back(gram_blocks_[bid].side);
  return sides;
}

std::pair<int, int> SosProgram::constraint_rows(int constraint_id) const {
  check_compiled();
  if (constraint_id < 0 || constraint_id >= num_constraints())
    throw Error("constraint id out of range");
  const Constraint& con = constraints_[constraint_id];
  return {con.row_offset, static_cast<int>(con.row_monomials.size())};
}

void SosProgram::check_compiled() const {
  if (!compiled_) throw Error("program must be compiled with to_conic first");
}

Polynomial SosProgram::extract_poly(const PolyVariable& var, const Eigen::VectorXd& x) const {
  check_var(var);
  if (x.size() != total_columns()) throw Error("solution vector length mismatch");
  Polynomial p(nvars_);
  const auto basis = monomial_basis(nvars_, var.degree);
  for (int a = 0; a < var.count; ++a) p.add_term(basis[a], x[var.offset + a]);
  return p;
}

double SosProgram::extract_scalar(const ScalarVariable& var, const Eigen::VectorXd& x) const {
  check_scalar(var);
  if (x.size() != total_columns()) throw Error("solution vector length mismatch");
  return x[free_cols_ + var.offset];
}

Eigen::MatrixXd SosProgram::gram_matrix(const GramBlockInfo& block,
                                        const Eigen::VectorXd& x) const {
  check_compiled();
  if (block.col_offset < 0) throw Error("gram block has no assigned columns");
  if (x.size() != total_columns()) throw Error("solution vector length mismatch");
  return unsvec(x.segment(block.col_offset, svec_length(block.side)));
}

Polynomial SosProgram::instantiate(const PolyExpr& expr, const Eigen::VectorXd& x) const {
  check_compiled();
  if (x.size() != total_columns()) throw Error("solution vector length mismatch");
  Polynomial out = expr.known_;
  for (const auto& [idx, images] : expr.poly_terms_) {
    const PolyVariable& var = poly_vars_.at(idx);
    for (int a = 0; a < var.count; ++a) out += images[a] * x[var.offset + a];
  }
  for (const auto& [idx, coeff] : expr.scalar_terms_)
    out += coeff * x[free_cols_ + scalar_vars_.at(idx).offset];
  return out;
}

Polynomial SosProgram::constraint_polynomial(int constraint_id,
                                             const Eigen::VectorXd& x) const {
  if (constraint_id < 0 || constraint_id >= num_constraints())
    throw Error("constraint id out of range");
  return instantiate(constraints_[constraint_id].expr, x);
}

Polynomial reconstruct(const Eigen::MatrixXd& q, const std::vector<Monomial>& z) {
  if (z.empty()) throw Error("reconstruct: empty monomial list");
  if (q.rows() != q.cols() || q.rows() != static_cast<Eigen::Index>(z.size()))
    throw Error("reconstruct: matrix side must equal the monomial count");
  const int nvars = static_cast<int>(z[0].nvars());
  Polynomial p(nvars);
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = 0; j < z.size(); ++j)
      p.add_term(z[i] * z[j], q(i, j));
  return p;
}

}  // namespace attrax
