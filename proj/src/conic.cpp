#include "attrax/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace attrax {

namespace {
constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

int ConeLayout::psd_dim() const {
  int d = 0;
  for (int s : psd_sides) d += svec_length(s);
  return d;
}

int ConeLayout::total_dim() const { return num_free + num_nonneg + psd_dim(); }

int svec_length(int side) { return side * (side + 1) / 2; }

int svec_index(int side, int i, int j) {
  if (j > i || i >= side || j < 0) throw Error("svec_index: need side > i >= j >= 0");
  return j * side - j * (j - 1) / 2 + (i - j);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw Error("svec: matrix must be square");
  const int s = static_cast<int>(m.rows());
  Eigen::VectorXd v(svec_length(s));
  int idx = 0;
  for (int j = 0; j < s; ++j)
    for (int i = j; i < s; ++i)
      v[idx++] = i == j ? m(i, j) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
  return v;
}

Eigen::MatrixXd unsvec(const Eigen::VectorXd& v) {
  const int s = static_cast<int>(std::lround((std::sqrt(8.0 * v.size() + 1.0) - 1.0) / 2.0));
  if (svec_length(s) != v.size()) throw Error("unsvec: length is not triangular");
  Eigen::MatrixXd m(s, s);
  int idx = 0;
  for (int j = 0; j < s; ++j)
    for (int i = j; i < s; ++i) {
      const double x = i == j ? v[idx] : v[idx] / kSqrt2;
      m(i, j) = x;
      m(j, i) = x;
      ++idx;
    }
  return m;
}

void ConicProblem::check_well_formed() const {
  const int n = cones.total_dim();
  if (c.size() != n) throw Error("conic problem: c has wrong length");
  if (A.cols() != n) throw Error("conic problem: A has wrong column count");
  if (A.rows() != b.size()) throw Error("conic problem: A and b row mismatch");
  if (cones.num_free < 0 || cones.num_nonneg < 0)
    throw Error("conic problem: negative cone dimension");
  for (int s : cones.psd_sides)
    if (s < 1) throw Error("conic problem: PSD side must be positive");
  if (cones.num_free > 0) {
    std::vector<bool> seen(cones.num_free, false);
    for (int r = 0; r < A.outerSize(); ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(A, r); it; ++it)
        if (it.col() < cones.num_free && it.value() != 0.0) seen[it.col()] = true;
    for (int j = 0; j < cones.num_free; ++j)
      if (!seen[j])
        throw Error("conic problem: free variable " + std::to_string(j) +
                    " appears in no equality");
  }
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::near_optimal: return "near_optimal";
    case SolveStatus::primal_infeasible: return "primal_infeasible";
    case SolveStatus::dual_infeasible: return "dual_infeasible";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::numerical_error: return "numerical_error";
  }
  return "unknown";
}

void SolverSettings::validate() const {
  if (max_iterations < 1) throw Error("solver settings: max_iterations must be >= 1");
  if (!(feas_tol > 0.0 && feas_tol < 1.0)) throw Error("solver settings: feas_tol not in (0,1)");
  if (!(gap_tol > 0.0 && gap_tol < 1.0)) throw Error("solver settings: gap_tol not in (0,1)");
}

namespace {

struct NumericalTrouble {};

struct PsdScale {
  Eigen::MatrixXd R, Rinv, W, Lx, Ls;
  Eigen::VectorXd lam;
};

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Direction {
  Eigen::VectorXd dy, dxf, dxz, dsz;
  double dtau = 0.0, dkappa = 0.0;
};

class Hsde {
 public:
  Hsde(const ConicProblem& prob, const SolverSettings& st) : orig_(prob), st_(st) {
    m_ = static_cast<int>(prob.A.rows());
    nf_ = prob.cones.num_free;
    nn_ = prob.cones.num_nonneg;
    sides_ = prob.cones.psd_sides;
    nz_ = nn_ + prob.cones.psd_dim();
    psd_off_.resize(sides_.size());
    int off = nn_;
    for (std::size_t k = 0; k < sides_.size(); ++k) {
      psd_off_[k] = off;
      off += svec_length(sides_[k]);
    }
    nu_ = nn_;
    for (int s : sides_) nu_ += s;
    equilibrate();
  }

  ConicSolution run();

 private:
  // Ruiz equilibration; column scaling is uniform inside each PSD block so
  // the cone is preserved (X -> t X).
  void equilibrate();
  void compute_scaling(const Eigen::VectorXd& xz, const Eigen::VectorXd& sz);
  Eigen::VectorXd apply_w2(const Eigen::VectorXd& v) const;
  void factor_kkt();
  void factor_aug() const;
  Eigen::MatrixXd minv_apply(Eigen::MatrixXd v) const;
  Eigen::VectorXd solve_aug(const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd solve_factored(const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd solve_kkt(const Eigen::VectorXd& rhs) const;
  Direction direction_once(const Eigen::VectorXd& t_dz, const Eigen::VectorXd& t_df,
                           const Eigen::VectorXd& t_p, double t_g,
                           const Eigen::VectorXd& gz, double dtk,
                           const Eigen::VectorXd& y1u1) const;
  Direction direction(double eta, const Eigen::VectorXd& gz, double dtk,
                      const Eigen::VectorXd& y1u1) const;
  double max_step(const Eigen::VectorXd& xz, const Eigen::VectorXd& sz, const Direction& d,
                  double tau, double kappa) const;
  double psd_block_min_eig(const Eigen::MatrixXd& chol_l, const Eigen::MatrixXd& delta) const;

  ConicSolution snapshot(SolveStatus status) const;

  const ConicProblem& orig_;
  SolverSettings st_;
  int m_ = 0, nf_ = 0, nn_ = 0, nz_ = 0;
  std::vector<int> sides_;
  std::vector<int> psd_off_;
  double nu_ = 0.0;

  SpMat Af_, Az_;
  Eigen::VectorXd b_, cf_, cz_;
  Eigen::VectorXd dr_, dcf_, dcz_;  // equilibration scalings

  // iterate
  Eigen::VectorXd xf_, xz_, y_, sz_;
  double tau_ = 1.0, kappa_ = 1.0;

  // per-iteration state
  Eigen::ArrayXd w2_;
  std::vector<PsdScale> psd_;
  Eigen::MatrixXd mzz_, kkt_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  mutable Eigen::BDCSVD<Eigen::MatrixXd> svd_;
  mutable bool svd_ready_ = false;
  Eigen::VectorXd jac_;
  Eigen::MatrixXd half_;
  mutable Eigen::MatrixXd aug_r_;         // m x m Cholesky-like factor of Half'Half
  mutable Eigen::VectorXd aug_colscale_;  // column equilibration of Half
  mutable Eigen::LDLT<Eigen::MatrixXd> aug_schur_;  // free-block coupling
  mutable bool use_aug_ = false;
  mutable bool aug_ready_ = false;
  const double reg_scale_ = 1e-12;
  mutable double kkt_rel_err_ = 0.0;
  mutable double aug_rel_err_ = 0.0;
  Eigen::VectorXd wc_, awc_;
  double cz_w_cz_ = 0.0;
  Eigen::VectorXd r_p_, r_df_, r_dz_;
  double r_g_ = 0.0;

  // best iterate seen, in original coordinates
  double best_metric_ = kInf;
  Eigen::VectorXd best_x_, best_y_, best_s_;
  double best_obj_ = 0.0, best_pres_ = kInf, best_dres_ = kInf, best_gap_ = kInf;
  int iters_done_ = 0;
};

void Hsde::equilibrate() {
  const int n = nf_ + nz_;
  dr_ = Eigen::VectorXd::Ones(m_);
  Eigen::VectorXd dc = Eigen::VectorXd::Ones(n);

  // column group id per column: free and nonneg columns are their own group,
  // PSD block columns share one.
  std::vector<int> group(n);
  int ngroups = 0;
  for (int j = 0; j < nf_ + nn_; ++j) group[j] = ngroups++;
  for (std::size_t k = 0; k < sides_.size(); ++k) {
    const int len = svec_length(sides_[k]);
    for (int t = 0; t < len; ++t) group[nf_ + psd_off_[k] + t] = ngroups;
    ++ngroups;
  }

  for (int pass = 0; pass < 5; ++pass) {
    Eigen::VectorXd rown = Eigen::VectorXd::Zero(m_);
    Eigen::VectorXd grpn = Eigen::VectorXd::Zero(ngroups);
    for (int r = 0; r < orig_.A.outerSize(); ++r)
      for (SpMat::InnerIterator it(orig_.A, r); it; ++it) {
        const double a = std::abs(dr_[r] * it.value() * dc[it.col()]);
        rown[r] = std::max(rown[r], a);
        grpn[group[it.col()]] = std::max(grpn[group[it.col()]], a);
      }
    for (int r = 0; r < m_; ++r)
      if (rown[r] > 0.0) dr_[r] /= std::sqrt(rown[r]);
    for (int j = 0; j < n; ++j)
      if (grpn[group[j]] > 0.0) dc[j] /= std::sqrt(grpn[group[j]]);
  }

  dcf_ = dc.head(nf_);
  dcz_ = dc.tail(nz_);

  std::vector<Eigen::Triplet<double>> tf, tz;
  for (int r = 0; r < orig_.A.outerSize(); ++r)
    for (SpMat::InnerIterator it(orig_.A, r); it; ++it) {
      const double v = dr_[r] * it.value() * dc[it.col()];
      if (it.col() < nf_)
        tf.emplace_back(r, static_cast<int>(it.col()), v);
      else
        tz.emplace_back(r, static_cast<int>(it.col()) - nf_, v);
    }
  Af_.resize(m_, nf_);
  Af_.setFromTriplets(tf.begin(), tf.end());
  Az_.resize(m_, nz_);
  Az_.setFromTriplets(tz.begin(), tz.end());
  b_ = dr_.cwiseProduct(orig_.b);
  cf_ = dcf_.cwiseProduct(orig_.c.head(nf_));
  cz_ = dcz_.cwiseProduct(orig_.c.tail(nz_));
}

void Hsde::compute_scaling(const Eigen::VectorXd& xz, const Eigen::VectorXd& sz) {
  w2_ = xz.head(nn_).array() / sz.head(nn_).array();
  if (!w2_.allFinite() || (w2_ <= 0.0).any()) {
    if (st_.verbosity >= 2) std::printf("      trouble: nonneg scaling invalid\n");
    throw NumericalTrouble{};
  }
  psd_.assign(sides_.size(), {});
  for (std::size_t k = 0; k < sides_.size(); ++k) {
    const int side = sides_[k], off = psd_off_[k], len = svec_length(side);
    const Eigen::MatrixXd xm = unsvec(xz.segment(off, len));
    const Eigen::MatrixXd sm = unsvec(sz.segment(off, len));
    Eigen::LLT<Eigen::MatrixXd> lltx(xm), llts(sm);
    if (lltx.info() != Eigen::Success || llts.info() != Eigen::Success) {
      if (st_.verbosity >= 2) std::printf("      trouble: PSD block Cholesky failed\n");
      throw NumericalTrouble{};
    }
    PsdScale& ps = psd_[k];
    ps.Lx = lltx.matrixL();
    ps.Ls = llts.matrixL();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ps.Ls.transpose() * ps.Lx,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    ps.lam = svd.singularValues();
    if (ps.lam.minCoeff() <= 0.0 || !ps.lam.allFinite()) {
      if (st_.verbosity >= 2) std::printf("      trouble: NT eigenvalues degenerate\n");
      throw NumericalTrouble{};
    }
    const Eigen::ArrayXd root = ps.lam.array().sqrt();
    ps.R = ps.Lx * svd.matrixV() * root.inverse().matrix().asDiagonal();
    ps.Rinv = root.inverse().matrix().asDiagonal() * svd.matrixU().transpose() *
              ps.Ls.transpose();
    ps.W = ps.R * ps.R.transpose();
  }
}

Eigen::VectorXd Hsde::apply_w2(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(nz_);
  out.head(nn_) = (w2_ * v.head(nn_).array()).matrix();
  for (std::size_t k = 0; k < sides_.size(); ++k) {
    const int off = psd_off_[k], len = svec_length(sides_[k]);
    const Eigen::MatrixXd vm = unsvec(v.segment(off, len));
    out.segment(off, len) = svec(psd_[k].W * vm * psd_[k].W);
  }
  return out;
}

void Hsde::factor_kkt() {
  // Half = W^{1/2} Az', column r holds the scaled row r of Az; the normal
  // matrix Az W^2 Az' = Half' Half is then symmetric PSD by construction,
  // which loses less to cancellation than forming Az (W^2 Az') directly.
  half_.setZero(nz_, m_);
  Eigen::MatrixXd& half = half_;
  const Eigen::ArrayXd wroot = w2_.sqrt();
  std::vector<Eigen::VectorXd> scratch(sides_.size());
  for (std::size_t k = 0; k < sides_.size(); ++k)
    scratch[k] = Eigen::VectorXd::Zero(svec_length(sides_[k]));
  std::vector<char> touched(sides_.size(), 0);
  for (int r = 0; r < m_; ++r) {
    std::vector<std::size_t> blocks;
    for (SpMat::InnerIterator it(Az_, r); it; ++it) {
      const int col = static_cast<int>(it.col());
      if (col < nn_) {
        half(col, r) = wroot[col] * it.value();
        continue;
      }
      const std::size_t k =
          static_cast<std::size_t>(std::upper_bound(psd_off_.begin(), psd_off_.end(), col) -
                                   psd_off_.begin()) - 1;
      scratch[k][col - psd_off_[k]] = it.value();
      if (!touched[k]) {
        touched[k] = 1;
        blocks.push_back(k);
      }
    }
    for (std::size_t k : blocks) {
      const int off = psd_off_[k], len = svec_length(sides_[k]);
      const Eigen::MatrixXd vm = unsvec(scratch[k]);
      half.col(r).segment(off, len) =
          svec(psd_[k].R.transpose() * vm * psd_[k].R);
      scratch[k].setZero();
      touched[k] = 0;
    }
  }

  svd_ready_ = false;
  aug_ready_ = false;
  if (use_aug_) return;  // the augmented path is sticky; skip the normal form

  mzz_.noalias() = half.transpose() * half;

  const int dim = m_ + nf_;
  kkt_.setZero(dim, dim);
  kkt_.topLeftCorner(m_, m_) = mzz_;
  if (nf_ > 0) {
    kkt_.topRightCorner(m_, nf_) = Eigen::MatrixXd(Af_);
    kkt_.bottomLeftCorner(nf_, m_) = kkt_.topRightCorner(m_, nf_).transpose();
  }
  const double reg =
      reg_scale_ * (1.0 + (m_ > 0 ? mzz_.diagonal().cwiseAbs().maxCoeff() : 0.0));
  kkt_.topLeftCorner(m_, m_).diagonal().array() += reg;
  kkt_.bottomRightCorner(nf_, nf_).diagonal().array() -= reg;

  // Partial-pivoted LU is not scale invariant and the normal-matrix diagonal
  // spans many orders of magnitude near convergence; factor the symmetrically
  // Jacobi-scaled matrix instead so the pivots stay meaningful.
  jac_ = kkt_.diagonal().cwiseAbs().cwiseMax(reg).cwiseSqrt();
  kkt_ = jac_.cwiseInverse().asDiagonal() * kkt_ * jac_.cwiseInverse().asDiagonal();
  lu_.compute(kkt_);
}

// Augmented form of the same system: with H = W^{1/2} Az' and auxiliary
// p = -H y, solving
//   [ I    H    0  ] [p]   [ 0  ]
//   [ H'   0    Af ] [y] = [-r1 ]
//   [ 0    Af'  0  ] [u]   [ r2 ]
// gives (y, -u) solving the normal system.  Its condition number grows like
// the scaling W, not W^2, so it stays usable long after the normal form
// degrades.  Rather than factoring the full (nz+m+nf)^2 matrix, eliminate p:
// the middle block becomes least squares in H, handled by a QR of the
// column-equilibrated H stacked on sqrt(reg) I (a Tikhonov floor, so R is
// full rank and the shift stays relative per column).  The free block then
// couples through the small Schur complement Af' (H'H)^{-1} Af.
void Hsde::factor_aug() const {
  aug_colscale_.resize(m_);
  for (int j = 0; j < m_; ++j)
    aug_colscale_[j] = std::max(half_.col(j).norm(), reg_scale_);
  Eigen::MatrixXd stacked(nz_ + m_, m_);
  stacked.topRows(nz_) = half_ * aug_colscale_.cwiseInverse().asDiagonal();
  stacked.bottomRows(m_) =
      std::sqrt(reg_scale_) * Eigen::MatrixXd::Identity(m_, m_);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
  aug_r_ = qr.matrixQR().topRows(m_).triangularView<Eigen::Upper>();
  if (nf_ > 0) {
    const Eigen::MatrixXd maf = minv_apply(Eigen::MatrixXd(Af_));
    Eigen::MatrixXd schur = Af_.transpose() * maf;
    schur.diagonal() += reg_scale_ * (Eigen::VectorXd::Ones(nf_) +
                                      schur.diagonal().cwiseAbs());
    aug_schur_.compute(schur);
  }
  aug_ready_ = true;
}

// (Half' Half)^{-1} columnwise through the QR factor: R'R equals the
// column-scaled normal matrix plus the Tikhonov floor.
Eigen::MatrixXd Hsde::minv_apply(Eigen::MatrixXd v) const {
  v = aug_colscale_.cwiseInverse().asDiagonal() * v;
  aug_r_.transpose().triangularView<Eigen::Lower>().solveInPlace(v);
  aug_r_.triangularView<Eigen::Upper>().solveInPlace(v);
  return aug_colscale_.cwiseInverse().asDiagonal() * v;
}

Eigen::VectorXd Hsde::solve_aug(const Eigen::VectorXd& rhs) const {
  const int dim = nz_ + m_ + nf_;
  Eigen::VectorXd ext = Eigen::VectorXd::Zero(dim);
  ext.segment(nz_, m_) = -rhs.head(m_);
  ext.tail(nf_) = rhs.tail(nf_);

  // Refine against the augmented operator itself: its norm grows like W
  // where the normal matrix grows like W^2, so double-precision residuals
  // stay meaningful for many more iterations of scaling spread.
  auto apply = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd a(dim);
    a.head(nz_) = z.head(nz_);
    a.head(nz_).noalias() += half_ * z.segment(nz_, m_);
    a.segment(nz_, m_).noalias() = half_.transpose() * z.head(nz_);
    if (nf_ > 0) {
      a.segment(nz_, m_) += Af_ * z.tail(nf_);
      a.tail(nf_) = Af_.transpose() * z.segment(nz_, m_);
    }
    return a;
  };
  // Block elimination: p = ra - H y, (H'H) y = H'ra - rb + Af u, and u from
  // the Schur system.  Each piece is solved through the QR factor.
  auto precond = [&](const Eigen::VectorXd& r) {
    const Eigen::VectorXd q =
        half_.transpose() * r.head(nz_) - r.segment(nz_, m_);
    Eigen::VectorXd z(dim);
    if (nf_ > 0) {
      const Eigen::VectorXd mq = minv_apply(q);
      z.tail(nf_) = aug_schur_.solve(r.tail(nf_) - Af_.transpose() * mq);
      z.segment(nz_, m_) = minv_apply(q + Af_ * z.tail(nf_));
    } else {
      z.segment(nz_, m_) = minv_apply(q);
    }
    z.head(nz_) = r.head(nz_) - half_ * z.segment(nz_, m_);
    return z;
  };

  const double scale = 1.0 + ext.lpNorm<Eigen::Infinity>();
  Eigen::VectorXd z = precond(ext);
  Eigen::VectorXd resid = ext - apply(z);
  double rnorm = resid.lpNorm<Eigen::Infinity>();
  for (int sweep = 0; sweep < 50 && rnorm > 1e-14 * scale; ++sweep) {
    const Eigen::VectorXd next = z + precond(resid);
    const Eigen::VectorXd nresid = ext - apply(next);
    const double nnorm = nresid.lpNorm<Eigen::Infinity>();
    if (!(nnorm < rnorm)) break;
    z = next;
    resid = nresid;
    rnorm = nnorm;
  }
  aug_rel_err_ = rnorm / scale;

  Eigen::VectorXd out(m_ + nf_);
  out.head(m_) = z.segment(nz_, m_);
  out.tail(nf_) = -z.tail(nf_);
  return out;
}

Eigen::VectorXd Hsde::solve_factored(const Eigen::VectorXd& rhs) const {
  if (use_aug_) {
    if (!aug_ready_) factor_aug();
    return solve_aug(rhs);
  }
  return jac_.cwiseInverse().cwiseProduct(lu_.solve(jac_.cwiseInverse().cwiseProduct(rhs)));
}

Eigen::VectorXd Hsde::solve_kkt(const Eigen::VectorXd& rhs) const {
  if (rhs.size() == 0) {
    kkt_rel_err_ = 0.0;
    return rhs;
  }
  // Refine against the factored operator Az W^2 Az' rather than the formed
  // product: near convergence the product matrix loses the small entries
  // that decide feasibility at the 1e-8 level.  The LU of the regularized
  // matrix acts as a preconditioner, so refinement converges to the solution
  // of the unregularized system as long as each sweep contracts.
  auto residual = [&](const Eigen::VectorXd& s) {
    Eigen::VectorXd r = rhs;
    r.head(m_) -= Az_ * apply_w2(Az_.transpose() * s.head(m_)) + Af_ * s.tail(nf_);
    r.tail(nf_) -= Af_.transpose() * s.head(m_);
    return r;
  };
  const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  const double target = 1e-14 * scale;
  auto refine = [&](Eigen::VectorXd sol, double& out_norm) {
    Eigen::VectorXd resid = residual(sol);
    double rnorm = resid.lpNorm<Eigen::Infinity>();
    for (int sweep = 0; sweep < 50 && rnorm > target; ++sweep) {
      const Eigen::VectorXd next = sol + solve_factored(resid);
      const Eigen::VectorXd nresid = residual(next);
      const double nnorm = nresid.lpNorm<Eigen::Infinity>();
      if (!(nnorm < rnorm)) break;
      sol = next;
      resid = nresid;
      rnorm = nnorm;
    }
    out_norm = rnorm;
    return sol;
  };

  double rnorm = kInf;
  Eigen::VectorXd sol;
  if (use_aug_) {
    // Residuals measured through the normal matrix drown in its condition
    // number; the augmented solve carries its own, better-conditioned
    // measurement, so trust that instead of re-measuring here.
    if (!aug_ready_) factor_aug();
    sol = solve_aug(rhs);
    rnorm = aug_rel_err_ * scale;
  } else {
    sol = refine(solve_factored(rhs), rnorm);
  }

  // The normal form squares the scaling's condition number; once its LU can
  // no longer support refinement, switch (stickily) to the augmented form
  // whose conditioning grows like W instead of W^2.
  if (rnorm > 1e-9 * scale && !use_aug_) {
    if (!aug_ready_) factor_aug();
    const Eigen::VectorXd alt = solve_aug(rhs);
    const double anorm = aug_rel_err_ * scale;
    if (st_.verbosity >= 2)
      std::printf("      aug fallback: normal %.2e -> aug %.2e (scale %.2e)\n",
                  rnorm / scale, anorm / scale, scale);
    if (anorm < rnorm) {
      use_aug_ = true;
      sol = alt;
      rnorm = anorm;
    }
  }

  // Last resort: a truncated SVD start suppresses components along the
  // near-null space of the KKT matrix that stall LU refinement.
  if (rnorm > 1e-9 * scale && !use_aug_) {
    if (!svd_ready_) {
      svd_.compute(kkt_, Eigen::ComputeThinU | Eigen::ComputeThinV);
      svd_ready_ = true;
    }
    const Eigen::VectorXd scaled_rhs = jac_.cwiseInverse().cwiseProduct(rhs);
    const Eigen::VectorXd svd_sol =
        jac_.cwiseInverse().cwiseProduct(svd_.solve(scaled_rhs));
    double snorm = kInf;
    const Eigen::VectorXd alt = refine(svd_sol, snorm);
    if (snorm < rnorm) {
      sol = alt;
      rnorm = snorm;
    }
  }

  kkt_rel_err_ = rnorm / scale;
  if (!sol.allFinite()) {
    if (st_.verbosity >= 2) std::printf("      trouble: KKT solution not finite\n");
    throw NumericalTrouble{};
  }
  return sol;
}

Direction Hsde::direction_once(const Eigen::VectorXd& t_dz, const Eigen::VectorXd& t_df,
                               const Eigen::VectorXd& t_p, double t_g,
                               const Eigen::VectorXd& gz, double dtk,
                               const Eigen::VectorXd& y1u1) const {
  Eigen::VectorXd rhs(m_ + nf_);
  rhs.head(m_) = t_p - Az_ * (gz - apply_w2(t_dz));
  rhs.tail(nf_) = t_df;
  const Eigen::VectorXd y2u2 = solve_kkt(rhs);
  if (kkt_rel_err_ > 1e-2) {
    if (st_.verbosity >= 2)
      std::printf("      trouble: KKT rel err %.2e beyond direction gate\n", kkt_rel_err_);
    throw NumericalTrouble{};
  }

  auto phi = [&](const Eigen::VectorXd& yu) {
    double v = b_.dot(yu.head(m_)) - awc_.dot(yu.head(m_));
    if (nf_ > 0) v -= cf_.dot(yu.tail(nf_));
    return v;
  };
  const double den = phi(y1u1) + cz_w_cz_ + kappa_ / tau_;
  const double num = t_g + cz_.dot(gz) - wc_.dot(t_dz) + dtk / tau_ - phi(y2u2);
  if (!(std::abs(den) > 1e-14 * (1.0 + std::abs(num)))) {
    if (st_.verbosity >= 2)
      std::printf("      trouble: tau pivot degenerate (num %.2e den %.2e)\n", num, den);
    throw NumericalTrouble{};
  }

  Direction d;
  d.dtau = num / den;
  d.dy = y2u2.head(m_) + d.dtau * y1u1.head(m_);
  d.dxf = y2u2.tail(nf_) + d.dtau * y1u1.tail(nf_);
  d.dsz = t_dz - Az_.transpose() * d.dy + cz_ * d.dtau;
  d.dxz = gz - apply_w2(d.dsz);
  d.dkappa = (dtk - kappa_ * d.dtau) / tau_;
  if (!d.dxz.allFinite() || !d.dsz.allFinite() || !std::isfinite(d.dtau)) {
    if (st_.verbosity >= 2) std::printf("      trouble: direction not finite\n");
    throw NumericalTrouble{};
  }
  return d;
}

Direction Hsde::direction(double eta, const Eigen::VectorXd& gz, double dtk,
                          const Eigen::VectorXd& y1u1) const {
  const Eigen::VectorXd t_dz = -eta * r_dz_;
  const Eigen::VectorXd t_df = -eta * r_df_;
  const Eigen::VectorXd t_p = -eta * r_p_;
  const double t_g = -eta * r_g_;
  Direction d = direction_once(t_dz, t_df, t_p, t_g, gz, dtk, y1u1);

  // The elimination reconstructs dxz through W^2, which amplifies rounding
  // in dy by the scaling condition number near convergence.  Refine against
  // the full linearized system so the equality residuals keep contracting in
  // step with complementarity instead of drifting.
  const double scale = 1.0 + std::max({t_dz.lpNorm<Eigen::Infinity>(),
                                       t_p.lpNorm<Eigen::Infinity>(),
                                       gz.lpNorm<Eigen::Infinity>(),
                                       std::abs(t_g), std::abs(dtk)});
  for (int sweep = 0; sweep < 3; ++sweep) {
    const Eigen::VectorXd rdz = t_dz - (Az_.transpose() * d.dy + d.dsz - cz_ * d.dtau);
    const Eigen::VectorXd rdf = t_df - (Af_.transpose() * d.dy - cf_ * d.dtau);
    const Eigen::VectorXd rp =
        t_p - (Az_ * d.dxz + Af_ * d.dxf - b_ * d.dtau);
    const double rg =
        t_g - (-cz_.dot(d.dxz) - cf_.dot(d.dxf) + b_.dot(d.dy) - d.dkappa);
    const Eigen::VectorXd rgz = gz - (d.dxz + apply_w2(d.dsz));
    const double rtk = dtk - (tau_ * d.dkappa + kappa_ * d.dtau);
    const double rn = std::max({rdz.lpNorm<Eigen::Infinity>(), rdf.lpNorm<Eigen::Infinity>(),
                                rp.lpNorm<Eigen::Infinity>(), rgz.lpNorm<Eigen::Infinity>(),
                                std::abs(rg), std::abs(rtk)});
    if (rn <= 1e-13 * scale) break;
    const Direction c = direction_once(rdz, rdf, rp, rg, rgz, rtk, y1u1);
    d.dy += c.dy;
    d.dxf += c.dxf;
    d.dxz += c.dxz;
    d.dsz += c.dsz;
    d.dtau += c.dtau;
    d.dkappa += c.dkappa;
  }
  return d;
}

double Hsde::psd_block_min_eig(const Eigen::MatrixXd& chol_l,
                               const Eigen::MatrixXd& delta) const {
  const Eigen::MatrixXd tmp =
      chol_l.triangularView<Eigen::Lower>().solve(delta);
  const Eigen::MatrixXd scaled =
      chol_l.triangularView<Eigen::Lower>().solve(tmp.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (scaled + scaled.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double Hsde::max_step(const Eigen::VectorXd& xz, const Eigen::VectorXd& sz,
                      const Direction& d, double tau, double kappa) const {
  double alpha = kInf;
  for (int i = 0; i < nn_; ++i) {
    if (d.dxz[i] < 0.0) alpha = std::min(alpha, -xz[i] / d.dxz[i]);
    if (d.dsz[i] < 0.0) alpha = std::min(alpha, -sz[i] / d.dsz[i]);
  }
  for (std::size_t k = 0; k < sides_.size(); ++k) {
    const int off = psd_off_[k], len = svec_length(sides_[k]);
    const double ex = psd_block_min_eig(psd_[k].Lx, unsvec(d.dxz.segment(off, len)));
    if (ex < 0.0) alpha = std::min(alpha, -1.0 / ex);
    const double es = psd_block_min_eig(psd_[k].Ls, unsvec(d.dsz.segment(off, len)));
    if (es < 0.0) alpha = std::min(alpha, -1.0 / es);
  }
  if (d.dtau < 0.0) alpha = std::min(alpha, -tau / d.dtau);
  if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa / d.dkappa);
  return alpha;
}

ConicSolution Hsde::snapshot(SolveStatus status) const {
  ConicSolution sol;
  sol.status = status;
  sol.x = best_x_;
  sol.y = best_y_;
  sol.s = best_s_;
  sol.objective_value = best_obj_;
  sol.primal_residual = best_pres_;
  sol.dual_residual = best_dres_;
  sol.gap = best_gap_;
  sol.iterations = iters_done_;
  return sol;
}

ConicSolution Hsde::run() {
  const int n = nf_ + nz_;
  xf_ = Eigen::VectorXd::Zero(nf_);
  y_ = Eigen::VectorXd::Zero(m_);
  xz_ = Eigen::VectorXd::Zero(nz_);
  xz_.head(nn_).setOnes();
  for (std::size_t k = 0; k < sides_.size(); ++k) {
    const int side = sides_[k];
    for (int i = 0; i < side; ++i) xz_[psd_off_[k] + svec_index(side, i, i)] = 1.0;
  }
  sz_ = xz_;
  tau_ = 1.0;
  kappa_ = 1.0;

  const double bnorm = orig_.b.norm();
  const double cnorm = orig_.c.norm();
  bool numerical_flag = false;
  int stall = 0;
  best_x_ = Eigen::VectorXd::Zero(n);
  best_y_ = Eigen::VectorXd::Zero(m_);
  best_s_ = Eigen::VectorXd::Zero(n);

  for (int iter = 0;; ++iter) {
    iters_done_ = iter;

    // Candidate in original coordinates and its exact residuals.
    Eigen::VectorXd x(n), s(n);
    x.head(nf_) = dcf_.cwiseProduct(xf_) / tau_;
    x.tail(nz_) = dcz_.cwiseProduct(xz_) / tau_;
    s.head(nf_).setZero();
    s.tail(nz_) = sz_.cwiseQuotient(dcz_) / tau_;
    const Eigen::VectorXd yo = dr_.cwiseProduct(y_) / tau_;
    const double pcost = orig_.c.dot(x);
    const double dcost = orig_.b.dot(yo);
    const double pres = (orig_.A * x - orig_.b).norm() / (1.0 + bnorm);
    const double dres =
        (orig_.A.transpose() * yo + s - orig_.c).norm() / (1.0 + cnorm);
    const double relgap = std::abs(pcost - dcost) / (1.0 + std::abs(pcost) + std::abs(dcost));
    const double metric = std::max({pres, dres, relgap});

    if (st_.verbosity >= 1)
      std::printf("it %3d  pres %9.2e  dres %9.2e  gap %9.2e  cgap %9.2e  obj % .6e  tau %8.2e\n",
                  iter, pres, dres, relgap,
                  (xz_.dot(sz_) + tau_ * kappa_) / (tau_ * tau_) /
                      (1.0 + std::abs(pcost) + std::abs(dcost)),
                  pcost, tau_);

    if (std::isfinite(metric) && metric < best_metric_) {
      if (metric < 0.999 * best_metric_) stall = 0;
      best_metric_ = metric;
      best_x_ = x;
      best_y_ = yo;
      best_s_ = s;
      best_obj_ = pcost;
      best_pres_ = pres;
      best_dres_ = dres;
      best_gap_ = relgap;
    } else {
      ++stall;
    }

    // Divergence or stagnation: the complementarity keeps shrinking while
    // feasibility drifts once the scaling outruns the linear algebra.  Stop
    // and report the best iterate instead of looping to the iteration cap.
    if (stall >= 12 || (std::isfinite(metric) && metric > 1e4 * best_metric_)) {
      numerical_flag = true;
      break;
    }

    if (pres <= st_.feas_tol && dres <= st_.feas_tol && relgap <= st_.gap_tol)
      return snapshot(SolveStatus::optimal);

    // Farkas certificates, tested on tau-free unscaled iterates.
    {
      const Eigen::VectorXd yu = dr_.cwiseProduct(y_);
      Eigen::VectorXd su(n);
      su.head(nf_).setZero();
      su.tail(nz_) = sz_.cwiseQuotient(dcz_);
      const double by = orig_.b.dot(yu);
      if (by > 0.0) {
        const Eigen::VectorXd yh = yu / by, sh = su / by;
        if ((orig_.A.transpose() * yh + sh).norm() <= st_.feas_tol * (1.0 + yh.norm())) {
          best_x_ = Eigen::VectorXd::Zero(n);
          best_y_ = yh;
          best_s_ = sh;
          best_obj_ = std::numeric_limits<double>::quiet_NaN();
          return snapshot(SolveStatus::primal_infeasible);
        }
      }
      Eigen::VectorXd xu(n);
      xu.head(nf_) = dcf_.cwiseProduct(xf_);
      xu.tail(nz_) = dcz_.cwiseProduct(xz_);
      const double cx = orig_.c.dot(xu);
      if (cx < 0.0) {
        const Eigen::VectorXd xh = xu / (-cx);
        if ((orig_.A * xh).norm() <= st_.feas_tol * (1.0 + xh.norm())) {
          best_x_ = xh;
          best_y_ = Eigen::VectorXd::Zero(m_);
          best_s_ = Eigen::VectorXd::Zero(n);
          best_obj_ = std::numeric_limits<double>::quiet_NaN();
          return snapshot(SolveStatus::dual_infeasible);
        }
      }
    }

    if (!std::isfinite(metric) || tau_ < 1e-12) {
      numerical_flag = true;
      break;
    }
    if (iter >= st_.max_iterations) break;

    // Scaled residuals of the homogeneous system.
    r_df_ = Af_.transpose() * y_ - cf_ * tau_;
    r_dz_ = Az_.transpose() * y_ + sz_ - cz_ * tau_;
    r_p_ = Af_ * xf_ + Az_ * xz_ - b_ * tau_;
    r_g_ = -cf_.dot(xf_) - cz_.dot(xz_) + b_.dot(y_) - kappa_;
    const double mu = (xz_.dot(sz_) + tau_ * kappa_) / (nu_ + 1.0);

    try {
      compute_scaling(xz_, sz_);
      factor_kkt();
      wc_ = apply_w2(cz_);
      awc_ = Az_ * wc_;
      cz_w_cz_ = cz_.dot(wc_);

      Eigen::VectorXd rhs1(m_ + nf_);
      rhs1.head(m_) = b_ + awc_;
      rhs1.tail(nf_) = cf_;
      const Eigen::VectorXd y1u1 = solve_kkt(rhs1);
      if (st_.verbosity >= 2) {
        double lam_min = kInf, lam_max = 0.0;
        for (const auto& ps : psd_) {
          lam_min = std::min(lam_min, ps.lam.minCoeff());
          lam_max = std::max(lam_max, ps.lam.maxCoeff());
        }
        std::printf(
            "    kkt rel err %.2e mu %.2e  w2 [%.1e,%.1e] lam [%.1e,%.1e] "
            "diag [%.1e,%.1e]\n",
            kkt_rel_err_, mu, nn_ > 0 ? w2_.minCoeff() : 0.0,
            nn_ > 0 ? w2_.maxCoeff() : 0.0, lam_min, lam_max,
            mzz_.diagonal().minCoeff(), mzz_.diagonal().maxCoeff());
      }

      // Predictor.
      const Direction aff = direction(1.0, -xz_, -tau_ * kappa_, y1u1);
      const double a_aff = std::min(1.0, max_step(xz_, sz_, aff, tau_, kappa_));
      const double mu_aff =
          ((xz_ + a_aff * aff.dxz).dot(sz_ + a_aff * aff.dsz) +
           (tau_ + a_aff * aff.dtau) * (kappa_ + a_aff * aff.dkappa)) /
          (nu_ + 1.0);
      double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

      // Corrector target.
      Eigen::VectorXd gz(nz_);
      for (int i = 0; i < nn_; ++i)
        gz[i] = (sigma * mu - xz_[i] * sz_[i] - aff.dxz[i] * aff.dsz[i]) / sz_[i];
      for (std::size_t k = 0; k < sides_.size(); ++k) {
        const int off = psd_off_[k], len = svec_length(sides_[k]);
        const PsdScale& ps = psd_[k];
        const Eigen::MatrixXd dxh =
            ps.Rinv * unsvec(aff.dxz.segment(off, len)) * ps.Rinv.transpose();
        const Eigen::MatrixXd dsh =
            ps.R.transpose() * unsvec(aff.dsz.segment(off, len)) * ps.R;
        Eigen::MatrixXd t = -0.5 * (dxh * dsh + dsh * dxh);
        t.diagonal().array() += sigma * mu;
        t.diagonal() -= ps.lam.cwiseProduct(ps.lam);
        Eigen::MatrixXd dt(t.rows(), t.cols());
        for (int i = 0; i < t.rows(); ++i)
          for (int j = 0; j < t.cols(); ++j)
            dt(i, j) = 2.0 * t(i, j) / (ps.lam[i] + ps.lam[j]);
        gz.segment(off, len) = svec(ps.R * dt * ps.R.transpose());
      }
      const double dtk = sigma * mu - tau_ * kappa_ - aff.dtau * aff.dkappa;

      const Direction dir = direction(1.0 - sigma, gz, dtk, y1u1);
      const double alpha = std::min(1.0, 0.99 * max_step(xz_, sz_, dir, tau_, kappa_));
      if (st_.verbosity >= 2)
        std::printf("      a_aff %.3e sigma %.3e alpha %.3e\n", a_aff, sigma, alpha);
      if (alpha < 1e-8) {
        numerical_flag = true;
        break;
      }
      xf_ += alpha * dir.dxf;
      xz_ += alpha * dir.dxz;
      y_ += alpha * dir.dy;
      sz_ += alpha * dir.dsz;
      tau_ += alpha * dir.dtau;
      kappa_ += alpha * dir.dkappa;
    } catch (const NumericalTrouble&) {
      numerical_flag = true;
      break;
    }
  }

  const bool near = best_pres_ <= 1e3 * st_.feas_tol && best_dres_ <= 1e3 * st_.feas_tol &&
                    best_gap_ <= 1e3 * st_.gap_tol;
  if (near) return snapshot(SolveStatus::near_optimal);
  return snapshot(numerical_flag ? SolveStatus::numerical_error : SolveStatus::iteration_limit);
}

}  // namespace

ConicSolution solve(const ConicProblem& problem, const SolverSettings& settings) {
  problem.check_well_formed();
  settings.validate();

  const int n = problem.cones.total_dim();
  if (n == 0) {
    ConicSolution sol;
    sol.x.resize(0);
    sol.s.resize(0);
    sol.y = Eigen::VectorXd::Zero(problem.A.rows());
    if (problem.b.size() == 0 || problem.b.lpNorm<Eigen::Infinity>() == 0.0) {
      sol.status = SolveStatus::optimal;
    } else {
      sol.status = SolveStatus::primal_infeasible;
      sol.y = problem.b / problem.b.squaredNorm();
    }
    return sol;
  }

  try {
    Hsde solver(problem, settings);
    return solver.run();
  } catch (const std::exception&) {
    ConicSolution sol;
    sol.status = SolveStatus::numerical_error;
    sol.x = Eigen::VectorXd::Zero(n);
    sol.y = Eigen::VectorXd::Zero(problem.A.rows());
    sol.s = Eigen::VectorXd::Zero(n);
    return sol;
  }
}

ResidualReport verify_solution(const ConicProblem& problem, const ConicSolution& sol) {
  problem.check_well_formed();
  const int n = problem.cones.total_dim();
  if (sol.x.size() != n || sol.y.size() != problem.A.rows())
    throw Error("verify_solution: dimension mismatch");

  ResidualReport rep;
  rep.equality_residual = (problem.A * sol.x - problem.b).norm() / (1.0 + problem.b.norm());

  double mineig = kInf;
  const int nf = problem.cones.num_free;
  for (int i = 0; i < problem.cones.num_nonneg; ++i)
    mineig = std::min(mineig, sol.x[nf + i]);
  int off = nf + problem.cones.num_nonneg;
  for (int side : problem.cones.psd_sides) {
    const int len = svec_length(side);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(unsvec(sol.x.segment(off, len)),
                                                      Eigen::EigenvaluesOnly);
    mineig = std::min(mineig, es.eigenvalues().minCoeff());
    off += len;
  }
  rep.min_cone_eigenvalue = std::isfinite(mineig) ? mineig : 0.0;

  const double pcost = problem.c.dot(sol.x);
  const double dcost = problem.b.dot(sol.y);
  rep.duality_gap = std::abs(pcost - dcost) / (1.0 + std::abs(pcost) + std::abs(dcost));
  return rep;
}

}  // namespace attrax
