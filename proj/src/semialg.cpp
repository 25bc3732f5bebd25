#include "attrax/semialg.hpp"

#include <algorithm>
#include <cmath>

#include "attrax/rng.hpp"

namespace attrax {

namespace {

Polynomial bounding_ball_poly(int nvars, double r) {
  Polynomial g = Polynomial::constant(nvars, r * r);
  for (int i = 1; i <= nvars; ++i) {
    Polynomial xi = Polynomial::variable(nvars, i);
    g -= xi * xi;
  }
  return g;
}

Polynomial interval_poly(int nvars, int index, double lo, double hi) {
  Polynomial xi = Polynomial::variable(nvars, index);
  return (Polynomial::constant(nvars, hi) - xi) * (xi - Polynomial::constant(nvars, lo));
}

}  // namespace

SemialgebraicSet SemialgebraicSet::make_box(std::vector<double> lo, std::vector<double> hi,
                                            std::optional<double> ball_r) {
  if (lo.empty() || lo.size() != hi.size())
    throw Error("box: lo and hi must be nonempty and of equal length");
  const int n = static_cast<int>(lo.size());
  double corner_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(lo[i] < hi[i])) throw Error("box: need lo < hi in every coordinate");
    const double m = std::max(std::abs(lo[i]), std::abs(hi[i]));
    corner_sq += m * m;
  }
  const double corner = std::sqrt(corner_sq);
  const double r = ball_r.value_or(corner);
  if (r < corner * (1.0 - 1e-12))
    throw Error("box: bounding ball radius cuts the box (need >= largest corner norm)");

  SemialgebraicSet s;
  s.nvars = n;
  s.ball_radius = r;
  s.shape_hint = ShapeHint::box;
  s.box_lo = std::move(lo);
  s.box_hi = std::move(hi);
  for (int i = 0; i < n; ++i)
    s.inequalities.push_back(interval_poly(n, i + 1, s.box_lo[i], s.box_hi[i]));
  s.inequalities.push_back(bounding_ball_poly(n, r));
  return s;
}

SemialgebraicSet SemialgebraicSet::make_ball(int nvars, double r) {
  if (nvars < 1) throw Error("ball: nvars must be positive");
  if (!(r > 0.0)) throw Error("ball: radius must be positive");
  SemialgebraicSet s;
  s.nvars = nvars;
  s.ball_radius = r;
  s.shape_hint = ShapeHint::ball;
  s.radius = r;
  s.inequalities.push_back(bounding_ball_poly(nvars, r));
  return s;
}

SemialgebraicSet SemialgebraicSet::make_annulus(int nvars, double r0, double r,
                                                std::optional<double> ball_r) {
  if (nvars < 1) throw Error("annulus: nvars must be positive");
  if (!(0.0 < r0 && r0 < r)) throw Error("annulus: need 0 < inner radius < outer radius");
  const double rx = ball_r.value_or(r);
  if (rx < r * (1.0 - 1e-12))
    throw Error("annulus: bounding ball radius cuts the outer radius");
  SemialgebraicSet s;
  s.nvars = nvars;
  s.ball_radius = rx;
  s.shape_hint = ShapeHint::annulus;
  s.inner_radius = r0;
  s.outer_radius = r;
  s.inequalities.push_back(-bounding_ball_poly(nvars, r0));  // |x|^2 - r0^2
  s.inequalities.push_back(bounding_ball_poly(nvars, r));
  s.inequalities.push_back(bounding_ball_poly(nvars, rx));
  return s;
}

SemialgebraicSet SemialgebraicSet::make_generic(int nvars, std::vector<Polynomial> gs,
                                                double ball_r) {
  if (nvars < 1) throw Error("generic set: nvars must be positive");
  if (!(ball_r > 0.0)) throw Error("generic set: bounding ball radius must be positive");
  SemialgebraicSet s;
  s.nvars = nvars;
  s.ball_radius = ball_r;
  s.shape_hint = ShapeHint::generic;
  const Polynomial ball = bounding_ball_poly(nvars, ball_r);
  bool has_ball = false;
  for (auto& g : gs) {
    if (g.nvars() != nvars) throw Error("generic set: inequality over wrong variable count");
    if (g == ball) has_ball = true;
    s.inequalities.push_back(std::move(g));
  }
  if (!has_ball) s.inequalities.push_back(ball);
  return s;
}

bool SemialgebraicSet::contains(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(nvars))
    throw Error("contains: point has wrong dimension");
  for (const auto& g : inequalities)
    if (g.evaluate(x) < 0.0) return false;
  return true;
}

void SemialgebraicSet::validate() const {
  if (nvars < 1) throw Error("set has no variables");
  if (!(ball_radius > 0.0)) throw Error("set has no positive bounding ball radius");
  const Polynomial ball = bounding_ball_poly(nvars, ball_radius);
  bool has_ball = false;
  for (const auto& g : inequalities) has_ball = has_ball || g == ball;
  if (!has_ball) throw Error("set is missing its bounding ball inequality");

  auto expect_same = [&](const SemialgebraicSet& regen) {
    if (regen.inequalities.size() != inequalities.size())
      throw Error("shape parameters do not regenerate the inequality list");
    for (std::size_t i = 0; i < inequalities.size(); ++i)
      if (!(regen.inequalities[i] == inequalities[i]))
        throw Error("shape parameters do not regenerate the inequality list");
  };
  switch (shape_hint) {
    case ShapeHint::box:
      expect_same(make_box(box_lo, box_hi, ball_radius));
      break;
    case ShapeHint::ball:
      expect_same(make_ball(nvars, radius));
      break;
    case ShapeHint::annulus:
      expect_same(make_annulus(nvars, inner_radius, outer_radius, ball_radius));
      break;
    case ShapeHint::generic:
      break;
  }
}

double unit_ball_volume(int nvars) {
  const double pi = 3.14159265358979323846264338327950288;
  return std::pow(pi, nvars / 2.0) / std::tgamma(nvars / 2.0 + 1.0);
}

double SemialgebraicSet::bounding_volume() const {
  if (shape_hint == ShapeHint::box) {
    double v = 1.0;
    for (int i = 0; i < nvars; ++i) v *= box_hi[i] - box_lo[i];
    return v;
  }
  return unit_ball_volume(nvars) * std::pow(ball_radius, nvars);
}

namespace {

// Uniform proposal from the bounding region (the box itself, else the
// bounding ball via normalized Gaussian direction and radial inversion).
std::vector<double> propose(const SemialgebraicSet& X, Rng& rng) {
  const int n = X.nvars;
  std::vector<double> x(n);
  if (X.shape_hint == ShapeHint::box) {
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(X.box_lo[i], X.box_hi[i]);
    return x;
  }
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] = rng.normal();
      norm_sq += x[i] * x[i];
    }
  } while (norm_sq == 0.0);
  const double scale =
      X.ball_radius * std::pow(rng.uniform(), 1.0 / n) / std::sqrt(norm_sq);
  for (double& xi : x) xi *= scale;
  return x;
}

}  // namespace

std::vector<std::vector<double>> SemialgebraicSet::sample(int count, uint64_t seed) const {
  if (count < 1) throw Error("sample: count must be positive");
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  const long long cap = std::max<long long>(10'000'000, 1000LL * count);
  long long proposals = 0;
  while (static_cast<int>(out.size()) < count) {
    if (proposals >= cap)
      throw Error("sample: acceptance rate below 1e-6, set appears near-empty");
    std::vector<double> x = propose(*this, rng);
    ++proposals;
    if (contains(x)) out.push_back(std::move(x));
  }
  return out;
}

namespace {

double box_moment(const SemialgebraicSet& X, const Monomial& m) {
  double v = 1.0;
  for (int i = 0; i < X.nvars; ++i) {
    const double a = X.box_lo[i], b = X.box_hi[i];
    const double e = static_cast<double>(m.exponents[i]) + 1.0;
    v *= (std::pow(b, e) - std::pow(a, e)) / e;
  }
  return v;
}

// Integral of x^i y^j over the origin-centered planar disk of radius r.
// Polar factorization: radial part r^(i+j+2)/(i+j+2), angular part
// 2*pi * c(i/2) * c(j/2) / ((i+j)/2)! with c(p) = (2p-1)!!/2^p; odd
// exponents integrate to zero.
double disk_moment(double r, uint32_t i, uint32_t j) {
  if (i % 2 == 1 || j % 2 == 1) return 0.0;
  const double pi = 3.14159265358979323846264338327950288;
  auto half_prod = [](uint32_t p) {
    double c = 1.0;
    for (uint32_t t = 1; t <= p; ++t) c *= (2.0 * t - 1.0) / 2.0;
    return c;
  };
  const uint32_t p = i / 2, q = j / 2;
  double fact = 1.0;
  for (uint32_t t = 2; t <= p + q; ++t) fact *= t;
  const double angular = 2.0 * pi * half_prod(p) * half_prod(q) / fact;
  const double total = static_cast<double>(i + j);
  return angular * std::pow(r, total + 2.0) / (total + 2.0);
}

MomentVector monte_carlo_moments(const SemialgebraicSet& X, int max_degree,
                                 long long samples, uint64_t seed) {
  if (samples < 100) throw Error("moments: need at least 100 Monte Carlo samples");
  const auto basis = monomial_basis(X.nvars, max_degree);
  const std::size_t nb = basis.size();
  std::vector<double> sum(nb, 0.0), sum_sq(nb, 0.0);
  Rng rng(seed);
  std::vector<double> powers(static_cast<std::size_t>(X.nvars) * (max_degree + 1));
  for (long long s = 0; s < samples; ++s) {
    const std::vector<double> x = propose(X, rng);
    if (!X.contains(x)) continue;
    for (int i = 0; i < X.nvars; ++i) {
      double* row = &powers[static_cast<std::size_t>(i) * (max_degree + 1)];
      row[0] = 1.0;
      for (int e = 1; e <= max_degree; ++e) row[e] = row[e - 1] * x[i];
    }
    for (std::size_t k = 0; k < nb; ++k) {
      double h = 1.0;
      for (int i = 0; i < X.nvars; ++i)
        h *= powers[static_cast<std::size_t>(i) * (max_degree + 1) + basis[k].exponents[i]];
      sum[k] += h;
      sum_sq[k] += h * h;
    }
  }
  const double vol_prop = X.bounding_volume();
  const double inv_n = 1.0 / static_cast<double>(samples);
  MomentVector mv;
  mv.max_degree = max_degree;
  mv.method = MomentVector::Method::monte_carlo;
  mv.values.resize(nb);
  mv.standard_errors.emplace(nb, 0.0);
  for (std::size_t k = 0; k < nb; ++k) {
    const double mean = sum[k] * inv_n;
    const double var = std::max(0.0, sum_sq[k] * inv_n - mean * mean);
    mv.values[k] = vol_prop * mean;
    (*mv.standard_errors)[k] = vol_prop * std::sqrt(var * inv_n);
  }
  if (mv.values[0] <= 3.0 * (*mv.standard_errors)[0])
    throw Error("moments: volume estimate consistent with an empty set");
  return mv;
}

}  // namespace

MomentVector moments(const SemialgebraicSet& X, int max_degree,
                     std::optional<long long> mc_samples,
                     std::optional<uint64_t> seed) {
  if (max_degree < 0) throw Error("moments: max_degree must be nonnegative");
  const bool planar_radial =
      X.nvars == 2 &&
      (X.shape_hint == ShapeHint::ball || X.shape_hint == ShapeHint::annulus);
  if (X.shape_hint == ShapeHint::box || planar_radial) {
    const auto basis = monomial_basis(X.nvars, max_degree);
    MomentVector mv;
    mv.max_degree = max_degree;
    mv.method = MomentVector::Method::closed_form;
    mv.values.reserve(basis.size());
    for (const auto& m : basis) {
      double v;
      if (X.shape_hint == ShapeHint::box) {
        v = box_moment(X, m);
      } else if (X.shape_hint == ShapeHint::ball) {
        v = disk_moment(X.radius, m.exponents[0], m.exponents[1]);
      } else {
        v = disk_moment(X.outer_radius, m.exponents[0], m.exponents[1]) -
            disk_moment(X.inner_radius, m.exponents[0], m.exponents[1]);
      }
      mv.values.push_back(v);
    }
    return mv;
  }
  if (!mc_samples)
    throw Error("moments: this set has no closed form, pass a Monte Carlo sample count");
  return monte_carlo_moments(X, max_degree, *mc_samples, seed.value_or(0));
}

}  // namespace attrax
