#ifndef ATTRAX_SEMIALG_HPP
#define ATTRAX_SEMIALG_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "attrax/polynomial.hpp"

namespace attrax {

enum class ShapeHint { box, ball, annulus, generic };

// Compact basic semialgebraic set {x : g_i(x) >= 0 for all i}. Every set
// carries the redundant bounding-ball inequality R_X^2 - |x|^2 among its g_i.
struct SemialgebraicSet {
  int nvars = 0;
  std::vector<Polynomial> inequalities;
  double ball_radius = 0.0;
  ShapeHint shape_hint = ShapeHint::generic;

  // Shape parameters, populated according to shape_hint.
  std::vector<double> box_lo, box_hi;
  double radius = 0.0;                             // ball
  double inner_radius = 0.0, outer_radius = 0.0;   // annulus

  // Product of intervals [lo_i, hi_i]. g list: one (hi_i - x_i)(x_i - lo_i)
  // per coordinate plus the bounding ball. Default R_X is the largest corner
  // norm; a supplied value must not cut the box.
  static SemialgebraicSet make_box(std::vector<double> lo, std::vector<double> hi,
                                   std::optional<double> ball_r = {});
  // Origin-centered ball; the single inequality doubles as the bounding ball.
  static SemialgebraicSet make_ball(int nvars, double r);
  // Origin-centered annulus r0 <= |x| <= r. Three inequalities: inner,
  // outer, bounding ball (default R_X = r keeps the last two identical).
  static SemialgebraicSet make_annulus(int nvars, double r0, double r,
                                       std::optional<double> ball_r = {});
  // User-supplied inequalities; the bounding ball is appended when missing.
  static SemialgebraicSet make_generic(int nvars, std::vector<Polynomial> gs,
                                       double ball_r);

  // Boundary-inclusive membership, no tolerance.
  bool contains(std::span<const double> x) const;

  // Uniform i.i.d. samples, deterministic per seed. Rejection from the
  // bounding ball (boxes sample directly). Throws when acceptance collapses.
  std::vector<std::vector<double>> sample(int count, uint64_t seed) const;

  // Checks the bounding-ball invariant and, for named shapes, that the
  // stored parameters regenerate the inequality list exactly.
  void validate() const;

  double bounding_volume() const;
};

struct MomentVector {
  enum class Method { closed_form, monte_carlo };

  int max_degree = 0;
  std::vector<double> values;  // indexed by monomial_basis(nvars, max_degree)
  Method method = Method::closed_form;
  std::optional<std::vector<double>> standard_errors;  // monte_carlo only
};

// Lebesgue moments over X for all monomials of degree <= max_degree.
// Closed form for boxes and planar balls/annuli; Monte Carlo otherwise
// (mc_samples then required, per-entry standard errors reported).
MomentVector moments(const SemialgebraicSet& X, int max_degree,
                     std::optional<long long> mc_samples = {},
                     std::optional<uint64_t> seed = {});

double unit_ball_volume(int nvars);

}  // namespace attrax

#endif
