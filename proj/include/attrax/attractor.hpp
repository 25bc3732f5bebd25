#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attrax/conic.hpp"
#include "attrax/polynomial.hpp"
#include "attrax/semialg.hpp"
#include "attrax/sosprog.hpp"

namespace attrax {

enum class SystemKind { continuous, discrete };

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& text);

// Polynomial dynamics: dx/dt = f(x) (continuous) or x+ = f(x) (discrete).
struct DynamicalSystem {
  SystemKind kind = SystemKind::continuous;
  PolynomialMap f;
  int nvars = 0;

  static DynamicalSystem make_continuous(PolynomialMap f);
  static DynamicalSystem make_discrete(PolynomialMap f);
};

struct SolveParams {
  int k = 8;  // polynomial degree of w, J, v

  // Continuous systems use beta; discrete systems use alpha and gamma.
  // Unset values fall back to the defaults below at build time.
  std::optional<double> beta;   // > 0
  std::optional<double> alpha;  // in (0,1)
  std::optional<double> gamma;  // in (0,1)

  // Multiplier applied to epsilon when testing membership; raising it
  // inflates the reported sublevel set without re-solving.
  double epsilon_scale = 1.0;

  // Compile on an affine copy of X mapped into [-1,1]^n for conditioning;
  // certificates are always reported in original coordinates.
  bool rescale_domain = true;

  // Discrete programs compose J and v with f; refuse degrees past this.
  int composition_degree_cap = 40;

  // Objective moments on generic sets need Monte Carlo.
  std::optional<long long> mc_moment_samples;
  uint64_t moment_seed = 1;

  double beta_value() const { return beta.value_or(0.2); }
  double alpha_value() const { return alpha.value_or(0.002); }
  double gamma_value() const { return gamma.value_or(0.05); }

  // Checks ranges and that only the parameter set matching kind is present.
  void validate(SystemKind kind) const;
};

// Solved relaxation: K = {x in X : J(x) <= epsilon, v(x) >= 0} encloses the
// attractor, and d_k bounds the enclosure volume from above.
struct Certificate {
  int nvars = 0;
  SystemKind kind = SystemKind::continuous;
  Polynomial w, J, v;
  double epsilon = 0.0;
  double d_k = 0.0;
  SolveParams params;
  SemialgebraicSet X;
  SolveStatus solver_status = SolveStatus::numerical_error;
};

// Degree-k program for continuous dynamics: decision polynomials w, J, v and
// scalar epsilon >= 0, constraints (on X, as Putinar certificates)
//   w + J - v - 1 >= 0,   w >= 0,   J >= 0,
//   epsilon - grad(J).f - J - v >= 0,   beta*v - grad(v).f >= 0,
// objective  integral_X w dx + epsilon * vol(X).
SosProgram build_continuous(const DynamicalSystem& sys, const SemialgebraicSet& X,
                            const SolveParams& params);

// Discrete analogue; the dynamic constraints compose with the map:
//   epsilon - (J o f) + gamma*J - v >= 0,   v - alpha*(v o f) >= 0,
// so J contracts by gamma per step up to slack epsilon, making the sublevel
// set J <= epsilon/(1-gamma) positively invariant.
SosProgram build_discrete(const DynamicalSystem& sys, const SemialgebraicSet& X,
                          const SolveParams& params);

// Build, solve, and extract. Throws unless the solver status is optimal or
// near_optimal; the status is recorded in the certificate.
Certificate solve_attractor(const DynamicalSystem& sys, const SemialgebraicSet& X,
                            const SolveParams& params,
                            const SolverSettings& settings = SolverSettings{});

// J-threshold bounding K before epsilon_scale: epsilon for continuous
// systems; epsilon/(1-gamma) for discrete ones, the level the per-step decay
// keeps invariant (J o f <= gamma*J + epsilon fixes that sublevel set).
double sublevel(const Certificate& cert);

// x in K, evaluated with slack tau = 1e-9*(1+|epsilon|):
//   J(x) <= scale*sublevel + tau  and  v(x) >= -tau  and  x in X.
// scale defaults to cert.params.epsilon_scale.
bool member(const Certificate& cert, std::span<const double> x,
            std::optional<double> epsilon_scale = std::nullopt);

// Sublevel test J(x) <= scale*epsilon + tau alone; valid as an outer set
// once J^{-1}([0, scale*epsilon]) is known to sit inside the interior of X.
bool member_interior_variant(const Certificate& cert, std::span<const double> x);

// Conjunction of member over certificates sharing the same X.
bool intersect_members(const std::vector<Certificate>& certs, std::span<const double> x);

// The five constraint polynomials of the certificate's program, instantiated
// at (w, J, v, epsilon) in original coordinates, in build order. A valid
// certificate makes all five nonnegative on X.
std::vector<Polynomial> constraint_polynomials(const Certificate& cert,
                                               const DynamicalSystem& sys);

// Self-describing JSON round-trip; doubles survive bit-exactly.
std::string certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const std::string& text);

}  // namespace attrax
