#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attrax/attractor.hpp"

namespace attrax {

// Simulated path. times holds integration times for flows and step indices
// for maps; both are strictly increasing with uniform spacing.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
};

// Classical fixed-step fourth-order Runge-Kutta over [0, T]. The step count
// is round(T/h), so pick h dividing T for an exact endpoint. Throws when the
// state norm passes 1e8, reporting the time of blowup.
Trajectory simulate_ode(const PolynomialMap& f, std::span<const double> x0,
                        double T, double h);

// Orbit x0, f(x0), ..., f^N(x0); length N+1. Same divergence guard.
Trajectory iterate_map(const PolynomialMap& f, std::span<const double> x0,
                       int steps);

// Empirical stand-in for the attractor: initial conditions are drawn
// uniformly from X, run through the transient, and sampled along the
// continuation. A trajectory that leaves X at any step is dropped whole;
// its start was not in the maximal positively invariant set.
struct SampleParams {
  int n_init = 100;
  double transient = 30.0;  // seconds for flows, steps for maps
  double ode_step = 0.01;
  int keep = 10000;         // total points collected across survivors
  uint64_t seed = 0;
};

// Deterministic per seed. Throws when every trajectory leaves X.
std::vector<std::vector<double>> attractor_samples(const DynamicalSystem& sys,
                                                   const SemialgebraicSet& X,
                                                   const SampleParams& sp);

// Minimum of each certificate constraint polynomial over uniform samples of
// the certificate's domain. A minimum below -1e-6*(1 + coefficient scale) is
// counted as flagged.
struct ResidualScan {
  std::vector<std::string> names;
  std::vector<double> minima;  // build order, same length as names
  double scale = 0.0;          // 1 + max |coefficient| over the five
  int flagged = 0;
  int n_samples = 0;
};

ResidualScan check_residuals(const Certificate& cert, const DynamicalSystem& sys,
                             int n_samples, uint64_t seed);

// Simulates points sampled inside K for the horizon and records how far J
// climbs above the invariant level scale*sublevel. An excess beyond
// 1e-4*(1+epsilon) counts as a violation; the band absorbs integrator drift.
struct InvarianceCheck {
  int n_checked = 0;
  int violations = 0;
  double worst_excess = 0.0;  // max over points and time of J - scale*level
};

InvarianceCheck check_invariance(const Certificate& cert, const DynamicalSystem& sys,
                                 int n_points, double horizon, uint64_t seed,
                                 double ode_step = 0.01);

// lambda(K) as lambda(X) times the member hit fraction over uniform samples
// of X, with the binomial standard error.
struct VolumeEstimate {
  double volume = 0.0;
  double stderr_volume = 0.0;
  long long n_mc = 0;
};

VolumeEstimate estimate_volume(const Certificate& cert, const SemialgebraicSet& X,
                               long long n_mc, uint64_t seed);

// Heuristic test of the sublevel-set-inside-the-interior hypothesis: samples
// the shell {x in X : min_i g_i(x) <= 1e-2 * R_X} and requires
// J > scale*sublevel everywhere on it. Returns false when inconclusive; a
// certified answer would need another optimization problem.
bool check_interior(const Certificate& cert, const SemialgebraicSet& X,
                    int n_boundary_samples, uint64_t seed = 0);

struct VerifySettings {
  int residual_samples = 100000;
  SampleParams samples;
  int invariance_points = 500;
  double invariance_horizon = 20.0;
  long long volume_samples = 100000;
  int boundary_samples = 2000;
  uint64_t seed = 0;
};

// One document with every figure of merit the checks above produce.
struct VerificationReport {
  ResidualScan residuals;
  int attractor_sample_count = 0;
  double containment_fraction = 0.0;  // attractor samples inside K
  InvarianceCheck invariance;
  VolumeEstimate volume;
  bool interior_certified = false;
};

// Runs every check with seeds derived from settings.seed.
VerificationReport verify_certificate(const Certificate& cert,
                                      const DynamicalSystem& sys,
                                      const VerifySettings& settings);

std::string report_to_json(const VerificationReport& report);
std::string report_to_text(const VerificationReport& report);

}  // namespace attrax
