#include "attrax/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "attrax/rng.hpp"

namespace attrax {

namespace {

constexpr double kDivergenceNorm = 1e8;

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double xi : x) s += xi * xi;
  return std::sqrt(s);
}

// One classical RK4 step of size h, in place.
void rk4_step(const PolynomialMap& f, std::vector<double>& x, double h,
              std::vector<double>& k1, std::vector<double>& k2,
              std::vector<double>& k3, std::vector<double>& k4,
              std::vector<double>& tmp) {
  const std::size_t n = x.size();
  k1 = f.evaluate(x);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  k2 = f.evaluate(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  k3 = f.evaluate(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  k4 = f.evaluate(tmp);
  for (std::size_t i = 0; i < n; ++i)
    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

class Stepper {
 public:
  Stepper(const PolynomialMap& f, std::span<const double> x0)
      : f_(f), x_(x0.begin(), x0.end()), k1_(x_.size()), k2_(x_.size()),
        k3_(x_.size()), k4_(x_.size()), tmp_(x_.size()) {}

  void ode(double h) { rk4_step(f_, x_, h, k1_, k2_, k3_, k4_, tmp_); }
  void map() { x_ = f_.evaluate(x_); }

  const std::vector<double>& state() const { return x_; }
  bool diverged() const { return !(norm2(x_) <= kDivergenceNorm); }

 private:
  const PolynomialMap& f_;
  std::vector<double> x_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

[[noreturn]] void throw_divergence(double when, bool discrete) {
  std::ostringstream os;
  os << "trajectory diverged (norm above 1e8) at "
     << (discrete ? "step " : "t = ") << when;
  throw Error(os.str());
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  return seed * 0x9E3779B97F4A7C15ULL + salt;
}

}  // namespace

Trajectory simulate_ode(const PolynomialMap& f, std::span<const double> x0,
                        double T, double h) {
  if (!(h > 0.0)) throw Error("simulate_ode: step must be positive");
  if (!(T >= 0.0)) throw Error("simulate_ode: horizon must be nonnegative");
  if (x0.size() != static_cast<std::size_t>(f.nvars))
    throw Error("simulate_ode: state dimension does not match the field");
  const long long steps = std::llround(T / h);

  Trajectory out;
  out.times.reserve(steps + 1);
  out.states.reserve(steps + 1);
  Stepper st(f, x0);
  out.times.push_back(0.0);
  out.states.push_back(st.state());
  for (long long i = 1; i <= steps; ++i) {
    st.ode(h);
    if (st.diverged()) throw_divergence(i * h, false);
    out.times.push_back(i * h);
    out.states.push_back(st.state());
  }
  return out;
}

Trajectory iterate_map(const PolynomialMap& f, std::span<const double> x0,
                       int steps) {
  if (steps < 0) throw Error("iterate_map: steps must be nonnegative");
  if (x0.size() != static_cast<std::size_t>(f.nvars))
    throw Error("iterate_map: state dimension does not match the map");

  Trajectory out;
  out.times.reserve(steps + 1);
  out.states.reserve(steps + 1);
  Stepper st(f, x0);
  out.times.push_back(0.0);
  out.states.push_back(st.state());
  for (int i = 1; i <= steps; ++i) {
    st.map();
    if (st.diverged()) throw_divergence(i, true);
    out.times.push_back(i);
    out.states.push_back(st.state());
  }
  return out;
}

std::vector<std::vector<double>> attractor_samples(const DynamicalSystem& sys,
                                                   const SemialgebraicSet& X,
                                                   const SampleParams& sp) {
  if (sp.n_init <= 0 || sp.keep <= 0)
    throw Error("attractor_samples: n_init and keep must be positive");
  if (sys.kind == SystemKind::continuous && !(sp.ode_step > 0.0))
    throw Error("attractor_samples: ode_step must be positive");

  const bool discrete = sys.kind == SystemKind::discrete;
  const long long transient_steps =
      discrete ? std::llround(sp.transient)
               : std::llround(sp.transient / sp.ode_step);
  // Quota of kept states per trajectory, padded so the target is still met
  // when roughly half the starts turn out not to lie in the invariant core.
  const long long quota = (2LL * sp.keep + sp.n_init - 1) / sp.n_init;

  const auto inits = X.sample(sp.n_init, sp.seed);
  std::vector<std::vector<double>> out;
  out.reserve(sp.keep);
  for (const auto& x0 : inits) {
    if (static_cast<long long>(out.size()) >= sp.keep) break;
    Stepper st(sys.f, x0);
    bool alive = true;
    for (long long i = 0; i < transient_steps && alive; ++i) {
      if (discrete) st.map(); else st.ode(sp.ode_step);
      alive = !st.diverged() && X.contains(st.state());
    }
    if (!alive) continue;
    std::vector<std::vector<double>> kept;
    kept.reserve(quota);
    for (long long i = 0; i < quota && alive; ++i) {
      if (discrete) st.map(); else st.ode(sp.ode_step);
      alive = !st.diverged() && X.contains(st.state());
      if (alive) kept.push_back(st.state());
    }
    if (!alive) continue;  // left X mid-collection: not in the invariant core
    for (auto& s : kept) {
      if (static_cast<long long>(out.size()) >= sp.keep) break;
      out.push_back(std::move(s));
    }
  }
  if (out.empty())
    throw Error("attractor_samples: every trajectory left the domain");
  return out;
}

ResidualScan check_residuals(const Certificate& cert, const DynamicalSystem& sys,
                             int n_samples, uint64_t seed) {
  if (n_samples <= 0) throw Error("check_residuals: n_samples must be positive");
  const auto cs = constraint_polynomials(cert, sys);
  const bool discrete = cert.kind == SystemKind::discrete;

  ResidualScan scan;
  scan.names = {"w + J - v - 1", "w", "J",
                discrete ? "eps - J(f) + gamma*J - v"
                         : "eps - grad(J).f - J - v",
                discrete ? "v - alpha*v(f)" : "beta*v - grad(v).f"};
  scan.n_samples = n_samples;
  double coeff = 0.0;
  for (const auto& c : cs) coeff = std::max(coeff, c.max_abs_coefficient());
  scan.scale = 1.0 + coeff;
  scan.minima.assign(cs.size(), std::numeric_limits<double>::infinity());

  const auto pts = cert.X.sample(n_samples, seed);
  for (const auto& p : pts)
    for (std::size_t i = 0; i < cs.size(); ++i)
      scan.minima[i] = std::min(scan.minima[i], cs[i].evaluate(p));
  for (double m : scan.minima)
    if (m < -1e-6 * scan.scale) ++scan.flagged;
  return scan;
}

InvarianceCheck check_invariance(const Certificate& cert, const DynamicalSystem& sys,
                                 int n_points, double horizon, uint64_t seed,
                                 double ode_step) {
  if (n_points <= 0) throw Error("check_invariance: n_points must be positive");
  if (!(horizon >= 0.0)) throw Error("check_invariance: horizon must be nonnegative");
  const bool discrete = cert.kind == SystemKind::discrete;
  const long long steps =
      discrete ? std::llround(horizon) : std::llround(horizon / ode_step);
  const double scale = cert.params.epsilon_scale;
  const double level = scale * sublevel(cert);
  const double band = 1e-4 * (1.0 + cert.epsilon);

  // Rejection-sample K through member(); certificates with thin sublevel
  // sets are the reason for the generous proposal budget.
  std::vector<std::vector<double>> starts;
  starts.reserve(n_points);
  const long long cap = 500LL * n_points;
  const int batch = 4096;
  Rng batch_seed(mix_seed(seed, 11));
  for (long long proposed = 0; proposed < cap &&
       static_cast<int>(starts.size()) < n_points; proposed += batch) {
    for (auto& p : cert.X.sample(batch, batch_seed.next_u64())) {
      if (static_cast<int>(starts.size()) >= n_points) break;
      if (member(cert, p)) starts.push_back(std::move(p));
    }
  }
  if (starts.empty())
    throw Error("check_invariance: no sample points found inside K");

  InvarianceCheck check;
  check.n_checked = static_cast<int>(starts.size());
  check.worst_excess = -std::numeric_limits<double>::infinity();
  for (const auto& x0 : starts) {
    Stepper st(sys.f, x0);
    double excess = cert.J.evaluate(x0) - level;
    bool diverged = false;
    for (long long i = 0; i < steps; ++i) {
      if (discrete) st.map(); else st.ode(ode_step);
      if (st.diverged()) { diverged = true; break; }
      excess = std::max(excess, cert.J.evaluate(st.state()) - level);
    }
    if (diverged || excess > band) ++check.violations;
    check.worst_excess = std::max(
        check.worst_excess,
        diverged ? std::numeric_limits<double>::infinity() : excess);
  }
  return check;
}

VolumeEstimate estimate_volume(const Certificate& cert, const SemialgebraicSet& X,
                               long long n_mc, uint64_t seed) {
  if (n_mc < 1000) throw Error("estimate_volume: n_mc must be at least 1000");
  const MomentVector mom = moments(X, 0, n_mc, mix_seed(seed, 23));
  const double vol_x = mom.values[0];

  long long hits = 0;
  const auto pts = X.sample(static_cast<int>(n_mc), mix_seed(seed, 29));
  for (const auto& p : pts)
    if (member(cert, p)) ++hits;
  const double frac = static_cast<double>(hits) / static_cast<double>(n_mc);

  VolumeEstimate est;
  est.n_mc = n_mc;
  est.volume = vol_x * frac;
  est.stderr_volume =
      vol_x * std::sqrt(frac * (1.0 - frac) / static_cast<double>(n_mc));
  return est;
}

bool check_interior(const Certificate& cert, const SemialgebraicSet& X,
                    int n_boundary_samples, uint64_t seed) {
  if (n_boundary_samples <= 0)
    throw Error("check_interior: n_boundary_samples must be positive");
  const double delta = 1e-2 * X.ball_radius;
  const double level = cert.params.epsilon_scale * sublevel(cert);

  int found = 0;
  const long long cap = 1000LL * n_boundary_samples;
  const int batch = 4096;
  Rng batch_seed(mix_seed(seed, 37));
  for (long long proposed = 0; proposed < cap && found < n_boundary_samples;
       proposed += batch) {
    for (const auto& p : X.sample(batch, batch_seed.next_u64())) {
      double gmin = std::numeric_limits<double>::infinity();
      for (const auto& g : X.inequalities)
        gmin = std::min(gmin, g.evaluate(p));
      if (gmin > delta) continue;
      ++found;
      if (!(cert.J.evaluate(p) > level)) return false;
      if (found >= n_boundary_samples) break;
    }
  }
  // Too few shell hits means the scan never saw the boundary: inconclusive.
  return found >= n_boundary_samples;
}

VerificationReport verify_certificate(const Certificate& cert,
                                      const DynamicalSystem& sys,
                                      const VerifySettings& settings) {
  VerificationReport report;
  report.residuals =
      check_residuals(cert, sys, settings.residual_samples, mix_seed(settings.seed, 1));

  SampleParams sp = settings.samples;
  sp.seed = mix_seed(settings.seed, 2);
  const auto samples = attractor_samples(sys, cert.X, sp);
  report.attractor_sample_count = static_cast<int>(samples.size());
  long long inside = 0;
  for (const auto& p : samples)
    if (member(cert, p)) ++inside;
  report.containment_fraction =
      static_cast<double>(inside) / static_cast<double>(samples.size());

  report.invariance =
      check_invariance(cert, sys, settings.invariance_points,
                       settings.invariance_horizon, mix_seed(settings.seed, 3),
                       settings.samples.ode_step);
  report.volume = estimate_volume(cert, cert.X, settings.volume_samples,
                                  mix_seed(settings.seed, 4));
  report.interior_certified = check_interior(
      cert, cert.X, settings.boundary_samples, mix_seed(settings.seed, 5));
  return report;
}

std::string report_to_json(const VerificationReport& report) {
  nlohmann::json j;
  j["residuals"]["names"] = report.residuals.names;
  j["residuals"]["minima"] = report.residuals.minima;
  j["residuals"]["scale"] = report.residuals.scale;
  j["residuals"]["flagged"] = report.residuals.flagged;
  j["residuals"]["n_samples"] = report.residuals.n_samples;
  j["attractor"]["sample_count"] = report.attractor_sample_count;
  j["attractor"]["containment_fraction"] = report.containment_fraction;
  j["invariance"]["n_checked"] = report.invariance.n_checked;
  j["invariance"]["violations"] = report.invariance.violations;
  j["invariance"]["worst_excess"] = report.invariance.worst_excess;
  j["volume"]["estimate"] = report.volume.volume;
  j["volume"]["stderr"] = report.volume.stderr_volume;
  j["volume"]["n_mc"] = report.volume.n_mc;
  j["interior_certified"] = report.interior_certified;
  return j.dump(2) + "\n";
}

std::string report_to_text(const VerificationReport& report) {
  std::ostringstream os;
  os << "verification report\n";
  os << "  constraint minima over " << report.residuals.n_samples
     << " samples (flag below " << -1e-6 * report.residuals.scale << "):\n";
  for (std::size_t i = 0; i < report.residuals.names.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "% .6e", report.residuals.minima[i]);
    os << "    " << buf << "  " << report.residuals.names[i] << "\n";
  }
  os << "  flagged constraints: " << report.residuals.flagged << "\n";
  os << "  attractor samples in K: " << report.containment_fraction * 100.0
     << "% of " << report.attractor_sample_count << "\n";
  os << "  invariance violations: " << report.invariance.violations << " of "
     << report.invariance.n_checked
     << " (worst excess " << report.invariance.worst_excess << ")\n";
  os << "  volume of K: " << report.volume.volume << " +- "
     << report.volume.stderr_volume << " (" << report.volume.n_mc
     << " samples)\n";
  os << "  sublevel set inside interior of X: "
     << (report.interior_certified ? "yes (sampled)" : "inconclusive") << "\n";
  return os.str();
}

}  // namespace attrax
