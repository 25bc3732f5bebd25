#include "attrax/attractor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <json.hpp>
#include <utility>

namespace attrax {

namespace {

using nlohmann::json;

int even_ceil(int d) { return d % 2 == 0 ? d : d + 1; }

// Affine change of variables x = center + halfwidth .* y mapping a copy of X
// into (roughly) [-1,1]^n. Radial and generic shapes scale uniformly so balls
// stay balls.
struct Scaling {
  std::vector<double> center, halfwidth;
  double det = 1.0;
  bool identity = true;
};

Scaling domain_scaling(const SemialgebraicSet& X, bool enabled) {
  Scaling s;
  s.center.assign(X.nvars, 0.0);
  s.halfwidth.assign(X.nvars, 1.0);
  if (enabled) {
    switch (X.shape_hint) {
      case ShapeHint::box:
        for (int i = 0; i < X.nvars; ++i) {
          s.center[i] = 0.5 * (X.box_lo[i] + X.box_hi[i]);
          s.halfwidth[i] = 0.5 * (X.box_hi[i] - X.box_lo[i]);
        }
        break;
      case ShapeHint::ball:
        s.halfwidth.assign(X.nvars, X.radius);
        break;
      case ShapeHint::annulus:
        s.halfwidth.assign(X.nvars, X.outer_radius);
        break;
      case ShapeHint::generic:
        s.halfwidth.assign(X.nvars, X.ball_radius);
        break;
    }
  }
  for (int i = 0; i < X.nvars; ++i) {
    s.det *= s.halfwidth[i];
    if (s.center[i] != 0.0 || s.halfwidth[i] != 1.0) s.identity = false;
  }
  return s;
}

// x_i = center_i + halfwidth_i * y_i as a polynomial map in y.
PolynomialMap substitution(const Scaling& sc, int n) {
  std::vector<Polynomial> comps;
  comps.reserve(n);
  for (int i = 0; i < n; ++i) {
    Polynomial c = Polynomial::variable(n, i + 1) * sc.halfwidth[i];
    if (sc.center[i] != 0.0) c += Polynomial::constant(n, sc.center[i]);
    comps.push_back(std::move(c));
  }
  return PolynomialMap(n, std::move(comps));
}

SemialgebraicSet scaled_domain(const SemialgebraicSet& X, const Scaling& sc) {
  if (sc.identity) return X;
  const int n = X.nvars;
  switch (X.shape_hint) {
    case ShapeHint::box:
      return SemialgebraicSet::make_box(std::vector<double>(n, -1.0),
                                        std::vector<double>(n, 1.0));
    case ShapeHint::ball:
      return SemialgebraicSet::make_ball(n, 1.0);
    case ShapeHint::annulus:
      return SemialgebraicSet::make_annulus(n, X.inner_radius / sc.halfwidth[0], 1.0,
                                            X.ball_radius / sc.halfwidth[0]);
    case ShapeHint::generic: {
      const PolynomialMap sub = substitution(sc, n);
      std::vector<Polynomial> gs;
      gs.reserve(X.inequalities.size());
      for (const auto& g : X.inequalities) gs.push_back(compose(g, sub));
      return SemialgebraicSet::make_generic(n, std::move(gs),
                                            X.ball_radius / sc.halfwidth[0]);
    }
  }
  throw Error("scaled_domain: unknown shape");
}

// Dynamics in y coordinates. Continuous: dy/dt = H^-1 f(c + H y).
// Discrete: y+ = H^-1 (f(c + H y) - c).
PolynomialMap scaled_field(const DynamicalSystem& sys, const Scaling& sc) {
  if (sc.identity) return sys.f;
  const int n = sys.nvars;
  const PolynomialMap sub = substitution(sc, n);
  std::vector<Polynomial> comps;
  comps.reserve(n);
  for (int i = 0; i < n; ++i) {
    Polynomial g = compose(sys.f.components[i], sub);
    if (sys.kind == SystemKind::discrete && sc.center[i] != 0.0)
      g -= Polynomial::constant(n, sc.center[i]);
    comps.push_back(g * (1.0 / sc.halfwidth[i]));
  }
  return PolynomialMap(n, std::move(comps));
}

// p(y) -> p((x - c) ./ h), restoring original coordinates.
Polynomial map_back(const Polynomial& p, const Scaling& sc) {
  const int n = p.nvars();
  std::vector<Polynomial> comps;
  comps.reserve(n);
  for (int i = 0; i < n; ++i) {
    Polynomial c = Polynomial::variable(n, i + 1) * (1.0 / sc.halfwidth[i]);
    if (sc.center[i] != 0.0)
      c -= Polynomial::constant(n, sc.center[i] / sc.halfwidth[i]);
    comps.push_back(std::move(c));
  }
  return compose(p, PolynomialMap(n, std::move(comps)));
}

struct Built {
  SosProgram prog;
  PolyVariable w, j, v;
  ScalarVariable eps;
  Scaling sc;
};

Built build_program(const DynamicalSystem& sys, const SemialgebraicSet& X,
                    const SolveParams& params) {
  if (!sys.f.is_square() || sys.nvars != sys.f.nvars)
    throw Error("dynamics must map R^n to R^n");
  if (sys.nvars != X.nvars)
    throw Error("system dimension " + std::to_string(sys.nvars) +
                " does not match set dimension " + std::to_string(X.nvars));
  params.validate(sys.kind);

  const int n = sys.nvars;
  const int k = params.k;
  Scaling sc = domain_scaling(X, params.rescale_domain);
  const SemialgebraicSet domain = scaled_domain(X, sc);
  const PolynomialMap field = scaled_field(sys, sc);

  if (sys.kind == SystemKind::discrete) {
    const int composed = k * field.degree();
    if (composed > params.composition_degree_cap)
      throw Error("composed degree k*deg(f) = " + std::to_string(composed) +
                  " exceeds the cap of " +
                  std::to_string(params.composition_degree_cap) +
                  "; lower k or raise composition_degree_cap");
  }

  Built b{SosProgram(n), {}, {}, {}, {}, std::move(sc)};
  SosProgram& prog = b.prog;
  b.w = prog.add_poly_var("w", k);
  b.j = prog.add_poly_var("J", k);
  b.v = prog.add_poly_var("v", k);
  b.eps = prog.add_scalar_var("epsilon");

  std::vector<PolyExpr> cs;
  cs.push_back(prog.expr_var(b.w) + prog.expr_var(b.j) - prog.expr_var(b.v) -
               prog.expr_known(Polynomial::constant(n, 1.0)));
  cs.push_back(prog.expr_var(b.w));
  cs.push_back(prog.expr_var(b.j));
  if (sys.kind == SystemKind::continuous) {
    cs.push_back(prog.expr_scalar(b.eps) - prog.expr_lie(b.j, field) -
                 prog.expr_var(b.j) - prog.expr_var(b.v));
    cs.push_back(params.beta_value() * prog.expr_var(b.v) -
                 prog.expr_lie(b.v, field));
  } else {
    cs.push_back(prog.expr_scalar(b.eps) - prog.expr_compose(b.j, field) +
                 params.gamma_value() * prog.expr_var(b.j) - prog.expr_var(b.v));
    cs.push_back(prog.expr_var(b.v) -
                 params.alpha_value() * prog.expr_compose(b.v, field));
  }
  for (const auto& c : cs)
    prog.add_putinar_constraint(c, domain, even_ceil(c.degree()));

  // Objective in original-coordinate units: the Jacobian determinant of the
  // change of variables multiplies every scaled-domain moment.
  const MomentVector mom =
      moments(domain, k, params.mc_moment_samples, params.moment_seed);
  Eigen::VectorXd weights(b.w.count);
  for (int a = 0; a < b.w.count; ++a) weights[a] = b.sc.det * mom.values[a];
  prog.objective_poly(b.w, weights);
  prog.objective_scalar(b.eps, b.sc.det * mom.values[0]);
  return b;
}

json set_to_json(const SemialgebraicSet& X) {
  json s;
  switch (X.shape_hint) {
    case ShapeHint::box:
      s["shape"] = "box";
      s["lo"] = X.box_lo;
      s["hi"] = X.box_hi;
      s["ball_radius"] = X.ball_radius;
      break;
    case ShapeHint::ball:
      s["shape"] = "ball";
      s["nvars"] = X.nvars;
      s["radius"] = X.radius;
      break;
    case ShapeHint::annulus:
      s["shape"] = "annulus";
      s["nvars"] = X.nvars;
      s["inner_radius"] = X.inner_radius;
      s["outer_radius"] = X.outer_radius;
      s["ball_radius"] = X.ball_radius;
      break;
    case ShapeHint::generic: {
      s["shape"] = "generic";
      s["nvars"] = X.nvars;
      s["ball_radius"] = X.ball_radius;
      json gs = json::array();
      for (const auto& g : X.inequalities) gs.push_back(g.to_string());
      s["inequalities"] = std::move(gs);
      break;
    }
  }
  return s;
}

SemialgebraicSet set_from_json(const json& s) {
  const std::string shape = s.at("shape").get<std::string>();
  if (shape == "box")
    return SemialgebraicSet::make_box(s.at("lo").get<std::vector<double>>(),
                                      s.at("hi").get<std::vector<double>>(),
                                      s.at("ball_radius").get<double>());
  if (shape == "ball")
    return SemialgebraicSet::make_ball(s.at("nvars").get<int>(),
                                       s.at("radius").get<double>());
  if (shape == "annulus")
    return SemialgebraicSet::make_annulus(
        s.at("nvars").get<int>(), s.at("inner_radius").get<double>(),
        s.at("outer_radius").get<double>(), s.at("ball_radius").get<double>());
  if (shape == "generic") {
    const int n = s.at("nvars").get<int>();
    std::vector<Polynomial> gs;
    for (const auto& text : s.at("inequalities"))
      gs.push_back(parse_polynomial(text.get<std::string>(), n));
    return SemialgebraicSet::make_generic(n, std::move(gs),
                                          s.at("ball_radius").get<double>());
  }
  throw Error("certificate: unknown set shape \"" + shape + "\"");
}

json params_to_json(const SolveParams& p) {
  json j;
  j["k"] = p.k;
  if (p.beta) j["beta"] = *p.beta;
  if (p.alpha) j["alpha"] = *p.alpha;
  if (p.gamma) j["gamma"] = *p.gamma;
  j["epsilon_scale"] = p.epsilon_scale;
  j["rescale_domain"] = p.rescale_domain;
  j["composition_degree_cap"] = p.composition_degree_cap;
  if (p.mc_moment_samples) j["mc_moment_samples"] = *p.mc_moment_samples;
  j["moment_seed"] = p.moment_seed;
  return j;
}

SolveParams params_from_json(const json& j) {
  SolveParams p;
  p.k = j.at("k").get<int>();
  if (j.contains("beta")) p.beta = j.at("beta").get<double>();
  if (j.contains("alpha")) p.alpha = j.at("alpha").get<double>();
  if (j.contains("gamma")) p.gamma = j.at("gamma").get<double>();
  p.epsilon_scale = j.at("epsilon_scale").get<double>();
  p.rescale_domain = j.at("rescale_domain").get<bool>();
  p.composition_degree_cap = j.at("composition_degree_cap").get<int>();
  if (j.contains("mc_moment_samples"))
    p.mc_moment_samples = j.at("mc_moment_samples").get<long long>();
  p.moment_seed = j.at("moment_seed").get<uint64_t>();
  return p;
}

SolveStatus solve_status_from_string(const std::string& text) {
  for (const SolveStatus st :
       {SolveStatus::optimal, SolveStatus::near_optimal,
        SolveStatus::primal_infeasible, SolveStatus::dual_infeasible,
        SolveStatus::iteration_limit, SolveStatus::numerical_error})
    if (to_string(st) == text) return st;
  throw Error("certificate: unknown solver status \"" + text + "\"");
}

json poly_coeffs(const Polynomial& p, const std::vector<Monomial>& basis) {
  json arr = json::array();
  for (const auto& m : basis) arr.push_back(p.coefficient(m));
  return arr;
}

Polynomial poly_from_coeffs(const json& arr, int nvars,
                            const std::vector<Monomial>& basis) {
  if (!arr.is_array() || arr.size() != basis.size())
    throw Error("certificate: coefficient array length does not match basis");
  Polynomial p(nvars);
  for (std::size_t i = 0; i < basis.size(); ++i)
    p.add_term(basis[i], arr[i].get<double>());
  return p;
}

}  // namespace

std::string to_string(SystemKind kind) {
  return kind == SystemKind::continuous ? "continuous" : "discrete";
}

SystemKind system_kind_from_string(const std::string& text) {
  if (text == "continuous") return SystemKind::continuous;
  if (text == "discrete") return SystemKind::discrete;
  throw Error("unknown system kind \"" + text + "\"");
}

DynamicalSystem DynamicalSystem::make_continuous(PolynomialMap f) {
  if (f.nvars < 1 || !f.is_square())
    throw Error("dynamics must map R^n to R^n with n >= 1");
  DynamicalSystem s;
  s.kind = SystemKind::continuous;
  s.nvars = f.nvars;
  s.f = std::move(f);
  return s;
}

DynamicalSystem DynamicalSystem::make_discrete(PolynomialMap f) {
  DynamicalSystem s = make_continuous(std::move(f));
  s.kind = SystemKind::discrete;
  return s;
}

void SolveParams::validate(SystemKind kind) const {
  if (k < 2) throw Error("degree k must be at least 2");
  if (!(epsilon_scale > 0.0)) throw Error("epsilon_scale must be positive");
  if (composition_degree_cap < 2)
    throw Error("composition_degree_cap must be at least 2");
  if (kind == SystemKind::continuous) {
    if (alpha || gamma)
      throw Error("alpha and gamma apply to discrete systems only");
    if (!(beta_value() > 0.0)) throw Error("beta must be positive");
  } else {
    if (beta) throw Error("beta applies to continuous systems only");
    if (!(alpha_value() > 0.0 && alpha_value() < 1.0))
      throw Error("alpha must lie in (0,1)");
    if (!(gamma_value() > 0.0 && gamma_value() < 1.0))
      throw Error("gamma must lie in (0,1)");
  }
}

SosProgram build_continuous(const DynamicalSystem& sys, const SemialgebraicSet& X,
                            const SolveParams& params) {
  if (sys.kind != SystemKind::continuous)
    throw Error("build_continuous requires a continuous system");
  return std::move(build_program(sys, X, params).prog);
}

SosProgram build_discrete(const DynamicalSystem& sys, const SemialgebraicSet& X,
                          const SolveParams& params) {
  if (sys.kind != SystemKind::discrete)
    throw Error("build_discrete requires a discrete system");
  return std::move(build_program(sys, X, params).prog);
}

Certificate solve_attractor(const DynamicalSystem& sys, const SemialgebraicSet& X,
                            const SolveParams& params,
                            const SolverSettings& settings) {
  Built b = build_program(sys, X, params);
  ConicProblem problem = b.prog.to_conic();
  const ConicSolution sol = solve(problem, settings);
  if (sol.status != SolveStatus::optimal &&
      sol.status != SolveStatus::near_optimal)
    throw Error("attractor program not solved: status " + to_string(sol.status));

  Certificate cert;
  cert.nvars = sys.nvars;
  cert.kind = sys.kind;
  cert.params = params;
  cert.X = X;
  cert.solver_status = sol.status;
  cert.w = b.prog.extract_poly(b.w, sol.x);
  cert.J = b.prog.extract_poly(b.j, sol.x);
  cert.v = b.prog.extract_poly(b.v, sol.x);
  cert.epsilon = std::max(0.0, b.prog.extract_scalar(b.eps, sol.x));
  if (!b.sc.identity) {
    cert.w = map_back(cert.w, b.sc);
    cert.J = map_back(cert.J, b.sc);
    cert.v = map_back(cert.v, b.sc);
  }
  // A returned polynomial whose every coefficient sits below the solver's
  // feasibility resolution is the zero polynomial; keeping the noise would
  // turn the sign tests in member() into coin flips (v in particular often
  // is exactly zero at the optimum).
  const double coeff_scale =
      1.0 + std::max({cert.w.max_abs_coefficient(), cert.J.max_abs_coefficient(),
                      cert.v.max_abs_coefficient(), std::abs(cert.epsilon)});
  const double snap = std::min(1e-4, 10.0 * settings.feas_tol) * coeff_scale;
  if (cert.w.max_abs_coefficient() <= snap) cert.w = Polynomial(sys.nvars);
  if (cert.J.max_abs_coefficient() <= snap) cert.J = Polynomial(sys.nvars);
  if (cert.v.max_abs_coefficient() <= snap) cert.v = Polynomial(sys.nvars);
  cert.d_k = sol.objective_value;
  return cert;
}

double sublevel(const Certificate& cert) {
  if (cert.kind == SystemKind::continuous) return cert.epsilon;
  return cert.epsilon / (1.0 - cert.params.gamma_value());
}

bool member(const Certificate& cert, std::span<const double> x,
            std::optional<double> epsilon_scale) {
  if (x.size() != static_cast<std::size_t>(cert.nvars))
    throw Error("member: point dimension does not match certificate");
  const double scale = epsilon_scale.value_or(cert.params.epsilon_scale);
  const double tau = 1e-9 * (1.0 + std::abs(cert.epsilon));
  return cert.J.evaluate(x) <= scale * sublevel(cert) + tau &&
         cert.v.evaluate(x) >= -tau && cert.X.contains(x);
}

bool member_interior_variant(const Certificate& cert, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(cert.nvars))
    throw Error("member: point dimension does not match certificate");
  const double scale = cert.params.epsilon_scale;
  const double tau = 1e-9 * (1.0 + std::abs(cert.epsilon));
  return cert.J.evaluate(x) <= scale * sublevel(cert) + tau;
}

bool intersect_members(const std::vector<Certificate>& certs,
                       std::span<const double> x) {
  if (certs.empty()) throw Error("intersect_members: no certificates");
  const auto& first = certs.front();
  for (const auto& c : certs)
    if (c.nvars != first.nvars || c.X.inequalities != first.X.inequalities)
      throw Error("intersect_members: certificates describe different sets");
  for (const auto& c : certs)
    if (!member(c, x)) return false;
  return true;
}

std::vector<Polynomial> constraint_polynomials(const Certificate& cert,
                                               const DynamicalSystem& sys) {
  if (sys.kind != cert.kind)
    throw Error("certificate and system kinds differ");
  if (sys.nvars != cert.nvars)
    throw Error("certificate and system dimensions differ");
  const int n = cert.nvars;
  const Polynomial one = Polynomial::constant(n, 1.0);
  const Polynomial eps = Polynomial::constant(n, cert.epsilon);

  std::vector<Polynomial> cs;
  cs.push_back(cert.w + cert.J - cert.v - one);
  cs.push_back(cert.w);
  cs.push_back(cert.J);
  if (cert.kind == SystemKind::continuous) {
    cs.push_back(eps - lie_derivative(cert.J, sys.f) - cert.J - cert.v);
    cs.push_back(cert.params.beta_value() * cert.v -
                 lie_derivative(cert.v, sys.f));
  } else {
    cs.push_back(eps - compose(cert.J, sys.f) +
                 cert.params.gamma_value() * cert.J - cert.v);
    cs.push_back(cert.v - cert.params.alpha_value() * compose(cert.v, sys.f));
  }
  return cs;
}

std::string certificate_to_json(const Certificate& cert) {
  if (cert.nvars < 1) throw Error("certificate has no variables");
  const int k = cert.params.k;
  if (cert.w.degree() > k || cert.J.degree() > k || cert.v.degree() > k)
    throw Error("certificate polynomials exceed the declared degree");
  const auto basis = monomial_basis(cert.nvars, k);

  json j;
  j["format"] = "attractor-certificate";
  j["version"] = 1;
  j["nvars"] = cert.nvars;
  j["kind"] = to_string(cert.kind);
  j["basis"] = "grlex";
  j["basis_degree"] = k;
  j["params"] = params_to_json(cert.params);
  j["set"] = set_to_json(cert.X);
  j["w"] = poly_coeffs(cert.w, basis);
  j["J"] = poly_coeffs(cert.J, basis);
  j["v"] = poly_coeffs(cert.v, basis);
  j["epsilon"] = cert.epsilon;
  j["d_k"] = cert.d_k;
  j["solver_status"] = to_string(cert.solver_status);
  return j.dump(2) + "\n";
}

Certificate certificate_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("certificate: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "attractor-certificate")
      throw Error("certificate: unrecognized format field");
    if (j.at("basis").get<std::string>() != "grlex")
      throw Error("certificate: unsupported monomial order");

    Certificate cert;
    cert.nvars = j.at("nvars").get<int>();
    cert.kind = system_kind_from_string(j.at("kind").get<std::string>());
    cert.params = params_from_json(j.at("params"));
    cert.X = set_from_json(j.at("set"));
    const auto basis = monomial_basis(cert.nvars, j.at("basis_degree").get<int>());
    cert.w = poly_from_coeffs(j.at("w"), cert.nvars, basis);
    cert.J = poly_from_coeffs(j.at("J"), cert.nvars, basis);
    cert.v = poly_from_coeffs(j.at("v"), cert.nvars, basis);
    cert.epsilon = j.at("epsilon").get<double>();
    cert.d_k = j.at("d_k").get<double>();
    cert.solver_status =
        solve_status_from_string(j.at("solver_status").get<std::string>());
    return cert;
  } catch (const json::exception& e) {
    throw Error(std::string("certificate: missing or mistyped field: ") + e.what());
  }
}

}  // namespace attrax
