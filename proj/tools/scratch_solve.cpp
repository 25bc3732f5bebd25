#include <array>
#include <chrono>
#include <cstdio>
#include <vector>

#include "attrax/attractor.hpp"

using namespace attrax;

namespace {

DynamicalSystem vanderpol() {
  return DynamicalSystem::make_continuous(PolynomialMap(
      2, {parse_polynomial("2*x2", 2),
          parse_polynomial("-0.8*x1 - 10*(x1^2 - 0.21)*x2", 2)}));
}

// Henon map conjugated by u = (x+1)/2 so the attractor sits inside [0,1]^2.
DynamicalSystem henon() {
  Polynomial f1 = parse_polynomial("-4.2*x1^2 + 4.2*x1 - 0.55", 2) +
                  Polynomial::variable(2, 2) * (2.0 / 3.0);
  Polynomial f2 = parse_polynomial("0.45*x1 + 0.275", 2);
  return DynamicalSystem::make_discrete(PolynomialMap(2, {f1, f2}));
}

DynamicalSystem nolyap() {
  const Polynomial x = Polynomial::variable(2, 1);
  const Polynomial y = Polynomial::variable(2, 2);
  const Polynomial g = parse_polynomial("-x1^4 + 2*x1^2*x2^2 + x2^4", 2);
  const Polynomial h = parse_polynomial("x1^4 + 2*x1^2*x2^2 - x2^4", 2);
  const Polynomial r2 = parse_polynomial("x1^2 + x2^2", 2);
  const Polynomial fx = -2.0 * (y * g) - 2.0 * (x * r2 * h);
  const Polynomial fy = 2.0 * (x * h) - 2.0 * (y * r2 * g);
  return DynamicalSystem::make_continuous(PolynomialMap(2, {fx, fy}));
}

std::vector<std::array<double, 2>> rk4_orbit(const PolynomialMap& f,
                                             std::array<double, 2> p,
                                             double t_transient, double h,
                                             int n_keep) {
  auto step = [&](std::array<double, 2>& q) {
    auto eval = [&](const std::array<double, 2>& z) {
      const auto v = f.evaluate(std::vector<double>{z[0], z[1]});
      return std::array<double, 2>{v[0], v[1]};
    };
    const auto k1 = eval(q);
    const auto k2 = eval({q[0] + 0.5 * h * k1[0], q[1] + 0.5 * h * k1[1]});
    const auto k3 = eval({q[0] + 0.5 * h * k2[0], q[1] + 0.5 * h * k2[1]});
    const auto k4 = eval({q[0] + h * k3[0], q[1] + h * k3[1]});
    q[0] += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    q[1] += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
  };
  const int n_transient = static_cast<int>(t_transient / h);
  for (int i = 0; i < n_transient; ++i) step(p);
  std::vector<std::array<double, 2>> out;
  for (int i = 0; i < n_keep; ++i) {
    step(p);
    out.push_back(p);
  }
  return out;
}

std::vector<std::array<double, 2>> map_orbit(const PolynomialMap& f,
                                             std::array<double, 2> p,
                                             int n_transient, int n_keep) {
  auto step = [&](std::array<double, 2>& q) {
    const auto v = f.evaluate(std::vector<double>{q[0], q[1]});
    q = {v[0], v[1]};
  };
  for (int i = 0; i < n_transient; ++i) step(p);
  std::vector<std::array<double, 2>> out;
  for (int i = 0; i < n_keep; ++i) {
    step(p);
    out.push_back(p);
  }
  return out;
}

double contained_fraction(const Certificate& cert,
                          const std::vector<std::array<double, 2>>& pts,
                          double scale = 1.0) {
  int in = 0;
  for (const auto& p : pts)
    if (member(cert, std::vector<double>{p[0], p[1]}, scale)) ++in;
  return static_cast<double>(in) / static_cast<double>(pts.size());
}

double grid_fraction(const Certificate& cert, double lo1, double hi1,
                     double lo2, double hi2, int n = 200) {
  int in = 0, dom = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::vector<double> p{lo1 + (hi1 - lo1) * (i + 0.5) / n,
                                  lo2 + (hi2 - lo2) * (j + 0.5) / n};
      if (!cert.X.contains(p)) continue;
      ++dom;
      if (member(cert, p)) ++in;
    }
  return dom ? static_cast<double>(in) / dom : 0.0;
}

Certificate run_case(const char* name, const DynamicalSystem& sys,
                     const SemialgebraicSet& X, SolveParams params) {
  const auto t0 = std::chrono::steady_clock::now();
  Certificate cert;
  try {
    cert = solve_attractor(sys, X, params);
  } catch (const Error& e) {
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%-12s k=%-2d  FAILED (%s) [%.2fs]\n", name, params.k, e.what(), dt);
    return cert;
  }
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%-12s k=%-2d  %-12s d_k=%-12.6g eps=%-10.4g [%.2fs]\n", name,
              params.k, to_string(cert.solver_status).c_str(), cert.d_k,
              cert.epsilon, dt);
  return cert;
}

}  // namespace

int main() {
  // Van der Pol, annulus 0.4 <= |x| <= 2, beta = 0.2, k in {4, 6, 8}.
  {
    const auto sys = vanderpol();
    const auto X = SemialgebraicSet::make_annulus(2, 0.4, 2.0);
    const auto cycle = rk4_orbit(sys.f, {1.0, 1.0}, 30.0, 0.01, 2000);
    for (int k : {4, 6, 8}) {
      SolveParams p;
      p.k = k;
      p.beta = 0.2;
      const auto cert = run_case("vanderpol", sys, X, p);
      if (cert.solver_status == SolveStatus::optimal)
        std::printf("             cycle in K %.4f   grid K frac %.4f\n",
                    contained_fraction(cert, cycle),
                    grid_fraction(cert, -2, 2, -2, 2));
    }
  }

  // Henon map, X = [0,1]^2, alpha = 0.002, gamma = 0.05, k = 6.
  {
    const auto sys = henon();
    const auto X = SemialgebraicSet::make_box({0, 0}, {1, 1});
    const auto orbit = map_orbit(sys.f, {0.65, 0.65}, 1000, 10000);
    SolveParams p;
    p.k = 6;
    p.alpha = 0.002;
    p.gamma = 0.05;
    const auto cert = run_case("henon", sys, X, p);
    if (cert.solver_status == SolveStatus::optimal)
      std::printf("             orbit in K %.4f   grid K frac %.4f\n",
                  contained_fraction(cert, orbit),
                  grid_fraction(cert, 0, 1, 0, 1));
  }

  // No-polynomial-Lyapunov field, X = [-1,1]^2, beta = 0.2, k in {8, 10}.
  {
    const auto sys = nolyap();
    const auto X = SemialgebraicSet::make_box({-1, -1}, {1, 1});
    for (int k : {8, 10}) {
      SolveParams p;
      p.k = k;
      p.beta = 0.2;
      const auto cert = run_case("nolyap", sys, X, p);
      if (cert.solver_status == SolveStatus::optimal ||
          cert.solver_status == SolveStatus::near_optimal) {
        std::printf("             origin in K x1: %d  x8: %d\n",
                    member(cert, std::vector<double>{0.0, 0.0}, 1.0),
                    member(cert, std::vector<double>{0.0, 0.0}, 8.0));
        for (double sx : {1.0, -1.0})
          for (double sy : {1.0, -1.0}) {
            const auto traj = rk4_orbit(sys.f, {sx, sy}, 5.0, 0.001, 20000);
            std::printf("             traj (%+.0f,%+.0f) tail in K x1 %.4f  x8 %.4f\n",
                        sx, sy, contained_fraction(cert, traj, 1.0),
                        contained_fraction(cert, traj, 8.0));
          }
      }
    }
  }
  return 0;
}
