#ifndef ATTRAX_POLYNOMIAL_HPP
#define ATTRAX_POLYNOMIAL_HPP

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace attrax {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t position)
      : Error(msg + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Exponent vector of a single monomial x1^e1 * ... * xn^en.
struct Monomial {
  std::vector<uint32_t> exponents;

  Monomial() = default;
  explicit Monomial(std::vector<uint32_t> e) : exponents(std::move(e)) {}

  int degree() const {
    int d = 0;
    for (uint32_t e : exponents) d += static_cast<int>(e);
    return d;
  }
  std::size_t nvars() const { return exponents.size(); }

  friend bool operator==(const Monomial& a, const Monomial& b) {
    return a.exponents == b.exponents;
  }

  // Product of two monomials over the same variables.
  friend Monomial operator*(const Monomial& a, const Monomial& b);
};

// Graded lexicographic order, constant monomial first; within a degree the
// exponent vector that is lexicographically larger (x1 weighs most) comes
// first, so basis(2,2) lists 1, x1, x2, x1^2, x1*x2, x2^2.
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    return b.exponents < a.exponents;
  }
};

// Sparse multivariate polynomial with double coefficients. Canonical form:
// no stored term has coefficient exactly zero.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GrlexLess>;

  explicit Polynomial(int nvars = 0) : nvars_(check_nvars(nvars)) {}

  static Polynomial constant(int nvars, double value);
  // 1-based variable index, matching the x1..xn surface syntax.
  static Polynomial variable(int nvars, int index);
  static Polynomial term(int nvars, Monomial m, double coefficient);

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  // Degree of the zero polynomial is reported as 0.
  int degree() const {
    return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
  }
  std::size_t term_count() const { return terms_.size(); }
  const TermMap& terms() const { return terms_; }

  double coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
  }
  double max_abs_coefficient() const;

  void add_term(const Monomial& m, double coefficient);

  double evaluate(std::span<const double> x) const;

  Polynomial derivative(int var_index) const;  // 1-based

  Polynomial& operator+=(const Polynomial& rhs);
  Polynomial& operator-=(const Polynomial& rhs);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator-(const Polynomial& a) {
    Polynomial r(a);
    return r *= -1.0;
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
  }

  // Round-trippable text form: parse(to_string()) == *this exactly.
  std::string to_string() const;

 private:
  static int check_nvars(int nvars) {
    if (nvars < 0) throw Error("polynomial nvars must be nonnegative");
    return nvars;
  }
  void check_same_space(const Polynomial& rhs) const {
    if (nvars_ != rhs.nvars_)
      throw Error("polynomial dimension mismatch: " + std::to_string(nvars_) +
                  " vs " + std::to_string(rhs.nvars_));
  }

  int nvars_;
  TermMap terms_;
};

// Polynomial map R^n -> R^m; for dynamics m == n.
struct PolynomialMap {
  int nvars = 0;
  std::vector<Polynomial> components;

  PolynomialMap() = default;
  PolynomialMap(int n, std::vector<Polynomial> comps);

  std::size_t size() const { return components.size(); }
  bool is_square() const { return components.size() == static_cast<std::size_t>(nvars); }
  int degree() const;
  std::vector<double> evaluate(std::span<const double> x) const;
};

// Grammar (whitespace insignificant):
//   expr   := term (('+'|'-') term)*
//   term   := factor ('*' factor)*
//   factor := base ('^' uint)?
//   base   := real-literal | 'x' uint | '(' expr ')'
// Unary minus is allowed at the head of an expression and after '('.
Polynomial parse_polynomial(std::string_view text, int nvars);

// All monomials of degree <= max_degree in grlex order; size C(nvars+max_degree, nvars).
std::vector<Monomial> monomial_basis(int nvars, int max_degree);

// C(n+d, n) as a size; throws on overflow beyond size_t practicality.
std::size_t basis_size(int nvars, int max_degree);

// grad(p) . f
Polynomial lie_derivative(const Polynomial& p, const PolynomialMap& f);

// p(f1(x), ..., fm(x)) expanded; requires f.size() == p.nvars().
Polynomial compose(const Polynomial& p, const PolynomialMap& f);

Polynomial pow(const Polynomial& p, unsigned exponent);

}  // namespace attrax

#endif
