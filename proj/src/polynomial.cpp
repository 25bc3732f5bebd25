#include "attrax/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

namespace attrax {

Monomial operator*(const Monomial& a, const Monomial& b) {
  if (a.exponents.size() != b.exponents.size())
    throw Error("monomial dimension mismatch");
  Monomial r = a;
  for (std::size_t i = 0; i < r.exponents.size(); ++i)
    r.exponents[i] += b.exponents[i];
  return r;
}

Polynomial Polynomial::constant(int nvars, double value) {
  Polynomial p(nvars);
  p.add_term(Monomial(std::vector<uint32_t>(nvars, 0)), value);
  return p;
}

Polynomial Polynomial::variable(int nvars, int index) {
  if (index < 1 || index > nvars)
    throw Error("variable index " + std::to_string(index) +
                " out of range 1.." + std::to_string(nvars));
  std::vector<uint32_t> e(nvars, 0);
  e[index - 1] = 1;
  return term(nvars, Monomial(std::move(e)), 1.0);
}

Polynomial Polynomial::term(int nvars, Monomial m, double coefficient) {
  Polynomial p(nvars);
  p.add_term(std::move(m), coefficient);
  return p;
}

double Polynomial::max_abs_coefficient() const {
  double m = 0.0;
  for (const auto& [mono, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

void Polynomial::add_term(const Monomial& m, double coefficient) {
  if (m.exponents.size() != static_cast<std::size_t>(nvars_))
    throw Error("monomial has " + std::to_string(m.exponents.size()) +
                " variables, polynomial has " + std::to_string(nvars_));
  if (coefficient == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, coefficient);
  if (!inserted) {
    it->second += coefficient;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::evaluate(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(nvars_))
    throw Error("evaluate: point has wrong dimension");
  // Power table up to the max exponent per variable.
  std::vector<uint32_t> max_exp(nvars_, 0);
  for (const auto& [m, c] : terms_)
    for (int i = 0; i < nvars_; ++i)
      max_exp[i] = std::max(max_exp[i], m.exponents[i]);
  std::vector<std::vector<double>> powers(nvars_);
  for (int i = 0; i < nvars_; ++i) {
    powers[i].resize(max_exp[i] + 1);
    powers[i][0] = 1.0;
    for (uint32_t e = 1; e <= max_exp[i]; ++e)
      powers[i][e] = powers[i][e - 1] * x[i];
  }
  double sum = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (int i = 0; i < nvars_; ++i) t *= powers[i][m.exponents[i]];
    sum += t;
  }
  return sum;
}

Polynomial Polynomial::derivative(int var_index) const {
  if (var_index < 1 || var_index > nvars_)
    throw Error("derivative: variable index out of range");
  const int v = var_index - 1;
  Polynomial r(nvars_);
  for (const auto& [m, c] : terms_) {
    if (m.exponents[v] == 0) continue;
    Monomial d = m;
    const double k = static_cast<double>(d.exponents[v]);
    d.exponents[v] -= 1;
    r.add_term(d, c * k);
  }
  return r;
}

Polynomial& Polynomial::operator+=(const Polynomial& rhs) {
  check_same_space(rhs);
  for (const auto& [m, c] : rhs.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& rhs) {
  check_same_space(rhs);
  for (const auto& [m, c] : rhs.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.check_same_space(b);
  Polynomial r(a.nvars_);
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) r.add_term(ma * mb, ca * cb);
  return r;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::string out;
  bool first = true;
  char buf[64];
  for (const auto& [m, c] : terms_) {
    double coeff = c;
    if (first) {
      if (coeff < 0) {
        out += "-";
        coeff = -coeff;
      }
    } else {
      out += coeff < 0 ? " - " : " + ";
      if (coeff < 0) coeff = -coeff;
    }
    first = false;
    const bool has_vars = m.degree() > 0;
    if (!has_vars || coeff != 1.0) {
      std::snprintf(buf, sizeof(buf), "%.17g", coeff);
      out += buf;
      if (has_vars) out += "*";
    }
    bool first_var = true;
    for (std::size_t i = 0; i < m.exponents.size(); ++i) {
      if (m.exponents[i] == 0) continue;
      if (!first_var) out += "*";
      first_var = false;
      out += "x" + std::to_string(i + 1);
      if (m.exponents[i] > 1) out += "^" + std::to_string(m.exponents[i]);
    }
  }
  return out;
}

PolynomialMap::PolynomialMap(int n, std::vector<Polynomial> comps)
    : nvars(n), components(std::move(comps)) {
  for (const auto& p : components)
    if (p.nvars() != nvars)
      throw Error("map component defined over wrong number of variables");
}

int PolynomialMap::degree() const {
  int d = 0;
  for (const auto& p : components) d = std::max(d, p.degree());
  return d;
}

std::vector<double> PolynomialMap::evaluate(std::span<const double> x) const {
  std::vector<double> y(components.size());
  for (std::size_t i = 0; i < components.size(); ++i)
    y[i] = components[i].evaluate(x);
  return y;
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, int nvars) : text_(text), nvars_(nvars) {}

  Polynomial run() {
    Polynomial p = parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
    return p;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ == text_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }
  bool consume(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial parse_expr() {
    bool negate = false;
    if (peek() == '-') {
      ++pos_;
      negate = true;
    } else if (peek() == '+') {
      ++pos_;
    }
    Polynomial sum = parse_term();
    if (negate) sum *= -1.0;
    while (true) {
      char c = peek();
      if (c == '+' || c == '-') {
        ++pos_;
        Polynomial t = parse_term();
        if (c == '+')
          sum += t;
        else
          sum -= t;
      } else {
        break;
      }
    }
    return sum;
  }

  Polynomial parse_term() {
    Polynomial prod = parse_factor();
    while (consume('*')) prod = prod * parse_factor();
    return prod;
  }

  Polynomial parse_factor() {
    Polynomial base = parse_base();
    if (consume('^')) {
      std::size_t at = pos_;
      unsigned e = parse_uint("exponent");
      if (e > 64) throw ParseError("exponent too large", at);
      return pow(base, e);
    }
    return base;
  }

  Polynomial parse_base() {
    if (at_end()) throw ParseError("unexpected end of input", pos_);
    skip_ws();
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial inner = parse_expr();
      if (!consume(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (c == 'x') {
      ++pos_;
      std::size_t at = pos_;
      unsigned idx = parse_uint("variable index");
      if (idx < 1 || static_cast<int>(idx) > nvars_)
        throw ParseError("variable x" + std::to_string(idx) + " out of range 1..x" +
                             std::to_string(nvars_),
                         at);
      return Polynomial::variable(nvars_, static_cast<int>(idx));
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    throw ParseError("expected number, variable, or '('", pos_);
  }

  unsigned parse_uint(const std::string& what) {
    if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
      throw ParseError("expected " + what, pos_);
    unsigned long v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + static_cast<unsigned long>(text_[pos_] - '0');
      if (v > 1'000'000) throw ParseError(what + " too large", pos_);
      ++pos_;
    }
    return static_cast<unsigned>(v);
  }

  Polynomial parse_number() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        pos_ = mark;
      }
    }
    std::string lit(text_.substr(start, pos_ - start));
    if (lit.empty() || lit == ".") throw ParseError("malformed number", start);
    double v;
    try {
      std::size_t used = 0;
      v = std::stod(lit, &used);
      if (used != lit.size()) throw std::invalid_argument(lit);
    } catch (const std::exception&) {
      throw ParseError("malformed number '" + lit + "'", start);
    }
    return Polynomial::constant(nvars_, v);
  }

  std::string_view text_;
  int nvars_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(std::string_view text, int nvars) {
  if (nvars < 0) throw Error("parse_polynomial: nvars must be nonnegative");
  return Parser(text, nvars).run();
}

std::size_t basis_size(int nvars, int max_degree) {
  if (nvars < 0 || max_degree < 0) throw Error("basis_size: negative argument");
  // C(nvars + max_degree, nvars), multiplicative form with running division.
  std::size_t r = 1;
  for (int i = 1; i <= nvars; ++i) {
    r = r * static_cast<std::size_t>(max_degree + i) / static_cast<std::size_t>(i);
  }
  return r;
}

namespace {
void enumerate_exact_degree(int nvars, int degree, std::vector<uint32_t>& current,
                            int pos, int remaining, std::vector<Monomial>& out) {
  if (pos == nvars - 1) {
    current[pos] = static_cast<uint32_t>(remaining);
    out.emplace_back(current);
    return;
  }
  // Descending leading exponent gives lexicographically-largest-first order.
  for (int e = remaining; e >= 0; --e) {
    current[pos] = static_cast<uint32_t>(e);
    enumerate_exact_degree(nvars, degree, current, pos + 1, remaining - e, out);
  }
}
}  // namespace

std::vector<Monomial> monomial_basis(int nvars, int max_degree) {
  if (nvars < 0 || max_degree < 0) throw Error("monomial_basis: negative argument");
  std::vector<Monomial> out;
  out.reserve(basis_size(nvars, max_degree));
  if (nvars == 0) {
    out.emplace_back(std::vector<uint32_t>{});
    return out;
  }
  std::vector<uint32_t> current(nvars, 0);
  for (int d = 0; d <= max_degree; ++d)
    enumerate_exact_degree(nvars, d, current, 0, d, out);
  return out;
}

Polynomial lie_derivative(const Polynomial& p, const PolynomialMap& f) {
  if (p.nvars() != f.nvars || !f.is_square())
    throw Error("lie_derivative: map must be a square system over the same variables");
  Polynomial r(p.nvars());
  for (int i = 1; i <= p.nvars(); ++i) r += p.derivative(i) * f.components[i - 1];
  return r;
}

Polynomial compose(const Polynomial& p, const PolynomialMap& f) {
  if (static_cast<std::size_t>(p.nvars()) != f.components.size())
    throw Error("compose: map must supply one component per variable of p");
  const int n_out = f.nvars;
  // Horner-free expansion with cached variable powers.
  std::vector<std::vector<Polynomial>> powers(p.nvars());
  auto power_of = [&](int var, uint32_t e) -> const Polynomial& {
    auto& cache = powers[var];
    if (cache.empty()) cache.push_back(Polynomial::constant(n_out, 1.0));
    while (cache.size() <= e) cache.push_back(cache.back() * f.components[var]);
    return cache[e];
  };
  Polynomial r(n_out);
  for (const auto& [m, c] : p.terms()) {
    Polynomial t = Polynomial::constant(n_out, c);
    for (int i = 0; i < p.nvars(); ++i)
      if (m.exponents[i] > 0) t = t * power_of(i, m.exponents[i]);
    r += t;
  }
  return r;
}

Polynomial pow(const Polynomial& p, unsigned exponent) {
  Polynomial result = Polynomial::constant(p.nvars(), 1.0);
  Polynomial base = p;
  unsigned e = exponent;
  while (e > 0) {
    if (e & 1u) result = result * base;
    base = base * base;
    e >>= 1u;
  }
  return result;
}

}  // namespace attrax
