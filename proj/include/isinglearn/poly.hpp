/// @file poly.hpp
/// @brief Multilinear pseudo-Boolean polynomials over 0/1 variables.
///
/// A polynomial is a map from canonical monomials (strictly increasing bit
/// lists) to exact rational coefficients. Multiplication applies the
/// idempotence reduction sigma*sigma = sigma, so every value the polynomial
/// can take on {0,1}^n is the plain sum over its stored terms. Values are
/// immutable once built; all operations return fresh polynomials.

#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "isinglearn/rational.hpp"

namespace isl {

using BitId = std::uint32_t;

/// Canonical product of distinct binary variables; empty = constant term.
class Monomial {
 public:
  Monomial() = default;
  Monomial(std::initializer_list<BitId> bits) : bits_(bits) { canonicalize(); }
  explicit Monomial(std::vector<BitId> bits) : bits_(std::move(bits)) { canonicalize(); }

  const std::vector<BitId>& bits() const { return bits_; }
  std::size_t degree() const { return bits_.size(); }
  bool is_constant() const { return bits_.empty(); }

  bool contains(BitId b) const {
    return std::binary_search(bits_.begin(), bits_.end(), b);
  }
  bool contains_pair(BitId u1, BitId u2) const { return contains(u1) && contains(u2); }

  /// Product monomial; shared bits collapse (sigma^2 = sigma).
  static Monomial product(const Monomial& a, const Monomial& b) {
    Monomial m;
    m.bits_.reserve(a.bits_.size() + b.bits_.size());
    std::set_union(a.bits_.begin(), a.bits_.end(), b.bits_.begin(), b.bits_.end(),
                   std::back_inserter(m.bits_));
    return m;
  }

  /// Replaces the pair {u1,u2} with v. Caller guarantees the pair is present
  /// and v is not.
  Monomial with_pair_replaced(BitId u1, BitId u2, BitId v) const {
    std::vector<BitId> out;
    out.reserve(bits_.size() - 1);
    for (BitId b : bits_) {
      if (b != u1 && b != u2) out.push_back(b);
    }
    out.insert(std::lower_bound(out.begin(), out.end(), v), v);
    return Monomial(std::move(out));
  }

  /// Graded-lex order: by degree, then lexicographic on bit ids.
  friend bool operator<(const Monomial& a, const Monomial& b) {
    if (a.bits_.size() != b.bits_.size()) return a.bits_.size() < b.bits_.size();
    return a.bits_ < b.bits_;
  }
  friend bool operator==(const Monomial& a, const Monomial& b) { return a.bits_ == b.bits_; }
  friend bool operator!=(const Monomial& a, const Monomial& b) { return !(a == b); }

 private:
  void canonicalize() {
    std::sort(bits_.begin(), bits_.end());
    bits_.erase(std::unique(bits_.begin(), bits_.end()), bits_.end());
  }

  std::vector<BitId> bits_;
};

class PseudoBooleanPoly {
 public:
  using TermMap = std::map<Monomial, Rational>;

  PseudoBooleanPoly() = default;

  static PseudoBooleanPoly constant(Rational c) {
    PseudoBooleanPoly p;
    if (!c.is_zero()) p.terms_.emplace(Monomial{}, c);
    return p;
  }

  static PseudoBooleanPoly variable(BitId b) {
    PseudoBooleanPoly p;
    p.terms_.emplace(Monomial{b}, Rational(1));
    return p;
  }

  static PseudoBooleanPoly term(Rational coeff, Monomial m) {
    PseudoBooleanPoly p;
    if (!coeff.is_zero()) p.terms_.emplace(std::move(m), coeff);
    return p;
  }

  const TermMap& terms() const { return terms_; }
  std::size_t num_terms() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  std::size_t degree() const {
    return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
  }

  Rational coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  /// Largest bit id occurring in any term, or -1 for bit-free polynomials.
  std::int64_t max_bit() const {
    std::int64_t mx = -1;
    for (const auto& [m, c] : terms_) {
      if (!m.bits().empty()) mx = std::max<std::int64_t>(mx, m.bits().back());
    }
    return mx;
  }

  friend PseudoBooleanPoly operator+(const PseudoBooleanPoly& p, const PseudoBooleanPoly& q) {
    PseudoBooleanPoly r = p;
    for (const auto& [m, c] : q.terms_) r.add_term(m, c);
    return r;
  }

  friend PseudoBooleanPoly operator-(const PseudoBooleanPoly& p, const PseudoBooleanPoly& q) {
    PseudoBooleanPoly r = p;
    for (const auto& [m, c] : q.terms_) r.add_term(m, -c);
    return r;
  }

  friend PseudoBooleanPoly operator*(const PseudoBooleanPoly& p, const PseudoBooleanPoly& q) {
    PseudoBooleanPoly r;
    for (const auto& [ma, ca] : p.terms_) {
      for (const auto& [mb, cb] : q.terms_) {
        r.add_term(Monomial::product(ma, mb), ca * cb);
      }
    }
    return r;
  }

  friend PseudoBooleanPoly operator*(const Rational& s, const PseudoBooleanPoly& p) {
    PseudoBooleanPoly r;
    if (s.is_zero()) return r;
    for (const auto& [m, c] : p.terms_) r.terms_.emplace(m, s * c);
    return r;
  }
  friend PseudoBooleanPoly operator*(const PseudoBooleanPoly& p, const Rational& s) { return s * p; }

  PseudoBooleanPoly operator-() const { return Rational(-1) * *this; }

  PseudoBooleanPoly& operator+=(const PseudoBooleanPoly& q) { return *this = *this + q; }
  PseudoBooleanPoly& operator-=(const PseudoBooleanPoly& q) { return *this = *this - q; }

  friend bool operator==(const PseudoBooleanPoly& a, const PseudoBooleanPoly& b) {
    return a.terms_ == b.terms_;
  }
  friend bool operator!=(const PseudoBooleanPoly& a, const PseudoBooleanPoly& b) { return !(a == b); }

  /// Evaluates at a 0/1 assignment indexed by bit id.
  Rational evaluate(const std::vector<std::uint8_t>& assignment) const {
    Rational total(0);
    for (const auto& [m, c] : terms_) {
      bool on = true;
      for (BitId b : m.bits()) {
        if (b >= assignment.size()) {
          throw std::out_of_range("PseudoBooleanPoly::evaluate: assignment misses bit " +
                                  std::to_string(b));
        }
        if (!assignment[b]) {
          on = false;
          break;
        }
      }
      if (on) total += c;
    }
    return total;
  }

  /// Replaces every occurrence of the factor u1*u2 with v (Rosenberg step).
  /// v must be fresh and u1 != u2.
  PseudoBooleanPoly substitute_factor(BitId u1, BitId u2, BitId v) const {
    if (u1 == u2) throw std::invalid_argument("substitute_factor: u1 == u2");
    PseudoBooleanPoly r;
    for (const auto& [m, c] : terms_) {
      if (m.contains(v)) {
        throw std::invalid_argument("substitute_factor: v=" + std::to_string(v) +
                                    " already occurs");
      }
      if (m.contains_pair(u1, u2)) {
        r.add_term(m.with_pair_replaced(u1, u2, v), c);
      } else {
        r.add_term(m, c);
      }
    }
    return r;
  }

  /// One term per line: "coeff_num/coeff_den b0 b1 ...". '#' starts a comment.
  void write_text(std::ostream& os) const {
    for (const auto& [m, c] : terms_) {
      os << c.str();
      for (BitId b : m.bits()) os << ' ' << b;
      os << '\n';
    }
  }

  static PseudoBooleanPoly read_text(std::istream& is) {
    PseudoBooleanPoly p;
    std::string line;
    while (std::getline(is, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string coeff;
      if (!(ls >> coeff)) continue;
      std::vector<BitId> bits;
      BitId b;
      while (ls >> b) bits.push_back(b);
      p.add_term(Monomial(std::move(bits)), Rational::parse(coeff));
    }
    return p;
  }

  std::string str() const {
    std::ostringstream os;
    write_text(os);
    return os.str();
  }

 private:
  void add_term(const Monomial& m, const Rational& c) {
    if (c.is_zero()) return;
    auto [it, inserted] = terms_.emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  TermMap terms_;
};

}  // namespace isl
