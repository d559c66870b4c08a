/// @file compile.hpp
/// @brief Lowering pipeline: penalty elimination of equality constraints,
/// iterative Rosenberg order reduction, and integer-scaled QUBO emission.

#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "isinglearn/encoding.hpp"
#include "isinglearn/network.hpp"
#include "isinglearn/poly.hpp"
#include "isinglearn/topology.hpp"

namespace isl {

struct PenaltyConfig {
  std::optional<Rational> rho;     // default: 4*(2H)^2*N + 1
  std::optional<Rational> lambda;  // default: auto bound per substitution
};

/// Upper-triangular integer QUBO: energy(sigma) = sum_{i<=j} Q_ij s_i s_j,
/// exact objective = (energy + offset) * scale.
struct QuboInstance {
  std::uint32_t num_vars = 0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::int64_t> coeffs;
  std::int64_t offset = 0;
  Rational scale{1};
  std::string registry_manifest;  // path reference, informational

  std::int64_t energy(const std::vector<std::uint8_t>& assignment) const {
    std::int64_t e = 0;
    for (const auto& [ij, c] : coeffs) {
      if (assignment.at(ij.first) && assignment.at(ij.second)) e += c;
    }
    return e;
  }

  Rational rescale(std::int64_t energy_value) const {
    return (Rational(energy_value) + Rational(offset)) * scale;
  }

  void write(std::ostream& os) const {
    os << "qubo/1\n";
    os << "vars " << num_vars << "\n";
    os << "scale " << scale.str() << "\n";
    os << "offset " << offset << "\n";
    for (const auto& [ij, c] : coeffs) {
      os << ij.first << ' ' << ij.second << ' ' << c << "\n";
    }
  }

  static QuboInstance read(std::istream& is) {
    QuboInstance q;
    std::string line;
    int lineno = 0;
    bool saw_magic = false;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      if (!saw_magic) {
        if (line != "qubo/1") {
          throw std::runtime_error("qubo file line " + std::to_string(lineno) +
                                   ": expected 'qubo/1'");
        }
        saw_magic = true;
        continue;
      }
      std::string head;
      ls >> head;
      if (head == "vars") {
        ls >> q.num_vars;
      } else if (head == "scale") {
        std::string s;
        ls >> s;
        q.scale = Rational::parse(s);
      } else if (head == "offset") {
        ls >> q.offset;
      } else {
        std::uint32_t i = 0, j = 0;
        std::int64_t c = 0;
        std::istringstream ts(line);
        if (!(ts >> i >> j >> c) || i > j || j >= q.num_vars) {
          throw std::runtime_error("qubo file line " + std::to_string(lineno) +
                                   ": malformed coefficient");
        }
        q.coeffs[{i, j}] += c;
      }
    }
    if (!saw_magic) throw std::runtime_error("qubo file: empty or missing header");
    return q;
  }
};

struct ReductionRecord {
  BitId u1, u2, v;
  Rational lambda;
};

struct ReductionTrace {
  std::vector<ReductionRecord> records;

  void write(std::ostream& os) const {
    for (const auto& r : records) {
      os << r.u1 << ' ' << r.u2 << ' ' << r.v << ' ' << r.lambda.str() << "\n";
    }
  }

  static ReductionTrace read(std::istream& is) {
    ReductionTrace t;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      ReductionRecord r{};
      std::string lam;
      if (!(ls >> r.u1 >> r.u2 >> r.v >> lam)) {
        throw std::runtime_error("trace file: malformed record: " + line);
      }
      r.lambda = Rational::parse(lam);
      t.records.push_back(r);
    }
    return t;
  }
};

/// objective + rho * sum_j phi_j^2, expanded multilinearly.
inline PseudoBooleanPoly penalize(const PseudoBooleanPoly& objective,
                                  const ConstraintSet& constraints, const Rational& rho) {
  if (rho <= Rational(0)) throw std::invalid_argument("penalize: rho must be positive");
  PseudoBooleanPoly total = objective;
  for (const Constraint& c : constraints.constraints) {
    total += rho * (c.poly * c.poly);
  }
  return total;
}

/// h(u1,u2,v) = 3v + u1 u2 - 2 u1 v - 2 u2 v; nonnegative, zero iff v = u1 u2.
inline PseudoBooleanPoly rosenberg_poly(BitId u1, BitId u2, BitId v) {
  if (u1 == u2 || u1 == v || u2 == v) {
    throw std::invalid_argument("rosenberg_poly: bits must be distinct");
  }
  PseudoBooleanPoly h;
  h += PseudoBooleanPoly::term(Rational(3), Monomial{v});
  h += PseudoBooleanPoly::term(Rational(1), Monomial{u1, u2});
  h += PseudoBooleanPoly::term(Rational(-2), Monomial{u1, v});
  h += PseudoBooleanPoly::term(Rational(-2), Monomial{u2, v});
  return h;
}

namespace detail {

/// Most frequent variable pair among monomials of degree > 2; ties go to the
/// lexicographically smallest (u1, u2).
inline std::optional<std::pair<BitId, BitId>> most_frequent_pair(const PseudoBooleanPoly& p) {
  std::map<std::pair<BitId, BitId>, std::size_t> freq;
  for (const auto& [m, c] : p.terms()) {
    const auto& bits = m.bits();
    if (bits.size() <= 2) continue;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      for (std::size_t j = i + 1; j < bits.size(); ++j) {
        ++freq[{bits[i], bits[j]}];
      }
    }
  }
  if (freq.empty()) return std::nullopt;
  auto best = freq.begin();
  for (auto it = freq.begin(); it != freq.end(); ++it) {
    if (it->second > best->second) best = it;  // map order breaks ties low
  }
  return best->first;
}

inline std::int64_t scale_lcd(const PseudoBooleanPoly& p) {
  std::int64_t lcd = 1;
  for (const auto& [m, c] : p.terms()) lcd = checked_lcm(lcd, c.den());
  return lcd;
}

}  // namespace detail

struct ReduceResult {
  QuboInstance qubo;
  ReductionTrace trace;
  PseudoBooleanPoly quadratic;  // the reduced polynomial before integer scaling
};

/// Iteratively substitutes the most frequent super-quadratic factor u1 u2
/// with a fresh bit v and adds lambda * h(u1,u2,v), until degree <= 2. The
/// auto bound lambda = 1 + sum |c| over monomials containing the pair makes
/// dishonest auxiliaries strictly unprofitable. The quadratic result is
/// multiplied by the least common denominator so the emitted coefficients
/// are integers.
inline ReduceResult reduce_order(const PseudoBooleanPoly& input, const PenaltyConfig& cfg = {},
                                 std::optional<BitId> first_aux = std::nullopt) {
  ReduceResult out;
  PseudoBooleanPoly p = input;
  BitId next = first_aux.value_or(static_cast<BitId>(p.max_bit() + 1));

  while (p.degree() > 2) {
    auto pair = detail::most_frequent_pair(p);
    if (!pair) break;
    auto [u1, u2] = *pair;
    Rational lambda;
    if (cfg.lambda) {
      lambda = *cfg.lambda;
    } else {
      lambda = Rational(1);
      for (const auto& [m, c] : p.terms()) {
        if (m.contains_pair(u1, u2)) lambda += c.abs();
      }
    }
    BitId v = next++;
    p = p.substitute_factor(u1, u2, v) + lambda * rosenberg_poly(u1, u2, v);
    out.trace.records.push_back({u1, u2, v, lambda});
  }

  out.quadratic = p;
  QuboInstance& q = out.qubo;
  q.num_vars = static_cast<std::uint32_t>(p.max_bit() + 1);
  std::int64_t lcd = detail::scale_lcd(p);
  q.scale = Rational(1, lcd);
  for (const auto& [m, c] : p.terms()) {
    Rational scaled = c * Rational(lcd);
    const auto& bits = m.bits();
    if (bits.empty()) {
      q.offset += scaled.num();
    } else if (bits.size() == 1) {
      q.coeffs[{bits[0], bits[0]}] += scaled.num();
    } else {
      q.coeffs[{bits[0], bits[1]}] += scaled.num();
    }
  }
  return out;
}

struct CompileStats {
  BitId original_bits = 0;
  BitId auxiliary_bits = 0;
  std::size_t constraint_count = 0;
  std::size_t hubo_terms = 0;
  Rational rho;
  Rational max_snap_distance;
};

struct CompileResult {
  VariableRegistry registry;
  QuboInstance qubo;
  ReductionTrace trace;
  CompileStats stats;
};

inline Rational default_rho(const NetworkSpec& net, int dataset_size) {
  // Exceeds the largest possible loss gain (feasible MSE <= 4) against the
  // smallest squared residual quantum (1/(2H))^2, summed over samples.
  return Rational(4 * std::int64_t(2 * net.H) * (2 * net.H) * dataset_size + 1);
}

/// Deterministic composition registry -> constraints -> loss -> penalize ->
/// reduce_order. Identical inputs yield identical artifacts.
inline CompileResult compile_network(const NetworkSpec& net, const QuantizedDataset& data,
                                     const PenaltyConfig& cfg = {}) {
  net.validate();
  data.validate();
  if (data.size() < 1) throw data_error("compile: empty dataset");

  CompileResult out;
  out.registry = build_registry(net, data.size());
  ConstraintSet constraints = build_all_constraints(net, out.registry, data);
  LossBuild loss = build_loss(net, out.registry, data);
  constraints.append(std::move(loss.extra_constraints));

  Rational rho = cfg.rho.value_or(default_rho(net, data.size()));
  PseudoBooleanPoly penalized = penalize(loss.objective, constraints, rho);

  out.stats.original_bits = out.registry.num_bits();
  out.stats.constraint_count = constraints.size();
  out.stats.hubo_terms = penalized.num_terms();
  out.stats.rho = rho;
  out.stats.max_snap_distance = loss.max_snap_distance;

  ReduceResult reduced = reduce_order(penalized, cfg, out.registry.num_bits());
  out.qubo = std::move(reduced.qubo);
  out.trace = std::move(reduced.trace);
  if (out.qubo.num_vars < out.registry.num_bits()) {
    // trailing registry bits absent from the objective still count as vars
    out.qubo.num_vars = out.registry.num_bits();
  }
  out.stats.auxiliary_bits = out.qubo.num_vars - out.registry.num_bits();
  return out;
}

/// Extends an assignment of the original bits with honest auxiliary values
/// (v = u1 u2 in trace order).
inline std::vector<std::uint8_t> honest_extend(std::vector<std::uint8_t> assignment,
                                               const ReductionTrace& trace) {
  for (const auto& r : trace.records) {
    if (r.v >= assignment.size()) assignment.resize(r.v + 1, 0);
    assignment[r.v] = assignment.at(r.u1) & assignment.at(r.u2);
  }
  return assignment;
}

}  // namespace isl
