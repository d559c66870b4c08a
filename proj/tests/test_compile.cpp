#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "isinglearn/compile.hpp"
#include "isinglearn/model.hpp"
#include "isinglearn/solver.hpp"
#include "support/oracles.hpp"

using namespace isl;

namespace {

PseudoBooleanPoly var(BitId b) { return PseudoBooleanPoly::variable(b); }

QuantizedDataset tiny_dataset() {
  QuantizedDataset ds;
  ds.B = 0;
  ds.inputs = {{1, -1}};
  ds.labels = {{Rational(1)}};
  return ds;
}

NetworkSpec tiny_net() {
  NetworkSpec net;
  net.L = 2;
  net.H = 1;
  net.n = 2;
  net.m = 1;
  net.B = 0;
  return net;
}

}  // namespace

TEST_CASE("rosenberg polynomial: exhaustive properties") {
  PseudoBooleanPoly h = rosenberg_poly(1, 0, 2);  // arbitrary distinct ids
  for (std::uint64_t x = 0; x < 8; ++x) {
    auto bits = oracle::bits_of(x, 3);
    Rational value = h.evaluate(bits);
    CHECK(value >= Rational(0));
    bool honest = bits[2] == (bits[1] & bits[0]);
    CHECK((value == Rational(0)) == honest);
  }
  CHECK(rosenberg_poly(0, 1, 2).evaluate({1, 1, 1}) == Rational(0));
  CHECK(rosenberg_poly(0, 1, 2).evaluate({1, 0, 1}) == Rational(1));
  CHECK(rosenberg_poly(0, 1, 2).evaluate({0, 0, 1}) == Rational(3));
  CHECK_THROWS_AS((void)rosenberg_poly(1, 1, 2), std::invalid_argument);
}

TEST_CASE("penalize: no constraints leaves the objective unchanged") {
  PseudoBooleanPoly obj = Rational(3) * var(0) * var(1);
  CHECK(penalize(obj, {}, Rational(10)) == obj);
  CHECK_THROWS_AS((void)penalize(obj, {}, Rational(0)), std::invalid_argument);
}

TEST_CASE("penalize expands squared residuals") {
  ConstraintSet cs;
  cs.add(var(1) + var(2) - PseudoBooleanPoly::constant(1), "test", 0, -1, 0);
  PseudoBooleanPoly p = penalize(PseudoBooleanPoly(), cs, Rational(10));
  PseudoBooleanPoly expected = Rational(10) * (PseudoBooleanPoly::constant(1) - var(1) - var(2) +
                                               Rational(2) * (var(1) * var(2)));
  CHECK(p == expected);
  CHECK(p.evaluate({0, 1, 0}) == Rational(0));
  CHECK(p.evaluate({0, 0, 0}) == Rational(10));
}

TEST_CASE("penalized value equals the raw objective on satisfying assignments") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    PseudoBooleanPoly obj = oracle::random_poly(rng, 6, 6, 2);
    ConstraintSet cs;
    cs.add(var(0) - var(1), "eq", 0, -1, 0);
    cs.add(var(2) + var(3) - PseudoBooleanPoly::constant(1), "eq", 0, -1, 1);
    PseudoBooleanPoly p = penalize(obj, cs, Rational(97));
    for (std::uint64_t x = 0; x < 64; ++x) {
      auto bits = oracle::bits_of(x, 6);
      if (bits[0] == bits[1] && bits[2] + bits[3] == 1) {
        CHECK(p.evaluate(bits) == obj.evaluate(bits));
      }
    }
  }
}

TEST_CASE("reduce_order: worked three-variable example") {
  // s1 s2 s3 + s1 s2 + s3  ->  s4 s3 + s4 + s3 + lambda h(s1, s2, s4)
  PseudoBooleanPoly p = var(0) * var(1) * var(2) + var(0) * var(1) + var(2);
  ReduceResult res = reduce_order(p);
  REQUIRE(res.trace.records.size() == 1);
  const auto& rec = res.trace.records[0];
  CHECK(rec.u1 == 0);
  CHECK(rec.u2 == 1);
  CHECK(rec.v == 3);
  CHECK(rec.lambda == Rational(3));  // 1 + |1| + |1|
  PseudoBooleanPoly expected =
      var(3) * var(2) + var(3) + var(2) + rec.lambda * rosenberg_poly(0, 1, 3);
  CHECK(res.quadratic == expected);
  CHECK(res.qubo.scale == Rational(1));
}

TEST_CASE("already-quadratic input returns unchanged with empty trace") {
  PseudoBooleanPoly p = Rational(2) * var(0) * var(3) - var(1) + PseudoBooleanPoly::constant(7);
  ReduceResult res = reduce_order(p);
  CHECK(res.trace.records.empty());
  CHECK(res.quadratic == p);
  CHECK(res.qubo.offset == 7);
  CHECK(res.qubo.coeffs.at({0, 3}) == 2);
  CHECK(res.qubo.coeffs.at({1, 1}) == -1);
}

TEST_CASE("every reduction iteration removes the chosen pair everywhere") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    PseudoBooleanPoly p = oracle::random_poly(rng, 8, 8, 5);
    ReduceResult res = reduce_order(p);
    CHECK(res.quadratic.degree() <= 2);
    // replay the trace on the input and compare
    PseudoBooleanPoly replay = p;
    for (const auto& rec : res.trace.records) {
      replay = replay.substitute_factor(rec.u1, rec.u2, rec.v) +
               rec.lambda * rosenberg_poly(rec.u1, rec.u2, rec.v);
    }
    CHECK(replay == res.quadratic);
  }
}

TEST_CASE("order reduction preserves minima and ground states (random)") {
  // fast regression version; the acceptance suite runs the full criterion
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 40; ++rep) {
    int nbits = 4 + static_cast<int>(uniform_below(rng, 7));  // 4..10
    PseudoBooleanPoly p = oracle::random_poly(rng, nbits, 8, 5);
    ReduceResult res = reduce_order(p);
    int total = static_cast<int>(std::max<std::int64_t>(res.qubo.num_vars, nbits));
    REQUIRE(total <= 30);

    oracle::TermList hubo = oracle::TermList::from_poly(p, nbits);
    oracle::ExhaustiveResult hmin = oracle::exhaustive_min(hubo);
    CHECK(hubo.lcd == 1);  // integer coefficients in, integers out

    std::set<std::uint64_t> qubo_ground_x;
    std::int64_t qmin = INT64_MAX;
    oracle::TermList qlist = oracle::TermList::from_poly(res.quadratic, total);
    oracle::gray_enumerate(qlist, [&](std::uint64_t x, std::int64_t e) {
      if (e < qmin) {
        qmin = e;
        qubo_ground_x.clear();
      }
      if (e == qmin && qubo_ground_x.size() < 4096) {
        qubo_ground_x.insert(x & ((std::uint64_t{1} << nbits) - 1));
      }
    });

    CHECK(Rational(qmin, qlist.lcd) == Rational(hmin.min_energy));
    for (std::uint64_t x : qubo_ground_x) {
      CHECK(hubo.eval(x) == hmin.min_energy);
    }
  }
}

TEST_CASE("super-quadratic monomial mass strictly shrinks each iteration") {
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 20; ++rep) {
    PseudoBooleanPoly p = oracle::random_poly(rng, 10, 10, 5);
    ReduceResult res = reduce_order(p);
    auto excess = [](const PseudoBooleanPoly& q) {
      std::size_t e = 0;
      for (const auto& [m, c] : q.terms()) {
        if (m.degree() > 2) e += m.degree() - 2;
      }
      return e;
    };
    PseudoBooleanPoly cur = p;
    std::size_t mass = excess(cur);
    for (const auto& rec : res.trace.records) {
      cur = cur.substitute_factor(rec.u1, rec.u2, rec.v) +
            rec.lambda * rosenberg_poly(rec.u1, rec.u2, rec.v);
      std::size_t next = excess(cur);
      CHECK(next < mass);
      mass = next;
    }
    CHECK(mass == 0);
  }
}

TEST_CASE("fixed-lambda policy is honored") {
  PseudoBooleanPoly p = var(0) * var(1) * var(2);
  PenaltyConfig cfg;
  cfg.lambda = Rational(1000);
  ReduceResult res = reduce_order(p, cfg);
  REQUIRE(res.trace.records.size() == 1);
  CHECK(res.trace.records[0].lambda == Rational(1000));
}

TEST_CASE("penalty soundness at micro scale") {
  // constraints x0 + x1 = 1 and x2 = x3 with a cubic objective; constrained
  // brute force is the oracle for the compiled unconstrained problem
  ConstraintSet cs;
  cs.add(var(0) + var(1) - PseudoBooleanPoly::constant(1), "eq", 0, -1, 0);
  cs.add(var(2) - var(3), "eq", 0, -1, 1);
  PseudoBooleanPoly obj = Rational(3) * var(0) - Rational(2) * var(2) +
                          Rational(2) * (var(0) * var(2) * var(3));
  Rational rho(20);  // exceeds the objective spread of 7 against residual 1

  PseudoBooleanPoly penalized = penalize(obj, cs, rho);
  ReduceResult res = reduce_order(penalized);
  int total = static_cast<int>(res.qubo.num_vars);
  REQUIRE(total <= 8);

  // constrained oracle on the original four bits
  std::int64_t best = INT64_MAX;
  for (std::uint64_t x = 0; x < 16; ++x) {
    auto bits = oracle::bits_of(x, 4);
    if (bits[0] + bits[1] != 1 || bits[2] != bits[3]) continue;
    best = std::min(best, obj.evaluate(bits).num());
  }

  oracle::TermList qlist = oracle::TermList::from_poly(res.quadratic, total);
  std::int64_t qmin = INT64_MAX;
  std::vector<std::uint64_t> grounds;
  oracle::gray_enumerate(qlist, [&](std::uint64_t x, std::int64_t e) {
    if (e < qmin) {
      qmin = e;
      grounds.clear();
    }
    if (e == qmin) grounds.push_back(x);
  });
  CHECK(Rational(qmin, qlist.lcd) == Rational(best));
  for (std::uint64_t g : grounds) {
    auto bits = oracle::bits_of(static_cast<std::uint64_t>(g), total);
    for (const auto& c : cs.constraints) {
      CHECK(c.poly.evaluate(bits) == Rational(0));
    }
  }
}

TEST_CASE("default rho values") {
  NetworkSpec net = tiny_net();
  CHECK(default_rho(net, 1) == Rational(17));  // 4*(2H)^2*N + 1
  CHECK(default_rho(net, 4) == Rational(65));
  net.H = 3;
  CHECK(default_rho(net, 20) == Rational(2881));
}

TEST_CASE("compile: single consistent sample reaches ground energy zero") {
  CompileResult res = compile_network(tiny_net(), tiny_dataset());
  CHECK(res.stats.original_bits == 24);
  CHECK(res.qubo.num_vars > res.stats.original_bits);
  CHECK(res.qubo.num_vars <= 34);

  SpinSolution sol = solve_exact(res.qubo, 34);
  CHECK(sol.rescaled_energy == Rational(0));
}

TEST_CASE("compiled energy equals the snapped MSE on honest assignments") {
  NetworkSpec net = tiny_net();
  QuantizedDataset ds = tiny_dataset();
  CompileResult res = compile_network(net, ds);

  std::mt19937_64 rng(21);
  VariableRegistry& reg = res.registry;
  int checked = 0;
  for (int rep = 0; rep < 200 && checked < 10; ++rep) {
    std::vector<std::uint8_t> bits(reg.num_bits(), 0);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1);
    DecodedParameters params = decode(bits, reg);
    std::vector<std::uint8_t> honest;
    if (!oracle::try_honest_assignment(reg, params, ds, honest)) continue;
    ++checked;
    honest = honest_extend(honest, res.trace);
    honest.resize(res.qubo.num_vars, 0);
    Rational mse(0);
    for (int i = 0; i < ds.size(); ++i) {
      Rational d = snap_label(ds.labels[i][0], net.H) - forward(params, ds.inputs[i])[0];
      mse += d * d;
    }
    mse = mse / Rational(ds.size());
    CHECK(res.qubo.rescale(res.qubo.energy(honest)) == mse);
  }
  CHECK(checked >= 5);
}

TEST_CASE("relu-family and deeper nets compile to exact honest energies") {
  struct Case {
    ActivationKind act;
    int L;
  };
  for (Case c : {Case{ActivationKind::relu, 2}, Case{ActivationKind::leaky_relu, 2},
                 Case{ActivationKind::abs, 2}, Case{ActivationKind::prelu, 2},
                 Case{ActivationKind::sign, 3}}) {
    NetworkSpec net;
    net.L = c.L;
    net.H = c.L == 3 ? 2 : 1;
    net.n = 2;
    net.m = 1;
    net.B = 0;
    net.activation = c.act;
    net.alpha = Rational(1, 4);
    QuantizedDataset ds;
    ds.B = 0;
    ds.inputs = {{1, -1}, {-1, 1}};
    ds.labels = {{Rational(1)}, {Rational(-1)}};
    CompileResult res = compile_network(net, ds);

    std::mt19937_64 rng(31 + int(c.act));
    int checked = 0;
    for (int rep = 0; rep < 400 && checked < 8; ++rep) {
      std::vector<std::uint8_t> bits(res.registry.num_bits(), 0);
      for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1);
      DecodedParameters params = decode(bits, res.registry);
      std::vector<std::uint8_t> honest;
      if (!oracle::try_honest_assignment(res.registry, params, ds, honest)) continue;
      ++checked;
      honest = honest_extend(honest, res.trace);
      honest.resize(res.qubo.num_vars, 0);
      Rational mse(0);
      for (int i = 0; i < ds.size(); ++i) {
        Rational d = snap_label(ds.labels[i][0], net.H) - forward(params, ds.inputs[i])[0];
        mse += d * d;
      }
      mse = mse / Rational(ds.size());
      CAPTURE(int(c.act));
      CHECK(res.qubo.rescale(res.qubo.energy(honest)) == mse);
    }
    CHECK(checked >= 3);
  }
}

TEST_CASE("hinge compile: honest energy equals the hinge loss") {
  NetworkSpec net;
  net.L = 2;
  net.H = 1;
  net.n = 2;
  net.m = 1;
  net.B = 0;
  net.loss = LossKind::hinge;
  QuantizedDataset ds;
  ds.B = 0;
  ds.inputs = {{1, -1}, {-1, 1}};
  ds.labels = {{Rational(1)}, {Rational(-1)}};
  CompileResult res = compile_network(net, ds);

  std::mt19937_64 rng(77);
  int checked = 0;
  for (int rep = 0; rep < 400 && checked < 8; ++rep) {
    std::vector<std::uint8_t> bits(res.registry.num_bits(), 0);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1);
    DecodedParameters params = decode(bits, res.registry);
    std::vector<std::uint8_t> honest;
    if (!oracle::try_honest_assignment(res.registry, params, ds, honest)) continue;
    ++checked;
    honest = honest_extend(honest, res.trace);
    honest.resize(res.qubo.num_vars, 0);
    Rational hinge(0);
    for (int i = 0; i < ds.size(); ++i) {
      Rational margin = Rational(1) - ds.labels[i][0] * forward(params, ds.inputs[i])[0];
      hinge += margin.abs() + margin;  // r + (1 - y*yhat)
    }
    hinge = hinge / Rational(2 * ds.size());
    CHECK(res.qubo.rescale(res.qubo.energy(honest)) == hinge);
  }
  CHECK(checked >= 3);
}

TEST_CASE("conflicting labels: honest optimum sits at the MSE floor") {
  // identical inputs with labels +1 and -1: best possible MSE is 1 at
  // y_hat = 0, reachable with a zero last layer
  NetworkSpec net = tiny_net();
  QuantizedDataset ds;
  ds.B = 0;
  ds.inputs = {{1, -1}, {1, -1}};
  ds.labels = {{Rational(1)}, {Rational(-1)}};
  CompileResult res = compile_network(net, ds);

  DecodedParameters zero_out;
  zero_out.net = net;
  zero_out.weights = {{{Rational(1), Rational(1)}}, {{Rational(0)}}};
  zero_out.biases = {{Rational(0)}, {Rational(0)}};
  std::vector<std::uint8_t> honest;
  REQUIRE(oracle::try_honest_assignment(res.registry, zero_out, ds, honest));
  honest = honest_extend(honest, res.trace);
  honest.resize(res.qubo.num_vars, 0);
  CHECK(res.qubo.rescale(res.qubo.energy(honest)) == Rational(1));
}

TEST_CASE("compilation is deterministic") {
  NetworkSpec net = tiny_net();
  QuantizedDataset ds = tiny_dataset();
  CompileResult a = compile_network(net, ds);
  CompileResult b = compile_network(net, ds);
  std::ostringstream qa, qb, ta, tb, ma, mb;
  a.qubo.write(qa);
  b.qubo.write(qb);
  a.trace.write(ta);
  b.trace.write(tb);
  a.registry.write_manifest(ma);
  b.registry.write_manifest(mb);
  CHECK(qa.str() == qb.str());
  CHECK(ta.str() == tb.str());
  CHECK(ma.str() == mb.str());
}

TEST_CASE("qubo and trace files roundtrip") {
  CompileResult res = compile_network(tiny_net(), tiny_dataset());
  std::stringstream qs;
  res.qubo.write(qs);
  QuboInstance q2 = QuboInstance::read(qs);
  CHECK(q2.num_vars == res.qubo.num_vars);
  CHECK(q2.offset == res.qubo.offset);
  CHECK(q2.scale == res.qubo.scale);
  CHECK(q2.coeffs == res.qubo.coeffs);

  std::stringstream ts;
  res.trace.write(ts);
  ReductionTrace t2 = ReductionTrace::read(ts);
  REQUIRE(t2.records.size() == res.trace.records.size());
  for (std::size_t i = 0; i < t2.records.size(); ++i) {
    CHECK(t2.records[i].u1 == res.trace.records[i].u1);
    CHECK(t2.records[i].u2 == res.trace.records[i].u2);
    CHECK(t2.records[i].v == res.trace.records[i].v);
    CHECK(t2.records[i].lambda == res.trace.records[i].lambda);
  }
}
