#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <set>
#include <sstream>

#include "doctest.h"
#include "isinglearn/cli.hpp"
#include "isinglearn/encoding.hpp"
#include "support/oracles.hpp"

using namespace isl;

namespace {

NetworkSpec mnist_net() {
  NetworkSpec net;
  net.L = 2;
  net.H = 1;
  net.n = 4;
  net.m = 1;
  net.B = 0;
  return net;
}

}  // namespace

TEST_CASE("bias(1) width follows the protocol") {
  NetworkSpec net = mnist_net();
  AffineEncoding b1 = encode_variable(bias_key(1, 0), net);
  CHECK(b1.num_bits() == 4);  // floor(log2(4 * 2^(0+1))) + 1
  CHECK(b1.min_value() == Rational(0));
  CHECK(b1.max_value() == Rational(15));
}

TEST_CASE("postact is the two-level +-1 variable") {
  NetworkSpec net = mnist_net();
  VariableRegistry reg = build_registry(net, 1);
  const AffineEncoding& a = reg.postact(1, 0, 0);
  CHECK(a.num_bits() == 1);
  std::vector<std::uint8_t> bits(reg.num_bits(), 0);
  bits[a.bits[0]] = 1;
  CHECK(a.decode(bits) == Rational(1));
  bits[a.bits[0]] = 0;
  CHECK(a.decode(bits) == Rational(-1));
}

TEST_CASE("prediction encoding for H=1") {
  NetworkSpec net = mnist_net();
  VariableRegistry reg = build_registry(net, 1);
  const AffineEncoding& y = reg.prediction(0, 0);
  CHECK(y.num_bits() == 3);
  CHECK(y.scale == Rational(1, 2));
  CHECK(y.offset == Rational(-2));
  std::set<Rational> values;
  for (std::uint64_t raw = 0; raw < 8; ++raw) {
    std::vector<std::uint8_t> bits(reg.num_bits(), 0);
    for (int j = 0; j < 3; ++j) bits[y.bits[j]] = static_cast<std::uint8_t>(raw >> j & 1);
    values.insert(y.decode(bits));
  }
  std::set<Rational> expected = {Rational(-1), Rational(-1, 2), Rational(0), Rational(1, 2),
                                 Rational(1),  Rational(3, 2),  Rational(2), Rational(5, 2)};
  CHECK(values == expected);
}

TEST_CASE("registry for the 4-sample MNIST configuration has 84 bits") {
  VariableRegistry reg = build_registry(mnist_net(), 4);
  CHECK(reg.num_bits() == 84);
  CHECK(spin_count_closed_form(mnist_net(), 4) == 84);
}

TEST_CASE("registry rejects empty datasets") {
  CHECK_THROWS_AS((void)build_registry(mnist_net(), 0), std::invalid_argument);
}

TEST_CASE("middle-layer bias is frozen, not encoded") {
  NetworkSpec net = mnist_net();
  net.L = 3;
  CHECK_THROWS_AS((void)encode_variable(bias_key(2, 0), net), std::invalid_argument);
  VariableRegistry reg = build_registry(net, 2);
  CHECK_FALSE(reg.contains(bias_key(2, 0)));
}

TEST_CASE("doubling N doubles exactly the per-sample rows") {
  NetworkSpec net;
  net.L = 3;
  net.H = 2;
  net.n = 3;
  net.m = 1;
  net.B = 1;
  VariableRegistry r1 = build_registry(net, 5);
  VariableRegistry r2 = build_registry(net, 10);
  std::map<VariableKind, std::int64_t> bits1, bits2;
  for (const auto& [k, e] : r1.entries()) bits1[k.kind] += e.num_bits();
  for (const auto& [k, e] : r2.entries()) bits2[k.kind] += e.num_bits();
  for (VariableKind kind : {VariableKind::preact, VariableKind::absval, VariableKind::slack,
                            VariableKind::postact, VariableKind::prediction}) {
    CHECK(bits2[kind] == 2 * bits1[kind]);
  }
  CHECK(bits2[VariableKind::weight] == bits1[VariableKind::weight]);
  CHECK(bits2[VariableKind::bias] == bits1[VariableKind::bias]);
}

TEST_CASE("bit ids are dense and disjoint") {
  NetworkSpec net;
  net.L = 4;
  net.H = 3;
  net.n = 2;
  net.m = 2;
  net.B = 2;
  VariableRegistry reg = build_registry(net, 3);
  std::set<BitId> seen;
  for (const auto& [k, e] : reg.entries()) {
    for (BitId b : e.bits) {
      CHECK(seen.insert(b).second);
      CHECK(b < reg.num_bits());
    }
  }
  CHECK(seen.size() == reg.num_bits());
  CHECK(spin_count_closed_form(net, 3) == reg.num_bits());
}

TEST_CASE("decode examples") {
  NetworkSpec net = mnist_net();
  VariableRegistry reg = build_registry(net, 1);
  const AffineEncoding& b1 = reg.bias(1, 0);
  std::vector<std::uint8_t> bits(reg.num_bits(), 0);
  bits[b1.bits[0]] = 1;
  bits[b1.bits[2]] = 1;  // pattern (1,0,1,0) -> 1 + 4
  CHECK(decode_value(b1, bits) == Rational(5));
}

TEST_CASE("encode/decode roundtrip over every representable value") {
  NetworkSpec net;
  net.L = 2;
  net.H = 2;
  net.n = 2;
  net.m = 1;
  net.B = 1;
  VariableRegistry reg = build_registry(net, 1);
  std::vector<std::uint8_t> bits(reg.num_bits(), 0);
  for (const auto& [key, enc] : reg.entries()) {
    for (std::int64_t raw = 0; raw < (std::int64_t{1} << enc.num_bits()); ++raw) {
      Rational value = enc.scale * (Rational(raw) + enc.offset);
      CHECK(enc.representable(value));
      enc.encode(value, bits);
      CHECK(enc.decode(bits) == value);
    }
    CHECK_FALSE(enc.representable(enc.max_value() + enc.scale));
  }
}

TEST_CASE("preact range covers the reachable linear-transform range") {
  for (int H : {1, 2, 3}) {
    for (int n : {1, 2, 4}) {
      for (int B : {0, 1, 2}) {
        NetworkSpec net;
        net.L = 3;
        net.H = H;
        net.n = n;
        net.m = 1;
        net.B = B;
        VariableRegistry reg = build_registry(net, 1);
        // layer 1: W x + b with x in [-2^B, 2^B], b in its encoded range
        const AffineEncoding& s1 = reg.preact(1, 0, 0);
        Rational reach_lo = Rational(-(std::int64_t{n} << B)) + reg.bias(1, 0).min_value();
        Rational reach_hi = Rational(std::int64_t{n} << B) + reg.bias(1, 0).max_value();
        CHECK(s1.min_value() <= reach_lo);
        CHECK(s1.max_value() >= reach_hi);
        // middle layer: W a + (H-1) with a in {-1,+1}
        const AffineEncoding& s2 = reg.preact(2, 0, 0);
        CHECK(s2.min_value() <= Rational(-1));
        CHECK(s2.max_value() >= Rational(2 * H - 1));
      }
    }
  }
}

TEST_CASE("relu-family registries size encodings by range propagation") {
  NetworkSpec net;
  net.L = 3;
  net.H = 2;
  net.n = 2;
  net.m = 1;
  net.B = 1;
  net.activation = ActivationKind::relu;
  VariableRegistry reg = build_registry(net, 1);
  // layer-1 s range: [-4, 4 + bmax]
  Rational s_hi = Rational(4) + reg.bias(1, 0).max_value();
  CHECK(reg.preact(1, 0, 0).max_value() >= s_hi);
  CHECK(reg.postact(1, 0, 0).min_value() == Rational(0));
  CHECK(reg.postact(1, 0, 0).max_value() >= s_hi);
  CHECK(reg.slack(1, 0, 0).num_bits() == 1);  // t in {-1,+1}
  // layer-2 s range covers W a + (H-1) with a in [0, a_hi]
  Rational a_hi = reg.postact_range(1).hi;
  CHECK(reg.preact(2, 0, 0).min_value() <= Rational(net.H - 1) - Rational(net.H) * a_hi);
  CHECK(reg.preact(2, 0, 0).max_value() >= Rational(net.H - 1) + Rational(net.H) * a_hi);
}

TEST_CASE("spin count asymptotics stay within constant factors") {
  // num_bits / (H^2 L + H L N log2 H) bounded on the grid (the acceptance
  // suite pins the full criterion; this is the smoke version)
  NetworkSpec net;
  net.n = 4;
  net.m = 1;
  net.B = 0;
  double lo = 1e30, hi = 0;
  for (int H : {2, 4, 8, 16}) {
    for (int L : {3, 4, 5}) {
      for (int N : {4, 16, 64}) {
        net.H = H;
        net.L = L;
        VariableRegistry reg = build_registry(net, N);
        double denom = double(H) * H * L + double(H) * L * N * std::log2(double(H));
        double ratio = reg.num_bits() / denom;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
    }
  }
  CHECK(lo > 0);
  CHECK(hi / lo <= 8.0);
}

TEST_CASE("manifest roundtrip") {
  NetworkSpec net;
  net.L = 3;
  net.H = 2;
  net.n = 3;
  net.m = 1;
  net.B = 1;
  VariableRegistry reg = build_registry(net, 2);
  std::stringstream ss;
  reg.write_manifest(ss);
  VariableRegistry back = VariableRegistry::read_manifest(ss);
  CHECK(back.num_bits() == reg.num_bits());
  CHECK(back.net().L == net.L);
  CHECK(back.net().H == net.H);
  REQUIRE(back.entries().size() == reg.entries().size());
  for (const auto& [key, enc] : reg.entries()) {
    const AffineEncoding& b = back.at(key);
    CHECK(b.bits == enc.bits);
    CHECK(b.offset == enc.offset);
    CHECK(b.scale == enc.scale);
  }
}
