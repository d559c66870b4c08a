#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sstream>

#include "doctest.h"
#include "isinglearn/cli.hpp"
#include "support/oracles.hpp"

using namespace isl;

// Cross-format invariants: every artifact reloads to a semantically equal
// value. Per-format details live in the owning modules' tests.

TEST_CASE("network file roundtrip, comments and errors") {
  NetworkSpec net;
  net.L = 3;
  net.H = 4;
  net.n = 2;
  net.m = 1;
  net.B = 2;
  net.activation = ActivationKind::leaky_relu;
  net.alpha = Rational(1, 8);
  net.loss = LossKind::hinge;
  std::stringstream ss;
  net.write(ss);
  NetworkSpec back = NetworkSpec::read(ss);
  CHECK(back.L == net.L);
  CHECK(back.H == net.H);
  CHECK(back.n == net.n);
  CHECK(back.m == net.m);
  CHECK(back.B == net.B);
  CHECK(back.activation == net.activation);
  CHECK(back.alpha == net.alpha);
  CHECK(back.loss == net.loss);

  std::stringstream commented("# a net\nlayers=2\nhidden=1 \ninputs=4\noutputs=1\ninput_bits=0\n");
  NetworkSpec c = NetworkSpec::read(commented);
  CHECK(c.H == 1);
  CHECK(c.n == 4);

  std::stringstream bad("layers=2\nwat\n");
  CHECK_THROWS_AS((void)NetworkSpec::read(bad), config_error);
  std::stringstream unknown("layers=2\nfrobnicate=3\n");
  CHECK_THROWS_AS((void)NetworkSpec::read(unknown), config_error);
  std::stringstream conv("layers=3\nlayer2.kind=conv2d\n");
  CHECK_THROWS_AS((void)NetworkSpec::read(conv), config_error);
}

TEST_CASE("qubo file: parse errors cite line numbers") {
  std::stringstream missing("vars 3\n0 0 1\n");
  try {
    (void)QuboInstance::read(missing);
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  std::stringstream bad_coeff("qubo/1\nvars 2\nscale 1/1\noffset 0\n1 0 5\n");
  try {
    (void)QuboInstance::read(bad_coeff);
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
}

TEST_CASE("qubo energies are reproduced after a file roundtrip") {
  std::mt19937_64 rng(71);
  QuantizedDataset ds = two_moon(6, 0.05, 2, 1);
  NetworkSpec net;
  net.L = 2;
  net.H = 1;
  net.n = 2;
  net.m = 1;
  net.B = 1;
  CompileResult res = compile_network(net, ds);
  std::stringstream ss;
  res.qubo.write(ss);
  QuboInstance back = QuboInstance::read(ss);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::uint8_t> bits(res.qubo.num_vars);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1);
    CHECK(back.energy(bits) == res.qubo.energy(bits));
    CHECK(back.rescale(back.energy(bits)) == res.qubo.rescale(res.qubo.energy(bits)));
  }
}

TEST_CASE("manifest written by compile carries the audit header") {
  QuantizedDataset ds = two_moon(4, 0.05, 2, 1);
  NetworkSpec net;
  net.L = 2;
  net.H = 1;
  net.n = 2;
  net.m = 1;
  net.B = 1;
  CompileResult res = compile_network(net, ds);
  std::stringstream ss;
  res.registry.write_manifest(ss);
  std::string text = ss.str();
  CHECK(text.find("# net layers=2") != std::string::npos);
  CHECK(text.find("# samples=4") != std::string::npos);
  CHECK(text.find("# total_bits=") != std::string::npos);

  std::stringstream again(text);
  VariableRegistry back = VariableRegistry::read_manifest(again);
  // decoding through a reloaded manifest matches the original registry
  std::vector<std::uint8_t> bits(res.registry.num_bits(), 0);
  bits[res.registry.prediction(0, 0).bits[0]] = 1;
  CHECK(back.prediction(0, 0).decode(bits) == res.registry.prediction(0, 0).decode(bits));
}

TEST_CASE("poly text format accepts comments and blank lines") {
  std::stringstream ss("# objective\n\n3/2 0 2\n-1/1\n");
  PseudoBooleanPoly p = PseudoBooleanPoly::read_text(ss);
  CHECK(p.coefficient(Monomial{0, 2}) == Rational(3, 2));
  CHECK(p.coefficient(Monomial{}) == Rational(-1));
}
