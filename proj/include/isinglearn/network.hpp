/// @file network.hpp
/// @brief Network architecture description and its flat key-value file format.

#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "isinglearn/rational.hpp"

namespace isl {

/// Raised for malformed or unsupported configuration; maps to exit code 2.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised for malformed or degenerate data; maps to exit code 4.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ActivationKind { sign, relu, leaky_relu, prelu, abs };
enum class LossKind { mse, hinge };
enum class LayerKind { dense, conv2d, avgpool, batchnorm };

inline const char* activation_name(ActivationKind a) {
  switch (a) {
    case ActivationKind::sign: return "sign";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::prelu: return "prelu";
    case ActivationKind::abs: return "abs";
  }
  return "?";
}

inline ActivationKind activation_from_name(const std::string& s) {
  if (s == "sign") return ActivationKind::sign;
  if (s == "relu") return ActivationKind::relu;
  if (s == "leaky_relu") return ActivationKind::leaky_relu;
  if (s == "prelu") return ActivationKind::prelu;
  if (s == "abs") return ActivationKind::abs;
  if (s == "tanh" || s == "sigmoid" || s == "elu") {
    throw config_error("non-polynomial activation '" + s +
                       "' is not supported (supported: sign, relu, leaky_relu, prelu, abs)");
  }
  throw config_error("unknown activation '" + s + "'");
}

inline const char* loss_name(LossKind l) {
  return l == LossKind::mse ? "mse" : "hinge";
}

inline LossKind loss_from_name(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "hinge") return LossKind::hinge;
  if (s == "cross_entropy") {
    throw config_error("non-polynomial loss 'cross_entropy' is not supported");
  }
  throw config_error("unknown loss '" + s + "'");
}

/// Fully-connected quantized network: L layers, hidden width H, input dim n,
/// output dim m, input bit width B. Hidden activations are `activation`
/// everywhere except the last layer, which has none. Middle-layer biases are
/// frozen to H-1 and middle weights are one-bit (+-1).
struct NetworkSpec {
  int L = 2;
  int H = 1;
  int n = 1;
  int m = 1;
  int B = 0;
  ActivationKind activation = ActivationKind::sign;
  LossKind loss = LossKind::mse;
  Rational alpha{1, 4};     // leaky_relu slope
  int prelu_alpha_bits = 3;  // alpha encoded on [0, 1) with scale 1/2^bits
  std::int64_t bias1_offset = 0;

  int frozen_middle_bias() const { return H - 1; }

  void validate() const {
    if (L < 2) throw config_error("network: layers must be >= 2");
    if (H < 1 || n < 1 || m < 1) throw config_error("network: dimensions must be >= 1");
    if (B < 0) throw config_error("network: input_bits must be >= 0");
    if (B > 24) throw config_error("network: input_bits too large");
    if (activation == ActivationKind::leaky_relu &&
        (alpha <= Rational(0) || alpha >= Rational(1))) {
      throw config_error("network: leaky_relu alpha must be in (0,1)");
    }
    if (prelu_alpha_bits < 1 || prelu_alpha_bits > 16) {
      throw config_error("network: alpha_bits out of range");
    }
  }

  void set(const std::string& key, const std::string& value) {
    if (key == "layers") L = std::stoi(value);
    else if (key == "hidden") H = std::stoi(value);
    else if (key == "inputs") n = std::stoi(value);
    else if (key == "outputs") m = std::stoi(value);
    else if (key == "input_bits") B = std::stoi(value);
    else if (key == "activation") activation = activation_from_name(value);
    else if (key == "loss") loss = loss_from_name(value);
    else if (key == "alpha") alpha = Rational::parse(value);
    else if (key == "alpha_bits") prelu_alpha_bits = std::stoi(value);
    else if (key == "bias1_offset") bias1_offset = std::stoll(value);
    else if (key.rfind("layer", 0) == 0) {
      // Structured per-layer kinds are formulated at the constraint level
      // only; the training pipeline is dense.
      throw config_error("per-layer override '" + key +
                         "': only dense stacks are supported by the training pipeline");
    } else {
      throw config_error("network file: unknown key '" + key + "'");
    }
  }

  void write(std::ostream& os) const {
    os << "layers=" << L << "\nhidden=" << H << "\ninputs=" << n << "\noutputs=" << m
       << "\ninput_bits=" << B << "\nactivation=" << activation_name(activation)
       << "\nloss=" << loss_name(loss) << "\n";
    if (activation == ActivationKind::leaky_relu) os << "alpha=" << alpha.str() << "\n";
    if (activation == ActivationKind::prelu) os << "alpha_bits=" << prelu_alpha_bits << "\n";
    if (bias1_offset != 0) os << "bias1_offset=" << bias1_offset << "\n";
  }

  static NetworkSpec read(std::istream& is) {
    NetworkSpec net;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
        line.pop_back();
      std::size_t start = line.find_first_not_of(" \t");
      if (start == std::string::npos) continue;
      line = line.substr(start);
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw config_error("network file line " + std::to_string(lineno) + ": expected key=value");
      }
      net.set(line.substr(0, eq), line.substr(eq + 1));
    }
    net.validate();
    return net;
  }
};

}  // namespace isl
