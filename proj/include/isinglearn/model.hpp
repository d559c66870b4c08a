/// @file model.hpp
/// @brief Decoding solutions into network parameters, exact forward
/// inference, evaluation metrics and canonical parameter comparison.

#pragma once

#include <algorithm>
#include <array>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "isinglearn/data.hpp"
#include "isinglearn/encoding.hpp"
#include "isinglearn/network.hpp"
#include "isinglearn/rational.hpp"

namespace isl {

struct DecodedParameters {
  NetworkSpec net;
  std::vector<std::vector<std::vector<Rational>>> weights;  // [layer-1][row][col]
  std::vector<std::vector<Rational>> biases;                // [layer-1][element]
  Rational alpha{1, 4};                                     // prelu only

  const Rational& W(int layer, int row, int col) const {
    return weights[layer - 1][row][col];
  }
  const Rational& b(int layer, int element) const { return biases[layer - 1][element]; }
};

/// theta = decode(sigma): applies each registry encoding to the solution
/// bits. Trailing reduction auxiliaries are outside the registry and are
/// ignored. Middle biases come back as the frozen constant H-1.
inline DecodedParameters decode(const std::vector<std::uint8_t>& solution,
                                const VariableRegistry& reg) {
  const NetworkSpec& net = reg.net();
  if (solution.size() < reg.num_bits()) {
    throw std::invalid_argument("decode: solution shorter than registry (" +
                                std::to_string(solution.size()) + " < " +
                                std::to_string(reg.num_bits()) + " bits)");
  }
  DecodedParameters out;
  out.net = net;
  out.weights.resize(net.L);
  out.biases.resize(net.L);
  for (int k = 1; k <= net.L; ++k) {
    int rows = k == net.L ? net.m : net.H;
    int cols = k == 1 ? net.n : net.H;
    out.weights[k - 1].assign(rows, std::vector<Rational>(cols));
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        out.weights[k - 1][r][c] = reg.weight(k, r, c).decode(solution);
      }
    }
    if (k == 1 || k == net.L) {
      int nb = k == net.L ? net.m : net.H;
      out.biases[k - 1].resize(nb);
      for (int e = 0; e < nb; ++e) out.biases[k - 1][e] = reg.bias(k, e).decode(solution);
    } else {
      out.biases[k - 1].assign(net.H, Rational(net.frozen_middle_bias()));
    }
  }
  if (net.activation == ActivationKind::prelu) {
    out.alpha = reg.at({VariableKind::prelu_alpha, 0, -1, 0}).decode(solution);
  } else if (net.activation == ActivationKind::leaky_relu) {
    out.alpha = net.alpha;
  }
  return out;
}

inline Rational apply_activation(ActivationKind kind, const Rational& s, const Rational& alpha) {
  switch (kind) {
    case ActivationKind::sign: return s >= Rational(0) ? Rational(1) : Rational(-1);
    case ActivationKind::relu: return s >= Rational(0) ? s : Rational(0);
    case ActivationKind::leaky_relu:
    case ActivationKind::prelu: return s >= Rational(0) ? s : alpha * s;
    case ActivationKind::abs: return s.abs();
  }
  throw std::logic_error("apply_activation: bad kind");
}

struct ForwardTrace {
  std::vector<std::vector<Rational>> preact;   // per hidden layer
  std::vector<std::vector<Rational>> postact;  // per hidden layer
  std::vector<Rational> output;
};

inline ForwardTrace forward_trace(const DecodedParameters& p,
                                  const std::vector<std::int64_t>& x) {
  const NetworkSpec& net = p.net;
  if (static_cast<int>(x.size()) != net.n) throw std::invalid_argument("forward: bad input dim");
  ForwardTrace tr;
  std::vector<Rational> a(x.begin(), x.end());
  for (int k = 1; k <= net.L - 1; ++k) {
    std::vector<Rational> s(net.H), act(net.H);
    for (int h = 0; h < net.H; ++h) {
      Rational sum = p.b(k, h);
      for (std::size_t j = 0; j < a.size(); ++j) sum += p.W(k, h, static_cast<int>(j)) * a[j];
      s[h] = sum;
      act[h] = apply_activation(net.activation, sum, p.alpha);
    }
    tr.preact.push_back(s);
    tr.postact.push_back(act);
    a = act;
  }
  tr.output.resize(net.m);
  for (int o = 0; o < net.m; ++o) {
    Rational sum = p.b(net.L, o);
    for (int j = 0; j < net.H; ++j) sum += p.W(net.L, o, j) * a[j];
    tr.output[o] = sum;
  }
  return tr;
}

/// Exact inference; sign(0) = +1, last layer has no activation.
inline std::vector<Rational> forward(const DecodedParameters& p,
                                     const std::vector<std::int64_t>& x) {
  return forward_trace(p, x).output;
}

enum class TaskKind { regression, binary_classification };

struct EvalReport {
  Rational mse{0};
  Rational accuracy{0};
  // rows: true class (+1 then -1); cols: predicted (+1 then -1)
  std::array<std::array<std::int64_t, 2>, 2> confusion{{{0, 0}, {0, 0}}};
  bool classification = false;
};

/// MSE per the quadratic loss definition; binary decision is non-negative ->
/// class +1 (mirroring sign(0) = +1).
inline EvalReport evaluate_model(const DecodedParameters& p, const QuantizedDataset& data,
                                 TaskKind task) {
  EvalReport rep;
  const int N = data.size();
  if (N == 0) throw data_error("evaluate_model: empty dataset");
  Rational sq(0);
  std::int64_t correct = 0;
  for (int i = 0; i < N; ++i) {
    std::vector<Rational> y_hat = forward(p, data.inputs[i]);
    for (int o = 0; o < p.net.m; ++o) {
      Rational d = data.labels[i][o] - y_hat[o];
      sq += d * d;
    }
    if (task == TaskKind::binary_classification) {
      bool pred_pos = y_hat[0] >= Rational(0);
      bool true_pos = data.labels[i][0] >= Rational(0);
      if (pred_pos == true_pos) ++correct;
      rep.confusion[true_pos ? 0 : 1][pred_pos ? 0 : 1] += 1;
    }
  }
  rep.mse = sq / Rational(N);
  if (task == TaskKind::binary_classification) {
    rep.classification = true;
    rep.accuracy = Rational(correct, N);
  }
  return rep;
}

/// Sorts the hidden neurons of each hidden layer by the total order on
/// (incoming weight row, bias, outgoing column), permuting outgoing weights
/// consistently. Passes repeat until a fixpoint so the result is idempotent;
/// the forward function is unchanged by construction.
inline DecodedParameters canonicalize(const DecodedParameters& input) {
  DecodedParameters p = input;
  const NetworkSpec& net = p.net;
  for (int pass = 0; pass < 64; ++pass) {
    bool changed = false;
    for (int k = 1; k <= net.L - 1; ++k) {
      const int H = net.H;
      std::vector<int> order(H);
      for (int h = 0; h < H; ++h) order[h] = h;
      auto key_less = [&](int a, int b) {
        const auto& wa = p.weights[k - 1][a];
        const auto& wb = p.weights[k - 1][b];
        if (wa != wb) return wa < wb;
        if (p.biases[k - 1][a] != p.biases[k - 1][b]) {
          return p.biases[k - 1][a] < p.biases[k - 1][b];
        }
        for (std::size_t r = 0; r < p.weights[k].size(); ++r) {
          if (p.weights[k][r][a] != p.weights[k][r][b]) return p.weights[k][r][a] < p.weights[k][r][b];
        }
        return false;
      };
      std::stable_sort(order.begin(), order.end(), key_less);
      bool identity = true;
      for (int h = 0; h < H; ++h) {
        if (order[h] != h) identity = false;
      }
      if (identity) continue;
      changed = true;
      auto w_in = p.weights[k - 1];
      auto b_in = p.biases[k - 1];
      auto w_out = p.weights[k];
      for (int h = 0; h < H; ++h) {
        p.weights[k - 1][h] = w_in[order[h]];
        p.biases[k - 1][h] = b_in[order[h]];
        for (std::size_t r = 0; r < w_out.size(); ++r) {
          p.weights[k][r][h] = w_out[r][order[h]];
        }
      }
    }
    if (!changed) break;
  }
  return p;
}

// --- parameter file -------------------------------------------------------------
// Flat key=value text: W<k>.<row>.<col>=num/den, b<k>.<i>=num/den, plus the
// network header keys so the file stands alone.

inline void write_params(std::ostream& os, const DecodedParameters& p) {
  p.net.write(os);
  if (p.net.activation == ActivationKind::prelu) os << "alpha=" << p.alpha.str() << "\n";
  for (int k = 1; k <= p.net.L; ++k) {
    const auto& W = p.weights[k - 1];
    for (std::size_t r = 0; r < W.size(); ++r) {
      for (std::size_t c = 0; c < W[r].size(); ++c) {
        os << "W" << k << "." << r << "." << c << "=" << W[r][c].str() << "\n";
      }
    }
    for (std::size_t e = 0; e < p.biases[k - 1].size(); ++e) {
      os << "b" << k << "." << e << "=" << p.biases[k - 1][e].str() << "\n";
    }
  }
}

inline DecodedParameters read_params(std::istream& is) {
  NetworkSpec net;
  std::map<std::string, Rational> values;
  std::string line;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    while (!val.empty() && (val.back() == '\r' || val.back() == ' ')) val.pop_back();
    if (key.empty()) continue;
    if (key[0] == 'W' || key[0] == 'b' || key == "alpha") {
      values[key] = Rational::parse(val);
    } else {
      net.set(key, val);
    }
  }
  net.validate();
  DecodedParameters p;
  p.net = net;
  p.weights.resize(net.L);
  p.biases.resize(net.L);
  for (int k = 1; k <= net.L; ++k) {
    int rows = k == net.L ? net.m : net.H;
    int cols = k == 1 ? net.n : net.H;
    p.weights[k - 1].assign(rows, std::vector<Rational>(cols));
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        std::string key = "W" + std::to_string(k) + "." + std::to_string(r) + "." + std::to_string(c);
        auto it = values.find(key);
        if (it == values.end()) throw std::runtime_error("params file: missing " + key);
        p.weights[k - 1][r][c] = it->second;
      }
    }
    int nb = k == net.L ? net.m : net.H;
    p.biases[k - 1].resize(nb);
    for (int e = 0; e < nb; ++e) {
      std::string key = "b" + std::to_string(k) + "." + std::to_string(e);
      auto it = values.find(key);
      if (it == values.end()) {
        if (k > 1 && k < net.L) {
          p.biases[k - 1][e] = Rational(net.frozen_middle_bias());
          continue;
        }
        throw std::runtime_error("params file: missing " + key);
      }
      p.biases[k - 1][e] = it->second;
    }
  }
  if (auto it = values.find("alpha"); it != values.end()) p.alpha = it->second;
  else if (net.activation == ActivationKind::leaky_relu) p.alpha = net.alpha;
  return p;
}

inline void write_eval_report(std::ostream& os, const EvalReport& rep) {
  os << "mse " << rep.mse.str() << "\n";
  if (rep.classification) {
    os << "accuracy " << rep.accuracy.str() << "\n";
    os << "confusion_true+1 " << rep.confusion[0][0] << " " << rep.confusion[0][1] << "\n";
    os << "confusion_true-1 " << rep.confusion[1][0] << " " << rep.confusion[1][1] << "\n";
  }
}

}  // namespace isl
