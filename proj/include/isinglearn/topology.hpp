/// @file topology.hpp
/// @brief Equality constraints capturing the feedforward topology: linear
/// transforms, activation behavior, structured layers and the loss.
///
/// Each scalar equation LHS = RHS becomes one polynomial LHS - RHS asserted
/// equal to zero. A feasible assignment (all residuals zero, auxiliaries
/// honest) corresponds one-to-one with a forward pass of the network.

#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isinglearn/data.hpp"
#include "isinglearn/encoding.hpp"
#include "isinglearn/network.hpp"
#include "isinglearn/poly.hpp"

namespace isl {

struct Constraint {
  PseudoBooleanPoly poly;  // asserted == 0
  std::string kind;        // "linear", "act_prod", "act_slack", ...
  int layer = 0;
  int sample = -1;
  int element = 0;
};

struct ConstraintSet {
  std::vector<Constraint> constraints;

  void add(PseudoBooleanPoly p, std::string kind, int layer, int sample, int element) {
    constraints.push_back({std::move(p), std::move(kind), layer, sample, element});
  }
  void append(ConstraintSet other) {
    for (auto& c : other.constraints) constraints.push_back(std::move(c));
  }
  std::size_t size() const { return constraints.size(); }
};

/// W(k) a(k-1) + b(k) = s(k) for every hidden layer and sample, with the
/// quantized input feeding layer 1, the frozen bias H-1 in middle layers and
/// the prediction variable on the last layer's right-hand side.
inline ConstraintSet build_linear_constraints(const NetworkSpec& net,
                                              const VariableRegistry& reg,
                                              const QuantizedDataset& data) {
  data.validate();
  if (data.input_dim() != net.n) throw config_error("dataset input dim != network inputs");
  if (data.label_dim() != net.m) throw config_error("dataset label dim != network outputs");

  ConstraintSet out;
  const int N = data.size();
  for (int i = 0; i < N; ++i) {
    // layer 1: W(1) x_i + b(1) = s(1)_i
    for (int h = 0; h < net.H; ++h) {
      PseudoBooleanPoly p;
      for (int j = 0; j < net.n; ++j) {
        p += Rational(data.inputs[i][j]) * reg.weight(1, h, j).to_poly();
      }
      p += reg.bias(1, h).to_poly();
      p -= reg.preact(1, i, h).to_poly();
      out.add(std::move(p), "linear", 1, i, h);
    }
    // middle layers: W(k) a(k-1)_i + (H-1) = s(k)_i
    for (int k = 2; k <= net.L - 1; ++k) {
      for (int h = 0; h < net.H; ++h) {
        PseudoBooleanPoly p;
        for (int j = 0; j < net.H; ++j) {
          p += reg.weight(k, h, j).to_poly() * reg.postact(k - 1, i, j).to_poly();
        }
        p += PseudoBooleanPoly::constant(Rational(net.frozen_middle_bias()));
        p -= reg.preact(k, i, h).to_poly();
        out.add(std::move(p), "linear", k, i, h);
      }
    }
    // last layer: W(L) a(L-1)_i + b(L) = y_hat_i
    for (int o = 0; o < net.m; ++o) {
      PseudoBooleanPoly p;
      for (int j = 0; j < net.H; ++j) {
        p += reg.weight(net.L, o, j).to_poly() * reg.postact(net.L - 1, i, j).to_poly();
      }
      p += reg.bias(net.L, o).to_poly();
      p -= reg.prediction(i, o).to_poly();
      out.add(std::move(p), "linear", net.L, i, o);
    }
  }
  return out;
}

/// Activation constraints for all hidden layers and samples.
///   sign:  a . s = r  (and  a + 2r = 1 + t  in layer 1 only; middle layers
///          keep s odd via the frozen bias, so s != 0 and the slack row is
///          not needed)
///   relu:  (r + s)/2 = a,  t . s = r           with t in {-1,+1}
///   leaky_relu / prelu:  ((1-alpha)/2 t + (1+alpha)/2) . s = a,  t . s = r
///   abs:   r . s = a                            with r in {-1,+1}
inline ConstraintSet build_activation_constraints(const NetworkSpec& net,
                                                  const VariableRegistry& reg,
                                                  int dataset_size) {
  ConstraintSet out;
  const int N = dataset_size;
  for (int k = 1; k <= net.L - 1; ++k) {
    for (int i = 0; i < N; ++i) {
      for (int h = 0; h < net.H; ++h) {
        PseudoBooleanPoly s = reg.preact(k, i, h).to_poly();
        PseudoBooleanPoly a = reg.postact(k, i, h).to_poly();
        PseudoBooleanPoly r = reg.absval(k, i, h).to_poly();
        switch (net.activation) {
          case ActivationKind::sign: {
            out.add(a * s - r, "act_prod", k, i, h);
            if (k == 1) {
              PseudoBooleanPoly t = reg.slack(k, i, h).to_poly();
              out.add(a + Rational(2) * r - PseudoBooleanPoly::constant(1) - t, "act_slack", k,
                      i, h);
            }
            break;
          }
          case ActivationKind::relu: {
            PseudoBooleanPoly t = reg.slack(k, i, h).to_poly();
            out.add(Rational(1, 2) * (r + s) - a, "act_prod", k, i, h);
            out.add(t * s - r, "act_slack", k, i, h);
            break;
          }
          case ActivationKind::leaky_relu:
          case ActivationKind::prelu: {
            PseudoBooleanPoly t = reg.slack(k, i, h).to_poly();
            PseudoBooleanPoly alpha =
                net.activation == ActivationKind::prelu
                    ? reg.at({VariableKind::prelu_alpha, 0, -1, 0}).to_poly()
                    : PseudoBooleanPoly::constant(net.alpha);
            PseudoBooleanPoly one = PseudoBooleanPoly::constant(1);
            PseudoBooleanPoly gate =
                Rational(1, 2) * ((one - alpha) * t + one + alpha);
            out.add(gate * s - a, "act_prod", k, i, h);
            out.add(t * s - r, "act_slack", k, i, h);
            break;
          }
          case ActivationKind::abs: {
            out.add(r * s - a, "act_prod", k, i, h);
            break;
          }
        }
      }
    }
  }
  return out;
}

// --- structured layers --------------------------------------------------------
// Constraint builders over explicitly shaped grids of encodings. These
// formulate convolution, average pooling and frozen-statistics batch
// normalization as per-element linear equalities.

template <typename T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> cells;

  Grid() = default;
  Grid(int r, int c) : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c) {}
  T& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
};

/// sum_ij kernel(i,j) * input(r+i, c+j) = output(r,c) for every valid (r,c).
/// Kernel cells are polynomials so both constant and learnable kernels fit.
inline ConstraintSet build_conv2d_constraints(const Grid<PseudoBooleanPoly>& kernel,
                                              const Grid<PseudoBooleanPoly>& input,
                                              const Grid<PseudoBooleanPoly>& output, int layer) {
  const int out_r = input.rows - kernel.rows + 1;
  const int out_c = input.cols - kernel.cols + 1;
  if (output.rows != out_r || output.cols != out_c) {
    throw config_error("conv2d: output shape must be input - kernel + 1");
  }
  ConstraintSet out;
  for (int r = 0; r < out_r; ++r) {
    for (int c = 0; c < out_c; ++c) {
      PseudoBooleanPoly p;
      for (int i = 0; i < kernel.rows; ++i) {
        for (int j = 0; j < kernel.cols; ++j) {
          p += kernel.at(i, j) * input.at(r + i, c + j);
        }
      }
      p -= output.at(r, c);
      out.add(std::move(p), "conv2d", layer, -1, r * out_c + c);
    }
  }
  return out;
}

/// (1/|window|^2) sum of each window = pooled value, window stride = window.
inline ConstraintSet build_avgpool_constraints(int window, const Grid<PseudoBooleanPoly>& input,
                                               const Grid<PseudoBooleanPoly>& output, int layer) {
  if (window < 1 || input.rows % window || input.cols % window) {
    throw config_error("avgpool: window must evenly divide the feature map");
  }
  if (output.rows != input.rows / window || output.cols != input.cols / window) {
    throw config_error("avgpool: bad output shape");
  }
  ConstraintSet out;
  Rational inv(1, std::int64_t(window) * window);
  for (int r = 0; r < output.rows; ++r) {
    for (int c = 0; c < output.cols; ++c) {
      PseudoBooleanPoly p;
      for (int i = 0; i < window; ++i) {
        for (int j = 0; j < window; ++j) {
          p += input.at(r * window + i, c * window + j);
        }
      }
      p = inv * p;
      p -= output.at(r, c);
      out.add(std::move(p), "avgpool", layer, -1, r * output.cols + c);
    }
  }
  return out;
}

/// s - mu = s_norm * sigma with frozen per-channel statistics.
inline ConstraintSet build_batchnorm_constraints(const std::vector<PseudoBooleanPoly>& s,
                                                 const std::vector<PseudoBooleanPoly>& s_norm,
                                                 const std::vector<Rational>& mu,
                                                 const std::vector<Rational>& sigma, int layer) {
  if (s.size() != s_norm.size() || s.size() != mu.size() || s.size() != sigma.size()) {
    throw config_error("batchnorm: arity mismatch");
  }
  ConstraintSet out;
  for (std::size_t e = 0; e < s.size(); ++e) {
    if (sigma[e].is_zero()) throw config_error("batchnorm: zero sigma");
    PseudoBooleanPoly p = s[e] - PseudoBooleanPoly::constant(mu[e]) - sigma[e] * s_norm[e];
    out.add(std::move(p), "batchnorm", layer, -1, static_cast<int>(e));
  }
  return out;
}

[[noreturn]] inline void build_maxpool_constraints() {
  throw config_error(
      "max-pooling is out of scope: its big-M inequality formulation is not compiled");
}

// --- loss ----------------------------------------------------------------------

struct LossBuild {
  PseudoBooleanPoly objective;
  ConstraintSet extra_constraints;  // hinge auxiliaries
  Rational max_snap_distance{0};    // largest |y - snapped y| over the dataset
};

/// Snaps a label to the nearest representable prediction grid point
/// (multiples of 1/(2H)), ties away from zero.
inline Rational snap_label(const Rational& y, int H) {
  Rational scaled = y * Rational(2 * H);
  return Rational(scaled.round_half_away(), 2 * H);
}

/// MSE: (1/N) sum (y_i - y_hat_i)^2, labels snapped to the prediction grid.
/// Hinge: objective (1/2N) sum (r_i + 1 - y_i y_hat_i) plus the constraint
/// t_i (1 - y_i y_hat_i) = r_i per sample; labels must be +-1.
inline LossBuild build_loss(const NetworkSpec& net, const VariableRegistry& reg,
                            const QuantizedDataset& data) {
  LossBuild out;
  const int N = data.size();
  if (net.loss == LossKind::mse) {
    PseudoBooleanPoly total;
    for (int i = 0; i < N; ++i) {
      for (int o = 0; o < net.m; ++o) {
        Rational y = snap_label(data.labels[i][o], net.H);
        Rational d = (y - data.labels[i][o]).abs();
        if (d > out.max_snap_distance) out.max_snap_distance = d;
        PseudoBooleanPoly diff = PseudoBooleanPoly::constant(y) - reg.prediction(i, o).to_poly();
        total += diff * diff;
      }
    }
    out.objective = Rational(1, N) * total;
    return out;
  }
  // hinge
  PseudoBooleanPoly total;
  for (int i = 0; i < N; ++i) {
    for (int o = 0; o < net.m; ++o) {
      const Rational& y = data.labels[i][o];
      if (y != Rational(1) && y != Rational(-1)) {
        throw config_error("hinge loss requires labels in {-1,+1}");
      }
      PseudoBooleanPoly margin =
          PseudoBooleanPoly::constant(1) - y * reg.prediction(i, o).to_poly();
      PseudoBooleanPoly r = reg.at({VariableKind::loss_absval, net.L, i, o}).to_poly();
      PseudoBooleanPoly t = reg.at({VariableKind::loss_slack, net.L, i, o}).to_poly();
      out.extra_constraints.add(t * margin - r, "hinge", net.L, i, o);
      total += r + margin;
    }
  }
  out.objective = Rational(1, 2 * std::int64_t(N)) * total;
  return out;
}

/// All topology constraints of a dense network, in deterministic
/// (kind-row, layer, sample, element) order.
inline ConstraintSet build_all_constraints(const NetworkSpec& net, const VariableRegistry& reg,
                                           const QuantizedDataset& data) {
  ConstraintSet out = build_linear_constraints(net, reg, data);
  out.append(build_activation_constraints(net, reg, data.size()));
  return out;
}

}  // namespace isl
