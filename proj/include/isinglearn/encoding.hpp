/// @file encoding.hpp
/// @brief Binary encoding protocol: decimal decision variables as affine
/// combinations of fresh spin bits.
///
/// Every variable of the training problem (weights, biases, pre/post
/// activations, auxiliaries, predictions) is an AffineEncoding
///   value = scale * (sum_j 2^j * sigma(j) + offset)
/// over a dense, non-overlapping range of bit ids. The registry allocates
/// bits in a fixed row order (weights first, then per-sample variables) so
/// that compilation is deterministic.

#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "isinglearn/network.hpp"
#include "isinglearn/poly.hpp"
#include "isinglearn/rational.hpp"

namespace isl {

/// Number of bits needed to count 0..steps, i.e. floor(log2(steps)) + 1.
inline int bits_for_steps(std::int64_t steps) {
  if (steps < 1) return 1;
  int b = 0;
  while (steps > 0) {
    ++b;
    steps >>= 1;
  }
  return b;
}

struct AffineEncoding {
  std::vector<BitId> bits;  // weight of bits[j] is 2^j
  Rational offset{0};
  Rational scale{1};

  int num_bits() const { return static_cast<int>(bits.size()); }

  Rational min_value() const { return scale * offset; }
  Rational max_value() const {
    return scale * (offset + Rational((std::int64_t{1} << bits.size()) - 1));
  }

  Rational decode(const std::vector<std::uint8_t>& assignment) const {
    std::int64_t raw = 0;
    for (std::size_t j = 0; j < bits.size(); ++j) {
      if (bits[j] >= assignment.size()) {
        throw std::out_of_range("AffineEncoding::decode: assignment misses bit " +
                                std::to_string(bits[j]));
      }
      if (assignment[bits[j]]) raw |= std::int64_t{1} << j;
    }
    return scale * (Rational(raw) + offset);
  }

  bool representable(const Rational& value) const {
    Rational raw = value / scale - offset;
    return raw.is_integer() && raw >= Rational(0) &&
           raw <= Rational((std::int64_t{1} << bits.size()) - 1);
  }

  /// Writes the bit pattern for `value` into `assignment`.
  void encode(const Rational& value, std::vector<std::uint8_t>& assignment) const {
    Rational raw = value / scale - offset;
    if (!raw.is_integer() || raw < Rational(0) ||
        raw > Rational((std::int64_t{1} << bits.size()) - 1)) {
      throw std::domain_error("AffineEncoding::encode: value " + value.str() +
                              " not representable");
    }
    std::int64_t r = raw.num();
    for (std::size_t j = 0; j < bits.size(); ++j) {
      assignment.at(bits[j]) = static_cast<std::uint8_t>((r >> j) & 1);
    }
  }

  PseudoBooleanPoly to_poly() const {
    PseudoBooleanPoly p = PseudoBooleanPoly::constant(offset);
    for (std::size_t j = 0; j < bits.size(); ++j) {
      p += PseudoBooleanPoly::term(Rational(std::int64_t{1} << j), Monomial{bits[j]});
    }
    return scale * p;
  }
};

enum class VariableKind {
  weight,
  bias,
  preact,
  absval,     // r: |s| for sign/relu, the +-1 sign bit for abs
  slack,      // t
  postact,    // a
  prediction,  // y_hat
  prelu_alpha,
  loss_absval,  // hinge r_i
  loss_slack,   // hinge t_i
  reduction_aux
};

inline const char* kind_name(VariableKind k) {
  switch (k) {
    case VariableKind::weight: return "weight";
    case VariableKind::bias: return "bias";
    case VariableKind::preact: return "preact";
    case VariableKind::absval: return "absval";
    case VariableKind::slack: return "slack";
    case VariableKind::postact: return "postact";
    case VariableKind::prediction: return "prediction";
    case VariableKind::prelu_alpha: return "prelu_alpha";
    case VariableKind::loss_absval: return "loss_absval";
    case VariableKind::loss_slack: return "loss_slack";
    case VariableKind::reduction_aux: return "reduction_aux";
  }
  return "?";
}

inline VariableKind kind_from_name(const std::string& s) {
  for (VariableKind k :
       {VariableKind::weight, VariableKind::bias, VariableKind::preact, VariableKind::absval,
        VariableKind::slack, VariableKind::postact, VariableKind::prediction,
        VariableKind::prelu_alpha, VariableKind::loss_absval, VariableKind::loss_slack,
        VariableKind::reduction_aux}) {
    if (s == kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown variable kind '" + s + "'");
}

struct VariableKey {
  VariableKind kind{};
  int layer = 0;    // 1-based; 0 when not layer-scoped
  int sample = -1;  // -1 when not per-sample
  int element = 0;  // row-major flat index for matrices

  friend bool operator<(const VariableKey& a, const VariableKey& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.layer != b.layer) return a.layer < b.layer;
    if (a.sample != b.sample) return a.sample < b.sample;
    return a.element < b.element;
  }
  friend bool operator==(const VariableKey& a, const VariableKey& b) {
    return a.kind == b.kind && a.layer == b.layer && a.sample == b.sample &&
           a.element == b.element;
  }
};

inline VariableKey weight_key(int layer, int row, int col, int cols) {
  return {VariableKind::weight, layer, -1, row * cols + col};
}
inline VariableKey bias_key(int layer, int element) {
  return {VariableKind::bias, layer, -1, element};
}

/// Per-layer value interval of a variable family, used to size encodings for
/// the ReLU-family activations where the downstream ranges depend on the
/// activation image rather than on +-1 bounds.
struct ValueRange {
  Rational lo{0};
  Rational hi{0};
};

class VariableRegistry {
 public:
  VariableRegistry() = default;

  const NetworkSpec& net() const { return net_; }
  int dataset_size() const { return dataset_size_; }
  BitId num_bits() const { return next_bit_; }

  const AffineEncoding& at(const VariableKey& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw std::out_of_range(std::string("registry: no encoding for kind ") +
                              kind_name(key.kind) + " layer " + std::to_string(key.layer) +
                              " sample " + std::to_string(key.sample) + " element " +
                              std::to_string(key.element));
    }
    return it->second;
  }
  bool contains(const VariableKey& key) const { return entries_.count(key) != 0; }
  const std::map<VariableKey, AffineEncoding>& entries() const { return entries_; }

  const AffineEncoding& weight(int layer, int row, int col) const {
    int cols = layer == 1 ? net_.n : net_.H;
    return at(weight_key(layer, row, col, cols));
  }
  const AffineEncoding& bias(int layer, int element) const { return at(bias_key(layer, element)); }
  const AffineEncoding& preact(int layer, int sample, int element) const {
    return at({VariableKind::preact, layer, sample, element});
  }
  const AffineEncoding& absval(int layer, int sample, int element) const {
    return at({VariableKind::absval, layer, sample, element});
  }
  const AffineEncoding& slack(int layer, int sample, int element) const {
    return at({VariableKind::slack, layer, sample, element});
  }
  const AffineEncoding& postact(int layer, int sample, int element) const {
    return at({VariableKind::postact, layer, sample, element});
  }
  const AffineEncoding& prediction(int sample, int element) const {
    return at({VariableKind::prediction, net_.L, sample, element});
  }

  /// Post-activation value interval of hidden layer k (exact, per activation).
  const ValueRange& postact_range(int layer) const { return postact_ranges_.at(layer); }
  const ValueRange& preact_range(int layer) const { return preact_ranges_.at(layer); }

  friend VariableRegistry build_registry(const NetworkSpec& net, int dataset_size);

  void write_manifest(std::ostream& os) const;
  static VariableRegistry read_manifest(std::istream& is);

 private:
  AffineEncoding& add(const VariableKey& key, int nbits, Rational offset, Rational scale) {
    AffineEncoding enc;
    enc.bits.reserve(nbits);
    for (int j = 0; j < nbits; ++j) enc.bits.push_back(next_bit_++);
    enc.offset = offset;
    enc.scale = scale;
    auto [it, inserted] = entries_.emplace(key, std::move(enc));
    if (!inserted) throw std::logic_error("registry: duplicate key");
    return it->second;
  }

  NetworkSpec net_;
  int dataset_size_ = 0;
  BitId next_bit_ = 0;
  std::map<VariableKey, AffineEncoding> entries_;
  std::map<int, ValueRange> preact_ranges_;
  std::map<int, ValueRange> postact_ranges_;
};

namespace detail {

/// Encoding shape (bit count / offset / scale) for one variable, following
/// the fixed protocol for sign networks and the range rule otherwise.
struct EncodingShape {
  int bits;
  Rational offset;
  Rational scale;
};

/// Sizes an encoding covering [lo, hi] on the grid quantum*Z anchored at lo.
inline EncodingShape shape_for_range(const Rational& lo, const Rational& hi,
                                     const Rational& quantum) {
  Rational steps_r = (hi - lo) / quantum;
  std::int64_t steps = steps_r.floor();
  if (Rational(steps) < steps_r) ++steps;  // ceil
  return {bits_for_steps(steps), lo / quantum, quantum};
}

}  // namespace detail

/// Builds the complete variable registry for `net` and `dataset_size`
/// samples. Bit ids are dense and allocated in the fixed row order:
/// W(1), b(1), W(2..L-1), W(L), b(L), prelu alpha, s(1), s(2..L-1), r(1),
/// r(2..L-1), t rows, a rows, y_hat, hinge auxiliaries; within a row by
/// layer, then sample, then element.
inline VariableRegistry build_registry(const NetworkSpec& net, int dataset_size) {
  net.validate();
  if (dataset_size < 1) throw std::invalid_argument("build_registry: dataset_size must be >= 1");

  VariableRegistry reg;
  reg.net_ = net;
  reg.dataset_size_ = dataset_size;

  const int L = net.L, H = net.H, n = net.n, m = net.m, N = dataset_size;
  const bool sign_net = net.activation == ActivationKind::sign;

  const std::int64_t in_hi = std::int64_t{1} << net.B;  // inputs in [-2^B, 2^B]

  // W(1): one bit per element, value 2*sigma - 1.
  for (int h = 0; h < H; ++h) {
    for (int j = 0; j < n; ++j) {
      reg.add(weight_key(1, h, j, n), 1, Rational(-1, 2), Rational(2));
    }
  }
  // b(1): floor(log2(n*2^(B+1))) + 1 bits, offset net.bias1_offset, scale 1.
  const int b1_bits = bits_for_steps(std::int64_t{n} * (in_hi << 1));
  for (int h = 0; h < H; ++h) {
    reg.add(bias_key(1, h), b1_bits, Rational(net.bias1_offset), Rational(1));
  }
  // W(k), k = 2..L-1: one bit per element.
  for (int k = 2; k <= L - 1; ++k) {
    for (int h = 0; h < H; ++h) {
      for (int j = 0; j < H; ++j) {
        reg.add(weight_key(k, h, j, H), 1, Rational(-1, 2), Rational(2));
      }
    }
  }
  // W(L), b(L): floor(log2(2H)) + 1 bits, offset -H, scale 1/H.
  const int last_bits = bits_for_steps(2 * H);
  for (int o = 0; o < m; ++o) {
    for (int h = 0; h < H; ++h) {
      reg.add(weight_key(L, o, h, H), last_bits, Rational(-H), Rational(1, H));
    }
  }
  for (int o = 0; o < m; ++o) {
    reg.add(bias_key(L, o), last_bits, Rational(-H), Rational(1, H));
  }
  if (net.activation == ActivationKind::prelu) {
    reg.add({VariableKind::prelu_alpha, 0, -1, 0}, net.prelu_alpha_bits, Rational(0),
            Rational(1, std::int64_t{1} << net.prelu_alpha_bits));
  }

  // Value ranges driving per-sample encodings. For sign networks these are
  // pinned to the protocol widths; otherwise they propagate layer by layer.
  const Rational b1_hi = Rational(net.bias1_offset + ((std::int64_t{1} << b1_bits) - 1));
  std::map<int, detail::EncodingShape> s_shape, r_shape, t_shape, a_shape;
  std::map<int, ValueRange> s_range, a_range;
  Rational a_quantum(1);

  for (int k = 1; k <= L - 1; ++k) {
    Rational s_lo, s_hi, quantum(1);
    if (k == 1) {
      s_lo = Rational(-std::int64_t(n) * in_hi);
      s_hi = Rational(std::int64_t(n) * in_hi) + b1_hi;
    } else {
      // Binary weights, frozen bias H-1: W a + (H-1).
      Rational amax = a_range[k - 1].hi.abs();
      if (a_range[k - 1].lo.abs() > amax) amax = a_range[k - 1].lo.abs();
      s_lo = Rational(H - 1) - Rational(H) * amax;
      s_hi = Rational(H - 1) + Rational(H) * amax;
      quantum = a_quantum;
    }
    s_range[k] = {s_lo, s_hi};

    if (sign_net) {
      if (k == 1) {
        s_shape[k] = {bits_for_steps(std::int64_t{n} * (in_hi << 2)),
                      Rational(-std::int64_t(n) * in_hi), Rational(1)};
        r_shape[k] = {bits_for_steps(3 * std::int64_t{n} * in_hi), Rational(0), Rational(1)};
        t_shape[k] = {bits_for_steps(3 * std::int64_t{n} * (in_hi << 1)), Rational(0),
                      Rational(1)};
      } else {
        s_shape[k] = {bits_for_steps(2 * H), Rational(-1), Rational(1)};
        r_shape[k] = {bits_for_steps(2 * H), Rational(0), Rational(1)};
        // no t in middle layers: frozen bias keeps s odd, hence nonzero
      }
      a_shape[k] = {1, Rational(-1, 2), Rational(2)};
      a_range[k] = {Rational(-1), Rational(1)};
      a_quantum = Rational(1);
    } else {
      s_shape[k] = detail::shape_for_range(s_lo, s_hi, quantum);
      Rational abs_hi = s_hi.abs() > s_lo.abs() ? s_hi.abs() : s_lo.abs();
      switch (net.activation) {
        case ActivationKind::relu:
          r_shape[k] = detail::shape_for_range(Rational(0), abs_hi, quantum);
          t_shape[k] = {1, Rational(-1, 2), Rational(2)};
          a_shape[k] = detail::shape_for_range(Rational(0), s_hi, quantum);
          a_range[k] = {Rational(0), s_hi};
          a_quantum = quantum;
          break;
        case ActivationKind::leaky_relu:
        case ActivationKind::prelu: {
          Rational alpha = net.activation == ActivationKind::prelu
                               ? Rational((std::int64_t{1} << net.prelu_alpha_bits) - 1,
                                          std::int64_t{1} << net.prelu_alpha_bits)
                               : net.alpha;
          Rational aq = quantum * Rational(1, net.activation == ActivationKind::prelu
                                                  ? (std::int64_t{1} << net.prelu_alpha_bits)
                                                  : net.alpha.den());
          r_shape[k] = detail::shape_for_range(Rational(0), abs_hi, quantum);
          t_shape[k] = {1, Rational(-1, 2), Rational(2)};
          a_shape[k] = detail::shape_for_range(alpha * s_lo, s_hi, aq);
          a_range[k] = {alpha * s_lo, s_hi};
          a_quantum = aq;
          break;
        }
        case ActivationKind::abs:
          // r is the +-1 sign auxiliary, a = |s|.
          r_shape[k] = {1, Rational(-1, 2), Rational(2)};
          a_shape[k] = detail::shape_for_range(Rational(0), abs_hi, quantum);
          a_range[k] = {Rational(0), abs_hi};
          a_quantum = quantum;
          break;
        default:
          throw std::invalid_argument("non-polynomial activation is not supported");
      }
    }
    reg.preact_ranges_[k] = s_range[k];
    reg.postact_ranges_[k] = a_range[k];
  }

  // Per-sample rows, Table-row order.
  auto add_row = [&](VariableKind kind, int layer, int per_sample,
                     const detail::EncodingShape& sh) {
    for (int i = 0; i < N; ++i) {
      for (int e = 0; e < per_sample; ++e) {
        reg.add({kind, layer, i, e}, sh.bits, sh.offset, sh.scale);
      }
    }
  };

  add_row(VariableKind::preact, 1, H, s_shape[1]);
  for (int k = 2; k <= L - 1; ++k) add_row(VariableKind::preact, k, H, s_shape[k]);
  add_row(VariableKind::absval, 1, H, r_shape[1]);
  for (int k = 2; k <= L - 1; ++k) add_row(VariableKind::absval, k, H, r_shape[k]);
  if (t_shape.count(1)) add_row(VariableKind::slack, 1, H, t_shape[1]);
  for (int k = 2; k <= L - 1; ++k) {
    if (t_shape.count(k)) add_row(VariableKind::slack, k, H, t_shape[k]);
  }
  for (int k = 1; k <= L - 1; ++k) add_row(VariableKind::postact, k, H, a_shape[k]);

  // y_hat: floor(log2(4H)) + 1 bits, offset -2H, scale 1/(2H); widened for
  // ReLU-family nets so the range rule still covers W(L) a + b(L).
  detail::EncodingShape y_shape{bits_for_steps(4 * H), Rational(-2 * H), Rational(1, 2 * H)};
  if (!sign_net) {
    Rational amax = a_range[L - 1].hi.abs() > a_range[L - 1].lo.abs() ? a_range[L - 1].hi.abs()
                                                                      : a_range[L - 1].lo.abs();
    Rational bound = amax + Rational(1) + Rational(1, H);
    Rational yq = a_quantum * Rational(1, 2 * H);
    y_shape = detail::shape_for_range(-bound, bound, yq);
  }
  add_row(VariableKind::prediction, L, m, y_shape);

  if (net.loss == LossKind::hinge) {
    // r_i = |1 - y*yhat| on the y_hat quantum; t_i in {-1,+1}.
    Rational y_lo = y_shape.scale * y_shape.offset;
    Rational y_hi =
        y_shape.scale * (y_shape.offset + Rational((std::int64_t{1} << y_shape.bits) - 1));
    Rational mx = (Rational(1) + y_hi).abs();
    if ((Rational(1) - y_lo).abs() > mx) mx = (Rational(1) - y_lo).abs();
    auto r_sh = detail::shape_for_range(Rational(0), mx, y_shape.scale);
    add_row(VariableKind::loss_absval, L, m, r_sh);
    add_row(VariableKind::loss_slack, L, m, {1, Rational(-1, 2), Rational(2)});
  }

  return reg;
}

/// Encoding for a single variable outside of a full registry build; rejects
/// kinds the configuration freezes (middle-layer bias).
inline AffineEncoding encode_variable(const VariableKey& key, const NetworkSpec& net) {
  if (key.kind == VariableKind::bias && key.layer > 1 && key.layer < net.L) {
    throw std::invalid_argument("middle-layer bias is frozen to H-1 and not encoded");
  }
  VariableRegistry reg = build_registry(net, key.sample >= 0 ? key.sample + 1 : 1);
  return reg.at(key);
}

inline Rational decode_value(const AffineEncoding& enc,
                             const std::vector<std::uint8_t>& assignment) {
  return enc.decode(assignment);
}

// --- manifest format -------------------------------------------------------
// One line per entry:
//   kind layer sample element scale_num/scale_den offset first_bit num_bits
// Bit ids within an entry are consecutive starting at first_bit. '#' lines
// carry the network header needed to rebuild the registry for decoding.

inline void VariableRegistry::write_manifest(std::ostream& os) const {
  os << "# ising-learn registry manifest\n";
  os << "# net layers=" << net_.L << " hidden=" << net_.H << " inputs=" << net_.n
     << " outputs=" << net_.m << " input_bits=" << net_.B
     << " activation=" << activation_name(net_.activation) << " loss=" << loss_name(net_.loss)
     << " bias1_offset=" << net_.bias1_offset << " alpha=" << net_.alpha.str()
     << " alpha_bits=" << net_.prelu_alpha_bits << "\n";
  os << "# samples=" << dataset_size_ << "\n";
  os << "# total_bits=" << num_bits() << "\n";
  for (const auto& [key, enc] : entries_) {
    os << kind_name(key.kind) << ' ' << key.layer << ' ';
    if (key.sample < 0) {
      os << '-';
    } else {
      os << key.sample;
    }
    os << ' ' << key.element << ' ' << enc.scale.str() << ' ' << enc.offset.str() << ' '
       << (enc.bits.empty() ? 0 : enc.bits.front()) << ' ' << enc.bits.size() << '\n';
  }
}

inline VariableRegistry VariableRegistry::read_manifest(std::istream& is) {
  NetworkSpec net;
  int samples = 0;
  std::string line;
  std::map<VariableKey, AffineEncoding> entries;
  BitId max_bit = 0;
  while (std::getline(is, line)) {
    if (line.rfind("# net ", 0) == 0) {
      std::istringstream ls(line.substr(6));
      std::string kv;
      while (ls >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        net.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      continue;
    }
    if (line.rfind("# samples=", 0) == 0) {
      samples = std::stoi(line.substr(10));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind_s, sample_s, scale_s, offset_s;
    int layer = 0, element = 0, nbits = 0;
    long first = 0;
    if (!(ls >> kind_s >> layer >> sample_s >> element >> scale_s >> offset_s >> first >> nbits)) {
      throw std::runtime_error("manifest: malformed line: " + line);
    }
    VariableKey key{kind_from_name(kind_s), layer, sample_s == "-" ? -1 : std::stoi(sample_s),
                    element};
    AffineEncoding enc;
    enc.scale = Rational::parse(scale_s);
    enc.offset = Rational::parse(offset_s);
    for (int j = 0; j < nbits; ++j) enc.bits.push_back(static_cast<BitId>(first + j));
    if (!enc.bits.empty()) max_bit = std::max(max_bit, enc.bits.back() + 1);
    entries.emplace(key, std::move(enc));
  }
  VariableRegistry reg;
  reg.net_ = net;
  reg.dataset_size_ = samples;
  reg.entries_ = std::move(entries);
  reg.next_bit_ = max_bit;
  return reg;
}

}  // namespace isl
