/// @file data.hpp
/// @brief Dataset acquisition and quantization: input rounding to
/// [-2^B, 2^B], label scaling to [-1,1], two-moon synthesis and the
/// MNIST-style crop/split/count/normalize preprocessing.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "isinglearn/network.hpp"
#include "isinglearn/rational.hpp"

namespace isl {

struct RawDataset {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> labels;
};

struct QuantizedDataset {
  std::vector<std::vector<std::int64_t>> inputs;  // N x n, |x| <= 2^B
  std::vector<std::vector<Rational>> labels;      // N x m, |y| <= 1
  int B = 0;
  std::string provenance;

  int size() const { return static_cast<int>(inputs.size()); }
  int input_dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs[0].size()); }
  int label_dim() const { return labels.empty() ? 0 : static_cast<int>(labels[0].size()); }

  void validate() const {
    if (inputs.size() != labels.size()) throw data_error("dataset: input/label count mismatch");
    const std::int64_t hi = std::int64_t{1} << B;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      for (std::int64_t v : inputs[i]) {
        if (v < -hi || v > hi) {
          throw data_error("dataset: sample " + std::to_string(i) + " input " +
                           std::to_string(v) + " outside [-2^B, 2^B]");
        }
      }
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (const Rational& y : labels[i]) {
        if (y < Rational(-1) || y > Rational(1)) {
          throw data_error("dataset: sample " + std::to_string(i) + " label " + y.str() +
                           " outside [-1,1]");
        }
      }
    }
  }
};

// --- deterministic random helpers -------------------------------------------
// mt19937_64 has standard-specified output; the helpers below avoid the
// implementation-defined std distributions so streams reproduce everywhere.

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Box-Muller from explicit uniforms.
inline double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// --- quantization ------------------------------------------------------------

inline std::int64_t round_half_away(double v) {
  return static_cast<std::int64_t>(v < 0 ? std::ceil(v - 0.5) : std::floor(v + 0.5));
}

/// x' = round(x * scale) clamped to [-2^B, 2^B]; labels rescaled into [-1,1]
/// when they exceed it (division by max |y|, snapped to a 2^-16 grid).
inline QuantizedDataset quantize(const RawDataset& raw, int B, double scale) {
  QuantizedDataset out;
  out.B = B;
  const std::int64_t hi = std::int64_t{1} << B;
  double ymax = 1.0;
  for (const auto& row : raw.labels) {
    for (double y : row) {
      if (!std::isfinite(y)) throw data_error("quantize: non-finite label");
      ymax = std::max(ymax, std::abs(y));
    }
  }
  for (const auto& row : raw.inputs) {
    std::vector<std::int64_t> q;
    q.reserve(row.size());
    for (double x : row) {
      if (!std::isfinite(x)) throw data_error("quantize: non-finite input");
      q.push_back(std::clamp(round_half_away(x * scale), -hi, hi));
    }
    out.inputs.push_back(std::move(q));
  }
  constexpr std::int64_t grid = std::int64_t{1} << 16;
  for (const auto& row : raw.labels) {
    std::vector<Rational> q;
    q.reserve(row.size());
    for (double y : row) {
      q.push_back(Rational(round_half_away(y / ymax * grid), grid));
    }
    out.labels.push_back(std::move(q));
  }
  out.validate();
  return out;
}

// --- two-moon ----------------------------------------------------------------

/// Points on two interleaved half-circles with +-1 labels, before
/// quantization. With noise=0 the points sit exactly on the arcs.
inline RawDataset two_moon_raw(int n_samples, double noise, std::uint64_t seed) {
  if (n_samples < 2 || n_samples % 2 != 0) {
    throw data_error("two_moon: n_samples must be even and >= 2");
  }
  RawDataset raw;
  std::mt19937_64 rng(seed);
  const int half = n_samples / 2;
  const double pi = 3.14159265358979323846;
  for (int j = 0; j < half; ++j) {
    double t = pi * j / (half > 1 ? half - 1 : 1);
    raw.inputs.push_back({std::cos(t) + noise * gaussian(rng), std::sin(t) + noise * gaussian(rng)});
    raw.labels.push_back({1.0});
  }
  for (int j = 0; j < half; ++j) {
    double t = pi * j / (half > 1 ? half - 1 : 1);
    raw.inputs.push_back(
        {1.0 - std::cos(t) + noise * gaussian(rng), 0.5 - std::sin(t) + noise * gaussian(rng)});
    raw.labels.push_back({-1.0});
  }
  return raw;
}

inline QuantizedDataset two_moon(int n_samples, double noise, std::uint64_t seed, int B = 2) {
  // Arc coordinates span [-1, 2]; scale so the extreme maps to 2^B.
  double scale = std::ldexp(1.0, B - 1);
  QuantizedDataset ds = quantize(two_moon_raw(n_samples, noise, seed), B, scale);
  std::ostringstream prov;
  prov << "two_moon n_samples=" << n_samples << " noise=" << noise << " seed=" << seed
       << " B=" << B << " scale=" << scale;
  ds.provenance = prov.str();
  return ds;
}

// --- MNIST-style images ------------------------------------------------------

struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }
};

struct MnistConfig {
  int digit_positive = 6;  // label +1
  int digit_negative = 9;  // label -1
  int binarize_threshold = 127;  // pixel > threshold counts as white
  int patch_grid = 2;
  Rational t1{1, 10};   // count/area < t1        -> -1
  Rational t2{7, 20};   // t1 <= count/area < t2  ->  0, else +1
};

/// Crop to the bounding box of white pixels, split into a patch grid, count
/// white pixels per patch and map the fill fraction to {-1, 0, +1}.
inline std::vector<std::int64_t> preprocess_image(const Image& img, const MnistConfig& cfg) {
  int r0 = img.rows, r1 = -1, c0 = img.cols, c1 = -1;
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      if (img.at(r, c) > cfg.binarize_threshold) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
    }
  }
  if (r1 < 0) throw data_error("preprocess: degenerate all-dark image (empty bounding box)");
  const int g = cfg.patch_grid;
  const int h = r1 - r0 + 1, w = c1 - c0 + 1;
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(g) * g);
  for (int pr = 0; pr < g; ++pr) {
    for (int pc = 0; pc < g; ++pc) {
      int ra = r0 + pr * h / g, rb = r0 + (pr + 1) * h / g - 1;
      int ca = c0 + pc * w / g, cb = c0 + (pc + 1) * w / g - 1;
      if (rb < ra) rb = ra;
      if (cb < ca) cb = ca;
      std::int64_t count = 0;
      for (int r = ra; r <= rb; ++r) {
        for (int c = ca; c <= cb; ++c) {
          if (img.at(r, c) > cfg.binarize_threshold) ++count;
        }
      }
      std::int64_t area = std::int64_t(rb - ra + 1) * (cb - ca + 1);
      Rational frac(count, area);
      out.push_back(frac < cfg.t1 ? -1 : (frac < cfg.t2 ? 0 : 1));
    }
  }
  return out;
}

inline QuantizedDataset preprocess_mnist(const std::vector<Image>& images,
                                         const std::vector<int>& digits,
                                         const MnistConfig& cfg = {}) {
  if (images.size() != digits.size()) throw data_error("preprocess: image/label count mismatch");
  QuantizedDataset ds;
  ds.B = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (digits[i] != cfg.digit_positive && digits[i] != cfg.digit_negative) continue;
    ds.inputs.push_back(preprocess_image(images[i], cfg));
    ds.labels.push_back({Rational(digits[i] == cfg.digit_positive ? 1 : -1)});
  }
  std::ostringstream prov;
  prov << "mnist digits=" << cfg.digit_positive << "," << cfg.digit_negative
       << " threshold=" << cfg.binarize_threshold << " grid=" << cfg.patch_grid
       << " t1=" << cfg.t1.str() << " t2=" << cfg.t2.str();
  ds.provenance = prov.str();
  ds.validate();
  return ds;
}

/// Seeded stratified pick of per_class samples from each label sign; output
/// keeps the original sample order.
inline QuantizedDataset select_training_subset(const QuantizedDataset& ds, int per_class,
                                               std::uint64_t seed) {
  if (per_class < 1) throw data_error("select_training_subset: per_class must be >= 1");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    (ds.labels[i].at(0) >= Rational(0) ? pos : neg).push_back(i);
  }
  if (static_cast<int>(pos.size()) < per_class || static_cast<int>(neg.size()) < per_class) {
    throw data_error("select_training_subset: not enough samples in a class");
  }
  std::mt19937_64 rng(seed);
  auto pick = [&](std::vector<std::size_t>& idx) {
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      std::size_t j = uniform_below(rng, i + 1);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(per_class);
  };
  pick(pos);
  pick(neg);
  std::vector<std::size_t> chosen = pos;
  chosen.insert(chosen.end(), neg.begin(), neg.end());
  std::sort(chosen.begin(), chosen.end());
  QuantizedDataset out;
  out.B = ds.B;
  out.provenance = ds.provenance + " subset per_class=" + std::to_string(per_class) +
                   " seed=" + std::to_string(seed);
  for (std::size_t i : chosen) {
    out.inputs.push_back(ds.inputs[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

// --- IDX files ---------------------------------------------------------------

inline std::uint32_t read_be32(std::istream& is) {
  std::uint8_t b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw data_error("idx: truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

inline std::vector<Image> read_idx_images(std::istream& is) {
  if (read_be32(is) != 0x00000803) throw data_error("idx: bad image magic");
  std::uint32_t count = read_be32(is), rows = read_be32(is), cols = read_be32(is);
  std::vector<Image> images(count);
  for (auto& img : images) {
    img.rows = static_cast<int>(rows);
    img.cols = static_cast<int>(cols);
    img.pixels.resize(static_cast<std::size_t>(rows) * cols);
    is.read(reinterpret_cast<char*>(img.pixels.data()), img.pixels.size());
    if (!is) throw data_error("idx: truncated image data");
  }
  return images;
}

inline std::vector<int> read_idx_labels(std::istream& is) {
  if (read_be32(is) != 0x00000801) throw data_error("idx: bad label magic");
  std::uint32_t count = read_be32(is);
  std::vector<std::uint8_t> raw(count);
  is.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (!is) throw data_error("idx: truncated label data");
  return std::vector<int>(raw.begin(), raw.end());
}

inline void write_be32(std::ostream& os, std::uint32_t v) {
  std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8),
                       std::uint8_t(v)};
  os.write(reinterpret_cast<char*>(b), 4);
}

inline void write_idx_images(std::ostream& os, const std::vector<Image>& images) {
  write_be32(os, 0x00000803);
  write_be32(os, static_cast<std::uint32_t>(images.size()));
  write_be32(os, images.empty() ? 0 : images[0].rows);
  write_be32(os, images.empty() ? 0 : images[0].cols);
  for (const auto& img : images) {
    os.write(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  }
}

inline void write_idx_labels(std::ostream& os, const std::vector<int>& labels) {
  write_be32(os, 0x00000801);
  write_be32(os, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) os.put(static_cast<char>(l));
}

// --- dataset interchange format ----------------------------------------------
// Header "dataset n m N B" after optional '#' provenance comments, then one
// sample per line: "x0 x1 ... | y0 y1 ...", labels in canonical num/den form.

inline void write_dataset(std::ostream& os, const QuantizedDataset& ds) {
  if (!ds.provenance.empty()) os << "# " << ds.provenance << "\n";
  os << "dataset " << ds.input_dim() << ' ' << ds.label_dim() << ' ' << ds.size() << ' ' << ds.B
     << "\n";
  for (int i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.inputs[i].size(); ++j) {
      if (j) os << ' ';
      os << ds.inputs[i][j];
    }
    os << " |";
    for (const Rational& y : ds.labels[i]) os << ' ' << y.str();
    os << "\n";
  }
}

inline QuantizedDataset read_dataset(std::istream& is) {
  QuantizedDataset ds;
  std::string line;
  int n = -1, m = -1, N = -1;
  std::string provenance;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (provenance.empty() && line.size() > 2) provenance = line.substr(2);
      continue;
    }
    std::istringstream ls(line);
    if (n < 0) {
      std::string tag;
      ls >> tag >> n >> m >> N >> ds.B;
      if (tag != "dataset" || !ls || n < 1 || m < 1 || N < 0) {
        throw data_error("dataset file: malformed header");
      }
      continue;
    }
    std::vector<std::int64_t> x;
    std::vector<Rational> y;
    std::string tok;
    bool after_bar = false;
    while (ls >> tok) {
      if (tok == "|") {
        after_bar = true;
      } else if (after_bar) {
        y.push_back(Rational::parse(tok));
      } else {
        x.push_back(std::stoll(tok));
      }
    }
    if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != m) {
      throw data_error("dataset file: sample arity mismatch");
    }
    ds.inputs.push_back(std::move(x));
    ds.labels.push_back(std::move(y));
  }
  if (n < 0) throw data_error("dataset file: missing header");
  if (ds.size() != N) throw data_error("dataset file: sample count mismatch");
  ds.provenance = provenance;
  ds.validate();
  return ds;
}

}  // namespace isl
