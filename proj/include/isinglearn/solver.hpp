/// @file solver.hpp
/// @brief Ground-state search: exact Gray-code enumeration for small
/// instances and a seedable single-flip Metropolis annealer standing in for
/// Ising hardware.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "isinglearn/compile.hpp"
#include "isinglearn/rational.hpp"

namespace isl {

/// Raised when an instance exceeds the exact solver cap; maps to exit code 3.
struct cap_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AnnealSchedule {
  int sweeps = 0;            // 0 = default 10 * num_vars
  double beta_start = 0.0;   // 0 = auto from coefficient magnitudes
  double beta_end = 0.0;     // 0 = auto
  int restarts = 100;
  std::uint64_t seed = 0;
  std::optional<double> time_budget_ms;  // informational; reported, not enforced
  int threads = 0;           // 0 = hardware concurrency
  bool record_trajectory = false;
  // warm starts: restart r begins from initial_states[r % size()] when set
  std::vector<std::vector<std::uint8_t>> initial_states;

  void validate() const {
    if (restarts < 1) throw std::invalid_argument("schedule: restarts must be >= 1");
    if (sweeps < 0) throw std::invalid_argument("schedule: sweeps must be >= 0");
    if (beta_start < 0 || beta_end < 0 || (beta_start > 0 && beta_end > 0 && beta_end < beta_start)) {
      throw std::invalid_argument("schedule: need beta_end >= beta_start > 0");
    }
  }
};

struct SpinSolution {
  std::vector<std::uint8_t> assignment;
  std::int64_t energy = 0;
  Rational rescaled_energy;
};

struct RunReport {
  std::vector<std::int64_t> best_energies;                // per restart
  std::vector<std::vector<std::uint8_t>> best_assignments;  // per restart
  std::vector<std::vector<std::int64_t>> trajectories;    // per restart, when recorded
  SpinSolution best;
  int zero_loss_hits = 0;
  int restarts = 0;
  int sweeps_used = 0;
  double beta_start_used = 0, beta_end_used = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0;  // console-only; never written into artifacts
  Rational scale{1};
  std::int64_t offset = 0;
};

namespace detail {

/// CSR adjacency view of a QUBO for O(1) flip deltas via local fields.
struct QuboGraph {
  std::uint32_t n = 0;
  std::vector<std::int64_t> diag;
  std::vector<std::uint32_t> row_start;  // n+1 offsets into cols/vals
  std::vector<std::uint32_t> cols;
  std::vector<std::int64_t> vals;

  explicit QuboGraph(const QuboInstance& q)
      : n(q.num_vars), diag(q.num_vars, 0), row_start(q.num_vars + 1, 0) {
    for (const auto& [ij, c] : q.coeffs) {
      auto [i, j] = ij;
      if (i == j) {
        diag[i] += c;
      } else {
        ++row_start[i + 1];
        ++row_start[j + 1];
      }
    }
    for (std::uint32_t i = 0; i < n; ++i) row_start[i + 1] += row_start[i];
    cols.resize(row_start[n]);
    vals.resize(row_start[n]);
    std::vector<std::uint32_t> fill(row_start.begin(), row_start.end() - 1);
    for (const auto& [ij, c] : q.coeffs) {
      auto [i, j] = ij;
      if (i == j) continue;
      cols[fill[i]] = j;
      vals[fill[i]++] = c;
      cols[fill[j]] = i;
      vals[fill[j]++] = c;
    }
  }

  std::int64_t flip_delta(const std::vector<std::uint8_t>& s, std::uint32_t i) const {
    std::int64_t field = diag[i];
    for (std::uint32_t k = row_start[i]; k < row_start[i + 1]; ++k) {
      if (s[cols[k]]) field += vals[k];
    }
    return s[i] ? -field : field;
  }

  /// Upper bound on |flip delta|, used to auto-scale the schedule.
  std::int64_t max_delta_bound() const {
    std::int64_t mx = 1;
    for (std::uint32_t i = 0; i < n; ++i) {
      std::int64_t sum = std::llabs(diag[i]);
      for (std::uint32_t k = row_start[i]; k < row_start[i + 1]; ++k) {
        sum += std::llabs(vals[k]);
      }
      mx = std::max(mx, sum);
    }
    return mx;
  }

  /// gcd of all coefficients: every energy difference is a multiple of it.
  std::int64_t energy_quantum() const {
    std::int64_t g = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      g = std::gcd(g, diag[i] < 0 ? -diag[i] : diag[i]);
    }
    for (std::int64_t c : vals) g = std::gcd(g, c < 0 ? -c : c);
    return g == 0 ? 1 : g;
  }
};

/// exp(-x) lookup on [0, 45], quantized; callers treat x > 45 as zero.
struct ExpTable {
  static constexpr int kSteps = 4096;
  static constexpr double kMax = 45.0;
  std::vector<double> values;

  ExpTable() : values(kSteps + 1) {
    for (int i = 0; i <= kSteps; ++i) {
      values[i] = std::exp(-kMax * i / kSteps);
    }
  }

  double operator()(double x) const {
    // round up so acceptance is never optimistic
    int idx = static_cast<int>(x * (kSteps / kMax)) + 1;
    return idx > kSteps ? 0.0 : values[idx];
  }

  static const ExpTable& instance() {
    static const ExpTable table;
    return table;
  }
};

}  // namespace detail

/// True global minimizer by Gray-code enumeration; ties resolved to the
/// lexicographically smallest bit vector (bit 0 most significant).
inline SpinSolution solve_exact(const QuboInstance& q, int cap = 24) {
  if (q.num_vars > static_cast<std::uint32_t>(cap)) {
    throw cap_error("solve_exact: " + std::to_string(q.num_vars) + " variables exceed cap " +
                    std::to_string(cap) + "; use the annealer");
  }
  if (q.num_vars > 62) throw cap_error("solve_exact: cap too large");
  const std::uint32_t n = q.num_vars;
  detail::QuboGraph g(q);

  std::vector<std::uint8_t> s(n, 0);
  std::int64_t energy = 0;
  std::uint64_t lexkey = 0;  // bit i at position n-1-i, so integer order = lex order
  std::int64_t best_energy = 0;
  std::uint64_t best_key = 0;
  std::vector<std::uint8_t> best = s;

  const std::uint64_t total = n == 0 ? 1 : (std::uint64_t{1} << n);
  for (std::uint64_t step = 1; step < total; ++step) {
    std::uint32_t bit = static_cast<std::uint32_t>(__builtin_ctzll(step));
    energy += g.flip_delta(s, bit);
    s[bit] ^= 1;
    lexkey ^= std::uint64_t{1} << (n - 1 - bit);
    if (energy < best_energy || (energy == best_energy && lexkey < best_key)) {
      best_energy = energy;
      best_key = lexkey;
      best = s;
    }
  }
  return {std::move(best), best_energy, q.rescale(best_energy)};
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct RestartResult {
  std::int64_t best_energy = 0;
  std::vector<std::uint8_t> best;
  std::vector<std::int64_t> trajectory;
};

/// One annealing restart: geometric beta ramp over sequential single-flip
/// sweeps, then a zero-temperature quench to the nearest local minimum.
/// Uniform draws are consumed only for uphill proposals with beta*dE <= 45,
/// so the stream is reproducible by construction.
inline RestartResult anneal_once(const QuboGraph& g, int sweeps, double beta_start,
                                 double beta_end, std::uint64_t seed, bool record,
                                 const std::vector<std::uint8_t>* initial = nullptr) {
  const std::uint32_t n = g.n;
  std::mt19937_64 rng(seed);
  const detail::ExpTable& exp_neg = detail::ExpTable::instance();
  RestartResult out;

  std::vector<std::uint8_t> s(n);
  if (initial) {
    s = *initial;
    s.resize(n, 0);
  } else {
    for (std::uint32_t i = 0; i < n; ++i) s[i] = static_cast<std::uint8_t>(rng() & 1);
  }

  // local fields: energy delta of flipping i is (1-2 s_i)(diag_i + field_i)
  std::vector<std::int64_t> field(n, 0);
  std::int64_t energy = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!s[i]) continue;
    energy += g.diag[i];
    for (std::uint32_t k = g.row_start[i]; k < g.row_start[i + 1]; ++k) {
      field[g.cols[k]] += g.vals[k];
      if (s[g.cols[k]] && g.cols[k] < i) energy += g.vals[k];
    }
  }

  out.best_energy = energy;
  out.best = s;

  auto accept_flip = [&](std::uint32_t i) {
    std::int64_t sgn = s[i] ? -1 : 1;
    energy += sgn * (g.diag[i] + field[i]);
    for (std::uint32_t k = g.row_start[i]; k < g.row_start[i + 1]; ++k) {
      field[g.cols[k]] += sgn * g.vals[k];
    }
    s[i] ^= 1;
    if (energy < out.best_energy) {
      out.best_energy = energy;
      out.best = s;
    }
  };

  const double log_ratio = std::log(beta_end / beta_start);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double beta =
        sweeps > 1 ? beta_start * std::exp(log_ratio * sweep / (sweeps - 1)) : beta_end;
    for (std::uint32_t i = 0; i < n; ++i) {
      std::int64_t delta = (s[i] ? -1 : 1) * (g.diag[i] + field[i]);
      if (delta <= 0) {
        accept_flip(i);
      } else {
        double x = beta * static_cast<double>(delta);
        if (x <= detail::ExpTable::kMax && uniform01(rng) < exp_neg(x)) accept_flip(i);
      }
    }
    if (record) out.trajectory.push_back(out.best_energy);
  }

  // quench: descend until no single flip improves
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::uint32_t i = 0; i < n; ++i) {
      std::int64_t delta = (s[i] ? -1 : 1) * (g.diag[i] + field[i]);
      if (delta < 0) {
        accept_flip(i);
        improved = true;
      }
    }
  }
  if (record) out.trajectory.push_back(out.best_energy);
  return out;
}

}  // namespace detail

/// Seeded multi-restart annealing. Restart r uses the derived seed
/// splitmix64(seed ^ r); restarts run in parallel and are merged by index,
/// so reports are identical for identical schedules regardless of threads.
inline RunReport solve_sa(const QuboInstance& q, const AnnealSchedule& sched) {
  sched.validate();
  auto wall0 = std::chrono::steady_clock::now();
  detail::QuboGraph g(q);

  RunReport rep;
  rep.restarts = sched.restarts;
  rep.seed = sched.seed;
  rep.scale = q.scale;
  rep.offset = q.offset;
  rep.sweeps_used = sched.sweeps > 0 ? sched.sweeps : 10 * std::max<std::uint32_t>(1, q.num_vars);

  const std::int64_t dmax = g.max_delta_bound();
  const std::int64_t quantum = g.energy_quantum();
  rep.beta_start_used =
      sched.beta_start > 0 ? sched.beta_start : std::log(2.0) / static_cast<double>(dmax);
  rep.beta_end_used = sched.beta_end > 0 ? sched.beta_end : 12.0 / static_cast<double>(quantum);
  if (rep.beta_end_used < rep.beta_start_used) rep.beta_end_used = rep.beta_start_used;

  rep.best_energies.resize(sched.restarts);
  rep.best_assignments.resize(sched.restarts);
  rep.trajectories.resize(sched.record_trajectory ? sched.restarts : 0);

  unsigned hw = std::thread::hardware_concurrency();
  int threads = sched.threads > 0 ? sched.threads : static_cast<int>(hw ? hw : 1);
  threads = std::min<int>(threads, sched.restarts);

  auto worker = [&](int first, int step) {
    for (int r = first; r < sched.restarts; r += step) {
      const std::vector<std::uint8_t>* init =
          sched.initial_states.empty()
              ? nullptr
              : &sched.initial_states[r % sched.initial_states.size()];
      auto res = detail::anneal_once(g, rep.sweeps_used, rep.beta_start_used, rep.beta_end_used,
                                     detail::splitmix64(sched.seed ^ std::uint64_t(r)),
                                     sched.record_trajectory, init);
      rep.best_energies[r] = res.best_energy;
      rep.best_assignments[r] = std::move(res.best);
      if (sched.record_trajectory) rep.trajectories[r] = std::move(res.trajectory);
    }
  };
  if (threads <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
    for (auto& th : pool) th.join();
  }

  int best_r = 0;
  for (int r = 0; r < sched.restarts; ++r) {
    if (rep.best_energies[r] < rep.best_energies[best_r]) best_r = r;
    if (q.rescale(rep.best_energies[r]).is_zero()) ++rep.zero_loss_hits;
  }
  rep.best.assignment = rep.best_assignments[best_r];
  rep.best.energy = rep.best_energies[best_r];
  rep.best.rescaled_energy = q.rescale(rep.best.energy);
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return rep;
}

inline Rational success_probability(const RunReport& rep) {
  if (rep.restarts == 0) throw std::domain_error("success_probability: empty report");
  return Rational(rep.zero_loss_hits, rep.restarts);
}

/// TTS = t_com * log(1 - 0.99) / log(1 - p_s); clamped to t_com when
/// p_s >= 0.99 (with clamping disabled, p_s = 1 is a domain error).
inline double tts(double p_s, double t_com_seconds, bool clamp = true) {
  if (p_s <= 0.0) throw std::domain_error("tts: p_s must be positive");
  if (p_s >= 0.99) {
    if (clamp) return t_com_seconds;
    if (p_s >= 1.0) throw std::domain_error("tts: p_s must be < 1");
  }
  return t_com_seconds * std::log(0.01) / std::log(1.0 - p_s);
}

inline std::string format_seconds(double s) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << s;
  return os.str();
}

inline std::string format_compact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Line-oriented report: per-restart energies then a summary block. Wall
/// clock never enters the artifact; t_com is the configured nominal trial
/// time so identical runs are byte-identical.
inline void write_report(std::ostream& os, const RunReport& rep, double t_com_seconds) {
  for (int r = 0; r < rep.restarts; ++r) {
    os << "restart " << r << " energy " << rep.best_energies[r] << "\n";
  }
  os << "summary\n";
  os << "restarts " << rep.restarts << "\n";
  os << "sweeps " << rep.sweeps_used << "\n";
  os << "seed " << rep.seed << "\n";
  if (rep.beta_start_used > 0) {
    os << "beta " << format_compact(rep.beta_start_used) << " "
       << format_compact(rep.beta_end_used) << "\n";
  }
  os << "best_energy " << rep.best.energy << "\n";
  os << "best_rescaled " << rep.best.rescaled_energy.str() << "\n";
  os << "p_s " << rep.zero_loss_hits << "/" << rep.restarts << "\n";
  os << "t_com_seconds " << format_seconds(t_com_seconds) << "\n";
  if (rep.zero_loss_hits > 0) {
    os << "tts_seconds "
       << format_seconds(tts(static_cast<double>(rep.zero_loss_hits) / rep.restarts,
                             t_com_seconds))
       << "\n";
  } else {
    os << "tts_seconds inf\n";
  }
  os << "best_bits ";
  for (std::uint8_t b : rep.best.assignment) os << int(b);
  os << "\n";
}

}  // namespace isl
