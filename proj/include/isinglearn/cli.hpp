/// @file cli.hpp
/// @brief End-to-end workflow commands: compile, solve, train, count-spins,
/// preprocess-mnist, gen-two-moon. The thin binary in tools/ parses flags and
/// dispatches here so the commands stay testable.

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isinglearn/compile.hpp"
#include "isinglearn/data.hpp"
#include "isinglearn/model.hpp"
#include "isinglearn/network.hpp"
#include "isinglearn/solver.hpp"
#include "isinglearn/topology.hpp"

namespace isl {

constexpr int exit_ok = 0;
constexpr int exit_config_error = 2;
constexpr int exit_cap_error = 3;
constexpr int exit_data_error = 4;

struct RunConfig {
  std::string net_path;
  std::string data_path;
  std::string test_data_path;
  std::string out_dir = ".";
  std::optional<Rational> rho;
  std::optional<Rational> lambda;  // nullopt = auto
  AnnealSchedule schedule;
  bool use_exact = false;
  int exact_cap = 24;
  double t_com_seconds = 0.7;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << content;
}

}  // namespace detail

inline NetworkSpec load_network(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open network file " + path);
  return NetworkSpec::read(is);
}

inline QuantizedDataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw data_error("cannot open dataset file " + path);
  return read_dataset(is);
}

/// Per-kind spin accounting against the closed-form protocol widths.
struct SpinBudgetRow {
  std::string variable;
  std::int64_t bits_per_element;
  std::int64_t elements;
  std::int64_t total;
};

struct SpinBudgetReport {
  std::vector<SpinBudgetRow> rows;
  std::int64_t total = 0;
  std::int64_t closed_form = 0;  // H^2 L + H L N log2 H
  double ratio = 0.0;
};

/// Independent closed-form sum of the per-variable spin counts (sign
/// configuration). Used to cross-check build_registry.
inline std::int64_t spin_count_closed_form(const NetworkSpec& net, int N) {
  const std::int64_t H = net.H, n = net.n, m = net.m, L = net.L;
  const std::int64_t in_hi = std::int64_t{1} << net.B;
  std::int64_t total = 0;
  total += n * H;                                              // W(1)
  total += H * bits_for_steps(n * (in_hi << 1));               // b(1)
  total += H * H * (L - 2);                                    // W(k)
  total += m * H * bits_for_steps(2 * H);                      // W(L)
  total += m * bits_for_steps(2 * H);                          // b(L)
  total += std::int64_t(N) * H * bits_for_steps(n * (in_hi << 2));        // s(1)
  total += std::int64_t(N) * (L - 2) * H * bits_for_steps(2 * H);         // s(k)
  total += std::int64_t(N) * H * bits_for_steps(3 * n * in_hi);           // r(1)
  total += std::int64_t(N) * (L - 2) * H * bits_for_steps(2 * H);         // r(k)
  total += std::int64_t(N) * H * bits_for_steps(3 * n * (in_hi << 1));    // t(1)
  total += std::int64_t(N) * (L - 1) * H;                                 // a(k)
  total += std::int64_t(N) * m * bits_for_steps(4 * H);                   // y_hat
  return total;
}

inline SpinBudgetReport spin_budget(const NetworkSpec& net, int N) {
  VariableRegistry reg = build_registry(net, N);
  SpinBudgetReport rep;
  auto row = [&](const std::string& name, VariableKind kind, int layer) {
    std::int64_t bits = 0, elems = 0;
    for (const auto& [key, enc] : reg.entries()) {
      if (key.kind != kind) continue;
      bool mid = layer == -2;  // middle layers 2..L-1
      if (mid && (key.layer < 2 || key.layer > net.L - 1)) continue;
      if (!mid && key.layer != layer) continue;
      ++elems;
      bits = enc.num_bits();
    }
    if (elems > 0) rep.rows.push_back({name, bits, elems, 0});
  };
  row("W(1)", VariableKind::weight, 1);
  row("b(1)", VariableKind::bias, 1);
  if (net.L > 2) row("W(k)", VariableKind::weight, -2);
  row("W(L)", VariableKind::weight, net.L);
  row("b(L)", VariableKind::bias, net.L);
  row("s(1)", VariableKind::preact, 1);
  if (net.L > 2) row("s(k)", VariableKind::preact, -2);
  row("r(1)", VariableKind::absval, 1);
  if (net.L > 2) row("r(k)", VariableKind::absval, -2);
  row("t(1)", VariableKind::slack, 1);
  if (net.L > 2) row("t(k)", VariableKind::slack, -2);
  // postact spans all hidden layers in one table row
  {
    std::int64_t elems = 0, bits = 0;
    for (const auto& [key, enc] : reg.entries()) {
      if (key.kind == VariableKind::postact) {
        ++elems;
        bits = enc.num_bits();
      }
    }
    if (elems) rep.rows.push_back({"a(k)", bits, elems, 0});
  }
  row("y_hat", VariableKind::prediction, net.L);
  for (auto& r : rep.rows) r.total = r.bits_per_element * r.elements;
  rep.total = reg.num_bits();
  double lg = std::log2(static_cast<double>(net.H));
  rep.closed_form = static_cast<std::int64_t>(std::llround(
      double(net.H) * net.H * net.L + double(net.H) * net.L * N * (lg > 0 ? lg : 1.0)));
  rep.ratio = rep.closed_form > 0 ? static_cast<double>(rep.total) / rep.closed_form : 0.0;
  return rep;
}

// --- commands -----------------------------------------------------------------

struct CompileArtifacts {
  std::string qubo_path, manifest_path, trace_path;
  CompileResult result;
};

inline CompileArtifacts cmd_compile(const RunConfig& cfg, std::ostream& log = std::cout) {
  NetworkSpec net = load_network(cfg.net_path);
  QuantizedDataset data = load_dataset(cfg.data_path);
  PenaltyConfig pc{cfg.rho, cfg.lambda};
  CompileResult result = compile_network(net, data, pc);

  std::filesystem::create_directories(cfg.out_dir);
  CompileArtifacts art;
  art.qubo_path = cfg.out_dir + "/problem.qubo";
  art.manifest_path = cfg.out_dir + "/registry.manifest";
  art.trace_path = cfg.out_dir + "/reduction.trace";
  result.qubo.registry_manifest = art.manifest_path;

  {
    std::ostringstream os;
    os << "# rho=" << result.stats.rho.str() << "\n";
    os << "# lambda=" << (cfg.lambda ? "fixed:" + cfg.lambda->str() : "auto") << "\n";
    os << "# max_snap_distance=" << result.stats.max_snap_distance.str() << "\n";
    os << "# constraints=" << result.stats.constraint_count << "\n";
    os << "# auxiliary_bits=" << result.stats.auxiliary_bits << "\n";
    result.registry.write_manifest(os);
    detail::write_file(art.manifest_path, os.str());
  }
  {
    std::ostringstream os;
    result.qubo.write(os);
    detail::write_file(art.qubo_path, os.str());
  }
  {
    std::ostringstream os;
    result.trace.write(os);
    detail::write_file(art.trace_path, os.str());
  }
  log << "compiled vars: original=" << result.stats.original_bits
      << " auxiliary=" << result.stats.auxiliary_bits << " total=" << result.qubo.num_vars
      << "\n";
  log << "constraints=" << result.stats.constraint_count << " rho=" << result.stats.rho.str()
      << " hubo_terms=" << result.stats.hubo_terms << "\n";
  art.result = std::move(result);
  return art;
}

inline RunReport cmd_solve(const std::string& qubo_path, const RunConfig& cfg,
                           std::ostream& log = std::cout) {
  std::ifstream is(qubo_path);
  if (!is) throw std::runtime_error("cannot open qubo file " + qubo_path);
  QuboInstance q = QuboInstance::read(is);

  RunReport rep;
  if (cfg.use_exact) {
    SpinSolution sol = solve_exact(q, cfg.exact_cap);
    rep.restarts = 1;
    rep.best_energies = {sol.energy};
    rep.best_assignments = {sol.assignment};
    rep.best = std::move(sol);
    rep.scale = q.scale;
    rep.offset = q.offset;
    rep.zero_loss_hits = rep.best.rescaled_energy.is_zero() ? 1 : 0;
  } else {
    rep = solve_sa(q, cfg.schedule);
  }

  std::filesystem::create_directories(cfg.out_dir);
  std::ostringstream os;
  write_report(os, rep, cfg.t_com_seconds);
  detail::write_file(cfg.out_dir + "/solver.report", os.str());
  log << "best energy " << rep.best.energy << " (rescaled "
      << rep.best.rescaled_energy.str() << "), zero-loss hits " << rep.zero_loss_hits << "/"
      << rep.restarts << "\n";
  return rep;
}

struct TrainOutcome {
  CompileArtifacts artifacts;
  RunReport report;
  DecodedParameters params;
  EvalReport train_eval;
  std::optional<EvalReport> test_eval;
};

inline TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& log = std::cout) {
  TrainOutcome out;
  out.artifacts = cmd_compile(cfg, log);
  const QuboInstance& q = out.artifacts.result.qubo;

  if (cfg.use_exact) {
    SpinSolution sol = solve_exact(q, cfg.exact_cap);
    out.report.restarts = 1;
    out.report.best_energies = {sol.energy};
    out.report.best_assignments = {sol.assignment};
    out.report.best = std::move(sol);
    out.report.scale = q.scale;
    out.report.offset = q.offset;
    out.report.zero_loss_hits = out.report.best.rescaled_energy.is_zero() ? 1 : 0;
  } else {
    out.report = solve_sa(q, cfg.schedule);
  }
  {
    std::ostringstream os;
    write_report(os, out.report, cfg.t_com_seconds);
    detail::write_file(cfg.out_dir + "/solver.report", os.str());
  }

  out.params = canonicalize(decode(out.report.best.assignment, out.artifacts.result.registry));
  {
    std::ostringstream os;
    write_params(os, out.params);
    detail::write_file(cfg.out_dir + "/params.txt", os.str());
  }

  QuantizedDataset train = load_dataset(cfg.data_path);
  TaskKind task = TaskKind::binary_classification;
  out.train_eval = evaluate_model(out.params, train, task);
  std::ostringstream ev;
  ev << "train:\n";
  write_eval_report(ev, out.train_eval);
  if (!cfg.test_data_path.empty()) {
    QuantizedDataset test = load_dataset(cfg.test_data_path);
    out.test_eval = evaluate_model(out.params, test, task);
    ev << "test:\n";
    write_eval_report(ev, *out.test_eval);
  }
  detail::write_file(cfg.out_dir + "/eval.report", ev.str());
  {
    const EvalReport& conf = out.test_eval ? *out.test_eval : out.train_eval;
    std::ostringstream csv;
    csv << "true,pred+1,pred-1\n";
    csv << "+1," << conf.confusion[0][0] << "," << conf.confusion[0][1] << "\n";
    csv << "-1," << conf.confusion[1][0] << "," << conf.confusion[1][1] << "\n";
    detail::write_file(cfg.out_dir + "/confusion.csv", csv.str());
  }
  log << "train mse " << out.train_eval.mse.str() << " accuracy "
      << out.train_eval.accuracy.str() << "\n";
  if (out.test_eval) {
    log << "test accuracy " << out.test_eval->accuracy.str() << "\n";
  }
  log << "p_s " << out.report.zero_loss_hits << "/" << out.report.restarts << "\n";
  return out;
}

inline SpinBudgetReport cmd_count_spins(const NetworkSpec& net, int N,
                                        std::ostream& log = std::cout) {
  SpinBudgetReport rep = spin_budget(net, N);
  log << "variable bits elements total\n";
  for (const auto& r : rep.rows) {
    log << r.variable << ' ' << r.bits_per_element << ' ' << r.elements << ' ' << r.total << "\n";
  }
  log << "total " << rep.total << "\n";
  log << "closed_form " << rep.closed_form << " ratio " << format_seconds(rep.ratio) << "\n";
  return rep;
}

inline void cmd_gen_two_moon(int n_samples, double noise, std::uint64_t seed, int B,
                             const std::string& out_path) {
  QuantizedDataset ds = two_moon(n_samples, noise, seed, B);
  std::ostringstream os;
  write_dataset(os, ds);
  detail::write_file(out_path, os.str());
}

inline void cmd_preprocess_mnist(const std::string& images_path, const std::string& labels_path,
                                 const MnistConfig& cfg, const std::string& out_path) {
  std::ifstream im(images_path, std::ios::binary);
  if (!im) throw data_error("cannot open images " + images_path);
  std::ifstream lb(labels_path, std::ios::binary);
  if (!lb) throw data_error("cannot open labels " + labels_path);
  auto images = read_idx_images(im);
  auto labels = read_idx_labels(lb);
  QuantizedDataset ds = preprocess_mnist(images, labels, cfg);
  std::ostringstream os;
  write_dataset(os, ds);
  detail::write_file(out_path, os.str());
}

}  // namespace isl
