// ising-learn: compile quantized-network training problems to QUBO, solve
// them on a simulated annealer or an exact oracle, and decode the results.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "isinglearn/cli.hpp"

namespace {

isl::Rational parse_rational_flag(const std::string& text, const char* what) {
  try {
    return isl::Rational::parse(text);
  } catch (const std::exception&) {
    throw CLI::ValidationError(std::string(what) + ": expected num or num/den, got '" + text +
                               "'");
  }
}

void apply_lambda_flag(const std::string& text, isl::RunConfig& cfg) {
  if (text == "auto") {
    cfg.lambda.reset();
  } else if (text.rfind("fixed:", 0) == 0) {
    cfg.lambda = parse_rational_flag(text.substr(6), "--lambda");
  } else {
    throw CLI::ValidationError("--lambda: expected 'auto' or 'fixed:<value>'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized-network training compiled to QUBO for Ising-style solvers"};
  app.require_subcommand(1);

  isl::RunConfig cfg;
  std::string rho_text, lambda_text = "auto";
  std::string qubo_path;

  auto add_solver_flags = [&](CLI::App* cmd) {
    cmd->add_option("--sweeps", cfg.schedule.sweeps, "sweeps per restart (0 = 10*vars)");
    cmd->add_option("--restarts", cfg.schedule.restarts, "independent restarts");
    cmd->add_option("--seed", cfg.schedule.seed, "random seed");
    cmd->add_option("--beta-start", cfg.schedule.beta_start, "initial inverse temperature");
    cmd->add_option("--beta-end", cfg.schedule.beta_end, "final inverse temperature");
    cmd->add_option("--threads", cfg.schedule.threads, "worker threads (0 = hardware)");
    cmd->add_flag("--exact", cfg.use_exact, "use the exact enumeration oracle");
    cmd->add_option("--cap", cfg.exact_cap, "exact oracle variable cap");
    cmd->add_option("--tcom", cfg.t_com_seconds, "nominal seconds per trial for TTS");
  };

  auto* compile = app.add_subcommand("compile", "compile a network + dataset to QUBO");
  compile->add_option("--net", cfg.net_path, "network description file")->required();
  compile->add_option("--data", cfg.data_path, "dataset file")->required();
  compile->add_option("--rho", rho_text, "penalty weight (num or num/den)");
  compile->add_option("--lambda", lambda_text, "'auto' or 'fixed:<value>'");
  compile->add_option("--out", cfg.out_dir, "output directory");

  auto* solve = app.add_subcommand("solve", "solve a compiled QUBO file");
  solve->add_option("qubo", qubo_path, "problem.qubo path")->required();
  solve->add_option("--out", cfg.out_dir, "output directory");
  add_solver_flags(solve);

  auto* train = app.add_subcommand("train", "compile, solve, decode and evaluate");
  train->add_option("--net", cfg.net_path, "network description file")->required();
  train->add_option("--data", cfg.data_path, "training dataset file")->required();
  train->add_option("--test-data", cfg.test_data_path, "held-out dataset file");
  train->add_option("--rho", rho_text, "penalty weight (num or num/den)");
  train->add_option("--lambda", lambda_text, "'auto' or 'fixed:<value>'");
  train->add_option("--out", cfg.out_dir, "output directory");
  add_solver_flags(train);

  auto* count = app.add_subcommand("count-spins", "spin accounting for a network");
  std::string count_net;
  int count_samples = 1;
  std::vector<int> sweep_n;
  count->add_option("--net", count_net, "network description file")->required();
  count->add_option("--samples", count_samples, "dataset size N");
  count->add_option("--sweep-n", sweep_n, "extra N values to tabulate");

  auto* moon = app.add_subcommand("gen-two-moon", "generate a quantized two-moon dataset");
  int moon_samples = 20;
  double moon_noise = 0.08;
  std::uint64_t moon_seed = 1;
  int moon_bits = 2;
  std::string moon_out = "two_moon.txt";
  moon->add_option("--samples", moon_samples, "sample count (even)");
  moon->add_option("--noise", moon_noise, "gaussian noise level");
  moon->add_option("--seed", moon_seed, "random seed");
  moon->add_option("--input-bits", moon_bits, "input bit width B");
  moon->add_option("--out", moon_out, "output dataset file");

  auto* mnist = app.add_subcommand("preprocess-mnist", "crop/split/count/normalize IDX images");
  std::string mnist_images, mnist_labels, mnist_out = "mnist69.txt";
  isl::MnistConfig mnist_cfg;
  std::string t1_text, t2_text;
  mnist->add_option("--images", mnist_images, "IDX image file")->required();
  mnist->add_option("--labels", mnist_labels, "IDX label file")->required();
  mnist->add_option("--digit-positive", mnist_cfg.digit_positive, "digit mapped to +1");
  mnist->add_option("--digit-negative", mnist_cfg.digit_negative, "digit mapped to -1");
  mnist->add_option("--threshold", mnist_cfg.binarize_threshold, "white-pixel cutoff");
  mnist->add_option("--t1", t1_text, "lower tri-level threshold (fraction)");
  mnist->add_option("--t2", t2_text, "upper tri-level threshold (fraction)");
  mnist->add_option("--out", mnist_out, "output dataset file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!rho_text.empty()) cfg.rho = parse_rational_flag(rho_text, "--rho");
    apply_lambda_flag(lambda_text, cfg);

    if (compile->parsed()) {
      isl::cmd_compile(cfg);
    } else if (solve->parsed()) {
      isl::cmd_solve(qubo_path, cfg);
    } else if (train->parsed()) {
      isl::cmd_train(cfg);
    } else if (count->parsed()) {
      isl::NetworkSpec net = isl::load_network(count_net);
      isl::cmd_count_spins(net, count_samples);
      for (int n : sweep_n) {
        auto rep = isl::spin_budget(net, n);
        std::cout << "N=" << n << " total=" << rep.total << " ratio="
                  << isl::format_seconds(rep.ratio) << "\n";
      }
    } else if (moon->parsed()) {
      isl::cmd_gen_two_moon(moon_samples, moon_noise, moon_seed, moon_bits, moon_out);
    } else if (mnist->parsed()) {
      // bare filenames resolve against ISING_LEARN_DATA_DIR when set
      const char* dir = std::getenv("ISING_LEARN_DATA_DIR");
      auto resolve = [&](const std::string& p) {
        if (dir && !p.empty() && p.find('/') == std::string::npos) {
          return std::string(dir) + "/" + p;
        }
        return p;
      };
      if (!t1_text.empty()) mnist_cfg.t1 = parse_rational_flag(t1_text, "--t1");
      if (!t2_text.empty()) mnist_cfg.t2 = parse_rational_flag(t2_text, "--t2");
      isl::cmd_preprocess_mnist(resolve(mnist_images), resolve(mnist_labels), mnist_cfg,
                                mnist_out);
    }
  } catch (const isl::cap_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return isl::exit_cap_error;
  } catch (const isl::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return isl::exit_config_error;
  } catch (const isl::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return isl::exit_data_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return isl::exit_config_error;
  }
  return isl::exit_ok;
}
