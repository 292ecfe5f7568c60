#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "scrn/cubic.hpp"
#include "scrn/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int run(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed,
        scrn::harness::ExperimentKind expected) {
  using namespace scrn;
  harness::ExperimentConfig cfg;
  try {
    cfg = harness::load_config(path);
    if (cfg.kind != expected) {
      std::cerr << "config error: kind does not match the subcommand\n";
      return kConfigError;
    }
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  if (seed) {
    cfg.seed = *seed;
    cfg.raw["seed"] = *seed;
  }
  try {
    const auto result = harness::run_experiment(cfg);
    harness::emit(cfg, result, out);
    long failed = 0;
    for (const auto& r : result.instances) {
      if (r.error) {
        ++failed;
        std::cerr << "instance " << r.instance << " failed: " << *r.error << '\n';
      }
    }
    std::printf("%zu instances, %ld failed, %.2f s\n", result.instances.size(), failed, result.wall_seconds);
    if (result.success_percentage) std::printf("success %.1f%%\n", *result.success_percentage);
    return failed == 0 ? kOk : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

int subsolver_bench(long dim, long trials, std::uint64_t seed) {
  using namespace scrn;
  if (dim < 1 || trials < 1) {
    std::cerr << "config error: --dim and --trials must be >= 1\n";
    return kConfigError;
  }
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::printf("trial,exact_value,gd_value,gd_grad_residual,gd_iterations,exact_ms,gd_ms\n");
  ExactOptions exact_opts;
  exact_opts.dim_cap = std::max<long>(exact_opts.dim_cap, dim);
  for (long k = 0; k < trials; ++k) {
    Vec g(dim);
    Mat a(dim, dim);
    for (long i = 0; i < dim; ++i) g(i) = normal(rng);
    for (long i = 0; i < dim * dim; ++i) a.data()[i] = normal(rng);
    const CubicModel<double> model(g, SymMat::symmetrized(a), 1.0);
    const auto t0 = std::chrono::steady_clock::now();
    const auto ex = solve_exact(model, exact_opts);
    const auto t1 = std::chrono::steady_clock::now();
    const auto gd = solve_gd(model, GdOptions{}, rng);
    const auto t2 = std::chrono::steady_clock::now();
    std::printf("%ld,%s,%s,%s,%d,%.3f,%.3f\n", k, harness::format_double(ex.model_value).c_str(),
                harness::format_double(gd.model_value).c_str(), harness::format_double(gd.grad_residual).c_str(),
                gd.iterations, std::chrono::duration<double, std::milli>(t1 - t0).count(),
                std::chrono::duration<double, std::milli>(t2 - t1).count());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic cubic-regularized Newton experiments"};
  app.require_subcommand(0, 1);
  bool list = false;
  app.add_flag("--list-algorithms", list, "Print the available algorithms");

  std::string syn_config, syn_out, rl_config, rl_out;
  std::optional<std::uint64_t> syn_seed, rl_seed;
  auto* syn = app.add_subcommand("synthetic", "Run a synthetic-objective experiment");
  syn->add_option("--config", syn_config)->required()->check(CLI::ExistingFile);
  syn->add_option("--out", syn_out)->required();
  syn->add_option("--seed", syn_seed);

  auto* rl = app.add_subcommand("rl", "Run a reinforcement-learning experiment");
  rl->add_option("--config", rl_config)->required()->check(CLI::ExistingFile);
  rl->add_option("--out", rl_out)->required();
  rl->add_option("--seed", rl_seed);

  long dim = 10;
  long trials = 100;
  std::uint64_t bench_seed = 0;
  auto* bench = app.add_subcommand("subsolver-bench", "Compare the exact and gradient-descent subsolvers");
  bench->add_option("--dim", dim)->required();
  bench->add_option("--trials", trials)->required();
  bench->add_option("--seed", bench_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (list) {
    for (const auto& name : scrn::harness::list_algorithms()) std::cout << name << '\n';
    return kOk;
  }
  if (*syn) return run(syn_config, syn_out, syn_seed, scrn::harness::ExperimentKind::Synthetic);
  if (*rl) return run(rl_config, rl_out, rl_seed, scrn::harness::ExperimentKind::Rl);
  if (*bench) return subsolver_bench(dim, trials, bench_seed);
  std::cout << app.help();
  return kConfigError;
}
