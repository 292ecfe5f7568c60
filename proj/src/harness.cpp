#include "scrn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>

namespace scrn::harness {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ConfigError, path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) config_error(join(path, key), "unknown field");
  }
}

template <typename T>
T read(const json& obj, const std::string& key, const std::string& path) {
  const std::string where = join(path, key);
  if (!obj.contains(key)) config_error(where, "missing required field");
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) config_error(where, "expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) config_error(where, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
        config_error(where, "expected a nonnegative integer");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) config_error(where, "expected a number");
  } else {
    if (!v.is_string()) config_error(where, "expected a string");
  }
  return v.get<T>();
}

template <typename T>
T read_or(const json& obj, const std::string& key, const std::string& path, T fallback) {
  return obj.contains(key) ? read<T>(obj, key, path) : fallback;
}

template <typename T>
std::optional<T> read_opt(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return read<T>(obj, key, path);
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) config_error(path, what);
}

Subsolver parse_subsolver(const json& obj, const std::string& path, const Subsolver& fallback) {
  if (!obj.contains("subsolver")) return fallback;
  const std::string where = join(path, "subsolver");
  const json& node = obj.at("subsolver");
  if (node.is_string()) {
    const auto name = node.get<std::string>();
    if (name == "exact") {
      ExactOptions o;
      if (const auto* e = std::get_if<ExactSubsolver>(&fallback)) o = e->options;
      return ExactSubsolver{o};
    }
    if (name == "gd") return GdSubsolver{};
    config_error(where, "expected \"exact\" or \"gd\"");
  }
  check_keys(node, where, {"type", "dim_cap", "tol", "max_iters", "perturb"});
  const auto type = read<std::string>(node, "type", where);
  if (type == "exact") {
    ExactOptions o;
    if (const auto* e = std::get_if<ExactSubsolver>(&fallback)) o = e->options;
    o.dim_cap = read_or<long>(node, "dim_cap", where, static_cast<long>(o.dim_cap));
    require(o.dim_cap >= 1, join(where, "dim_cap"), "must be >= 1");
    return ExactSubsolver{o};
  }
  if (type == "gd") {
    GdOptions o;
    o.tol = read_or<double>(node, "tol", where, o.tol);
    o.max_iters = read_or<long>(node, "max_iters", where, o.max_iters);
    o.perturb = read_or<bool>(node, "perturb", where, o.perturb);
    require(o.tol > 0, join(where, "tol"), "must be positive");
    require(o.max_iters >= 1, join(where, "max_iters"), "must be >= 1");
    return GdSubsolver{o};
  }
  config_error(join(where, "type"), "expected \"exact\" or \"gd\"");
}

void parse_scrn_fields(const json& a, const std::string& path, ScrnConfig& c) {
  c.m_penalty = read_or<double>(a, "m_penalty", path, c.m_penalty);
  c.alpha = read_or<double>(a, "alpha", path, c.alpha);
  c.epsilon = read_or<double>(a, "epsilon", path, c.epsilon);
  c.max_iters = read_or<long>(a, "max_iters", path, c.max_iters);
  c.n1 = read_or<long>(a, "n1", path, c.n1);
  c.n2 = read_or<long>(a, "n2", path, c.n2);
  c.subsolver = parse_subsolver(a, path, c.subsolver);
  c.stop_on_small_step = read_or<bool>(a, "stop_on_small_step", path, c.stop_on_small_step);
  c.delta_reject_threshold = read_opt<double>(a, "delta_reject_threshold", path);
  if (const auto t = read_opt<double>(a, "target_gap", path)) c.target_gap = t;
  c.batch_growth = read_or<double>(a, "batch_growth", path, c.batch_growth);
  require(c.batch_growth >= 1, join(path, "batch_growth"), "must be >= 1");
  require(c.m_penalty > 0, join(path, "m_penalty"), "must be positive");
  require(c.alpha >= 1 && c.alpha <= 2, join(path, "alpha"), "must lie in [1, 2]");
  require(c.epsilon > 0, join(path, "epsilon"), "must be positive");
  require(c.max_iters >= 1, join(path, "max_iters"), "must be >= 1");
  require(c.n1 >= 1, join(path, "n1"), "must be >= 1");
  require(c.n2 >= 1, join(path, "n2"), "must be >= 1");
  require(!c.delta_reject_threshold || *c.delta_reject_threshold > 0, join(path, "delta_reject_threshold"),
          "must be positive");
}

void parse_vr_fields(const json& a, const std::string& path, VrScrnConfig& c) {
  c.period = read_or<long>(a, "period", path, c.period);
  c.batch_cap = read_or<long>(a, "batch_cap", path, c.batch_cap);
  c.epoch_error_exponent = read_or<double>(a, "epoch_error_exponent", path, c.epoch_error_exponent);
  require(c.period >= 1, join(path, "period"), "must be >= 1");
  require(c.batch_cap >= 1, join(path, "batch_cap"), "must be >= 1");
  require(c.epoch_error_exponent > 0, join(path, "epoch_error_exponent"), "must be positive");
  if (!a.contains("schedule")) return;
  const std::string where = join(path, "schedule");
  const json& s = a.at("schedule");
  check_keys(s, where,
             {"type", "checkpoint_grad", "checkpoint_hess", "inner_grad", "inner_hess", "multiplier", "sigma_grad",
              "sigma_hess", "grad_lipschitz", "hess_lipschitz"});
  const auto type = read<std::string>(s, "type", where);
  if (type == "fixed") {
    FixedSchedule f;
    f.checkpoint_grad = read<long>(s, "checkpoint_grad", where);
    f.checkpoint_hess = read<long>(s, "checkpoint_hess", where);
    f.inner_grad = read<long>(s, "inner_grad", where);
    f.inner_hess = read<long>(s, "inner_hess", where);
    require(f.checkpoint_grad >= 1 && f.checkpoint_hess >= 1 && f.inner_grad >= 1 && f.inner_hess >= 1, where,
            "batch sizes must be >= 1");
    c.schedule = f;
  } else if (type == "accuracy") {
    AccuracySchedule l;
    l.multiplier = read_or<double>(s, "multiplier", where, l.multiplier);
    l.sigma_grad = read_or<double>(s, "sigma_grad", where, l.sigma_grad);
    l.sigma_hess = read_or<double>(s, "sigma_hess", where, l.sigma_hess);
    l.grad_lipschitz = read_or<double>(s, "grad_lipschitz", where, l.grad_lipschitz);
    l.hess_lipschitz = read_or<double>(s, "hess_lipschitz", where, l.hess_lipschitz);
    require(l.multiplier > 0, join(where, "multiplier"), "must be positive");
    c.schedule = l;
  } else {
    config_error(join(where, "type"), "expected \"fixed\" or \"accuracy\"");
  }
}

void parse_step_schedule(const json& a, const std::string& path, StepSchedule& s) {
  s.a = read_or<double>(a, "a", path, s.a);
  s.b = read_or<double>(a, "b", path, s.b);
  s.period = read_or<long>(a, "period", path, s.period);
  s.exponent = read_or<double>(a, "exponent", path, s.exponent);
  require(s.a > 0, join(path, "a"), "must be positive");
  require(s.b > 0, join(path, "b"), "must be positive");
  require(s.period >= 1, join(path, "period"), "must be >= 1");
  require(s.exponent >= 0, join(path, "exponent"), "must be >= 0");
}

void parse_synthetic(const json& doc, ExperimentConfig& cfg) {
  auto& syn = cfg.synthetic;
  const json& obj = doc.at("objective");
  check_keys(obj, "objective", {"family", "p", "q", "a", "dim", "sigma_grad", "sigma_hess", "x0"});
  const auto family = read<std::string>(obj, "family", "objective");
  if (family == "power") {
    PowerFamily p;
    p.p = read<int>(obj, "p", "objective");
    p.q = read<int>(obj, "q", "objective");
    require(p.p % 2 == 0 && p.p > 0, "objective.p", "must be positive and even");
    require(p.q > 0 && p.q < p.p, "objective.q", "must satisfy 0 < q < p");
    syn.spec.family = p;
  } else if (family == "sin_quadratic") {
    SinQuadraticFamily s;
    s.a = read_or<double>(obj, "a", "objective", 0.0);
    require(s.a >= 0 && s.a <= kSinQuadraticMaxA, "objective.a", "must lie in [0, 4.6033]");
    syn.spec.family = s;
  } else {
    config_error("objective.family", "expected \"power\" or \"sin_quadratic\"");
  }
  syn.spec.dim = read_or<long>(obj, "dim", "objective", 1);
  syn.spec.noise_sigma_grad = read_or<double>(obj, "sigma_grad", "objective", 0.0);
  syn.spec.noise_sigma_hess = read_or<double>(obj, "sigma_hess", "objective", 0.0);
  require(syn.spec.dim >= 1, "objective.dim", "must be >= 1");
  require(syn.spec.noise_sigma_grad >= 0, "objective.sigma_grad", "must be >= 0");
  require(syn.spec.noise_sigma_hess >= 0, "objective.sigma_hess", "must be >= 0");
  syn.x0 = Vec::Ones(syn.spec.dim);
  if (obj.contains("x0")) {
    const json& x0 = obj.at("x0");
    if (x0.is_number()) {
      syn.x0 = Vec::Constant(syn.spec.dim, x0.get<double>());
    } else if (x0.is_array()) {
      require(static_cast<long>(x0.size()) == syn.spec.dim, "objective.x0", "length must equal dim");
      for (std::size_t i = 0; i < x0.size(); ++i) {
        require(x0[i].is_number(), "objective.x0", "expected numbers");
        syn.x0(static_cast<Eigen::Index>(i)) = x0[i].get<double>();
      }
    } else {
      config_error("objective.x0", "expected a number or an array");
    }
  }

  const json& a = doc.at("algorithm");
  const std::string path = "algorithm";
  syn.algorithm = read<std::string>(a, "name", path);
  // M defaults to 2·L₂ + 10 of the objective
  if (!a.contains("m_penalty")) {
    if (const auto l2 = make_synthetic(syn.spec).hessian_lipschitz()) {
      syn.scrn.m_penalty = default_m_penalty(*l2);
      syn.vr.base.m_penalty = syn.scrn.m_penalty;
    }
  }
  if (syn.algorithm == "scrn" || syn.algorithm == "crn") {
    check_keys(a, path,
               {"name", "m_penalty", "alpha", "epsilon", "max_iters", "n1", "n2", "subsolver", "stop_on_small_step",
                "delta_reject_threshold", "target_gap", "batch_growth"});
    parse_scrn_fields(a, path, syn.scrn);
    syn.scrn.sample_budget = cfg.budget;
  } else if (syn.algorithm == "vr-scrn") {
    check_keys(a, path,
               {"name", "m_penalty", "alpha", "epsilon", "max_iters", "n1", "n2", "subsolver", "stop_on_small_step",
                "delta_reject_threshold", "target_gap", "period", "batch_cap", "epoch_error_exponent", "schedule"});
    parse_scrn_fields(a, path, syn.vr.base);
    parse_vr_fields(a, path, syn.vr);
    syn.vr.base.sample_budget = cfg.budget;
  } else if (syn.algorithm == "sgd") {
    check_keys(a, path, {"name", "a", "b", "period", "exponent", "batch", "max_iters", "target_gap"});
    parse_step_schedule(a, path, syn.sgd.schedule);
    syn.sgd.batch = read_or<long>(a, "batch", path, syn.sgd.batch);
    syn.sgd.max_iters = read_or<long>(a, "max_iters", path, syn.sgd.max_iters);
    if (const auto t = read_opt<double>(a, "target_gap", path)) syn.sgd.target_gap = t;
    require(syn.sgd.batch >= 1, "algorithm.batch", "must be >= 1");
    require(syn.sgd.max_iters >= 1, "algorithm.max_iters", "must be >= 1");
    syn.sgd.sample_budget = cfg.budget;
  } else {
    config_error("algorithm.name", "unknown synthetic algorithm '" + syn.algorithm + "'");
  }
}

void parse_rl(const json& doc, ExperimentConfig& cfg) {
  auto& rl = cfg.rl;
  const json& env = doc.at("env");
  check_keys(env, "env", {"name", "discount", "horizon"});
  const auto name = read<std::string>(env, "name", "env");
  if (name == "cliff_walking") {
    rl.env = RlEnv::CliffWalking;
  } else if (name == "random_maze") {
    rl.env = RlEnv::RandomMaze;
  } else if (name == "random_shape_maze") {
    rl.env = RlEnv::RandomShapeMaze;
  } else {
    config_error("env.name", "expected cliff_walking, random_maze or random_shape_maze");
  }
  rl.discount = read_or<double>(env, "discount", "env", rl.discount);
  require(rl.discount > 0 && rl.discount < 1, "env.discount", "must lie in (0, 1)");
  rl.horizon = read_opt<int>(env, "horizon", "env");
  require(!rl.horizon || *rl.horizon >= 1, "env.horizon", "must be >= 1");

  rl.eval_episodes = read_or<long>(doc, "eval_episodes", "", rl.eval_episodes);
  require(rl.eval_episodes >= 1, "eval_episodes", "must be >= 1");
  rl.success_threshold = read_or<double>(doc, "success_threshold", "", rl.success_threshold);
  require(rl.success_threshold >= 0 && rl.success_threshold < 1, "success_threshold", "must lie in [0, 1)");
  const auto axis = read_or<std::string>(doc, "x_axis", "", "state_actions");
  if (axis == "state_actions") {
    rl.axis = RlAxis::StateActions;
  } else if (axis == "episodes") {
    rl.axis = RlAxis::Episodes;
  } else {
    config_error("x_axis", "expected \"state_actions\" or \"episodes\"");
  }

  const json& a = doc.at("algorithm");
  const std::string path = "algorithm";
  rl.algorithm = read<std::string>(a, "name", path);
  if (rl.algorithm == "scrn") {
    check_keys(a, path, {"name", "m_penalty", "max_iters", "n1", "n2", "subsolver", "delta_reject_threshold",
                         "shared_batch"});
    rl.scrn.base.max_iters = 1000000;
    parse_scrn_fields(a, path, rl.scrn.base);
    rl.scrn.shared_batch = read_or<bool>(a, "shared_batch", path, rl.scrn.shared_batch);
    rl.scrn.episode_budget = cfg.budget;
  } else if (rl.algorithm == "isvr-scrn") {
    check_keys(a, path, {"name", "m_penalty", "max_iters", "n1", "n2", "subsolver", "delta_reject_threshold",
                         "period", "batch_cap", "epoch_error_exponent", "schedule"});
    rl.isvr.vr.base = rl::rl_scrn_defaults();
    rl.isvr.vr.base.max_iters = 1000000;
    parse_scrn_fields(a, path, rl.isvr.vr.base);
    parse_vr_fields(a, path, rl.isvr.vr);
    rl.isvr.episode_budget = cfg.budget;
  } else if (rl.algorithm == "spg" || rl.algorithm == "reinforce") {
    check_keys(a, path, {"name", "a", "b", "period", "exponent", "m", "max_iters", "entropy_coef"});
    rl.spg.max_iters = 1000000;
    parse_step_schedule(a, path, rl.spg.schedule);
    rl.spg.m = read_or<long>(a, "m", path, rl.spg.m);
    rl.spg.max_iters = read_or<long>(a, "max_iters", path, rl.spg.max_iters);
    rl.spg.entropy_coef = read_or<double>(a, "entropy_coef", path, rl.spg.entropy_coef);
    rl.spg.variant = rl.algorithm == "spg" ? rl::PgVariant::Spg : rl::PgVariant::Reinforce;
    rl.spg.episode_budget = cfg.budget;
    require(rl.spg.m >= 1, "algorithm.m", "must be >= 1");
    require(rl.spg.max_iters >= 0, "algorithm.max_iters", "must be >= 0");
    require(rl.spg.entropy_coef >= 0, "algorithm.entropy_coef", "must be >= 0");
  } else {
    config_error("algorithm.name", "unknown rl algorithm '" + rl.algorithm + "'");
  }
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  cfg.raw = doc;
  check_keys(doc, "",
             {"kind", "instances", "budget", "seed", "threads", "grid_points", "objective", "algorithm", "env",
              "eval_episodes", "success_threshold", "x_axis"});
  const auto kind = read<std::string>(doc, "kind", "");
  cfg.instances = read<long>(doc, "instances", "");
  cfg.budget = read<std::uint64_t>(doc, "budget", "");
  cfg.seed = read_or<std::uint64_t>(doc, "seed", "", 0);
  cfg.threads = read_or<int>(doc, "threads", "", 1);
  cfg.grid_points = read_or<long>(doc, "grid_points", "", cfg.grid_points);
  require(cfg.instances >= 1, "instances", "must be >= 1");
  require(cfg.budget >= 1, "budget", "must be >= 1");
  require(cfg.threads >= 1, "threads", "must be >= 1");
  require(cfg.grid_points >= 2, "grid_points", "must be >= 2");
  if (!doc.contains("algorithm")) config_error("algorithm", "missing required field");
  if (kind == "synthetic") {
    cfg.kind = ExperimentKind::Synthetic;
    if (!doc.contains("objective")) config_error("objective", "missing required field");
    if (doc.contains("env")) config_error("env", "not allowed for synthetic experiments");
    parse_synthetic(doc, cfg);
  } else if (kind == "rl") {
    cfg.kind = ExperimentKind::Rl;
    if (!doc.contains("env")) config_error("env", "missing required field");
    if (doc.contains("objective")) config_error("objective", "not allowed for rl experiments");
    parse_rl(doc, cfg);
  } else {
    config_error("kind", "expected \"synthetic\" or \"rl\"");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed config: ") + e.what());
  }
  return parse_config(doc);
}

std::vector<std::string> list_algorithms() {
  return {"synthetic/scrn", "synthetic/crn",       "synthetic/vr-scrn", "synthetic/sgd",
          "rl/scrn",        "rl/isvr-scrn",        "rl/spg",            "rl/reinforce"};
}

std::uint64_t instance_seed(std::uint64_t master, long instance) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(instance)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto k = static_cast<std::size_t>(it - xs.begin());
  const double x0 = xs[k - 1];
  const double x1 = xs[k];
  if (x1 == x0) return ys[k];
  const double w = (x - x0) / (x1 - x0);
  return ys[k - 1] + w * (ys[k] - ys[k - 1]);
}

}  // namespace

AggregateSeries aggregate_ci(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& runs,
                             const std::vector<double>& grid, double level) {
  if (runs.empty()) throw Error(ErrorCode::EmptyInput, "aggregate_ci needs at least one run");
  if (!(level > 0 && level < 1)) throw Error(ErrorCode::BadSpec, "level must lie in (0, 1)");
  for (const auto& [xs, ys] : runs) {
    if (xs.empty() || xs.size() != ys.size()) throw Error(ErrorCode::DimMismatch, "run curve shape");
  }
  AggregateSeries out;
  std::vector<double> column(runs.size());
  for (double x : grid) {
    for (std::size_t r = 0; r < runs.size(); ++r) column[r] = interpolate(runs[r].first, runs[r].second, x);
    out.x.push_back(x);
    out.median.push_back(quantile(column, 0.5));
    out.lo.push_back(quantile(column, (1 - level) / 2));
    out.hi.push_back(quantile(column, (1 + level) / 2));
  }
  return out;
}

namespace {

void add_opt_rows(InstanceResult& res, const OptRunRecord& rec) {
  for (const auto& row : rec.rows) {
    auto push = [&](const char* name, double v) {
      res.rows.push_back({row.t, row.grad_samples, row.hess_samples, name, v});
    };
    push("gap", row.gap);
    push("step_norm", row.step_norm);
    if (row.rejected) push("rejected", 1.0);
    res.x.push_back(static_cast<double>(row.grad_samples + row.hess_samples));
    res.y.push_back(row.gap);
  }
  res.status = std::string(to_string(rec.status));
}

void run_synthetic(const ExperimentConfig& cfg, InstanceResult& res) {
  const auto& syn = cfg.synthetic;
  SyntheticOracle oracle = make_synthetic(syn.spec);
  Rng rng(res.seed);
  OptRunRecord rec;
  if (syn.algorithm == "scrn") {
    rec = scrn_run(oracle, syn.scrn, syn.x0, rng);
  } else if (syn.algorithm == "crn") {
    rec = crn_run(oracle, syn.scrn, syn.x0, rng);
  } else if (syn.algorithm == "vr-scrn") {
    rec = vr_scrn_run(oracle, syn.vr, syn.x0, rng);
  } else {
    rec = sgd_run(oracle, syn.sgd, syn.x0, rng);
  }
  add_opt_rows(res, rec);
}

rl::TabularMdp make_env(const RlSetup& setup, std::uint64_t seed) {
  rl::TabularMdp mdp = [&] {
    switch (setup.env) {
      case RlEnv::CliffWalking: return rl::build_cliff_walking(setup.discount);
      case RlEnv::RandomMaze: return rl::build_random_maze(rl::MazeKind::RandomMaze, seed, setup.discount);
      case RlEnv::RandomShapeMaze: return rl::build_random_maze(rl::MazeKind::RandomShapeMaze, seed, setup.discount);
    }
    throw Error(ErrorCode::BadSpec, "unknown environment");
  }();
  return setup.horizon ? mdp.with_horizon(*setup.horizon) : mdp;
}

void run_rl(const ExperimentConfig& cfg, InstanceResult& res) {
  const auto& setup = cfg.rl;
  // one stream for the maze layout, one for training, one for evaluation
  std::seed_seq seq{static_cast<std::uint32_t>(res.seed), static_cast<std::uint32_t>(res.seed >> 32)};
  std::array<std::uint32_t, 6> words{};
  seq.generate(words.begin(), words.end());
  auto word64 = [&](int k) { return (static_cast<std::uint64_t>(words[2 * k]) << 32) | words[2 * k + 1]; };
  const rl::TabularMdp mdp = make_env(setup, word64(0));
  Rng rng(word64(1));
  const auto policy0 = rl::SoftmaxPolicy::uniform(mdp);
  rl::RlRunRecord rec;
  if (setup.algorithm == "scrn") {
    rec = rl::scrn_rl_run(mdp, policy0, setup.scrn, rng);
  } else if (setup.algorithm == "isvr-scrn") {
    rec = rl::isvr_scrn_rl_run(mdp, policy0, setup.isvr, rng);
  } else {
    rec = rl::spg_run(mdp, policy0, setup.spg, rng);
  }
  for (const auto& row : rec.rows) {
    auto push = [&](const char* name, double v) { res.rows.push_back({row.t, row.state_actions, 0, name, v}); };
    push("episodes", static_cast<double>(row.episodes));
    push("mean_return", row.mean_return);
    push("mean_length", row.mean_length);
    push("success_rate", row.success_rate);
    push("step_norm", row.step_norm);
    if (row.rejected) push("rejected", 1.0);
    res.x.push_back(setup.axis == RlAxis::Episodes ? static_cast<double>(row.episodes)
                                                   : static_cast<double>(row.state_actions));
    res.y.push_back(row.mean_return);
  }
  Rng eval_rng(word64(2));
  const auto ev = rl::evaluate_policy(mdp, rl::SoftmaxPolicy(mdp.n_states(), mdp.n_actions(), rec.theta_final),
                                      setup.eval_episodes, eval_rng);
  const long last = rec.rows.empty() ? 0 : rec.rows.back().t;
  const std::uint64_t sa = rec.rows.empty() ? 0 : rec.rows.back().state_actions;
  res.rows.push_back({last, sa, 0, "final_success_rate", ev.success_rate});
  res.rows.push_back({last, sa, 0, "final_mean_return", ev.mean_return});
  res.rows.push_back({last, sa, 0, "final_mean_length", ev.mean_length});
  res.final_eval_success_rate = ev.success_rate;
  res.success = ev.success_rate > setup.success_threshold;
  res.status = std::string(to_string(rec.status));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult out;
  out.instances.resize(static_cast<std::size_t>(config.instances));
  for (long i = 0; i < config.instances; ++i) {
    auto& r = out.instances[static_cast<std::size_t>(i)];
    r.instance = i;
    r.seed = instance_seed(config.seed, i);
  }
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next++; i < config.instances; i = next++) {
      auto& r = out.instances[static_cast<std::size_t>(i)];
      try {
        if (config.kind == ExperimentKind::Synthetic) {
          run_synthetic(config, r);
        } else {
          run_rl(config, r);
        }
      } catch (const std::exception& e) {
        r.status = "Failed";
        r.error = e.what();
      }
    }
  };
  const int n_threads = static_cast<int>(std::min<long>(config.threads, config.instances));
  std::vector<std::thread> pool;
  for (int k = 1; k < n_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<std::pair<std::vector<double>, std::vector<double>>> curves;
  double x_max = 0;
  long successes = 0;
  long judged = 0;
  for (const auto& r : out.instances) {
    if (r.error || r.x.empty()) continue;
    curves.emplace_back(r.x, r.y);
    x_max = std::max(x_max, r.x.back());
    if (r.success) {
      ++judged;
      successes += *r.success ? 1 : 0;
    }
  }
  if (!curves.empty()) {
    const double hi = config.kind == ExperimentKind::Synthetic ? static_cast<double>(config.budget) : x_max;
    std::vector<double> grid;
    for (long k = 0; k < config.grid_points; ++k) {
      grid.push_back(hi * static_cast<double>(k) / static_cast<double>(config.grid_points - 1));
    }
    out.series = aggregate_ci(curves, grid, 0.90);
  }
  if (judged > 0) out.success_percentage = 100.0 * static_cast<double>(successes) / static_cast<double>(judged);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit(const ExperimentConfig& config, const ExperimentResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("runs.csv");
    f << "instance,step,oracle_calls_grad,oracle_calls_hess,metric_name,metric_value\n";
    for (const auto& r : result.instances) {
      for (const auto& m : r.rows) {
        f << r.instance << ',' << m.step << ',' << m.calls_grad << ',' << m.calls_hess << ',' << m.name << ','
          << format_double(m.value) << '\n';
      }
    }
    if (!f) throw Error(ErrorCode::IoError, "write failed for runs.csv");
  }
  {
    auto f = open("aggregate.csv");
    f << "x,median,lo,hi\n";
    const auto& s = result.series;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      f << format_double(s.x[i]) << ',' << format_double(s.median[i]) << ',' << format_double(s.lo[i]) << ','
        << format_double(s.hi[i]) << '\n';
    }
    if (!f) throw Error(ErrorCode::IoError, "write failed for aggregate.csv");
  }
  {
    json manifest;
    manifest["config"] = config.raw;
    manifest["version"] = kVersion;
    manifest["master_seed"] = config.seed;
    manifest["wall_clock_seconds"] = result.wall_seconds;
    json instances = json::array();
    json seeds = json::array();
    for (const auto& r : result.instances) {
      json item{{"instance", r.instance}, {"seed", r.seed}, {"status", r.status}};
      if (r.error) item["error"] = *r.error;
      if (r.success) item["success"] = *r.success;
      if (r.final_eval_success_rate) item["final_eval_success_rate"] = *r.final_eval_success_rate;
      instances.push_back(item);
      seeds.push_back(r.seed);
    }
    manifest["seeds"] = seeds;
    manifest["instances"] = instances;
    if (result.success_percentage) manifest["success_percentage"] = *result.success_percentage;
    auto f = open("manifest.json");
    f << manifest.dump(2) << '\n';
    if (!f) throw Error(ErrorCode::IoError, "write failed for manifest.json");
  }
}

}  // namespace scrn::harness
