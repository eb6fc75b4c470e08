// cachebench: build topologies and traces, run forecasters and placement
// policies, and drive figure-style sweeps, all from a JSON config. Outputs
// are CSV files; identical configs and seeds reproduce identical bytes.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "codedcache/harness.hpp"

namespace {

using namespace codedcache;

struct CommonOptions {
  std::string config_path;
  std::string profile;
  std::string out_dir;
  long seed = -1;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON config file");
  cmd->add_option("--profile", opt.profile, "base profile: paper, desk or tiny");
  cmd->add_option("--out", opt.out_dir, "output directory (overrides the config)");
  cmd->add_option("--seed", opt.seed, "run a single seed (overrides the config's list)");
}

ExperimentConfig resolve_config(const CommonOptions& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty())
    cfg = load_config(opt.config_path);
  else if (!opt.profile.empty())
    cfg = profile_by_name(opt.profile);
  else
    cfg = paper_profile();
  if (!opt.config_path.empty() && !opt.profile.empty()) cfg = profile_by_name(opt.profile);
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (opt.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(opt.seed)};
  return cfg;
}

int cmd_topo(const CommonOptions& opt, const std::string& out_file) {
  ExperimentConfig cfg = resolve_config(opt);
  std::uint64_t seed = seed_for(cfg, "topology", cfg.seeds.front());
  Topology topo = build_hex_topology(cfg.topology, seed);
  std::filesystem::create_directories(cfg.out_dir);
  std::string path = out_file.empty() ? cfg.out_dir + "/topology.json" : out_file;
  std::ofstream out(path, std::ios::binary);
  out << topo.to_json().dump(2) << "\n";
  std::cout << "wrote " << path << " (" << topo.num_nodes() << " nodes, " << topo.num_users()
            << " users)\n";
  return 0;
}

int cmd_trace(const CommonOptions& opt) {
  ExperimentConfig cfg = resolve_config(opt);
  RunMaterials m = build_materials(cfg, cfg.seeds.front());
  std::filesystem::create_directories(cfg.out_dir);
  save_trace(m.trace, cfg.out_dir + "/trace_aggregate.csv");
  save_trace_per_user(m.trace, cfg.out_dir + "/trace_per_user.csv");
  std::cout << "wrote " << cfg.out_dir << "/trace_aggregate.csv and trace_per_user.csv (T="
            << m.trace.num_slots << ", F=" << m.trace.num_files << ", K=" << m.trace.num_users
            << ")\n";
  return 0;
}

int cmd_predict(const CommonOptions& opt, const std::string& method) {
  ExperimentConfig cfg = resolve_config(opt);
  if (!method.empty()) cfg.sweep.methods = {method};
  auto rows = run_prediction_experiment(cfg);
  for (const auto& r : rows)
    std::cout << r.job.method << " rho=" << r.job.history_window << " C=" << r.job.clusters
              << " seed=" << r.job.seed << " avg_nmse=" << r.avg_nmse << "\n";
  std::cout << "wrote " << cfg.out_dir << "/prediction_summary.csv\n";
  return 0;
}

int cmd_pretrain(const CommonOptions& opt) {
  ExperimentConfig cfg = resolve_config(opt);
  for (std::uint64_t seed : cfg.seeds) {
    PretrainOutcome out = run_pretrain_only(cfg, seed, cfg.out_dir);
    std::cout << "seed " << seed << ": " << out.samples << " labels, placement mse "
              << out.loss_before << " -> " << out.loss_after << ", checkpoints in "
              << out.checkpoint_dir << "\n";
  }
  return 0;
}

int cmd_train(const CommonOptions& opt, const std::string& policy, double beta, int segments) {
  ExperimentConfig cfg = resolve_config(opt);
  if (beta >= 0.0) cfg.cost.beta = beta;
  if (segments >= 0) cfg.agent.quantize_segments = segments;
  cfg.sweep.policies = {policy};
  auto rows = run_caching_experiment(cfg, /*save_checkpoints=*/true);
  for (const auto& r : rows)
    std::cout << to_string(r.job.policy) << " beta=" << r.job.beta
              << " l=" << r.job.quantize_segments << " seed=" << r.job.seed
              << " train_avg=" << r.train_avg_cost << " eval_avg=" << r.eval_avg_cost
              << " violations=" << r.violations << "\n";
  std::cout << "wrote " << cfg.out_dir << "/caching_summary.csv\n";
  return 0;
}

int cmd_evaluate(const CommonOptions& opt, const std::string& policy,
                 const std::string& checkpoint_dir, double beta, int segments) {
  ExperimentConfig cfg = resolve_config(opt);
  if (beta >= 0.0) cfg.cost.beta = beta;
  if (segments >= 0) cfg.agent.quantize_segments = segments;
  std::uint64_t seed = cfg.seeds.front();
  RunMaterials m = build_materials(cfg, seed);
  RunInputs in;
  in.topology = m.topology.get();
  in.trace = &m.trace;
  in.predictions = policy == "sddpg_r" ? m.trace.aggregate
                                       : forecast_series_for_seed(cfg, m.trace, seed);
  in.initial_cache = initial_cache(cfg);
  in.costs = cfg.cost;
  in.phase1_slots = cfg.agent.pretrain_slots;

  EvalResult e;
  if (policy == "psop") {
    e = evaluate_per_slot_policy(in);
  } else {
    if (checkpoint_dir.empty())
      throw std::invalid_argument("--checkpoints is required for learned policies");
    e = evaluate_learned_policy(in, load_policy_snapshot(cfg, checkpoint_dir));
  }
  std::filesystem::create_directories(cfg.out_dir);
  std::string path = cfg.out_dir + "/eval_" + policy + "_seed" + std::to_string(seed) + ".csv";
  write_cost_log(path, e.log);
  std::cout << policy << " eval_avg=" << e.avg_total << " c_d=" << e.avg_transmission
            << " c_r=" << e.avg_replacement << " violations=" << e.constraint_violations
            << "\nwrote " << path << "\n";
  return 0;
}

int cmd_sweep(const CommonOptions& opt, const std::string& kind) {
  ExperimentConfig cfg = resolve_config(opt);
  if (kind == "prediction") {
    run_prediction_experiment(cfg, /*sweep_axes=*/true);
    std::cout << "wrote " << cfg.out_dir << "/prediction_summary.csv and prediction_aggregate.csv\n";
    return 0;
  }
  if (kind == "caching") {
    run_caching_sweep(cfg);
    std::cout << "wrote " << cfg.out_dir << "/caching_summary.csv and caching_aggregate.csv\n";
    return 0;
  }
  throw std::invalid_argument("unknown sweep kind: " + kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coded-caching workbench"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string out_file, method, policy = "sddpg", checkpoint_dir, kind = "caching";
  double beta = -1.0;
  int segments = -1;

  auto* topo = app.add_subcommand("topo", "build a topology and save it as JSON");
  add_common(topo, opt);
  topo->add_option("--out-file", out_file, "topology output path");

  auto* trace = app.add_subcommand("trace", "generate or convert a request trace");
  add_common(trace, opt);

  auto* predict = app.add_subcommand("predict", "run the request forecasters");
  add_common(predict, opt);
  predict->add_option("--method", method, "clstm, lstm or last_value (default: all)");

  auto* pretrain = app.add_subcommand("pretrain", "run phase-1 pre-training and save checkpoints");
  add_common(pretrain, opt);

  auto* train = app.add_subcommand("train", "train one placement policy end to end");
  add_common(train, opt);
  train->add_option("--policy", policy, "psop, sddpg, ddpg or sddpg_r");
  train->add_option("--beta", beta, "replacement cost weight");
  train->add_option("--l", segments, "coding segments (0 = ideal)");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a policy without learning or noise");
  add_common(evaluate, opt);
  evaluate->add_option("--policy", policy, "psop, sddpg, ddpg or sddpg_r");
  evaluate->add_option("--checkpoints", checkpoint_dir, "checkpoint directory of a trained agent");
  evaluate->add_option("--beta", beta, "replacement cost weight");
  evaluate->add_option("--l", segments, "coding segments (0 = ideal)");

  auto* sweep = app.add_subcommand("sweep", "run the configured figure-style sweeps");
  add_common(sweep, opt);
  sweep->add_option("--kind", kind, "prediction or caching");

  CLI11_PARSE(app, argc, argv);

  try {
    if (topo->parsed()) return cmd_topo(opt, out_file);
    if (trace->parsed()) return cmd_trace(opt);
    if (predict->parsed()) return cmd_predict(opt, method);
    if (pretrain->parsed()) return cmd_pretrain(opt);
    if (train->parsed()) return cmd_train(opt, policy, beta, segments);
    if (evaluate->parsed()) return cmd_evaluate(opt, policy, checkpoint_dir, beta, segments);
    if (sweep->parsed()) return cmd_sweep(opt, kind);
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
