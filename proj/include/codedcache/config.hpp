#pragma once

// Experiment configuration. In-code defaults follow the paper-scale setup;
// the desk profile is a small configuration whose runs finish in minutes,
// and the tiny profile exists for determinism smoke checks. Config files
// are JSON: an optional "profile" key picks the base, every other key
// overrides it. CLI flags override file values.

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

#include "codedcache/agent.hpp"
#include "codedcache/net_model.hpp"
#include "codedcache/predictor.hpp"
#include "codedcache/rng.hpp"
#include "codedcache/trace.hpp"

namespace codedcache {

struct FilesConfig {
  int catalogue_size = 50;       // F
  double file_size_bits = 8e9;   // B (1 GB)
  double node_capacity = 5.0;    // M
};

struct TraceSourceConfig {
  std::string source = "synthetic";  // synthetic | csv
  std::string csv_path;
  std::string per_user_csv_path;
  int slots = 600;
  int patterns = 4;
  int period = 24;
  double noise_level = 0.3;
  double amplitude_min = 4.0;
  double amplitude_max = 30.0;
  int top_files = 0;  // 0: keep the catalogue as-is
};

struct SweepConfig {
  std::vector<double> beta_list{0.0, 0.5, 1.5, 5.0, 100.0};
  std::vector<int> l_list{1, 2, 4, 0};  // 0 = ideal rateless coding
  std::vector<int> rho_list{2, 4, 6, 8, 10, 12};
  std::vector<int> cluster_list{1, 2, 4, 8, 16};
  std::vector<std::string> policies{"psop", "sddpg", "ddpg", "sddpg_r"};
  std::vector<std::string> methods{"clstm", "lstm", "last_value"};
};

struct ExperimentConfig {
  std::string profile = "paper";
  std::uint64_t master_seed = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out_dir = "out";
  HexTopologyParams topology;
  FilesConfig files;
  TraceSourceConfig trace;
  PredictorConfig predictor;
  AgentConfig agent;
  CostParams cost;
  SweepConfig sweep;
  std::map<std::string, std::uint64_t> seed_overrides;

  nlohmann::json to_json() const;
};

inline ExperimentConfig paper_profile() {
  ExperimentConfig cfg;  // constructed defaults are the paper values
  cfg.profile = "paper";
  return cfg;
}

// Small enough that label generation and training finish in minutes while
// keeping the cost structure interesting: delay savings per unit fraction
// sit well above beta = 1.5 so placements matter, and the demand mix shifts
// within each period so a myopic policy keeps paying replacement.
inline ExperimentConfig desk_profile() {
  ExperimentConfig cfg;
  cfg.profile = "desk";
  cfg.topology.n_nodes = 3;
  cfg.topology.inter_node_distance_m = 400.0;
  cfg.topology.n_users = 6;
  cfg.files.catalogue_size = 10;
  cfg.files.file_size_bits = 1e5;
  cfg.files.node_capacity = 2.0;
  cfg.trace.slots = 300;
  cfg.trace.patterns = 4;
  cfg.trace.period = 24;
  cfg.trace.noise_level = 0.25;
  cfg.trace.amplitude_min = 3.0;
  cfg.trace.amplitude_max = 15.0;
  cfg.agent.pretrain_slots = 150;
  cfg.agent.pretrain_steps = 3000;
  cfg.agent.pretrain_lr = 2e-4;
  cfg.agent.reward_scale = 0.01;
  cfg.sweep.beta_list = {0.0, 0.5, 1.5, 5.0, 100.0};
  return cfg;
}

inline ExperimentConfig tiny_profile() {
  ExperimentConfig cfg = desk_profile();
  cfg.profile = "tiny";
  cfg.topology.n_nodes = 2;
  cfg.topology.n_users = 4;
  cfg.files.catalogue_size = 6;
  cfg.files.node_capacity = 1.0;
  cfg.trace.slots = 80;
  cfg.trace.patterns = 2;
  cfg.trace.period = 12;
  cfg.predictor.history_window = 6;
  cfg.predictor.clusters = 2;
  cfg.predictor.hidden_units = {8, 8};
  cfg.agent.pretrain_slots = 40;
  cfg.agent.pretrain_steps = 300;
  cfg.agent.actor_hidden = {64, 32};
  cfg.agent.critic_branch_units = 32;
  cfg.agent.critic_hidden2 = 16;
  cfg.seeds = {1};
  return cfg;
}

inline ExperimentConfig profile_by_name(const std::string& name) {
  if (name == "paper") return paper_profile();
  if (name == "desk") return desk_profile();
  if (name == "tiny") return tiny_profile();
  throw std::invalid_argument("unknown profile: " + name);
}

// Component sub-seed for one run; explicit overrides win.
inline std::uint64_t seed_for(const ExperimentConfig& cfg, const std::string& name,
                              std::uint64_t run_seed) {
  auto it = cfg.seed_overrides.find(name);
  if (it != cfg.seed_overrides.end()) return it->second;
  return derive_seed(run_seed, name);
}

namespace detail {

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["profile"] = profile;
  j["master_seed"] = master_seed;
  j["seeds"] = seeds;
  j["out_dir"] = out_dir;
  j["topology"] = {{"n_nodes", topology.n_nodes},
                   {"inter_node_distance_m", topology.inter_node_distance_m},
                   {"n_users", topology.n_users},
                   {"coverage_radius_m", topology.coverage_radius_m},
                   {"inner_exclusion_radius_m", topology.inner_exclusion_radius_m},
                   {"tx_power_w", topology.link.tx_power_w},
                   {"bandwidth_hz", topology.link.bandwidth_hz},
                   {"noise_psd_dbm_hz", topology.link.noise_psd_dbm_hz},
                   {"antenna_gain_dbi", topology.link.antenna_gain_dbi},
                   {"mbs_delay_factor", topology.mbs_delay_factor}};
  j["files"] = {{"catalogue_size", files.catalogue_size},
                {"file_size_bits", files.file_size_bits},
                {"node_capacity", files.node_capacity}};
  j["trace"] = {{"source", trace.source},
                {"csv_path", trace.csv_path},
                {"per_user_csv_path", trace.per_user_csv_path},
                {"slots", trace.slots},
                {"patterns", trace.patterns},
                {"period", trace.period},
                {"noise_level", trace.noise_level},
                {"amplitude_min", trace.amplitude_min},
                {"amplitude_max", trace.amplitude_max},
                {"top_files", trace.top_files}};
  j["predictor"] = {{"history_window", predictor.history_window},
                    {"clusters", predictor.clusters},
                    {"buffer_size", predictor.buffer_size},
                    {"minibatch", predictor.minibatch},
                    {"learning_rate", predictor.learning_rate},
                    {"hidden_units", predictor.hidden_units}};
  j["agent"] = {{"discount", agent.discount},
                {"tau", agent.tau},
                {"buffer_size", agent.buffer_size},
                {"minibatch", agent.minibatch},
                {"actor_lr", agent.actor_lr},
                {"critic_lr", agent.critic_lr},
                {"pretrain_lr", agent.pretrain_lr},
                {"pretrain_steps", agent.pretrain_steps},
                {"pretrain_slots", agent.pretrain_slots},
                {"actor_hidden", agent.actor_hidden},
                {"critic_branch_units", agent.critic_branch_units},
                {"critic_hidden2", agent.critic_hidden2},
                {"ou_theta", agent.ou_theta},
                {"ou_sigma_start", agent.ou_sigma_start},
                {"ou_sigma_end", agent.ou_sigma_end},
                {"reward_scale", agent.reward_scale},
                {"quantize_segments", agent.quantize_segments}};
  j["cost"] = {{"beta", cost.beta}, {"gamma", cost.gamma}};
  j["sweep"] = {{"beta_list", sweep.beta_list},
                {"l_list", sweep.l_list},
                {"rho_list", sweep.rho_list},
                {"cluster_list", sweep.cluster_list},
                {"policies", sweep.policies},
                {"methods", sweep.methods}};
  j["seed_overrides"] = seed_overrides;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg =
      j.contains("profile") ? profile_by_name(j.at("profile").get<std::string>())
                            : paper_profile();
  detail::maybe(j, "master_seed", cfg.master_seed);
  detail::maybe(j, "seeds", cfg.seeds);
  detail::maybe(j, "out_dir", cfg.out_dir);
  if (j.contains("topology")) {
    const auto& t = j.at("topology");
    detail::maybe(t, "n_nodes", cfg.topology.n_nodes);
    detail::maybe(t, "inter_node_distance_m", cfg.topology.inter_node_distance_m);
    detail::maybe(t, "n_users", cfg.topology.n_users);
    detail::maybe(t, "coverage_radius_m", cfg.topology.coverage_radius_m);
    detail::maybe(t, "inner_exclusion_radius_m", cfg.topology.inner_exclusion_radius_m);
    detail::maybe(t, "tx_power_w", cfg.topology.link.tx_power_w);
    detail::maybe(t, "bandwidth_hz", cfg.topology.link.bandwidth_hz);
    detail::maybe(t, "noise_psd_dbm_hz", cfg.topology.link.noise_psd_dbm_hz);
    detail::maybe(t, "antenna_gain_dbi", cfg.topology.link.antenna_gain_dbi);
    detail::maybe(t, "mbs_delay_factor", cfg.topology.mbs_delay_factor);
  }
  if (j.contains("files")) {
    const auto& f = j.at("files");
    detail::maybe(f, "catalogue_size", cfg.files.catalogue_size);
    detail::maybe(f, "file_size_bits", cfg.files.file_size_bits);
    detail::maybe(f, "node_capacity", cfg.files.node_capacity);
  }
  if (j.contains("trace")) {
    const auto& t = j.at("trace");
    detail::maybe(t, "source", cfg.trace.source);
    detail::maybe(t, "csv_path", cfg.trace.csv_path);
    detail::maybe(t, "per_user_csv_path", cfg.trace.per_user_csv_path);
    detail::maybe(t, "slots", cfg.trace.slots);
    detail::maybe(t, "patterns", cfg.trace.patterns);
    detail::maybe(t, "period", cfg.trace.period);
    detail::maybe(t, "noise_level", cfg.trace.noise_level);
    detail::maybe(t, "amplitude_min", cfg.trace.amplitude_min);
    detail::maybe(t, "amplitude_max", cfg.trace.amplitude_max);
    detail::maybe(t, "top_files", cfg.trace.top_files);
  }
  if (j.contains("predictor")) {
    const auto& p = j.at("predictor");
    detail::maybe(p, "history_window", cfg.predictor.history_window);
    detail::maybe(p, "clusters", cfg.predictor.clusters);
    detail::maybe(p, "buffer_size", cfg.predictor.buffer_size);
    detail::maybe(p, "minibatch", cfg.predictor.minibatch);
    detail::maybe(p, "learning_rate", cfg.predictor.learning_rate);
    detail::maybe(p, "hidden_units", cfg.predictor.hidden_units);
  }
  if (j.contains("agent")) {
    const auto& a = j.at("agent");
    detail::maybe(a, "discount", cfg.agent.discount);
    detail::maybe(a, "tau", cfg.agent.tau);
    detail::maybe(a, "buffer_size", cfg.agent.buffer_size);
    detail::maybe(a, "minibatch", cfg.agent.minibatch);
    detail::maybe(a, "actor_lr", cfg.agent.actor_lr);
    detail::maybe(a, "critic_lr", cfg.agent.critic_lr);
    detail::maybe(a, "pretrain_lr", cfg.agent.pretrain_lr);
    detail::maybe(a, "pretrain_steps", cfg.agent.pretrain_steps);
    detail::maybe(a, "pretrain_slots", cfg.agent.pretrain_slots);
    detail::maybe(a, "actor_hidden", cfg.agent.actor_hidden);
    detail::maybe(a, "critic_branch_units", cfg.agent.critic_branch_units);
    detail::maybe(a, "critic_hidden2", cfg.agent.critic_hidden2);
    detail::maybe(a, "ou_theta", cfg.agent.ou_theta);
    detail::maybe(a, "ou_sigma_start", cfg.agent.ou_sigma_start);
    detail::maybe(a, "ou_sigma_end", cfg.agent.ou_sigma_end);
    detail::maybe(a, "reward_scale", cfg.agent.reward_scale);
    detail::maybe(a, "quantize_segments", cfg.agent.quantize_segments);
  }
  if (j.contains("cost")) {
    detail::maybe(j.at("cost"), "beta", cfg.cost.beta);
    detail::maybe(j.at("cost"), "gamma", cfg.cost.gamma);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail::maybe(s, "beta_list", cfg.sweep.beta_list);
    detail::maybe(s, "l_list", cfg.sweep.l_list);
    detail::maybe(s, "rho_list", cfg.sweep.rho_list);
    detail::maybe(s, "cluster_list", cfg.sweep.cluster_list);
    detail::maybe(s, "policies", cfg.sweep.policies);
    detail::maybe(s, "methods", cfg.sweep.methods);
  }
  detail::maybe(j, "seed_overrides", cfg.seed_overrides);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  return config_from_json(nlohmann::json::parse(in));
}

}  // namespace codedcache
