#pragma once

// Experiment orchestration: materials (topology + trace) from a config,
// forecaster runs, policy runs with cost logs, sweep drivers and CSV
// emission. Every stochastic component draws from a named sub-seed, so a
// config plus its seed list pins every output byte.

#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "codedcache/agent.hpp"
#include "codedcache/config.hpp"
#include "codedcache/csv.hpp"
#include "codedcache/predictor.hpp"

namespace codedcache {

struct RunMaterials {
  std::shared_ptr<Topology> topology;
  DemandTrace trace;
};

inline RunMaterials build_materials(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  RunMaterials m;
  m.topology = std::make_shared<Topology>(
      build_hex_topology(cfg.topology, seed_for(cfg, "topology", run_seed)));
  if (cfg.trace.source == "synthetic") {
    SynthTraceParams sp;
    sp.files = cfg.files.catalogue_size;
    sp.slots = cfg.trace.slots;
    sp.users = cfg.topology.n_users;
    sp.patterns = cfg.trace.patterns;
    sp.period = cfg.trace.period;
    sp.noise_level = cfg.trace.noise_level;
    sp.amplitude_min = cfg.trace.amplitude_min;
    sp.amplitude_max = cfg.trace.amplitude_max;
    m.trace = synth_trace(sp, seed_for(cfg, "trace", run_seed));
  } else if (cfg.trace.source == "csv") {
    if (!cfg.trace.per_user_csv_path.empty()) {
      m.trace = load_trace_per_user(cfg.trace.per_user_csv_path);
    } else {
      m.trace = load_trace(cfg.trace.csv_path);
    }
    if (cfg.trace.top_files > 0) m.trace = top_f_filter(m.trace, cfg.trace.top_files);
    if (!m.trace.has_per_user())
      m.trace = allocate_to_users(m.trace, cfg.topology.n_users,
                                  seed_for(cfg, "allocation", run_seed));
  } else {
    throw std::invalid_argument("unknown trace source: " + cfg.trace.source);
  }
  return m;
}

inline CacheMatrix initial_cache(const ExperimentConfig& cfg) {
  return make_uniform_cache(cfg.topology.n_nodes, cfg.files.catalogue_size,
                            cfg.files.node_capacity, cfg.files.file_size_bits);
}

// ---------------------------------------------------------------------------
// prediction experiments

struct PredictionJob {
  std::string method = "clstm";  // clstm | lstm | last_value
  int history_window = 12;
  int clusters = 4;
  std::uint64_t seed = 1;
};

struct PredictionOutcome {
  PredictionJob job;
  double avg_nmse = 0.0;
  int evaluated_slots = 0;
  int skipped_slots = 0;
};

inline PredictionRun run_forecaster(const ExperimentConfig& cfg, const DemandTrace& trace,
                                    const PredictionJob& job, std::uint64_t forecaster_seed) {
  PredictorConfig pc = cfg.predictor;
  pc.history_window = job.history_window;
  pc.clusters = job.clusters;
  if (job.method == "clstm") {
    CLstmForecaster f(pc, trace.num_files, forecaster_seed);
    return run_online(f, trace);
  }
  if (job.method == "lstm") {
    PerFileLstmForecaster f(pc, trace.num_files, forecaster_seed);
    return run_online(f, trace);
  }
  if (job.method == "last_value") {
    LastValueForecaster f(pc, trace.num_files, forecaster_seed);
    return run_online(f, trace);
  }
  throw std::invalid_argument("unknown prediction method: " + job.method);
}

inline std::string prediction_tag(const PredictionJob& job) {
  return job.method + "_rho" + std::to_string(job.history_window) + "_C" +
         std::to_string(job.clusters) + "_seed" + std::to_string(job.seed);
}

inline void write_prediction_log(const std::string& path, const PredictionRun& run,
                                 const DemandTrace& trace) {
  CsvWriter w(path, "slot,file_id,predicted,actual,cluster");
  for (int t = run.first_slot; t < trace.num_slots; ++t)
    for (int f = 0; f < trace.num_files; ++f)
      w.row({CsvWriter::cell(t), CsvWriter::cell(f), CsvWriter::cell(run.predictions(t, f)),
             CsvWriter::cell(trace.aggregate(t, f)), CsvWriter::cell(run.cluster_of(t, f))});
}

inline void write_nmse_log(const std::string& path, const PredictionRun& run, int num_slots) {
  CsvWriter w(path, "slot,nmse,running_avg_nmse");
  for (int t = run.first_slot; t < num_slots; ++t)
    w.row({CsvWriter::cell(t), CsvWriter::cell(run.slot_nmse[static_cast<std::size_t>(t)]),
           CsvWriter::cell(run.running_avg_nmse[static_cast<std::size_t>(t)])});
}

// Runs one method over one seed's trace and emits the two log files.
inline PredictionOutcome run_prediction_job(const ExperimentConfig& cfg,
                                            const DemandTrace& trace, const PredictionJob& job,
                                            const std::string& out_dir) {
  PredictionRun run =
      run_forecaster(cfg, trace, job, seed_for(cfg, "predictor", job.seed));
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_prediction_log(out_dir + "/prediction_" + prediction_tag(job) + ".csv", run, trace);
    write_nmse_log(out_dir + "/nmse_" + prediction_tag(job) + ".csv", run, trace.num_slots);
  }
  return {job, run.average_nmse, run.evaluated_slots, run.skipped_slots};
}

inline void write_prediction_summary(const std::string& path,
                                     const std::vector<PredictionOutcome>& rows) {
  CsvWriter w(path, "method,rho,clusters,seed,avg_nmse,evaluated_slots,skipped_slots");
  for (const auto& r : rows)
    w.row({r.job.method, CsvWriter::cell(r.job.history_window),
           CsvWriter::cell(r.job.clusters), CsvWriter::cell(static_cast<long>(r.job.seed)),
           CsvWriter::cell(r.avg_nmse), CsvWriter::cell(r.evaluated_slots),
           CsvWriter::cell(r.skipped_slots)});
}

// Mean and standard deviation of the average NMSE across seeds, one row per
// (method, rho, clusters).
inline void write_prediction_aggregate(const std::string& path,
                                       const std::vector<PredictionOutcome>& rows) {
  std::map<std::tuple<std::string, int, int>, std::vector<double>> groups;
  for (const auto& r : rows)
    groups[{r.job.method, r.job.history_window, r.job.clusters}].push_back(r.avg_nmse);
  CsvWriter w(path, "method,rho,clusters,mean_avg_nmse,std_avg_nmse,n_seeds");
  for (const auto& [key, vals] : groups) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    double stddev = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
    w.row({std::get<0>(key), CsvWriter::cell(std::get<1>(key)),
           CsvWriter::cell(std::get<2>(key)), CsvWriter::cell(mean), CsvWriter::cell(stddev),
           CsvWriter::cell(static_cast<long>(vals.size()))});
  }
}

// Fixed-parameter prediction runs (the configured rho and C) per method and
// seed; the sweep variant walks the rho and cluster lists.
inline std::vector<PredictionOutcome> run_prediction_experiment(const ExperimentConfig& cfg,
                                                                bool sweep_axes = false) {
  std::vector<PredictionJob> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    for (const std::string& method : cfg.sweep.methods) {
      if (!sweep_axes) {
        jobs.push_back({method, cfg.predictor.history_window, cfg.predictor.clusters, seed});
        continue;
      }
      for (int rho : cfg.sweep.rho_list) {
        if (method == "clstm") {
          for (int c : cfg.sweep.cluster_list) jobs.push_back({method, rho, c, seed});
        } else {
          jobs.push_back({method, rho, 1, seed});
        }
      }
    }
  }
  std::vector<PredictionOutcome> out;
  std::map<std::uint64_t, DemandTrace> traces;
  for (std::uint64_t seed : cfg.seeds) traces[seed] = build_materials(cfg, seed).trace;
  for (const auto& job : jobs)
    out.push_back(run_prediction_job(cfg, traces.at(job.seed), job, cfg.out_dir));
  std::filesystem::create_directories(cfg.out_dir);
  write_prediction_summary(cfg.out_dir + "/prediction_summary.csv", out);
  write_prediction_aggregate(cfg.out_dir + "/prediction_aggregate.csv", out);
  return out;
}

// ---------------------------------------------------------------------------
// caching experiments

struct CachingJob {
  Policy policy = Policy::Sddpg;
  double beta = 1.5;
  int quantize_segments = 0;
  std::uint64_t seed = 1;
};

struct CachingOutcome {
  CachingJob job;
  double train_avg_cost = 0.0;
  double eval_avg_cost = 0.0;
  double eval_avg_transmission = 0.0;
  double eval_avg_replacement = 0.0;
  long violations = 0;
};

inline Policy policy_from_string(const std::string& s) {
  if (s == "psop") return Policy::PsoP;
  if (s == "sddpg") return Policy::Sddpg;
  if (s == "sddpg_r") return Policy::SddpgR;
  if (s == "ddpg") return Policy::Ddpg;
  throw std::invalid_argument("unknown policy: " + s);
}

inline std::string caching_tag(const CachingJob& job) {
  return std::string(to_string(job.policy)) + "_beta" + format_double(job.beta) + "_l" +
         std::to_string(job.quantize_segments) + "_seed" + std::to_string(job.seed);
}

inline void write_cost_log(const std::string& path, const std::vector<SlotCost>& log) {
  CsvWriter w(path, "slot,c_d,c_r,c_total,running_avg");
  for (const auto& r : log)
    w.row({CsvWriter::cell(r.slot), CsvWriter::cell(r.transmission),
           CsvWriter::cell(r.replacement), CsvWriter::cell(r.total),
           CsvWriter::cell(r.running_avg)});
}

inline void save_agent_checkpoints(SddpgAgent& agent, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta = {{"demand_norm", agent.demand_norm()}};
  save_checkpoint(dir + "/actor", agent.actor().params(), meta);
  save_checkpoint(dir + "/critic", agent.critic().params(), meta);
  save_checkpoint(dir + "/target_actor", agent.actor_target().params(), meta);
  save_checkpoint(dir + "/target_critic", agent.critic_target().params(), meta);
}

inline PolicySnapshot load_policy_snapshot(const ExperimentConfig& cfg, const std::string& dir) {
  Rng rng(0);  // weights are overwritten by the checkpoint
  int files = cfg.files.catalogue_size;
  int nodes = cfg.topology.n_nodes;
  ActorNet actor(files + nodes * files, cfg.agent.actor_hidden, nodes, files,
                 cfg.files.node_capacity, rng);
  auto params = actor.params();
  load_checkpoint(dir + "/actor", params);
  std::ifstream mf(dir + "/actor.json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  double norm = manifest.contains("meta") ? manifest["meta"].value("demand_norm", 1.0) : 1.0;
  return {cfg.agent, files,  nodes, cfg.files.node_capacity, cfg.files.file_size_bits,
          std::move(actor), norm};
}

// One policy at one (beta, l, seed). `predictions` is the shared forecast
// series for this seed; the oracle variant substitutes the actual counts.
inline CachingOutcome run_caching_job(const ExperimentConfig& cfg, const RunMaterials& m,
                                      const Matrix& predictions, const CachingJob& job,
                                      const std::string& out_dir, bool save_checkpoints = false) {
  RunInputs in;
  in.topology = m.topology.get();
  in.trace = &m.trace;
  in.predictions = job.policy == Policy::SddpgR ? m.trace.aggregate : predictions;
  in.initial_cache = initial_cache(cfg);
  in.costs = cfg.cost;
  in.costs.beta = job.beta;
  in.phase1_slots = cfg.agent.pretrain_slots;

  CachingOutcome out;
  out.job = job;
  std::vector<SlotCost> train_log, eval_log;
  if (job.policy == Policy::PsoP) {
    PolicyRunResult r = run_per_slot_policy(in);
    EvalResult e = evaluate_per_slot_policy(in);
    out.train_avg_cost = r.train_avg_total;
    out.eval_avg_cost = e.avg_total;
    out.eval_avg_transmission = e.avg_transmission;
    out.eval_avg_replacement = e.avg_replacement;
    out.violations = r.constraint_violations + e.constraint_violations;
    train_log = std::move(r.log);
    eval_log = std::move(e.log);
  } else {
    AgentConfig ac = cfg.agent;
    ac.quantize_segments = job.quantize_segments;
    RunInputs lin = in;
    PolicyRunResult r = run_learned_policy(lin, ac, job.policy, seed_for(cfg, "agent", job.seed),
                                           seed_for(cfg, "ou", job.seed));
    EvalResult e = evaluate_learned_policy(lin, r.agent->snapshot());
    out.train_avg_cost = r.train_avg_total;
    out.eval_avg_cost = e.avg_total;
    out.eval_avg_transmission = e.avg_transmission;
    out.eval_avg_replacement = e.avg_replacement;
    out.violations = r.constraint_violations + e.constraint_violations;
    train_log = std::move(r.log);
    eval_log = std::move(e.log);
    if (save_checkpoints && !out_dir.empty())
      save_agent_checkpoints(*r.agent, out_dir + "/checkpoints/" + caching_tag(job));
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_cost_log(out_dir + "/costs_" + caching_tag(job) + ".csv", train_log);
    write_cost_log(out_dir + "/eval_costs_" + caching_tag(job) + ".csv", eval_log);
  }
  return out;
}

inline void write_caching_summary(const std::string& path,
                                  const std::vector<CachingOutcome>& rows) {
  CsvWriter w(path,
              "policy,beta,l,seed,train_avg_cost,eval_avg_cost,eval_avg_c_d,eval_avg_c_r,"
              "violations");
  for (const auto& r : rows)
    w.row({to_string(r.job.policy), CsvWriter::cell(r.job.beta),
           CsvWriter::cell(r.job.quantize_segments),
           CsvWriter::cell(static_cast<long>(r.job.seed)), CsvWriter::cell(r.train_avg_cost),
           CsvWriter::cell(r.eval_avg_cost), CsvWriter::cell(r.eval_avg_transmission),
           CsvWriter::cell(r.eval_avg_replacement), CsvWriter::cell(r.violations)});
}

inline void write_caching_aggregate(const std::string& path,
                                    const std::vector<CachingOutcome>& rows) {
  std::map<std::tuple<std::string, double, int>, std::vector<const CachingOutcome*>> groups;
  for (const auto& r : rows)
    groups[{to_string(r.job.policy), r.job.beta, r.job.quantize_segments}].push_back(&r);
  CsvWriter w(path,
              "policy,beta,l,mean_train_avg_cost,mean_eval_avg_cost,std_eval_avg_cost,n_seeds");
  for (const auto& [key, vals] : groups) {
    double mt = 0.0, me = 0.0;
    for (const auto* r : vals) {
      mt += r->train_avg_cost;
      me += r->eval_avg_cost;
    }
    mt /= static_cast<double>(vals.size());
    me /= static_cast<double>(vals.size());
    double var = 0.0;
    for (const auto* r : vals) var += (r->eval_avg_cost - me) * (r->eval_avg_cost - me);
    double stddev = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
    w.row({std::get<0>(key), CsvWriter::cell(std::get<1>(key)),
           CsvWriter::cell(std::get<2>(key)), CsvWriter::cell(mt), CsvWriter::cell(me),
           CsvWriter::cell(stddev), CsvWriter::cell(static_cast<long>(vals.size()))});
  }
}

// The shared per-seed forecast series used by every predicted-demand policy.
inline Matrix forecast_series_for_seed(const ExperimentConfig& cfg, const DemandTrace& trace,
                                       std::uint64_t seed) {
  PredictionJob job{"clstm", cfg.predictor.history_window, cfg.predictor.clusters, seed};
  PredictionRun run = run_forecaster(cfg, trace, job, seed_for(cfg, "predictor", seed));
  return predictions_with_fallback(run, trace);
}

struct PretrainOutcome {
  std::size_t samples = 0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::string checkpoint_dir;
};

// Phase 1 only: generate per-slot labels, pre-train the actor, warm up the
// critic with the actor frozen, and save checkpoints.
inline PretrainOutcome run_pretrain_only(const ExperimentConfig& cfg, std::uint64_t seed,
                                         const std::string& out_dir) {
  RunMaterials m = build_materials(cfg, seed);
  Matrix series = forecast_series_for_seed(cfg, m.trace, seed);
  RunInputs in;
  in.topology = m.topology.get();
  in.trace = &m.trace;
  in.predictions = series;
  in.initial_cache = initial_cache(cfg);
  in.costs = cfg.cost;
  in.phase1_slots = cfg.agent.pretrain_slots;

  SddpgAgent agent(cfg.agent, m.trace.num_files, cfg.topology.n_nodes,
                   cfg.files.node_capacity, seed_for(cfg, "agent", seed),
                   seed_for(cfg, "ou", seed));
  agent.set_file_size_bits(cfg.files.file_size_bits);
  auto samples = build_pretrain_samples(agent, in);
  PretrainOutcome out;
  out.samples = samples.size();
  out.loss_before = agent.pretrain_loss(samples);
  agent.pretrain_actor(samples);
  out.loss_after = agent.pretrain_loss(samples);

  CachingEnv env(*m.topology, m.trace, in.costs, in.initial_cache);
  int phase2_start = std::min(in.phase1_slots + 1, m.trace.num_slots - 1);
  for (int t = 1; t < phase2_start; ++t)
    detail::interact(agent, env, in, t, /*update_actor=*/false,
                     detail::noise_sigma(cfg.agent, t, m.trace.num_slots));
  out.checkpoint_dir = out_dir + "/checkpoints/pretrain_seed" + std::to_string(seed);
  save_agent_checkpoints(agent, out.checkpoint_dir);
  return out;
}

// Policies at the configured beta and l, per seed.
inline std::vector<CachingOutcome> run_caching_experiment(const ExperimentConfig& cfg,
                                                          bool save_checkpoints = false) {
  std::vector<CachingOutcome> out;
  for (std::uint64_t seed : cfg.seeds) {
    RunMaterials m = build_materials(cfg, seed);
    Matrix series = forecast_series_for_seed(cfg, m.trace, seed);
    for (const std::string& name : cfg.sweep.policies) {
      CachingJob job{policy_from_string(name), cfg.cost.beta, cfg.agent.quantize_segments, seed};
      out.push_back(run_caching_job(cfg, m, series, job, cfg.out_dir, save_checkpoints));
    }
  }
  std::filesystem::create_directories(cfg.out_dir);
  write_caching_summary(cfg.out_dir + "/caching_summary.csv", out);
  write_caching_aggregate(cfg.out_dir + "/caching_aggregate.csv", out);
  return out;
}

// Figure-style sweeps: every policy across the beta list at the ideal
// coding, plus the learned policy across the segment list at the configured
// beta.
inline std::vector<CachingOutcome> run_caching_sweep(const ExperimentConfig& cfg) {
  std::vector<CachingOutcome> out;
  for (std::uint64_t seed : cfg.seeds) {
    RunMaterials m = build_materials(cfg, seed);
    Matrix series = forecast_series_for_seed(cfg, m.trace, seed);
    for (double beta : cfg.sweep.beta_list)
      for (const std::string& name : cfg.sweep.policies)
        out.push_back(run_caching_job(cfg, m, series,
                                      {policy_from_string(name), beta, 0, seed}, cfg.out_dir));
    for (int l : cfg.sweep.l_list) {
      if (l == 0) continue;  // the beta sweep already covers ideal coding
      out.push_back(
          run_caching_job(cfg, m, series, {Policy::Sddpg, cfg.cost.beta, l, seed}, cfg.out_dir));
    }
  }
  std::filesystem::create_directories(cfg.out_dir);
  write_caching_summary(cfg.out_dir + "/caching_summary.csv", out);
  write_caching_aggregate(cfg.out_dir + "/caching_aggregate.csv", out);
  return out;
}

}  // namespace codedcache
