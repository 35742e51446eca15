#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "stempick/agent.hpp"
#include "stempick/config.hpp"
#include "stempick/csv.hpp"
#include "stempick/env.hpp"
#include "stempick/plot.hpp"

namespace stempick {

namespace fs = std::filesystem;

inline const std::vector<std::string> kMetricsColumns = {
    "step",  "episode",       "episode_reward", "success",
    "dormant_ratio", "sigma", "critic_loss",    "actor_loss"};
inline const std::vector<std::string> kEvalColumns = {
    "green_count", "trial", "seed", "success", "steps_used", "final_reward"};

struct EpisodeOutcome {
  bool success = false;
  int steps_used = 0;
  double final_reward = 0.0;   // reward of the last step
  double episode_reward = 0.0;
};

// One noiseless episode with the green count pinned.
inline EpisodeOutcome run_eval_episode(DrmAgent& agent, EnvConfig env_cfg,
                                       int green_count, std::uint64_t seed) {
  env_cfg.randomization.green_min = green_count;
  env_cfg.randomization.green_max = green_count;
  PickEnv env(env_cfg, seed);
  FrameStacker stacker;
  stacker.reset(env.reset());
  EpisodeOutcome out;
  for (int t = 0; t < env_cfg.max_steps; ++t) {
    const VecX a = agent.act(stacker.stacked(), /*train_mode=*/false);
    StepResult sr;
    try {
      sr = env.step(a);
    } catch (const SimulationDiverged&) {
      break;  // counted as failure
    }
    stacker.push(sr.obs);
    out.episode_reward += sr.reward;
    out.final_reward = sr.reward;
    out.steps_used = t + 1;
    out.success = sr.success;
    if (sr.terminated || sr.truncated) break;
  }
  return out;
}

struct EvalPoint {
  double success_rate = 0.0;
  double mean_reward = 0.0;
};

inline EvalPoint run_eval_batch(DrmAgent& agent, const EnvConfig& env_cfg,
                                int green_count, int trials, std::uint64_t seed_base) {
  EvalPoint p;
  for (int t = 0; t < trials; ++t) {
    const EpisodeOutcome o =
        run_eval_episode(agent, env_cfg, green_count, mix_seed(seed_base, t));
    p.success_rate += o.success ? 1.0 : 0.0;
    p.mean_reward += o.episode_reward;
  }
  p.success_rate /= trials;
  p.mean_reward /= trials;
  return p;
}

// ---------------------------------------------------------------------------

struct TrainSeedResult {
  std::uint64_t seed = 0;
  std::string metrics_path;
  std::string eval_curve_path;
  std::string final_checkpoint;
  double last_eval_success = 0.0;
  double last_eval_reward = 0.0;
  long steps_run = 0;
};

inline TrainSeedResult train_one_seed(const RunConfig& cfg, std::uint64_t seed,
                                      bool verbose = true) {
  fs::create_directories(cfg.out_dir);
  const std::string tag = algo_name(cfg.algo) + "_seed" + std::to_string(seed);
  TrainSeedResult result;
  result.seed = seed;
  result.metrics_path = cfg.out_dir + "/metrics_" + tag + ".csv";
  result.eval_curve_path = cfg.out_dir + "/evalcurve_" + tag + ".csv";
  result.final_checkpoint = cfg.out_dir + "/ckpt_" + tag + "_final.ck";

  AgentConfig agent_cfg = cfg.agent;
  agent_cfg.algo = cfg.algo;
  DrmAgent agent(agent_cfg, mix_seed(seed, 0xA6E1));
  PickEnv env(cfg.env, mix_seed(seed, 0xE317));
  ReplayBuffer replay(agent_cfg.replay_capacity, agent_cfg.n_step, agent_cfg.discount);
  Rng warmup_rng(mix_seed(seed, 0x3A29));
  FrameStacker stacker;

  CsvWriter metrics(result.metrics_path, kMetricsColumns);
  CsvWriter eval_curve(result.eval_curve_path,
                       {"step", "success_rate", "mean_reward"});

  const YAML::Node run_meta = run_config_yaml(cfg);
  UpdateMetrics last{};
  double ep_reward = 0.0;
  bool ep_open = false;
  bool ep_success = false;
  long episode = 0;

  for (long step = 1; step <= cfg.total_steps; ++step) {
    if (!ep_open) {
      const Observation obs = env.reset();
      stacker.reset(obs);
      replay.begin_episode(obs);
      ep_reward = 0.0;
      ep_success = false;
      ep_open = true;
    }

    VecX action(kActionDim);
    if (step <= cfg.warmup_steps) {
      for (int i = 0; i < kActionDim; ++i) action[i] = warmup_rng.uniform(-1.0, 1.0);
    } else {
      action = agent.act(stacker.stacked(), /*train_mode=*/true);
    }

    bool ep_done = false;
    try {
      const StepResult sr = env.step(action);
      replay.push_step(action, sr.reward, sr.obs, sr.terminated,
                       sr.terminated || sr.truncated);
      stacker.push(sr.obs);
      ep_reward += sr.reward;
      ep_success = sr.success;
      ep_done = sr.terminated || sr.truncated;
    } catch (const SimulationDiverged& e) {
      if (verbose) std::cerr << "episode aborted: " << e.what() << "\n";
      replay.abort_episode();
      ep_done = true;
      ep_success = false;
    }

    if (step > cfg.warmup_steps &&
        replay.size() >= static_cast<size_t>(agent_cfg.batch_size))
      last = agent.update(replay);

    if (ep_done) {
      ++episode;
      metrics.row({static_cast<double>(step), static_cast<double>(episode), ep_reward,
                   ep_success ? 1.0 : 0.0, last.beta, last.sigma, last.critic_loss,
                   last.actor_loss});
      ep_open = false;
    }

    result.steps_run = step;
    if (step % cfg.eval_every == 0 || step == cfg.total_steps) {
      const EvalPoint p = run_eval_batch(agent, cfg.env, cfg.eval_greens,
                                         cfg.eval_trials, mix_seed(seed, 0xEBA5 + step));
      eval_curve.row({static_cast<double>(step), p.success_rate, p.mean_reward});
      eval_curve.flush();
      metrics.flush();
      const std::string ck =
          cfg.out_dir + "/ckpt_" + tag + "_step" + std::to_string(step) + ".ck";
      agent.save(ck, run_meta);
      result.last_eval_success = p.success_rate;
      result.last_eval_reward = p.mean_reward;
      if (verbose)
        std::cout << tag << " step " << step << ": eval success "
                  << p.success_rate << ", mean reward " << p.mean_reward
                  << ", beta " << agent.beta() << "\n";
      if (p.success_rate >= cfg.early_stop_success) break;
    }
  }

  agent.save(result.final_checkpoint, run_meta);
  return result;
}

inline std::vector<TrainSeedResult> cmd_train(const RunConfig& cfg, bool verbose = true) {
  cfg.validate();
  std::vector<TrainSeedResult> results;
  for (const auto seed : cfg.seeds) results.push_back(train_one_seed(cfg, seed, verbose));

  // cross-seed aggregate over the common prefix of eval points
  if (!results.empty()) {
    std::vector<CsvTable> curves;
    size_t common = SIZE_MAX;
    for (const auto& r : results) {
      curves.push_back(read_csv(r.eval_curve_path));
      common = std::min(common, curves.back().rows.size());
    }
    CsvWriter agg(cfg.out_dir + "/aggregate_" + algo_name(cfg.algo) + ".csv",
                  {"step", "mean_success", "std_success", "mean_reward", "std_reward"});
    for (size_t k = 0; k < common; ++k) {
      double ms = 0, mr = 0;
      for (const auto& c : curves) {
        ms += c.rows[k][1];
        mr += c.rows[k][2];
      }
      ms /= curves.size();
      mr /= curves.size();
      double vs = 0, vr = 0;
      for (const auto& c : curves) {
        vs += (c.rows[k][1] - ms) * (c.rows[k][1] - ms);
        vr += (c.rows[k][2] - mr) * (c.rows[k][2] - mr);
      }
      agg.row({curves[0].rows[k][0], ms, std::sqrt(vs / curves.size()), mr,
               std::sqrt(vr / curves.size())});
    }
  }
  return results;
}

// ---------------------------------------------------------------------------

struct EvalTrialRecord {
  int green_count = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  int steps_used = 0;
  double final_reward = 0.0;
};

struct EvalReport {
  std::vector<EvalTrialRecord> trials;
  std::vector<double> success_rate_by_green;  // aligned with green_counts
  std::vector<int> green_counts;
};

inline EnvConfig env_config_from_checkpoint(const CheckpointReader& reader) {
  const YAML::Node run = reader.meta()["run"];
  if (!run || !run["env"])
    throw CheckpointError("checkpoint carries no run configuration");
  return env_config_from_yaml(run["env"], default_env_config());
}

inline EvalReport cmd_eval(const std::string& ckpt_path, int trials,
                           const std::vector<int>& green_counts,
                           const std::string& out_dir, std::uint64_t seed_base = 7,
                           bool verbose = true) {
  CheckpointReader reader(ckpt_path);
  DrmAgent agent = DrmAgent::load(reader);
  EnvConfig env_cfg = env_config_from_checkpoint(reader);
  if (agent.config().view_width != env_cfg.camera.width ||
      agent.config().view_height != env_cfg.camera.height)
    throw CheckpointError("checkpoint/config mismatch: raster dimensions differ");

  fs::create_directories(out_dir);
  CsvWriter per_trial(out_dir + "/eval_trials.csv", kEvalColumns);
  CsvWriter agg(out_dir + "/eval_aggregate.csv",
                {"green_count", "trials", "successes", "success_rate", "mean_steps",
                 "mean_final_reward"});

  EvalReport report;
  report.green_counts = green_counts;
  for (const int g : green_counts) {
    int successes = 0;
    double steps_sum = 0.0, reward_sum = 0.0;
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t trial_seed =
          seed_base + static_cast<std::uint64_t>(g) * 1000 + static_cast<std::uint64_t>(t);
      const EpisodeOutcome o =
          run_eval_episode(agent, env_cfg, g, mix_seed(0xEA17, trial_seed));
      EvalTrialRecord rec{g, t, trial_seed, o.success, o.steps_used, o.final_reward};
      report.trials.push_back(rec);
      per_trial.row({static_cast<double>(g), static_cast<double>(t),
                     static_cast<double>(trial_seed), o.success ? 1.0 : 0.0,
                     static_cast<double>(o.steps_used), o.final_reward});
      successes += o.success ? 1 : 0;
      steps_sum += o.steps_used;
      reward_sum += o.final_reward;
    }
    const double rate = static_cast<double>(successes) / trials;
    report.success_rate_by_green.push_back(rate);
    agg.row({static_cast<double>(g), static_cast<double>(trials),
             static_cast<double>(successes), rate, steps_sum / trials,
             reward_sum / trials});
    if (verbose)
      std::cout << "greens " << g << ": " << successes << "/" << trials
                << " success\n";
  }
  return report;
}

// ---------------------------------------------------------------------------

inline std::string cmd_trace(const std::string& ckpt_path, std::uint64_t seed,
                             int green_count, const std::string& out_dir,
                             bool verbose = true) {
  CheckpointReader reader(ckpt_path);
  DrmAgent agent = DrmAgent::load(reader);
  EnvConfig env_cfg = env_config_from_checkpoint(reader);
  env_cfg.randomization.green_min = green_count;
  env_cfg.randomization.green_max = green_count;

  fs::create_directories(out_dir);
  const std::string path = out_dir + "/trace_seed" + std::to_string(seed) + "_g" +
                           std::to_string(green_count) + ".csv";

  PickEnv env(env_cfg, mix_seed(0x7ACE, seed));
  FrameStacker stacker;
  stacker.reset(env.reset());

  const size_t n_fruit = env.world().strawberries().size();
  std::vector<std::string> cols = {"step",   "tcp_x",  "tcp_y",  "tcp_z",  "quat_w",
                                   "quat_x", "quat_y", "quat_z", "width"};
  for (int i = 0; i < kActionDim; ++i) cols.push_back("action_" + std::to_string(i));
  for (const char* c : {"r_grasp", "r_prox", "r_green", "r_effort", "r_smooth",
                        "reward", "contacts", "success"})
    cols.push_back(c);
  for (size_t i = 0; i < n_fruit; ++i)
    for (const char* ax : {"x", "y", "z"})
      cols.push_back("fruit" + std::to_string(i) + "_" + ax);
  CsvWriter csv(path, cols);

  const auto state_row = [&](int step, const VecX& action, const RewardTerms& terms,
                             double reward, bool success) {
    const World& w = env.world();
    std::vector<double> row = {static_cast<double>(step),
                               w.gripper().pose.position.x(),
                               w.gripper().pose.position.y(),
                               w.gripper().pose.position.z(),
                               w.gripper().pose.orientation.w(),
                               w.gripper().pose.orientation.x(),
                               w.gripper().pose.orientation.y(),
                               w.gripper().pose.orientation.z(),
                               w.gripper().finger_width};
    for (int i = 0; i < kActionDim; ++i) row.push_back(action.size() ? action[i] : 0.0);
    row.insert(row.end(),
               {terms.grasp, terms.proximity, terms.green_keep, terms.effort,
                terms.smoothness, reward,
                static_cast<double>(w.detect_contacts().size()), success ? 1.0 : 0.0});
    for (const auto& s : w.strawberries()) {
      row.push_back(s.position.x());
      row.push_back(s.position.y());
      row.push_back(s.position.z());
    }
    csv.row(row);
  };

  state_row(0, VecX(), RewardTerms{}, 0.0, false);
  for (int t = 1; t <= env_cfg.max_steps; ++t) {
    const VecX a = agent.act(stacker.stacked(), /*train_mode=*/false);
    StepResult sr;
    try {
      sr = env.step(a);
    } catch (const SimulationDiverged& e) {
      if (verbose) std::cerr << "trace aborted: " << e.what() << "\n";
      break;
    }
    stacker.push(sr.obs);
    state_row(t, a, sr.terms, sr.reward, sr.success);
    if (sr.terminated || sr.truncated) break;
  }
  if (verbose) std::cout << "trace written to " << path << "\n";
  return path;
}

// ---------------------------------------------------------------------------

namespace plotdetail2 {

// Resample an (x, y) sequence onto a uniform grid with trailing-window means
// so curves from different seeds share an x axis.
inline Series resample(const std::string& label, const std::vector<double>& x,
                       const std::vector<double>& y, double x_max, int points,
                       int window) {
  Series s;
  s.label = label;
  size_t j = 0;
  std::vector<double> recent;
  for (int k = 1; k <= points; ++k) {
    const double gx = x_max * k / points;
    while (j < x.size() && x[j] <= gx) {
      recent.push_back(y[j]);
      ++j;
    }
    double m = 0.0;
    if (!recent.empty()) {
      const size_t n = std::min(recent.size(), static_cast<size_t>(window));
      for (size_t i = recent.size() - n; i < recent.size(); ++i) m += recent[i];
      m /= static_cast<double>(n);
    }
    s.x.push_back(gx);
    s.y.push_back(m);
  }
  return s;
}

}  // namespace plotdetail2

// Classifies each CSV by header: training metrics files become reward and
// success curves (per seed + mean/std band); eval trial files become the
// success-by-green-count bar chart.
inline std::vector<std::string> cmd_plot(const std::vector<std::string>& inputs,
                                         const std::string& out_dir) {
  if (inputs.empty()) throw CsvError("no input files");
  fs::create_directories(out_dir);
  std::vector<std::string> written;

  std::vector<CsvTable> metric_tables;
  std::vector<std::string> metric_names;
  const CsvTable* eval_table = nullptr;
  std::vector<CsvTable> storage;
  storage.reserve(inputs.size());

  for (const auto& path : inputs) {
    CsvTable t = read_csv(path);
    if (t.rows.empty()) throw CsvError("no data rows in " + path);
    storage.push_back(std::move(t));
  }
  for (size_t i = 0; i < storage.size(); ++i) {
    const CsvTable& t = storage[i];
    if (t.columns == kMetricsColumns) {
      metric_tables.push_back(t);
      metric_names.push_back(fs::path(inputs[i]).stem().string());
    } else if (t.columns == kEvalColumns) {
      if (!eval_table) eval_table = &storage[i];
    } else {
      throw CsvError("unrecognized CSV schema: " + inputs[i]);
    }
  }

  if (!metric_tables.empty()) {
    double x_max = 0.0;
    for (const auto& t : metric_tables) x_max = std::max(x_max, t.rows.back()[0]);
    std::vector<Series> reward_series, success_series;
    for (size_t i = 0; i < metric_tables.size(); ++i) {
      const CsvTable& t = metric_tables[i];
      std::vector<double> xs, rewards, successes;
      for (const auto& r : t.rows) {
        xs.push_back(r[0]);
        rewards.push_back(r[2]);
        successes.push_back(r[3]);
      }
      reward_series.push_back(
          plotdetail2::resample(metric_names[i], xs, rewards, x_max, 100, 10));
      success_series.push_back(
          plotdetail2::resample(metric_names[i], xs, successes, x_max, 100, 20));
    }
    const std::string rp = out_dir + "/reward_curve.svg";
    svg_line_chart(rp, "Episode reward during training", "environment step",
                   "episode reward", reward_series);
    written.push_back(rp);
    const std::string sp = out_dir + "/success_curve.svg";
    svg_line_chart(sp, "Training success rate", "environment step", "success rate",
                   success_series);
    written.push_back(sp);
  }

  if (eval_table) {
    const int gi = eval_table->column_index("green_count");
    const int si = eval_table->column_index("success");
    std::vector<int> greens;
    std::vector<double> hits, counts;
    for (const auto& r : eval_table->rows) {
      const int g = static_cast<int>(r[static_cast<size_t>(gi)]);
      size_t k = 0;
      for (; k < greens.size(); ++k)
        if (greens[k] == g) break;
      if (k == greens.size()) {
        greens.push_back(g);
        hits.push_back(0);
        counts.push_back(0);
      }
      hits[k] += r[static_cast<size_t>(si)];
      counts[k] += 1;
    }
    std::vector<std::string> labels;
    std::vector<double> rates;
    for (size_t k = 0; k < greens.size(); ++k) {
      labels.push_back(std::to_string(greens[k]));
      rates.push_back(hits[k] / counts[k]);
    }
    const std::string bp = out_dir + "/success_by_greens.svg";
    svg_bar_chart(bp, "Success rate by green-strawberry count",
                  "green strawberries in cluster", "success rate", labels, rates);
    written.push_back(bp);
  }
  return written;
}

}  // namespace stempick
