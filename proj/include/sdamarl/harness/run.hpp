#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdamarl/harness/config.hpp"
#include "sdamarl/harness/metrics.hpp"
#include "sdamarl/marl/trainer.hpp"

#ifndef SDAMARL_BUILD_TAG
#define SDAMARL_BUILD_TAG "unknown"
#endif

namespace sdamarl::harness {

namespace fs = std::filesystem;

inline std::string build_tag() { return SDAMARL_BUILD_TAG; }

/// Shortest decimal form that reads back to the same double.
inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

using Progress = std::function<void(const std::string&)>;

struct RunResult {
  fs::path dir;
  std::vector<marl::TrainRecord> train;
  std::vector<EpisodeMetrics> eval;
  double wall_seconds = 0.0;
};

/// Mean training reward over the last `window` episodes.
inline double final_window_reward(const std::vector<marl::TrainRecord>& recs, std::size_t window = 50) {
  if (recs.empty()) return 0.0;
  const std::size_t n = std::min(window, recs.size());
  double s = 0.0;
  for (std::size_t k = recs.size() - n; k < recs.size(); ++k) s += recs[k].metrics.mean_return;
  return s / static_cast<double>(n);
}

struct EvalSummary {
  MeanSd accuracy, reward, velocity_diff, path_length;
};

inline EvalSummary summarize(const std::vector<EpisodeMetrics>& eps) {
  std::vector<double> acc, rew, vd, pl;
  for (const auto& m : eps) {
    acc.push_back(m.accuracy);
    rew.push_back(m.mean_return);
    vd.push_back(m.velocity_diff_mean);
    pl.push_back(m.path_length_mean);
  }
  return {mean_sd(acc), mean_sd(rew), mean_sd(vd), mean_sd(pl)};
}

inline json to_json(const EpisodeMetrics& m, std::size_t episode) {
  return {{"episode", episode},
          {"steps", m.steps},
          {"mean_reward", m.mean_return},
          {"mean_reward_per_agent", m.returns},
          {"accuracy", m.accuracy},
          {"velocity_diff_mean", m.velocity_diff_mean},
          {"velocity_diff_sd", m.velocity_diff_sd},
          {"path_length", m.path_length},
          {"path_length_mean", m.path_length_mean},
          {"path_length_sd", m.path_length_sd}};
}

inline void write_eval(const fs::path& dir, const marl::Evaluation& ev, std::uint64_t seed) {
  std::ofstream metrics(dir / "eval_metrics.jsonl");
  for (std::size_t k = 0; k < ev.episodes.size(); ++k) {
    json j = to_json(ev.episodes[k], k);
    j["seed"] = seed;
    metrics << j.dump() << "\n";
  }
  std::ofstream traj(dir / "eval_trajectories.jsonl");
  for (const auto& log : ev.logs) log.write_jsonl(traj);
}

inline void save_checkpoint_dir(const marl::Trainer& t, const RunConfig& cfg, const fs::path& dir) {
  t.save(dir);
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
}

/// Full train + frozen-policy evaluation in `dir`.
inline RunResult run_training(const RunConfig& cfg, const fs::path& dir, const Progress& progress = {}) {
  cfg.validate();
  fs::create_directories(dir);
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  write_text(dir / "run_info.json", json{{"seed", cfg.train.seed},
                                         {"algo", marl::to_string(cfg.algo)},
                                         {"scenario", cfg.scenario.name},
                                         {"build_tag", build_tag()}}
                                            .dump(2) + "\n");

  RunResult out;
  out.dir = dir;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  marl::Trainer trainer(cfg.scenario, cfg.train, marl::to_string(cfg.algo));
  std::ofstream metrics(dir / "metrics.jsonl");
  std::ofstream train_log(dir / "train_log.jsonl");
  std::ofstream curve(dir / "reward_curve.csv");
  curve << "episode,mean_reward\n";
  try {
    while (!trainer.finished()) {
      marl::TrainRecord rec = trainer.train_episode();
      metrics << marl::to_json(rec).dump() << "\n";
      train_log << json{{"episode", rec.episode},
                        {"wall_time", elapsed()},
                        {"update_seconds", trainer.update_seconds()},
                        {"update_cycles", trainer.total_update_cycles()}}
                       .dump()
                << "\n";
      curve << rec.episode << "," << fmt(rec.metrics.mean_return) << "\n";
      out.train.push_back(std::move(rec));
      const std::size_t done = trainer.episodes_done();
      if (cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0)
        save_checkpoint_dir(trainer, cfg, dir / "checkpoints" / ("episode_" + std::to_string(done)));
      if (progress && (done % 25 == 0 || trainer.finished()))
        progress(dir.string() + ": episode " + std::to_string(done) + "/" + std::to_string(cfg.train.episodes) +
                 " reward " + fmt(out.train.back().metrics.mean_return));
    }
  } catch (const std::exception& e) {
    save_checkpoint_dir(trainer, cfg, dir / "checkpoints" / "abort");
    write_text(dir / "abort.txt", std::string(e.what()) + "\n");
    throw;
  }
  {
    std::ofstream last(dir / "train_trajectory_last.jsonl");
    trainer.last_log().write_jsonl(last);
  }
  save_checkpoint_dir(trainer, cfg, dir / "checkpoints" / "final");

  env::ScenarioConfig eval_scenario = cfg.scenario;
  eval_scenario.episode_length = cfg.train.episode_length;
  const auto ev = marl::evaluate(marl::actors_of(trainer), eval_scenario, cfg.eval_episodes, cfg.train.seed, true);
  write_eval(dir, ev, cfg.train.seed);
  out.eval = ev.episodes;
  out.wall_seconds = elapsed();

  const auto s = summarize(out.eval);
  write_text(dir / "summary.json", json{{"final50_train_reward", final_window_reward(out.train)},
                                        {"eval_accuracy_mean", s.accuracy.mean},
                                        {"eval_accuracy_sd", s.accuracy.sd},
                                        {"eval_reward_mean", s.reward.mean},
                                        {"eval_reward_sd", s.reward.sd},
                                        {"eval_velocity_diff_mean", s.velocity_diff.mean},
                                        {"eval_path_length_mean", s.path_length.mean},
                                        {"wall_seconds", out.wall_seconds}}
                                           .dump(2) + "\n");
  return out;
}

/// Loads the actors and config stored in a checkpoint directory and rolls
/// them out.
inline marl::Evaluation eval_checkpoint(const fs::path& dir, std::size_t episodes, std::optional<std::uint64_t> seed = {},
                                        bool keep_logs = false) {
  RunConfig cfg = run_config_from_json(read_json_file(dir / "config.json"));
  std::vector<nn::Mlp> actors;
  for (std::size_t i = 0; i < cfg.scenario.num_auvs; ++i)
    actors.push_back(nn::load_checkpoint(dir / ("actor_" + std::to_string(i) + ".sdam"), nn::Activation::Relu,
                                         nn::Activation::Tanh));
  cfg.scenario.episode_length = cfg.train.episode_length;
  return marl::evaluate(actors, cfg.scenario, episodes, seed.value_or(cfg.train.seed), keep_logs);
}

// ---- suites ---------------------------------------------------------------

struct SuiteRow {
  std::string preset, algo;
  std::size_t seeds = 0;
  MeanSd accuracy, reward, velocity_diff, path_length, final50_reward;
};

inline constexpr const char* kSuiteHeader =
    "preset,algo,seeds,accuracy_mean,accuracy_sd,eval_reward_mean,eval_reward_sd,velocity_diff_mean,"
    "velocity_diff_sd,path_length_mean,path_length_sd,final50_train_reward_mean,final50_train_reward_sd";

/// Per-seed means over evaluation episodes, then mean and SD across seeds.
inline SuiteRow aggregate(const std::string& preset, const std::string& algo, const std::vector<RunResult>& runs) {
  SuiteRow row{preset, algo, runs.size(), {}, {}, {}, {}, {}};
  std::vector<double> acc, rew, vd, pl, fin;
  for (const auto& r : runs) {
    const auto s = summarize(r.eval);
    acc.push_back(s.accuracy.mean);
    rew.push_back(s.reward.mean);
    vd.push_back(s.velocity_diff.mean);
    pl.push_back(s.path_length.mean);
    fin.push_back(final_window_reward(r.train));
  }
  row.accuracy = mean_sd(acc);
  row.reward = mean_sd(rew);
  row.velocity_diff = mean_sd(vd);
  row.path_length = mean_sd(pl);
  row.final50_reward = mean_sd(fin);
  return row;
}

inline std::string csv_line(const SuiteRow& r) {
  std::string s = r.preset + "," + r.algo + "," + std::to_string(r.seeds);
  for (const MeanSd& m : {r.accuracy, r.reward, r.velocity_diff, r.path_length, r.final50_reward})
    s += "," + fmt(m.mean) + "," + fmt(m.sd);
  return s;
}

struct SuiteSpec {
  std::vector<std::string> presets;
  std::vector<marl::Algo> algos;
  std::vector<std::uint64_t> seeds;
  bool full_scale = false;
  json patch = json::object();
};

inline RunConfig make_run_config(const std::string& preset, marl::Algo algo, std::uint64_t seed, bool full,
                                 const json& patch) {
  RunConfig c = full ? full_scale(preset, algo, seed) : desk_scale(preset, algo, seed);
  if (!patch.empty()) {
    if (patch.contains("train") && patch["train"].contains("episode_length"))
      rescale_for_episode_length(c.scenario, patch["train"]["episode_length"].get<std::size_t>());
    c = apply_patch(c, patch);
    // The algorithm and seed of the suite cell win over the patch.
    c.algo = algo;
    c.train = marl::config_for(algo, c.train);
    c.train.seed = seed;
  }
  c.scenario.episode_length = c.train.episode_length;
  return c;
}

/// Trains every (preset, algo, seed) cell, then writes summary.csv with one
/// row per (preset, algo).
inline std::vector<SuiteRow> run_suite(const SuiteSpec& spec, const fs::path& out, const Progress& progress = {}) {
  for (const auto& p : spec.presets) preset_scenario(p);  // fail fast on unknown names
  fs::create_directories(out);
  std::vector<SuiteRow> rows;
  for (const auto& preset : spec.presets) {
    for (const auto algo : spec.algos) {
      std::vector<RunResult> runs;
      for (const auto seed : spec.seeds) {
        const RunConfig c = make_run_config(preset, algo, seed, spec.full_scale, spec.patch);
        runs.push_back(run_training(c, out / preset / marl::to_string(algo) / ("seed_" + std::to_string(seed)),
                                    progress));
      }
      rows.push_back(aggregate(preset, marl::to_string(algo), runs));
    }
  }
  std::string csv = std::string(kSuiteHeader) + "\n";
  for (const auto& r : rows) csv += csv_line(r) + "\n";
  write_text(out / "summary.csv", csv);
  return rows;
}

struct SweepPoint {
  std::size_t steps = 0;
  double sample_seconds = 0.0;  // one batched sample of 64 states
  std::vector<double> mean_curve;
};

/// Wall time of one batched reverse chain for a fresh policy with T steps.
inline double sampling_seconds(std::size_t T, std::size_t state_dim, const std::vector<std::size_t>& hidden,
                               std::size_t reps = 20) {
  Rng init = make_rng(0, streams::kDiffusionInit);
  diffusion::DiffusionPolicy p(state_dim, 3, diffusion::default_schedule(T), hidden, init);
  Rng rng = make_rng(0, streams::kDiffusionSample);
  const nn::Matrix states = gaussian_matrix(64, static_cast<Eigen::Index>(state_dim), rng);
  const auto t0 = std::chrono::steady_clock::now();
  double sink = 0.0;
  for (std::size_t k = 0; k < reps; ++k) sink += p.sample_batch(states, rng, true)(0, 0);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sink == sink ? s / static_cast<double>(reps) : s;
}

/// One SDA-MARL run per (T, seed); writes a reward curve per run and a
/// seed-averaged curve per T.
inline std::vector<SweepPoint> sweep_diffusion_steps(const std::vector<std::size_t>& values, const std::string& preset,
                                                     const std::vector<std::uint64_t>& seeds, const fs::path& out,
                                                     bool full = false, const json& patch = json::object(),
                                                     const Progress& progress = {}) {
  for (std::size_t T : values)
    if (T < 1) throw std::invalid_argument("diffusion step counts must be >= 1");
  fs::create_directories(out);
  std::vector<SweepPoint> points;
  std::string timing = "diffusion_steps,sample_seconds\n";
  for (std::size_t T : values) {
    SweepPoint pt;
    pt.steps = T;
    std::vector<std::vector<double>> curves;
    RunConfig last;
    for (auto seed : seeds) {
      RunConfig c = make_run_config(preset, marl::Algo::SdaMarl, seed, full, patch);
      c.train.diffusion_steps = T;
      last = c;
      const fs::path dir = out / ("T_" + std::to_string(T)) / ("seed_" + std::to_string(seed));
      const RunResult r = run_training(c, dir, progress);
      std::vector<double> curve;
      std::string csv = "episode,mean_reward\n";
      for (const auto& rec : r.train) {
        curve.push_back(rec.metrics.mean_return);
        csv += std::to_string(rec.episode) + "," + fmt(rec.metrics.mean_return) + "\n";
      }
      write_text(out / ("curve_T" + std::to_string(T) + "_seed" + std::to_string(seed) + ".csv"), csv);
      curves.push_back(std::move(curve));
    }
    if (!curves.empty()) {
      pt.mean_curve.assign(curves.front().size(), 0.0);
      for (const auto& c : curves)
        for (std::size_t k = 0; k < c.size(); ++k) pt.mean_curve[k] += c[k] / static_cast<double>(curves.size());
      std::string csv = "episode,mean_reward\n";
      for (std::size_t k = 0; k < pt.mean_curve.size(); ++k) csv += std::to_string(k) + "," + fmt(pt.mean_curve[k]) + "\n";
      write_text(out / ("curve_T" + std::to_string(T) + "_mean.csv"), csv);
    }
    pt.sample_seconds = sampling_seconds(T, last.scenario.observation_dim(), last.train.nets.diffusion_hidden);
    timing += std::to_string(T) + "," + fmt(pt.sample_seconds) + "\n";
    points.push_back(std::move(pt));
  }
  write_text(out / "sampling_time.csv", timing);
  return points;
}

}  // namespace sdamarl::harness
