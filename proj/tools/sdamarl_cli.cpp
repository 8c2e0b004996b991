// Experiment runner: train, eval, suite, sweep-t, config.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdamarl/harness/run.hpp"

namespace {

using namespace sdamarl;
using nlohmann::json;

// "0..4" (inclusive range) or "0,3,7".
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t lo = std::stoull(s.substr(0, dots));
    const std::uint64_t hi = std::stoull(s.substr(dots + 2));
    if (hi < lo) throw std::invalid_argument("seed range '" + s + "' is empty");
    for (std::uint64_t k = lo; k <= hi; ++k) out.push_back(k);
    return out;
  }
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(std::stoull(item));
  if (out.empty()) throw std::invalid_argument("no seeds given");
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

json load_patch(const std::string& path) { return path.empty() ? json::object() : harness::read_json_file(path); }

void log_line(const std::string& s) { std::cerr << s << std::endl; }

void print_summary(const std::vector<harness::EpisodeMetrics>& eps) {
  const auto s = harness::summarize(eps);
  std::cout << "episodes        " << eps.size() << "\n"
            << "accuracy        " << s.accuracy.mean << " +- " << s.accuracy.sd << "\n"
            << "reward          " << s.reward.mean << " +- " << s.reward.sd << "\n"
            << "velocity diff   " << s.velocity_diff.mean << " +- " << s.velocity_diff.sd << "\n"
            << "path length     " << s.path_length.mean << " +- " << s.path_length.sd << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-AUV tracking trainer"};
  app.require_subcommand(1);

  std::string scenario = "2v1", algo = "sda_marl", config_path, out_dir;
  std::uint64_t seed = 0;
  bool full = false;

  auto* train = app.add_subcommand("train", "Train one (scenario, algo, seed) run and evaluate it");
  train->add_option("--scenario", scenario, "Preset: 2v1, 4v2, 6v2, 8v3")->capture_default_str();
  train->add_option("--algo", algo, "sda_marl, maddpg or ablation_no_diffusion")->capture_default_str();
  train->add_option("--seed", seed)->capture_default_str();
  train->add_flag("--full-scale", full, "Use the full-size schedule instead of the desk-scale one");
  train->add_option("--config", config_path, "JSON merge patch over the resolved config");
  train->add_option("--out", out_dir, "Run directory (default runs/<scenario>_<algo>_seed<k>)");

  std::string checkpoint;
  std::size_t episodes = 20;
  std::string eval_out;
  std::int64_t eval_seed = -1;
  auto* eval = app.add_subcommand("eval", "Roll out the actors stored in a checkpoint directory");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory holding config.json and actor_*.sdam")
      ->required();
  eval->add_option("--episodes", episodes)->capture_default_str();
  eval->add_option("--seed", eval_seed, "Evaluation seed (default: the training seed)");
  eval->add_option("--out", eval_out, "Directory for eval_metrics.jsonl and eval_trajectories.jsonl");

  std::string presets = "2v1", algos = "sda_marl,maddpg", seeds = "0..2";
  auto* suite = app.add_subcommand("suite", "Train every (preset, algo, seed) cell and write summary.csv");
  suite->add_option("--presets", presets)->capture_default_str();
  suite->add_option("--algos", algos)->capture_default_str();
  suite->add_option("--seeds", seeds, "Range a..b or list a,b,c")->capture_default_str();
  suite->add_option("--out", out_dir)->required();
  suite->add_flag("--full-scale", full);
  suite->add_option("--config", config_path);

  std::string values = "5,10,20,50";
  std::string sweep_seeds = "0";
  auto* sweep = app.add_subcommand("sweep-t", "Reward curves for several diffusion step counts");
  sweep->add_option("--values", values)->capture_default_str();
  sweep->add_option("--scenario", scenario)->capture_default_str();
  sweep->add_option("--seeds", sweep_seeds)->capture_default_str();
  sweep->add_option("--out", out_dir)->capture_default_str();
  sweep->add_flag("--full-scale", full);
  sweep->add_option("--config", config_path);

  auto* show = app.add_subcommand("config", "Print the fully resolved config");
  show->add_option("--scenario", scenario)->capture_default_str();
  show->add_option("--algo", algo)->capture_default_str();
  show->add_option("--seed", seed)->capture_default_str();
  show->add_flag("--full-scale", full);
  show->add_option("--config", config_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train || *show) {
      const auto cfg = harness::make_run_config(scenario, marl::parse_algo(algo), seed, full, load_patch(config_path));
      if (*show) {
        std::cout << harness::to_json(cfg).dump(2) << "\n";
        return 0;
      }
      if (out_dir.empty()) out_dir = "runs/" + scenario + "_" + algo + "_seed" + std::to_string(seed);
      const auto r = harness::run_training(cfg, out_dir, log_line);
      std::cout << "run directory   " << r.dir.string() << "\n"
                << "final-50 reward " << harness::final_window_reward(r.train) << "\n"
                << "wall time (s)   " << r.wall_seconds << "\n";
      print_summary(r.eval);
    } else if (*eval) {
      std::optional<std::uint64_t> s;
      if (eval_seed >= 0) s = static_cast<std::uint64_t>(eval_seed);
      const auto ev = harness::eval_checkpoint(checkpoint, episodes, s, !eval_out.empty());
      if (!eval_out.empty()) {
        std::filesystem::create_directories(eval_out);
        harness::write_eval(eval_out, ev, s.value_or(0));
      }
      print_summary(ev.episodes);
    } else if (*suite) {
      harness::SuiteSpec spec;
      spec.presets = split(presets);
      for (const auto& a : split(algos)) spec.algos.push_back(marl::parse_algo(a));
      spec.seeds = parse_seeds(seeds);
      spec.full_scale = full;
      spec.patch = load_patch(config_path);
      const auto rows = harness::run_suite(spec, out_dir, log_line);
      std::cout << harness::kSuiteHeader << "\n";
      for (const auto& r : rows) std::cout << harness::csv_line(r) << "\n";
    } else if (*sweep) {
      if (out_dir.empty()) out_dir = "runs/sweep_t";
      std::vector<std::size_t> ts;
      for (const auto& v : split(values)) ts.push_back(std::stoul(v));
      const auto pts = harness::sweep_diffusion_steps(ts, scenario, parse_seeds(sweep_seeds), out_dir, full,
                                                      load_patch(config_path), log_line);
      std::cout << "diffusion_steps,sample_seconds,final_mean_reward\n";
      for (const auto& p : pts)
        std::cout << p.steps << "," << p.sample_seconds << ","
                  << (p.mean_curve.empty() ? 0.0 : p.mean_curve.back()) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
