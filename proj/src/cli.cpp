#include "hyperl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "hyperl/config.hpp"
#include "hyperl/errors.hpp"
#include "hyperl/harness.hpp"
#include "hyperl/stats.hpp"

namespace hyperl {
namespace {

struct KeyOptions {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_options(CLI::App* app, KeyOptions& k) {
  app->add_option("--config", k.config_file, "config file of 'key = value' lines");
  for (const auto& key : config_keys()) {
    app->add_option("--" + key.name, k.values[key.name], key.help + " [" + key.type + "]");
  }
}

ExperimentConfig resolve_config(CLI::App* app, const KeyOptions& k) {
  std::map<std::string, std::string> file;
  if (!k.config_file.empty()) file = read_config_file(k.config_file);
  std::map<std::string, std::string> overrides;
  for (const auto& key : config_keys()) {
    if (app->count("--" + key.name) > 0) overrides[key.name] = k.values.at(key.name);
  }
  return build_config(file, overrides);
}

std::vector<int> parse_phases(const std::string& text) {
  std::vector<int> out;
  if (text.empty() || text == "none") return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad phase boundary '" + item + "'");
    }
  }
  return out;
}

std::filesystem::path first_seed_checkpoint(const std::filesystem::path& root) {
  if (std::filesystem::exists(root / "manifest.txt")) return root;
  std::vector<std::filesystem::path> dirs;
  if (std::filesystem::is_directory(root)) {
    for (const auto& e : std::filesystem::directory_iterator(root)) {
      if (e.is_directory() && std::filesystem::exists(e.path() / "manifest.txt")) dirs.push_back(e.path());
    }
  }
  if (dirs.empty()) throw ConfigError("no checkpoint found under " + root.string());
  std::sort(dirs.begin(), dirs.end());
  return dirs.front();
}

void print_error(std::ostream& err, int code, const char* kind, const std::string& message) {
  std::string flat = message;
  for (char& c : flat) {
    if (c == '\n') c = ' ';
  }
  err << "error: exit=" << code << " kind=" << kind << " message=" << flat << '\n';
}

}  // namespace

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hypernetwork-conditioned TD3 for parametric PDE control"};
  app.require_subcommand(1);

  KeyOptions train_keys;
  bool resume = false, show_config = false, quiet = false;
  CLI::App* train = app.add_subcommand("train", "train agents and write run logs and checkpoints");
  add_config_options(train, train_keys);
  train->add_flag("--resume", resume, "continue from the checkpoints in the run directory");
  train->add_flag("--show-config", show_config, "print the resolved configuration and exit");
  train->add_flag("--quiet", quiet, "suppress per-episode progress lines");

  std::string eval_ckpt, eval_out;
  std::optional<double> eval_mu;
  CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints with the deterministic policy");
  eval->add_option("--checkpoint", eval_ckpt, "ckpt directory or one seed_<s> directory")->required();
  eval->add_option("--mu", eval_mu, "evaluate every episode at this mu");
  eval->add_option("--out", eval_out, "eval CSV path (default: <checkpoint>/eval_cli.csv)");

  KeyOptions ref_keys;
  std::string ref_output;
  CLI::App* gen = app.add_subcommand("gen-reference", "generate the NS reference trajectory");
  add_config_options(gen, ref_keys);
  gen->add_option("--output", ref_output, "reference file (default: <out>/reference.bin)");

  std::vector<std::string> stats_logs;
  std::string stats_phases, stats_out;
  StatsOptions stats_opts;
  CLI::App* stats = app.add_subcommand("stats", "phase statistics and bootstrap intervals of run logs");
  stats->add_option("--log", stats_logs, "RunLog CSV file(s)")->required();
  stats->add_option("--phases", stats_phases, "comma-separated episode boundaries, e.g. 500,1000");
  stats->add_option("--out", stats_out, "output CSV (default: stdout)");
  stats->add_option("--confidence", stats_opts.confidence, "bootstrap confidence level")->capture_default_str();
  stats->add_option("--resamples", stats_opts.resamples, "bootstrap resamples")->capture_default_str();
  stats->add_option("--seed", stats_opts.seed, "bootstrap RNG seed")->capture_default_str();

  KeyOptions traj_keys;
  std::string traj_ckpt, traj_out;
  std::optional<double> traj_mu;
  std::uint64_t traj_seed = 0;
  int controller_on = 0;
  bool traj_train_mode = false;
  CLI::App* traj = app.add_subcommand("export-traj", "roll out one episode and export the trajectory CSV");
  add_config_options(traj, traj_keys);
  traj->add_option("--checkpoint", traj_ckpt, "policy checkpoint (omit for an uncontrolled rollout)");
  traj->add_option("--mu", traj_mu, "episode mu");
  traj->add_option("--reset-seed", traj_seed, "initial-condition seed")->capture_default_str();
  traj->add_option("--controller-on", controller_on, "control step at which the policy takes over")
      ->capture_default_str();
  traj->add_flag("--train-mode", traj_train_mode, "sample mu from the training set instead of the eval range");
  traj->add_option("--output", traj_out, "trajectory CSV path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    print_error(err, 2, "config", e.what());
    return 2;
  }

  try {
    if (train->parsed()) {
      const ExperimentConfig cfg = resolve_config(train, train_keys);
      if (show_config) {
        out << config_to_text(cfg);
        return 0;
      }
      TrainOptions opts;
      opts.resume = resume;
      opts.progress = quiet ? nullptr : &out;
      run_training(cfg, opts);
    } else if (eval->parsed()) {
      const RunLog log = run_evaluation(eval_ckpt, eval_mu);
      const std::filesystem::path path =
          eval_out.empty() ? std::filesystem::path(eval_ckpt) / "eval_cli.csv" : std::filesystem::path(eval_out);
      write_runlog(path, log.records);
      for (const auto& r : log.records) {
        out << "eval seed=" << r.seed << " mu=" << r.mu << " reward=" << r.cum_reward << '\n';
      }
    } else if (gen->parsed()) {
      ExperimentConfig cfg = resolve_config(gen, ref_keys);
      const std::filesystem::path path =
          ref_output.empty() ? std::filesystem::path(cfg.out) / "reference.bin" : std::filesystem::path(ref_output);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      save_reference(generate_reference(cfg.ns), path);
      out << "reference=" << path.string() << '\n';
    } else if (stats->parsed()) {
      std::vector<EpisodeRecord> records;
      for (const auto& p : stats_logs) {
        auto part = read_runlog(p);
        records.insert(records.end(), part.begin(), part.end());
      }
      stats_opts.boundaries = parse_phases(stats_phases);
      if (stats_out.empty()) {
        const auto tmp = std::filesystem::temp_directory_path() / "hyperl_stats.csv";
        write_stats_csv(records, stats_opts, tmp);
        std::ifstream in(tmp);
        out << in.rdbuf();
        std::filesystem::remove(tmp);
      } else {
        write_stats_csv(records, stats_opts, stats_out);
      }
    } else if (traj->parsed()) {
      ExperimentConfig cfg;
      std::optional<CheckpointData> data;
      if (!traj_ckpt.empty()) {
        data = load_checkpoint(first_seed_checkpoint(traj_ckpt));
        cfg = checkpoint_config(*data);
      } else {
        cfg = resolve_config(traj, traj_keys);
      }
      Trainer trainer(cfg, data ? data->seed : cfg.seeds.front());
      if (data) trainer.restore(*data);
      RolloutOptions ro;
      ro.controller_on_step = controller_on;
      Trajectory t;
      const EpisodeRecord rec =
          rollout(trainer.env(), data ? &trainer.agent() : nullptr, traj_seed,
                  traj_train_mode ? ResetMode::train : ResetMode::eval, traj_mu, ro, nullptr, &t);
      write_trajectory_csv(traj_out, t);
      if (cfg.env == "ns") {
        auto* ns = dynamic_cast<NsEnv*>(&trainer.env());
        std::filesystem::path final_path = traj_out;
        final_path.replace_extension();
        final_path += "_final.csv";
        write_ns_final_field_csv(final_path, t, cfg.ns, ns->reference());
      }
      out << "trajectory=" << traj_out << " mu=" << rec.mu << " reward=" << rec.cum_reward << '\n';
    }
  } catch (const ConfigError& e) {
    print_error(err, 2, "config", e.what());
    return 2;
  } catch (const DimensionError& e) {
    print_error(err, 2, "config", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error(err, 1, "runtime", e.what());
    return 1;
  }
  return 0;
}

int parse_and_dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return parse_and_dispatch(args, std::cout, std::cerr);
}

}  // namespace hyperl
