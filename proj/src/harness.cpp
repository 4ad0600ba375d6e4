#include "hyperl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "hyperl/errors.hpp"

namespace hyperl {
namespace {

constexpr std::uint64_t kTrainTag = 1;
constexpr std::uint64_t kEvalTag = 2;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

void drop_rows_after(const std::filesystem::path& path, std::uint64_t seed, int episode) {
  if (!std::filesystem::exists(path)) return;
  auto records = read_runlog(path);
  std::erase_if(records, [&](const EpisodeRecord& r) { return r.seed == seed && r.episode > episode; });
  write_runlog(path, records);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  Rng rng = make_rng(seed, (tag << 48) ^ index);
  return rng();
}

std::shared_ptr<const ReferenceTrajectory> ensure_reference(const ExperimentConfig& cfg) {
  if (!cfg.ns_reference.empty()) {
    auto ref = std::make_shared<ReferenceTrajectory>(load_reference(cfg.ns_reference));
    if (ref->n != cfg.ns.n || ref->control_steps != cfg.ns.control_steps || ref->mu_ref != cfg.ns.mu_ref ||
        ref->control_dt != cfg.ns.control_dt() || ref->schedule_intercept != cfg.ns.schedule_intercept ||
        ref->schedule_slope != cfg.ns.schedule_slope) {
      throw ConfigError("reference trajectory " + cfg.ns_reference + " does not match the ns settings");
    }
    return ref;
  }
  return std::make_shared<ReferenceTrajectory>(generate_reference(cfg.ns));
}

std::unique_ptr<Environment> make_env(const ExperimentConfig& cfg,
                                      std::shared_ptr<const ReferenceTrajectory> ns_ref) {
  if (cfg.env == "ks") return std::make_unique<KsEnv>(cfg.ks);
  if (cfg.env == "ns") {
    if (!ns_ref) ns_ref = ensure_reference(cfg);
    return std::make_unique<NsEnv>(cfg.ns, std::move(ns_ref));
  }
  if (cfg.env == "toy") return std::make_unique<DoubleIntegratorEnv>(cfg.toy);
  throw ConfigError("unknown env '" + cfg.env + "'");
}

EpisodeRecord rollout(Environment& env, const Agent* agent, std::uint64_t reset_seed, ResetMode mode,
                      std::optional<double> mu, const RolloutOptions& opts, Rng* rng,
                      Trajectory* traj) {
  const auto start = std::chrono::steady_clock::now();
  env.reset(reset_seed, mode, mu);
  EpisodeRecord rec;
  rec.phase = mode == ResetMode::train ? "train" : "eval";
  rec.mu = env.mu();
  if (traj) {
    traj->mu = env.mu();
    traj->initial_obs.assign(env.observation().begin(), env.observation().end());
    traj->steps.clear();
  }
  Rng fallback = make_rng(reset_seed, 0x726f6c6c);
  Rng& noise = rng ? *rng : fallback;
  const std::vector<double> zero(static_cast<std::size_t>(env.action_dim()), 0.0);
  for (int k = 0; k < env.horizon(); ++k) {
    const bool controlled = agent != nullptr && k >= opts.controller_on_step;
    const std::vector<double> a =
        controlled ? agent->select_action(env.observation(), env.mu(), opts.explore, noise) : zero;
    EnvStep s;
    try {
      s = env.step(a);
    } catch (const BlowUpError&) {
      rec.blowup = true;
      break;
    }
    rec.cum_reward += s.reward;
    rec.state_cost += s.state_cost;
    rec.action_cost += s.action_cost;
    ++rec.steps;
    if (traj) {
      StepRecord sr;
      sr.t_index = env.t_index();
      sr.mu = env.mu();
      sr.obs.assign(env.observation().begin(), env.observation().end());
      sr.action = env.physical_action(a);
      sr.reward = s.reward;
      sr.state_cost = s.state_cost;
      sr.action_cost = s.action_cost;
      sr.controlled = controlled;
      traj->steps.push_back(std::move(sr));
    }
  }
  if (opts.measure_wall_time) rec.wall_ms = elapsed_ms(start);
  return rec;
}

Trainer::Trainer(ExperimentConfig cfg, std::uint64_t seed,
                 std::shared_ptr<const ReferenceTrajectory> ns_ref)
    : cfg_(std::move(cfg)), seed_(seed) {
  env_ = make_env(cfg_, std::move(ns_ref));
  agent_ = make_agent(cfg_.agent, EnvInfo::from(*env_), seed_);
  buffer_ = ReplayBuffer(cfg_.replay_capacity, env_->observation_dim(), env_->action_dim());
  explore_rng_ = make_rng(seed_, 0x6578706c);
  train_rng_ = make_rng(seed_, 0x7472616e);
}

EpisodeRecord Trainer::train_episode() {
  const auto start = std::chrono::steady_clock::now();
  const int e = episode_ + 1;
  env_->reset(derive_seed(seed_, kTrainTag, static_cast<std::uint64_t>(e)), ResetMode::train, std::nullopt);
  EpisodeRecord rec;
  rec.phase = "train";
  rec.seed = seed_;
  rec.episode = e;
  rec.mu = env_->mu();
  const int horizon = env_->horizon();
  const int m = env_->action_dim();
  const int warmup = agent_->config().warmup_steps;
  Transition t;
  for (int k = 0; k < horizon; ++k) {
    t.obs.assign(env_->observation().begin(), env_->observation().end());
    std::vector<double> a;
    if (global_step_ < warmup) {
      a.resize(static_cast<std::size_t>(m));
      for (double& x : a) x = uniform(explore_rng_, -1.0, 1.0);
    } else {
      a = agent_->select_action(t.obs, env_->mu(), true, explore_rng_);
    }
    EnvStep s;
    try {
      s = env_->step(a);
    } catch (const BlowUpError&) {
      rec.blowup = true;
      break;
    }
    t.action = a;
    t.reward = s.reward;
    t.next_obs.assign(env_->observation().begin(), env_->observation().end());
    t.mu = env_->mu();
    t.done = k + 1 == horizon && env_->horizon_is_terminal();
    buffer_.push(t);
    ++global_step_;
    agent_->train_step(buffer_, train_rng_, global_step_);
    rec.cum_reward += s.reward;
    rec.state_cost += s.state_cost;
    rec.action_cost += s.action_cost;
    ++rec.steps;
  }
  episode_ = e;
  if (cfg_.log_wall_time) rec.wall_ms = elapsed_ms(start);
  return rec;
}

std::vector<EpisodeRecord> Trainer::evaluate(std::optional<double> mu_override) {
  const std::optional<double> mu = mu_override ? mu_override : cfg_.eval_mu;
  RolloutOptions opts;
  opts.measure_wall_time = cfg_.log_wall_time;
  std::vector<EpisodeRecord> out;
  for (int i = 0; i < cfg_.eval_mu_count; ++i) {
    const std::uint64_t index = (static_cast<std::uint64_t>(episode_) << 20) | static_cast<std::uint64_t>(i);
    EpisodeRecord r = rollout(*env_, agent_.get(), derive_seed(seed_, kEvalTag, index), ResetMode::eval, mu, opts);
    r.seed = seed_;
    r.episode = episode_;
    out.push_back(r);
  }
  return out;
}

CheckpointData Trainer::checkpoint() const {
  CheckpointData d;
  d.config_hash = config_hash(cfg_);
  d.seed = seed_;
  d.episode = episode_;
  d.global_step = global_step_;
  d.replay_size = buffer_.size();
  d.replay_cursor = buffer_.cursor();
  d.rng["explore"] = serialize_rng(explore_rng_);
  d.rng["train"] = serialize_rng(train_rng_);
  d.arrays = agent_->export_state();
  d.arrays.push_back({"replay", buffer_.storage()});
  d.config_text = config_to_text(cfg_);
  return d;
}

void Trainer::restore(const CheckpointData& d) {
  if (d.seed != seed_) throw ConfigError("checkpoint is for seed " + std::to_string(d.seed));
  if (d.config_hash != config_hash(cfg_)) throw ConfigError("checkpoint was written under a different config");
  agent_->import_state(d.arrays);
  auto it = std::find_if(d.arrays.begin(), d.arrays.end(), [](const NamedArray& a) { return a.name == "replay"; });
  if (it == d.arrays.end()) throw ConfigError("checkpoint lacks the replay buffer");
  buffer_.restore(it->values, d.replay_size, d.replay_cursor);
  auto rng_of = [&](const char* name) -> const std::string& {
    auto r = d.rng.find(name);
    if (r == d.rng.end()) throw ConfigError(std::string("checkpoint lacks rng stream ") + name);
    return r->second;
  };
  deserialize_rng(explore_rng_, rng_of("explore"));
  deserialize_rng(train_rng_, rng_of("train"));
  episode_ = d.episode;
  global_step_ = d.global_step;
}

std::filesystem::path checkpoint_dir(const std::filesystem::path& out, std::uint64_t seed) {
  return out / "ckpt" / ("seed_" + std::to_string(seed));
}

RunLog run_training(const ExperimentConfig& cfg_in, const TrainOptions& opts) {
  ExperimentConfig cfg = cfg_in;
  cfg.resolve();
  const std::filesystem::path out = cfg.out;
  std::filesystem::create_directories(out);

  std::shared_ptr<const ReferenceTrajectory> ref;
  if (cfg.env == "ns") {
    ref = ensure_reference(cfg);
    if (cfg.ns_reference.empty()) {
      const auto path = out / "reference.bin";
      save_reference(*ref, path);
      cfg.ns_reference = path.string();
    }
  }
  {
    std::ofstream frozen(out / "config.txt", std::ios::trunc);
    frozen << config_to_text(cfg);
  }

  const auto train_path = out / "train.csv";
  const auto eval_path = out / "eval.csv";
  std::vector<std::unique_ptr<Trainer>> trainers;
  for (std::uint64_t seed : cfg.seeds) {
    auto trainer = std::make_unique<Trainer>(cfg, seed, ref);
    const auto dir = checkpoint_dir(out, seed);
    if (opts.resume && std::filesystem::exists(dir / "manifest.txt")) {
      trainer->restore(load_checkpoint(dir));
      drop_rows_after(train_path, seed, trainer->episode());
      drop_rows_after(eval_path, seed, trainer->episode());
    } else if (opts.resume) {
      drop_rows_after(train_path, seed, 0);
      drop_rows_after(eval_path, seed, -1);
    }
    trainers.push_back(std::move(trainer));
  }

  RunLogWriter train_log(train_path, opts.resume);
  RunLogWriter eval_log(eval_path, opts.resume);
  RunLog log;
  for (auto& trainer : trainers) {
    while (trainer->episode() < cfg.episodes) {
      const EpisodeRecord rec = trainer->train_episode();
      train_log.write(rec);
      log.records.push_back(rec);
      if (opts.progress) {
        *opts.progress << "episode=" << rec.episode << " seed=" << rec.seed << " reward=" << fmt(rec.cum_reward)
                       << '\n' << std::flush;
      }
      const int e = trainer->episode();
      if (cfg.eval_every > 0 && e % cfg.eval_every == 0) {
        for (const auto& r : trainer->evaluate()) {
          eval_log.write(r);
          log.records.push_back(r);
        }
      }
      if ((cfg.checkpoint_every > 0 && e % cfg.checkpoint_every == 0) || e == cfg.episodes) {
        save_checkpoint(checkpoint_dir(out, trainer->seed()), trainer->checkpoint());
      }
    }
  }
  return log;
}

ExperimentConfig checkpoint_config(const CheckpointData& data) {
  return build_config(parse_config_text(data.config_text), {});
}

RunLog run_evaluation(const std::filesystem::path& root, std::optional<double> mu_override) {
  std::vector<std::filesystem::path> dirs;
  if (std::filesystem::exists(root / "manifest.txt")) {
    dirs.push_back(root);
  } else if (std::filesystem::is_directory(root)) {
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
      if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest.txt")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
  }
  if (dirs.empty()) throw ConfigError("no checkpoint found under " + root.string());
  RunLog log;
  for (const auto& dir : dirs) {
    const CheckpointData data = load_checkpoint(dir);
    const ExperimentConfig cfg = checkpoint_config(data);
    if (mu_override && cfg.env == "ks" && !(*mu_override >= cfg.ks.eval_mu_lo && *mu_override <= cfg.ks.eval_mu_hi)) {
      throw ConfigError("mu override outside the ks evaluation range");
    }
    Trainer trainer(cfg, data.seed);
    trainer.restore(data);
    for (const auto& r : trainer.evaluate(mu_override)) log.records.push_back(r);
  }
  return log;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  const std::size_t n = traj.initial_obs.size();
  const std::size_t m = traj.steps.empty() ? 0 : traj.steps.front().action.size();
  out << "t_index,mu,controlled";
  for (std::size_t i = 0; i < n; ++i) out << ",y_" << i;
  for (std::size_t i = 0; i < m; ++i) out << ",a_" << i;
  out << ",reward,state_cost,action_cost\n";
  out << 0 << ',' << fmt(traj.mu) << ',' << 0;
  for (double y : traj.initial_obs) out << ',' << fmt(y);
  for (std::size_t i = 0; i < m; ++i) out << ",0";
  out << ",0,0,0\n";
  for (const auto& s : traj.steps) {
    out << s.t_index << ',' << fmt(s.mu) << ',' << (s.controlled ? 1 : 0);
    for (double y : s.obs) out << ',' << fmt(y);
    for (double a : s.action) out << ',' << fmt(a);
    out << ',' << fmt(s.reward) << ',' << fmt(s.state_cost) << ',' << fmt(s.action_cost) << '\n';
  }
}

void write_ns_final_field_csv(const std::filesystem::path& path, const Trajectory& traj,
                              const NsConfig& cfg, const ReferenceTrajectory& ref) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  const std::vector<double>& y = traj.steps.empty() ? traj.initial_obs : traj.steps.back().obs;
  const int t = traj.steps.empty() ? 0 : traj.steps.back().t_index;
  const std::vector<double>& r = ref.fields.at(static_cast<std::size_t>(t));
  const int n = cfg.n;
  out << "i,j,x,y,u,v,u_ref,v_ref\n";
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const std::size_t k = (static_cast<std::size_t>(j) * n + i) * 2;
      out << i << ',' << j << ',' << fmt(i * cfg.h()) << ',' << fmt(j * cfg.h()) << ',' << fmt(y[k]) << ','
          << fmt(y[k + 1]) << ',' << fmt(r[k]) << ',' << fmt(r[k + 1]) << '\n';
    }
  }
}

}  // namespace hyperl
