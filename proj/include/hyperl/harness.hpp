#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "hyperl/agent.hpp"
#include "hyperl/checkpoint.hpp"
#include "hyperl/config.hpp"
#include "hyperl/replay.hpp"
#include "hyperl/runlog.hpp"

namespace hyperl {

// Independent 64-bit seed for (master seed, purpose tag, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index);

// Loads cfg.ns_reference when set, otherwise generates the trajectory.
std::shared_ptr<const ReferenceTrajectory> ensure_reference(const ExperimentConfig& cfg);

std::unique_ptr<Environment> make_env(const ExperimentConfig& cfg,
                                      std::shared_ptr<const ReferenceTrajectory> ns_ref = nullptr);

struct StepRecord {
  int t_index = 0;                 // index after the step
  double mu = 0.0;
  std::vector<double> obs;         // state after the step
  std::vector<double> action;      // physical units
  double reward = 0.0;
  double state_cost = 0.0;
  double action_cost = 0.0;
  bool controlled = true;
};

struct Trajectory {
  double mu = 0.0;
  std::vector<double> initial_obs;
  std::vector<StepRecord> steps;
};

struct RolloutOptions {
  bool explore = false;
  // Steps before this index apply the zero normalized action.
  int controller_on_step = 0;
  bool measure_wall_time = false;
};

// One episode with a deterministic policy (or exploration when asked). A
// null agent applies the zero normalized action throughout. Blow-ups end the
// episode and set the record's flag.
EpisodeRecord rollout(Environment& env, const Agent* agent, std::uint64_t reset_seed, ResetMode mode,
                      std::optional<double> mu, const RolloutOptions& opts, Rng* rng = nullptr,
                      Trajectory* traj = nullptr);

// Training state of one seed: environment, agent, replay buffer and RNG
// streams, advanced one episode at a time.
class Trainer {
 public:
  Trainer(ExperimentConfig cfg, std::uint64_t seed,
          std::shared_ptr<const ReferenceTrajectory> ns_ref = nullptr);

  const ExperimentConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  int episode() const { return episode_; }
  std::int64_t global_step() const { return global_step_; }
  Agent& agent() { return *agent_; }
  const Agent& agent() const { return *agent_; }
  Environment& env() { return *env_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  EpisodeRecord train_episode();
  // cfg.eval_mu_count deterministic episodes; mu_override beats cfg.eval_mu.
  std::vector<EpisodeRecord> evaluate(std::optional<double> mu_override = std::nullopt);

  CheckpointData checkpoint() const;
  // Throws ConfigError when the checkpoint belongs to another seed/config.
  void restore(const CheckpointData& data);

 private:
  ExperimentConfig cfg_;
  std::uint64_t seed_;
  std::unique_ptr<Environment> env_;
  std::unique_ptr<Agent> agent_;
  ReplayBuffer buffer_;
  Rng explore_rng_;
  Rng train_rng_;
  int episode_ = 0;
  std::int64_t global_step_ = 0;
};

struct RunLog {
  std::vector<EpisodeRecord> records;
};

struct TrainOptions {
  bool resume = false;
  std::ostream* progress = nullptr;  // "episode=<n> seed=<s> reward=<r>" lines
};

std::filesystem::path checkpoint_dir(const std::filesystem::path& out, std::uint64_t seed);

// Trains every seed of cfg into cfg.out: config.txt, train.csv, eval.csv and
// ckpt/seed_<s>/.
RunLog run_training(const ExperimentConfig& cfg, const TrainOptions& opts = {});

// Evaluates every seed checkpoint below `checkpoint_root` (a ckpt directory
// or one seed_<s> directory).
RunLog run_evaluation(const std::filesystem::path& checkpoint_root, std::optional<double> mu_override);

// Resolved configuration stored in a checkpoint.
ExperimentConfig checkpoint_config(const CheckpointData& data);

// Columns: t_index, mu, controlled, y_0..y_{n-1}, a_0..a_{m-1}, reward,
// state_cost, action_cost. Row 0 holds the initial state with zero action.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
// NS final field: i, j, x, y, u, v, u_ref, v_ref.
void write_ns_final_field_csv(const std::filesystem::path& path, const Trajectory& traj,
                              const NsConfig& cfg, const ReferenceTrajectory& ref);

}  // namespace hyperl
