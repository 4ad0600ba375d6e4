#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperl/adam.hpp"
#include "hyperl/encoder.hpp"
#include "hyperl/env.hpp"
#include "hyperl/mlp.hpp"
#include "hyperl/replay.hpp"
#include "hyperl/rng.hpp"

namespace hyperl {

struct Td3Config {
  double gamma = 0.99;
  double rho = 0.005;           // Polyak rate
  double explore_std = 0.1;     // normalized action units
  double target_noise = 0.2;
  double noise_clip = 0.5;
  int policy_delay = 2;
  int batch_size = 256;
  int warmup_steps = 1000;
  bool include_mu = false;
  AdamOptions actor_adam;
  AdamOptions critic_adam;

  void validate() const;
};

enum class AgentKind { td3_no_mu, td3_concat, hyperl_param, hyperl_state_param };

std::string to_string(AgentKind k);
AgentKind parse_agent_kind(const std::string& s);  // throws ConfigError

struct TrainDiagnostics {
  bool performed = false;
  std::string skipped;  // reason when not performed
  double critic_loss1 = 0.0;
  double critic_loss2 = 0.0;
  bool actor_updated = false;
  double actor_loss = 0.0;
  double target_mean = 0.0;
  double target_min = 0.0;
  double target_max = 0.0;
};

struct NamedArray {
  std::string name;
  std::vector<double> values;
};

// Optional convolutional front end turning field observations into
// features. Without an encoder, features are the observation itself.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int obs_dim, std::optional<EncoderSpec> spec, Rng& rng, AdamOptions adam);

  bool has_encoder() const { return encoder_.has_value(); }
  int obs_dim() const { return obs_dim_; }
  int dim() const { return encoder_ ? encoder_->spec().output_dim : obs_dim_; }
  ConvEncoder* encoder() { return encoder_ ? &*encoder_ : nullptr; }
  const ConvEncoder* encoder() const { return encoder_ ? &*encoder_ : nullptr; }

  Matrix infer(const Matrix& obs) const;
  // Training-mode forward that folds batch statistics into the running ones.
  Matrix train_forward(const Matrix& obs, EncoderTape& tape);
  // One Adam step on the encoder from d(loss)/d(features). No-op without
  // an encoder.
  void apply_gradient(const EncoderTape& tape, const Matrix& grad_features);

  void export_state(const std::string& prefix, std::vector<NamedArray>& out) const;
  void import_state(const std::string& prefix, const std::vector<NamedArray>& in);

 private:
  int obs_dim_ = 0;
  std::optional<ConvEncoder> encoder_;
  AdamState adam_;
};

// Shared interface for every agent variant. Actions are normalized to
// [-1, 1]^m; environments map them to physical units.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentKind kind() const = 0;
  virtual const Td3Config& config() const = 0;
  virtual int action_dim() const = 0;

  virtual std::vector<double> select_action(std::span<const double> obs, double mu, bool explore,
                                            Rng& rng) const = 0;
  // Gated: no-op unless global_step > warmup_steps and the buffer holds a
  // full batch.
  virtual TrainDiagnostics train_step(const ReplayBuffer& buffer, Rng& rng,
                                      std::int64_t global_step) = 0;

  virtual std::int64_t critic_updates() const = 0;
  virtual std::int64_t actor_updates() const = 0;

  virtual std::vector<NamedArray> export_state() const = 0;
  // Throws DimensionError when names or sizes disagree.
  virtual void import_state(const std::vector<NamedArray>& state) = 0;
};

struct AgentConfig {
  AgentKind kind = AgentKind::hyperl_param;
  Td3Config td3;
  std::vector<int> td3_hidden = {256, 256};
  std::vector<int> hyper_main_hidden = {256};
  std::vector<int> hyper_embed = {64, 64};
  EncoderSpec encoder;
};

struct EnvInfo {
  int obs_dim = 0;
  int action_dim = 0;
  MuNormalizer normalizer;
  bool field_observation = false;
  int field_height = 0;
  int field_width = 0;

  static EnvInfo from(const Environment& env);
};

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, const EnvInfo& env, std::uint64_t seed);

// Helpers shared by the agent implementations.
void adam_state_export(const std::string& prefix, const AdamState& s, std::vector<NamedArray>& out);
void adam_state_import(const std::string& prefix, AdamState& s, const std::vector<NamedArray>& in);
const std::vector<double>& find_array(const std::vector<NamedArray>& in, const std::string& name,
                                      std::size_t expected_size);
void polyak(std::span<double> target, std::span<const double> source, double rho);
void add_exploration(std::vector<double>& action, double std, Rng& rng);
// min(target Q1, target Q2) bootstrap: r + gamma (1 - done) min(q1, q2).
Vector td_target(const Vector& reward, const Vector& done, const Vector& q1, const Vector& q2,
                 double gamma);

}  // namespace hyperl
