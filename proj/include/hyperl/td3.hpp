#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hyperl/agent.hpp"

namespace hyperl {

struct TdTarget {
  Vector target;
  Vector q1;  // target critic 1 at the smoothed next action
  Vector q2;
};

// Twin-critic TD3 with delayed actor updates and target-policy smoothing.
// Network inputs are the features of the observation, followed by the
// normalized mu when include_mu is set.
class Td3Agent : public Agent {
 public:
  Td3Agent(Td3Config cfg, std::vector<int> hidden, EnvInfo env, std::optional<EncoderSpec> encoder,
           std::uint64_t seed);

  AgentKind kind() const override {
    return cfg_.include_mu ? AgentKind::td3_concat : AgentKind::td3_no_mu;
  }
  const Td3Config& config() const override { return cfg_; }
  Td3Config& mutable_config() { return cfg_; }
  int action_dim() const override { return env_.action_dim; }
  int input_dim() const { return features_.dim() + (cfg_.include_mu ? 1 : 0); }

  const MlpSpec& actor_spec() const { return actor_spec_; }
  const MlpSpec& critic_spec() const { return critic_spec_; }
  std::vector<double>& actor() { return actor_; }
  std::vector<double>& critic1() { return critic1_; }
  std::vector<double>& critic2() { return critic2_; }
  std::vector<double>& target_actor() { return target_actor_; }
  std::vector<double>& target_critic1() { return target_critic1_; }
  std::vector<double>& target_critic2() { return target_critic2_; }
  const std::vector<double>& target_actor() const { return target_actor_; }
  const std::vector<double>& target_critic1() const { return target_critic1_; }
  const std::vector<double>& target_critic2() const { return target_critic2_; }
  FeatureMap& features() { return features_; }

  // Stacks features and, if configured, the normalized mu row.
  Matrix net_inputs(const Matrix& features, const Vector& mu) const;

  std::vector<double> select_action(std::span<const double> obs, double mu, bool explore,
                                    Rng& rng) const override;
  TdTarget compute_td_target(const Batch& batch, Rng& rng) const;
  // One Adam step per critic on the mean squared TD error; returns the
  // pre-step losses.
  std::pair<double, double> update_critics(const Batch& batch, const Vector& target);
  // One Adam step on -mean Q1(y, pi(y)); returns the pre-step loss.
  double update_actor(const Batch& batch);
  void soft_update();

  TrainDiagnostics train_step(const ReplayBuffer& buffer, Rng& rng,
                              std::int64_t global_step) override;
  std::int64_t critic_updates() const override { return critic_updates_; }
  std::int64_t actor_updates() const override { return actor_updates_; }

  std::vector<NamedArray> export_state() const override;
  void import_state(const std::vector<NamedArray>& state) override;

 private:
  Td3Config cfg_;
  EnvInfo env_;
  FeatureMap features_;
  MlpSpec actor_spec_;
  MlpSpec critic_spec_;
  std::vector<double> actor_, critic1_, critic2_;
  std::vector<double> target_actor_, target_critic1_, target_critic2_;
  AdamState actor_adam_, critic1_adam_, critic2_adam_;
  std::int64_t critic_updates_ = 0;
  std::int64_t actor_updates_ = 0;
};

// Critic loss and its gradient w.r.t. the prediction: mean (q - y)^2.
double mse_loss(const Matrix& q, const Vector& target, Matrix* grad);

}  // namespace hyperl
