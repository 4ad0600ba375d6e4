#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hyperl/agent.hpp"
#include "hyperl/hypernet.hpp"
#include "hyperl/td3.hpp"

namespace hyperl {

struct HyperlOptions {
  ContextKind context = ContextKind::param_only;
  std::vector<int> main_hidden = {256};
  std::vector<int> embed_dims = {64, 64};
};

// param_only: [normalize(mu)]. state_and_param: [y or encode(y), normalize(mu)].
// Field observations need an encoder for state_and_param (ConfigError
// otherwise).
std::vector<double> context_build(std::span<const double> y, double mu, ContextKind kind,
                                  const MuNormalizer& normalizer, bool field_observation,
                                  const ConvEncoder* encoder);

// Columns of a context batch grouped by exact equality. Grouping is only
// applied to param_only contexts; state_and_param contexts keep one group
// per column.
struct ContextGroups {
  Matrix unique;                                  // context_dim x G
  std::vector<std::vector<Eigen::Index>> members;  // column indices per group
};
ContextGroups group_contexts(const Matrix& contexts, bool merge_equal);

// Tape of a main network evaluated under hypernetwork-generated parameters.
struct GeneratedTape {
  HyperTape hyper;
  Matrix thetas;  // target_params x G
  std::vector<MlpTape> nets;
};

// Output (out_dim x B) of the main network whose parameters are generated
// per group from the group's context.
Matrix generated_forward(const HyperSpec& spec, std::span<const double> hyper_params,
                         const ContextGroups& groups, const Matrix& inputs, GeneratedTape* tape);
// Accumulates d(loss)/d(hyper params); optionally returns d(loss)/d(inputs)
// and d(loss)/d(group contexts). An empty grad_hyper with no grad_contexts
// stops after the input gradients.
void generated_backward(const HyperSpec& spec, std::span<const double> hyper_params,
                        const ContextGroups& groups, const GeneratedTape& tape,
                        const Matrix& upstream, std::span<double> grad_hyper, Matrix* grad_inputs,
                        Matrix* grad_contexts);

// TD3 whose actor and twin critics are generated by hypernetworks from a
// context z. Targets are hypernetworks too, Polyak-averaged in hypernetwork
// parameter space; target networks are generated from the next-state
// context.
class HyperlAgent : public Agent {
 public:
  HyperlAgent(Td3Config cfg, HyperlOptions opts, EnvInfo env, std::optional<EncoderSpec> encoder,
              std::uint64_t seed);

  AgentKind kind() const override {
    return opts_.context == ContextKind::param_only ? AgentKind::hyperl_param
                                                    : AgentKind::hyperl_state_param;
  }
  const Td3Config& config() const override { return cfg_; }
  Td3Config& mutable_config() { return cfg_; }
  const HyperlOptions& options() const { return opts_; }
  int action_dim() const override { return env_.action_dim; }
  int context_dim() const;

  const MlpSpec& actor_spec() const { return actor_spec_; }
  const MlpSpec& critic_spec() const { return critic_spec_; }
  const HyperSpec& actor_hyper_spec() const { return h_actor_spec_; }
  const HyperSpec& critic_hyper_spec() const { return h_critic_spec_; }
  std::vector<double>& h_actor() { return h_actor_; }
  std::vector<double>& h_critic1() { return h_critic1_; }
  std::vector<double>& h_critic2() { return h_critic2_; }
  std::vector<double>& target_h_actor() { return target_h_actor_; }
  std::vector<double>& target_h_critic1() { return target_h_critic1_; }
  std::vector<double>& target_h_critic2() { return target_h_critic2_; }
  const std::vector<double>& target_h_actor() const { return target_h_actor_; }
  const std::vector<double>& target_h_critic1() const { return target_h_critic1_; }
  const std::vector<double>& target_h_critic2() const { return target_h_critic2_; }
  FeatureMap& features() { return features_; }

  // z per column from features and mu.
  Matrix contexts(const Matrix& features, const Vector& mu) const;
  std::vector<double> context_of(std::span<const double> obs, double mu) const;
  // Contexts the target networks are generated from: built from next_obs.
  Matrix target_contexts(const Batch& batch) const;
  // Actor parameters generated for one context.
  std::vector<double> generate_actor(std::span<const double> z) const;

  std::vector<double> select_action(std::span<const double> obs, double mu, bool explore,
                                    Rng& rng) const override;
  TdTarget compute_td_target(const Batch& batch, Rng& rng) const;
  std::pair<double, double> update_critics(const Batch& batch, const Vector& target);
  double update_actor(const Batch& batch);
  void soft_update();

  TrainDiagnostics train_step(const ReplayBuffer& buffer, Rng& rng,
                              std::int64_t global_step) override;
  std::int64_t critic_updates() const override { return critic_updates_; }
  std::int64_t actor_updates() const override { return actor_updates_; }

  std::vector<NamedArray> export_state() const override;
  void import_state(const std::vector<NamedArray>& state) override;

 private:
  bool merge_contexts() const { return opts_.context == ContextKind::param_only; }

  Td3Config cfg_;
  HyperlOptions opts_;
  EnvInfo env_;
  FeatureMap features_;
  MlpSpec actor_spec_;
  MlpSpec critic_spec_;
  HyperSpec h_actor_spec_;
  HyperSpec h_critic_spec_;
  std::vector<double> h_actor_, h_critic1_, h_critic2_;
  std::vector<double> target_h_actor_, target_h_critic1_, target_h_critic2_;
  AdamState actor_adam_, critic1_adam_, critic2_adam_;
  std::vector<double> grad_actor_, grad_critic1_, grad_critic2_;
  std::int64_t critic_updates_ = 0;
  std::int64_t actor_updates_ = 0;
};

}  // namespace hyperl
