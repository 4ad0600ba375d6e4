#include "hyperl/td3.hpp"

#include <cmath>
#include <string>
#include <tuple>

#include "hyperl/errors.hpp"

namespace hyperl {

double mse_loss(const Matrix& q, const Vector& target, Matrix* grad) {
  const double n = static_cast<double>(target.size());
  const Vector diff = q.row(0).transpose() - target;
  if (grad) *grad = (2.0 / n) * diff.transpose();
  return diff.squaredNorm() / n;
}

namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

void check_finite_loss(double loss, const char* what, const Batch& batch) {
  if (std::isfinite(loss)) return;
  throw NonFiniteError(std::string(what) + " loss is non-finite (batch " +
                       std::to_string(batch.size()) + ", reward range [" +
                       std::to_string(batch.reward.minCoeff()) + ", " +
                       std::to_string(batch.reward.maxCoeff()) + "])");
}

}  // namespace

Td3Agent::Td3Agent(Td3Config cfg, std::vector<int> hidden, EnvInfo env,
                   std::optional<EncoderSpec> encoder, std::uint64_t seed)
    : cfg_(cfg), env_(env) {
  cfg_.validate();
  Rng rng = make_rng(seed, 0x74643320);
  features_ = FeatureMap(env_.obs_dim, encoder, rng, cfg_.critic_adam);
  actor_spec_ = MlpSpec::dense(input_dim(), hidden, env_.action_dim, Activation::tanh);
  critic_spec_ = MlpSpec::dense(input_dim() + env_.action_dim, hidden, 1, Activation::linear);
  actor_.assign(actor_spec_.total_params(), 0.0);
  critic1_.assign(critic_spec_.total_params(), 0.0);
  critic2_.assign(critic_spec_.total_params(), 0.0);
  init_params(actor_spec_, rng, actor_);
  init_params(critic_spec_, rng, critic1_);
  init_params(critic_spec_, rng, critic2_);
  target_actor_ = actor_;
  target_critic1_ = critic1_;
  target_critic2_ = critic2_;
  actor_adam_ = AdamState(actor_.size(), cfg_.actor_adam);
  critic1_adam_ = AdamState(critic1_.size(), cfg_.critic_adam);
  critic2_adam_ = AdamState(critic2_.size(), cfg_.critic_adam);
}

Matrix Td3Agent::net_inputs(const Matrix& features, const Vector& mu) const {
  if (!cfg_.include_mu) return features;
  Matrix out(features.rows() + 1, features.cols());
  out.topRows(features.rows()) = features;
  for (Eigen::Index j = 0; j < features.cols(); ++j) out(features.rows(), j) = env_.normalizer(mu(j));
  return out;
}

std::vector<double> Td3Agent::select_action(std::span<const double> obs, double mu, bool explore,
                                            Rng& rng) const {
  if (obs.size() != static_cast<std::size_t>(env_.obs_dim)) {
    throw DimensionError("observation has " + std::to_string(obs.size()) + " entries, expected " +
                         std::to_string(env_.obs_dim));
  }
  const Matrix o = Eigen::Map<const Vector>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const Vector m = Vector::Constant(1, mu);
  const Matrix out = mlp_forward_batch(actor_spec_, actor_, net_inputs(features_.infer(o), m));
  std::vector<double> a(out.data(), out.data() + out.size());
  if (explore) add_exploration(a, cfg_.explore_std, rng);
  return a;
}

TdTarget Td3Agent::compute_td_target(const Batch& batch, Rng& rng) const {
  if (batch.size() == 0) throw DimensionError("empty batch");
  const Matrix next_in = net_inputs(features_.infer(batch.next_obs), batch.mu);
  Matrix next_action = mlp_forward_batch(actor_spec_, target_actor_, next_in);
  for (Eigen::Index j = 0; j < next_action.cols(); ++j) {
    for (Eigen::Index i = 0; i < next_action.rows(); ++i) {
      const double eps = clip(normal(rng, 0.0, cfg_.target_noise), -cfg_.noise_clip, cfg_.noise_clip);
      next_action(i, j) = clip(next_action(i, j) + eps, -1.0, 1.0);
    }
  }
  const Matrix critic_in = stack(next_in, next_action);
  TdTarget t;
  t.q1 = mlp_forward_batch(critic_spec_, target_critic1_, critic_in).row(0).transpose();
  t.q2 = mlp_forward_batch(critic_spec_, target_critic2_, critic_in).row(0).transpose();
  t.target = td_target(batch.reward, batch.done, t.q1, t.q2, cfg_.gamma);
  return t;
}

std::pair<double, double> Td3Agent::update_critics(const Batch& batch, const Vector& target) {
  if (batch.size() == 0) throw DimensionError("empty batch");
  EncoderTape enc_tape;
  const Matrix feats = features_.train_forward(batch.obs, enc_tape);
  const Matrix critic_in = stack(net_inputs(feats, batch.mu), batch.action);

  double losses[2];
  Matrix grad_feats = Matrix::Zero(feats.rows(), feats.cols());
  std::vector<double>* params[2] = {&critic1_, &critic2_};
  AdamState* adams[2] = {&critic1_adam_, &critic2_adam_};
  std::vector<double> grads[2];
  for (int c = 0; c < 2; ++c) {
    MlpTape tape;
    const Matrix q = mlp_forward_batch(critic_spec_, *params[c], critic_in, &tape);
    Matrix upstream;
    losses[c] = mse_loss(q, target, &upstream);
    check_finite_loss(losses[c], c == 0 ? "critic 1" : "critic 2", batch);
    grads[c].assign(params[c]->size(), 0.0);
    Matrix grad_in;
    mlp_backward_batch(critic_spec_, *params[c], tape, upstream, grads[c],
                       features_.has_encoder() ? &grad_in : nullptr);
    if (features_.has_encoder()) grad_feats += grad_in.topRows(feats.rows());
  }
  for (int c = 0; c < 2; ++c) adam_step(*adams[c], *params[c], grads[c]);
  features_.apply_gradient(enc_tape, grad_feats);
  return {losses[0], losses[1]};
}

double Td3Agent::update_actor(const Batch& batch) {
  if (batch.size() == 0) throw DimensionError("empty batch");
  const Matrix in = net_inputs(features_.infer(batch.obs), batch.mu);
  MlpTape actor_tape;
  const Matrix action = mlp_forward_batch(actor_spec_, actor_, in, &actor_tape);
  MlpTape critic_tape;
  const Matrix q = mlp_forward_batch(critic_spec_, critic1_, stack(in, action), &critic_tape);
  const double n = static_cast<double>(q.cols());
  const double loss = -q.sum() / n;
  check_finite_loss(loss, "actor", batch);

  const Matrix upstream = Matrix::Constant(1, q.cols(), -1.0 / n);
  std::vector<double> critic_scratch(critic1_.size(), 0.0);
  Matrix grad_critic_in;
  mlp_backward_batch(critic_spec_, critic1_, critic_tape, upstream, critic_scratch, &grad_critic_in);
  std::vector<double> grad(actor_.size(), 0.0);
  mlp_backward_batch(actor_spec_, actor_, actor_tape, grad_critic_in.bottomRows(env_.action_dim), grad,
                     nullptr);
  adam_step(actor_adam_, actor_, grad);
  return loss;
}

void Td3Agent::soft_update() {
  polyak(target_actor_, actor_, cfg_.rho);
  polyak(target_critic1_, critic1_, cfg_.rho);
  polyak(target_critic2_, critic2_, cfg_.rho);
}

TrainDiagnostics Td3Agent::train_step(const ReplayBuffer& buffer, Rng& rng,
                                      std::int64_t global_step) {
  TrainDiagnostics d;
  if (global_step <= cfg_.warmup_steps) {
    d.skipped = "warmup";
    return d;
  }
  if (buffer.size() < static_cast<std::size_t>(cfg_.batch_size)) {
    d.skipped = "buffer";
    return d;
  }
  const Batch batch = buffer.sample(static_cast<std::size_t>(cfg_.batch_size), rng);
  const TdTarget t = compute_td_target(batch, rng);
  std::tie(d.critic_loss1, d.critic_loss2) = update_critics(batch, t.target);
  ++critic_updates_;
  if (critic_updates_ % cfg_.policy_delay == 0) {
    d.actor_loss = update_actor(batch);
    soft_update();
    d.actor_updated = true;
    ++actor_updates_;
  }
  d.performed = true;
  d.target_mean = t.target.mean();
  d.target_min = t.target.minCoeff();
  d.target_max = t.target.maxCoeff();
  return d;
}

std::vector<NamedArray> Td3Agent::export_state() const {
  std::vector<NamedArray> out;
  out.push_back({"actor", actor_});
  out.push_back({"critic1", critic1_});
  out.push_back({"critic2", critic2_});
  out.push_back({"target_actor", target_actor_});
  out.push_back({"target_critic1", target_critic1_});
  out.push_back({"target_critic2", target_critic2_});
  adam_state_export("adam.actor.", actor_adam_, out);
  adam_state_export("adam.critic1.", critic1_adam_, out);
  adam_state_export("adam.critic2.", critic2_adam_, out);
  features_.export_state("encoder.", out);
  out.push_back({"updates", {static_cast<double>(critic_updates_), static_cast<double>(actor_updates_)}});
  return out;
}

void Td3Agent::import_state(const std::vector<NamedArray>& in) {
  actor_ = find_array(in, "actor", actor_.size());
  critic1_ = find_array(in, "critic1", critic1_.size());
  critic2_ = find_array(in, "critic2", critic2_.size());
  target_actor_ = find_array(in, "target_actor", target_actor_.size());
  target_critic1_ = find_array(in, "target_critic1", target_critic1_.size());
  target_critic2_ = find_array(in, "target_critic2", target_critic2_.size());
  adam_state_import("adam.actor.", actor_adam_, in);
  adam_state_import("adam.critic1.", critic1_adam_, in);
  adam_state_import("adam.critic2.", critic2_adam_, in);
  features_.import_state("encoder.", in);
  const auto& u = find_array(in, "updates", 2);
  critic_updates_ = static_cast<std::int64_t>(u[0]);
  actor_updates_ = static_cast<std::int64_t>(u[1]);
}

}  // namespace hyperl
