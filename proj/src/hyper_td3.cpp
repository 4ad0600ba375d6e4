#include "hyperl/hyper_td3.hpp"

#include <cmath>
#include <map>
#include <string>
#include <tuple>

#include "hyperl/errors.hpp"

namespace hyperl {
namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

Matrix gather_cols(const Matrix& m, const std::vector<Eigen::Index>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

std::span<const double> column(const Matrix& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

std::span<double> column(Matrix& m, Eigen::Index j) {
  return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

void check_finite_loss(double loss, const char* what, const Batch& batch) {
  if (std::isfinite(loss)) return;
  throw NonFiniteError(std::string(what) + " loss is non-finite (batch " +
                       std::to_string(batch.size()) + ")");
}

}  // namespace

std::vector<double> context_build(std::span<const double> y, double mu, ContextKind kind,
                                  const MuNormalizer& normalizer, bool field_observation,
                                  const ConvEncoder* encoder) {
  if (kind == ContextKind::param_only) return {normalizer(mu)};
  std::vector<double> z;
  if (field_observation) {
    if (!encoder) throw ConfigError("state_and_param context on a field observation needs an encoder");
    z = encode(*encoder, y);
  } else {
    z.assign(y.begin(), y.end());
  }
  z.push_back(normalizer(mu));
  return z;
}

ContextGroups group_contexts(const Matrix& contexts, bool merge_equal) {
  ContextGroups g;
  const Eigen::Index b = contexts.cols();
  if (!merge_equal) {
    g.unique = contexts;
    g.members.resize(static_cast<std::size_t>(b));
    for (Eigen::Index j = 0; j < b; ++j) g.members[static_cast<std::size_t>(j)] = {j};
    return g;
  }
  std::map<std::vector<double>, std::size_t> index;
  std::vector<Eigen::Index> first;
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto col = column(contexts, j);
    std::vector<double> key(col.begin(), col.end());
    auto [it, inserted] = index.emplace(std::move(key), g.members.size());
    if (inserted) {
      g.members.emplace_back();
      first.push_back(j);
    }
    g.members[it->second].push_back(j);
  }
  g.unique = gather_cols(contexts, first);
  return g;
}

Matrix generated_forward(const HyperSpec& spec, std::span<const double> hyper_params,
                         const ContextGroups& groups, const Matrix& inputs, GeneratedTape* tape) {
  HyperTape local;
  Matrix thetas = hyper_forward_batch(spec, hyper_params, groups.unique, tape ? &tape->hyper : &local);
  const MlpSpec& net = spec.target();
  Matrix out(net.output_dim(), inputs.cols());
  if (tape) tape->nets.assign(groups.members.size(), {});
  for (std::size_t g = 0; g < groups.members.size(); ++g) {
    const auto& cols = groups.members[g];
    const Matrix sub = mlp_forward_batch(net, column(thetas, static_cast<Eigen::Index>(g)),
                                         gather_cols(inputs, cols), tape ? &tape->nets[g] : nullptr);
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(cols[j]) = sub.col(static_cast<Eigen::Index>(j));
  }
  if (tape) tape->thetas = std::move(thetas);
  return out;
}

void generated_backward(const HyperSpec& spec, std::span<const double> hyper_params,
                        const ContextGroups& groups, const GeneratedTape& tape,
                        const Matrix& upstream, std::span<double> grad_hyper, Matrix* grad_inputs,
                        Matrix* grad_contexts) {
  const MlpSpec& net = spec.target();
  Matrix grad_thetas = Matrix::Zero(tape.thetas.rows(), tape.thetas.cols());
  if (grad_inputs) grad_inputs->resize(net.input_dim(), upstream.cols());
  for (std::size_t g = 0; g < groups.members.size(); ++g) {
    const auto& cols = groups.members[g];
    Matrix sub_grad_in;
    mlp_backward_batch(net, column(tape.thetas, static_cast<Eigen::Index>(g)), tape.nets[g],
                       gather_cols(upstream, cols), column(grad_thetas, static_cast<Eigen::Index>(g)),
                       grad_inputs ? &sub_grad_in : nullptr);
    if (grad_inputs) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        grad_inputs->col(cols[j]) = sub_grad_in.col(static_cast<Eigen::Index>(j));
      }
    }
  }
  if (grad_hyper.empty() && !grad_contexts) return;
  hyper_backward_batch(spec, hyper_params, tape.hyper, grad_thetas, grad_hyper, grad_contexts);
}

HyperlAgent::HyperlAgent(Td3Config cfg, HyperlOptions opts, EnvInfo env,
                         std::optional<EncoderSpec> encoder, std::uint64_t seed)
    : cfg_(cfg), opts_(std::move(opts)), env_(env) {
  cfg_.validate();
  Rng rng = make_rng(seed, 0x68746433);
  features_ = FeatureMap(env_.obs_dim, encoder, rng, cfg_.critic_adam);
  actor_spec_ = MlpSpec::dense(features_.dim(), opts_.main_hidden, env_.action_dim, Activation::tanh);
  critic_spec_ = MlpSpec::dense(features_.dim() + env_.action_dim, opts_.main_hidden, 1,
                                Activation::linear);
  h_actor_spec_ = HyperSpec(context_dim(), opts_.embed_dims, actor_spec_);
  h_critic_spec_ = HyperSpec(context_dim(), opts_.embed_dims, critic_spec_);
  h_actor_.assign(h_actor_spec_.total_params(), 0.0);
  h_critic1_.assign(h_critic_spec_.total_params(), 0.0);
  h_critic2_.assign(h_critic_spec_.total_params(), 0.0);
  hyper_init(h_actor_spec_, rng, h_actor_);
  hyper_init(h_critic_spec_, rng, h_critic1_);
  hyper_init(h_critic_spec_, rng, h_critic2_);
  target_h_actor_ = h_actor_;
  target_h_critic1_ = h_critic1_;
  target_h_critic2_ = h_critic2_;
  actor_adam_ = AdamState(h_actor_.size(), cfg_.actor_adam);
  critic1_adam_ = AdamState(h_critic1_.size(), cfg_.critic_adam);
  critic2_adam_ = AdamState(h_critic2_.size(), cfg_.critic_adam);
}

int HyperlAgent::context_dim() const {
  return opts_.context == ContextKind::param_only ? 1 : features_.dim() + 1;
}

Matrix HyperlAgent::contexts(const Matrix& feats, const Vector& mu) const {
  const Eigen::Index b = mu.size();
  if (opts_.context == ContextKind::param_only) {
    Matrix z(1, b);
    for (Eigen::Index j = 0; j < b; ++j) z(0, j) = env_.normalizer(mu(j));
    return z;
  }
  Matrix z(feats.rows() + 1, b);
  z.topRows(feats.rows()) = feats;
  for (Eigen::Index j = 0; j < b; ++j) z(feats.rows(), j) = env_.normalizer(mu(j));
  return z;
}

std::vector<double> HyperlAgent::context_of(std::span<const double> obs, double mu) const {
  return context_build(obs, mu, opts_.context, env_.normalizer, env_.field_observation,
                       features_.encoder());
}

Matrix HyperlAgent::target_contexts(const Batch& batch) const {
  return contexts(features_.infer(batch.next_obs), batch.mu);
}

std::vector<double> HyperlAgent::generate_actor(std::span<const double> z) const {
  const Matrix zc = Eigen::Map<const Vector>(z.data(), static_cast<Eigen::Index>(z.size()));
  const Matrix theta = hyper_forward_batch(h_actor_spec_, h_actor_, zc);
  return std::vector<double>(theta.data(), theta.data() + theta.size());
}

std::vector<double> HyperlAgent::select_action(std::span<const double> obs, double mu, bool explore,
                                               Rng& rng) const {
  if (obs.size() != static_cast<std::size_t>(env_.obs_dim)) {
    throw DimensionError("observation has " + std::to_string(obs.size()) + " entries, expected " +
                         std::to_string(env_.obs_dim));
  }
  const Matrix o = Eigen::Map<const Vector>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const Matrix f = features_.infer(o);
  const Matrix z = contexts(f, Vector::Constant(1, mu));
  const std::vector<double> theta = generate_actor(column(z, 0));
  const Matrix out = mlp_forward_batch(actor_spec_, theta, f);
  std::vector<double> a(out.data(), out.data() + out.size());
  if (explore) add_exploration(a, cfg_.explore_std, rng);
  return a;
}

TdTarget HyperlAgent::compute_td_target(const Batch& batch, Rng& rng) const {
  if (batch.size() == 0) throw DimensionError("empty batch");
  const Matrix next_feats = features_.infer(batch.next_obs);
  const ContextGroups groups = group_contexts(contexts(next_feats, batch.mu), merge_contexts());
  Matrix next_action = generated_forward(h_actor_spec_, target_h_actor_, groups, next_feats, nullptr);
  for (Eigen::Index j = 0; j < next_action.cols(); ++j) {
    for (Eigen::Index i = 0; i < next_action.rows(); ++i) {
      const double eps = clip(normal(rng, 0.0, cfg_.target_noise), -cfg_.noise_clip, cfg_.noise_clip);
      next_action(i, j) = clip(next_action(i, j) + eps, -1.0, 1.0);
    }
  }
  const Matrix critic_in = stack(next_feats, next_action);
  TdTarget t;
  t.q1 = generated_forward(h_critic_spec_, target_h_critic1_, groups, critic_in, nullptr).row(0).transpose();
  t.q2 = generated_forward(h_critic_spec_, target_h_critic2_, groups, critic_in, nullptr).row(0).transpose();
  t.target = td_target(batch.reward, batch.done, t.q1, t.q2, cfg_.gamma);
  return t;
}

std::pair<double, double> HyperlAgent::update_critics(const Batch& batch, const Vector& target) {
  if (batch.size() == 0) throw DimensionError("empty batch");
  EncoderTape enc_tape;
  const Matrix feats = features_.train_forward(batch.obs, enc_tape);
  const ContextGroups groups = group_contexts(contexts(feats, batch.mu), merge_contexts());
  const Matrix critic_in = stack(feats, batch.action);
  const bool want_feature_grad = features_.has_encoder();
  const bool context_has_features = opts_.context == ContextKind::state_and_param;

  double losses[2];
  Matrix grad_feats = Matrix::Zero(feats.rows(), feats.cols());
  std::vector<double>* params[2] = {&h_critic1_, &h_critic2_};
  AdamState* adams[2] = {&critic1_adam_, &critic2_adam_};
  std::vector<double>* grads[2] = {&grad_critic1_, &grad_critic2_};
  for (int c = 0; c < 2; ++c) {
    GeneratedTape tape;
    const Matrix q = generated_forward(h_critic_spec_, *params[c], groups, critic_in, &tape);
    Matrix upstream;
    losses[c] = mse_loss(q, target, &upstream);
    check_finite_loss(losses[c], c == 0 ? "critic 1" : "critic 2", batch);
    grads[c]->assign(params[c]->size(), 0.0);
    Matrix grad_in, grad_ctx;
    generated_backward(h_critic_spec_, *params[c], groups, tape, upstream, *grads[c],
                       want_feature_grad ? &grad_in : nullptr,
                       want_feature_grad && context_has_features ? &grad_ctx : nullptr);
    if (want_feature_grad) {
      grad_feats += grad_in.topRows(feats.rows());
      if (context_has_features) {
        // One group per column when contexts carry features.
        for (std::size_t g = 0; g < groups.members.size(); ++g) {
          grad_feats.col(groups.members[g][0]) +=
              grad_ctx.col(static_cast<Eigen::Index>(g)).topRows(feats.rows());
        }
      }
    }
  }
  for (int c = 0; c < 2; ++c) adam_step(*adams[c], *params[c], *grads[c]);
  features_.apply_gradient(enc_tape, grad_feats);
  return {losses[0], losses[1]};
}

double HyperlAgent::update_actor(const Batch& batch) {
  if (batch.size() == 0) throw DimensionError("empty batch");
  const Matrix feats = features_.infer(batch.obs);
  const ContextGroups groups = group_contexts(contexts(feats, batch.mu), merge_contexts());
  GeneratedTape actor_tape;
  const Matrix action = generated_forward(h_actor_spec_, h_actor_, groups, feats, &actor_tape);
  GeneratedTape critic_tape;
  const Matrix q = generated_forward(h_critic_spec_, h_critic1_, groups, stack(feats, action), &critic_tape);
  const double n = static_cast<double>(q.cols());
  const double loss = -q.sum() / n;
  check_finite_loss(loss, "actor", batch);

  const Matrix upstream = Matrix::Constant(1, q.cols(), -1.0 / n);
  Matrix grad_critic_in;
  generated_backward(h_critic_spec_, h_critic1_, groups, critic_tape, upstream, {}, &grad_critic_in,
                     nullptr);
  grad_actor_.assign(h_actor_.size(), 0.0);
  generated_backward(h_actor_spec_, h_actor_, groups, actor_tape,
                     grad_critic_in.bottomRows(env_.action_dim), grad_actor_, nullptr, nullptr);
  adam_step(actor_adam_, h_actor_, grad_actor_);
  return loss;
}

void HyperlAgent::soft_update() {
  polyak(target_h_actor_, h_actor_, cfg_.rho);
  polyak(target_h_critic1_, h_critic1_, cfg_.rho);
  polyak(target_h_critic2_, h_critic2_, cfg_.rho);
}

TrainDiagnostics HyperlAgent::train_step(const ReplayBuffer& buffer, Rng& rng,
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

std::vector<NamedArray> HyperlAgent::export_state() const {
  std::vector<NamedArray> out;
  out.push_back({"h_actor", h_actor_});
  out.push_back({"h_critic1", h_critic1_});
  out.push_back({"h_critic2", h_critic2_});
  out.push_back({"target_h_actor", target_h_actor_});
  out.push_back({"target_h_critic1", target_h_critic1_});
  out.push_back({"target_h_critic2", target_h_critic2_});
  adam_state_export("adam.actor.", actor_adam_, out);
  adam_state_export("adam.critic1.", critic1_adam_, out);
  adam_state_export("adam.critic2.", critic2_adam_, out);
  features_.export_state("encoder.", out);
  out.push_back({"updates", {static_cast<double>(critic_updates_), static_cast<double>(actor_updates_)}});
  return out;
}

void HyperlAgent::import_state(const std::vector<NamedArray>& in) {
  h_actor_ = find_array(in, "h_actor", h_actor_.size());
  h_critic1_ = find_array(in, "h_critic1", h_critic1_.size());
  h_critic2_ = find_array(in, "h_critic2", h_critic2_.size());
  target_h_actor_ = find_array(in, "target_h_actor", target_h_actor_.size());
  target_h_critic1_ = find_array(in, "target_h_critic1", target_h_critic1_.size());
  target_h_critic2_ = find_array(in, "target_h_critic2", target_h_critic2_.size());
  adam_state_import("adam.actor.", actor_adam_, in);
  adam_state_import("adam.critic1.", critic1_adam_, in);
  adam_state_import("adam.critic2.", critic2_adam_, in);
  features_.import_state("encoder.", in);
  const auto& u = find_array(in, "updates", 2);
  critic_updates_ = static_cast<std::int64_t>(u[0]);
  actor_updates_ = static_cast<std::int64_t>(u[1]);
}

}  // namespace hyperl
