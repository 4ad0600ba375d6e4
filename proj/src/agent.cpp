#include "hyperl/agent.hpp"

#include <algorithm>

#include "hyperl/errors.hpp"
#include "hyperl/hyper_td3.hpp"
#include "hyperl/td3.hpp"

namespace hyperl {

void Td3Config::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]");
  if (!(noise_clip > 0.0)) throw ConfigError("noise_clip must be positive");
  if (explore_std < 0.0 || target_noise < 0.0) throw ConfigError("noise std must be >= 0");
  if (policy_delay < 1) throw ConfigError("policy_delay must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
}

std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::td3_no_mu: return "td3_no_mu";
    case AgentKind::td3_concat: return "td3_concat";
    case AgentKind::hyperl_param: return "hyperl_param";
    case AgentKind::hyperl_state_param: return "hyperl_state_param";
  }
  return "?";
}

AgentKind parse_agent_kind(const std::string& s) {
  for (AgentKind k : {AgentKind::td3_no_mu, AgentKind::td3_concat, AgentKind::hyperl_param,
                      AgentKind::hyperl_state_param}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown agent '" + s + "'");
}

FeatureMap::FeatureMap(int obs_dim, std::optional<EncoderSpec> spec, Rng& rng, AdamOptions adam)
    : obs_dim_(obs_dim) {
  if (spec) {
    if (spec->input_dim() != obs_dim) {
      throw DimensionError("encoder input " + std::to_string(spec->input_dim()) +
                           " does not match observation " + std::to_string(obs_dim));
    }
    encoder_ = ConvEncoder::init(*spec, rng);
    adam_ = AdamState(encoder_->params().size(), adam);
  }
}

Matrix FeatureMap::infer(const Matrix& obs) const {
  if (!encoder_) return obs;
  return encoder_->infer(obs);
}

Matrix FeatureMap::train_forward(const Matrix& obs, EncoderTape& tape) {
  if (!encoder_) return obs;
  return encoder_->forward(obs, BatchNormMode::train, &tape, true);
}

void FeatureMap::apply_gradient(const EncoderTape& tape, const Matrix& grad_features) {
  if (!encoder_) return;
  std::vector<double> grad(encoder_->params().size(), 0.0);
  encoder_->backward(tape, grad_features, grad, nullptr);
  adam_step(adam_, encoder_->params(), grad);
}

void FeatureMap::export_state(const std::string& prefix, std::vector<NamedArray>& out) const {
  if (!encoder_) return;
  out.push_back({prefix + "params", encoder_->params()});
  out.push_back({prefix + "running", encoder_->running_stats()});
  adam_state_export(prefix + "adam.", adam_, out);
}

void FeatureMap::import_state(const std::string& prefix, const std::vector<NamedArray>& in) {
  if (!encoder_) return;
  encoder_->params() = find_array(in, prefix + "params", encoder_->params().size());
  encoder_->running_stats() = find_array(in, prefix + "running", encoder_->running_stats().size());
  adam_state_import(prefix + "adam.", adam_, in);
}

EnvInfo EnvInfo::from(const Environment& env) {
  EnvInfo info;
  info.obs_dim = env.observation_dim();
  info.action_dim = env.action_dim();
  info.normalizer = env.mu_normalizer();
  info.field_observation = env.field_observation();
  info.field_height = env.field_height();
  info.field_width = env.field_width();
  return info;
}

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, const EnvInfo& env, std::uint64_t seed) {
  std::optional<EncoderSpec> enc;
  if (env.field_observation) {
    EncoderSpec s = cfg.encoder;
    s.height = env.field_height;
    s.width = env.field_width;
    enc = s;
  }
  switch (cfg.kind) {
    case AgentKind::td3_no_mu:
    case AgentKind::td3_concat: {
      Td3Config t = cfg.td3;
      t.include_mu = cfg.kind == AgentKind::td3_concat;
      return std::make_unique<Td3Agent>(t, cfg.td3_hidden, env, enc, seed);
    }
    case AgentKind::hyperl_param:
    case AgentKind::hyperl_state_param: {
      HyperlOptions o;
      o.context = cfg.kind == AgentKind::hyperl_param ? ContextKind::param_only
                                                      : ContextKind::state_and_param;
      o.main_hidden = cfg.hyper_main_hidden;
      o.embed_dims = cfg.hyper_embed;
      return std::make_unique<HyperlAgent>(cfg.td3, o, env, enc, seed);
    }
  }
  throw ConfigError("unknown agent kind");
}

void adam_state_export(const std::string& prefix, const AdamState& s, std::vector<NamedArray>& out) {
  out.push_back({prefix + "m", s.first_moment});
  out.push_back({prefix + "v", s.second_moment});
  out.push_back({prefix + "t", {static_cast<double>(s.step_count)}});
}

void adam_state_import(const std::string& prefix, AdamState& s, const std::vector<NamedArray>& in) {
  s.first_moment = find_array(in, prefix + "m", s.first_moment.size());
  s.second_moment = find_array(in, prefix + "v", s.second_moment.size());
  s.step_count = static_cast<std::int64_t>(find_array(in, prefix + "t", 1)[0]);
}

const std::vector<double>& find_array(const std::vector<NamedArray>& in, const std::string& name,
                                      std::size_t expected_size) {
  auto it = std::find_if(in.begin(), in.end(), [&](const NamedArray& a) { return a.name == name; });
  if (it == in.end()) throw DimensionError("state array '" + name + "' missing");
  if (it->values.size() != expected_size) {
    throw DimensionError("state array '" + name + "' has " + std::to_string(it->values.size()) +
                         " values, expected " + std::to_string(expected_size));
  }
  return it->values;
}

void polyak(std::span<double> target, std::span<const double> source, double rho) {
  if (target.size() != source.size()) throw DimensionError("polyak: size mismatch");
  const auto n = static_cast<Eigen::Index>(target.size());
  Eigen::Map<Eigen::ArrayXd> t(target.data(), n);
  Eigen::Map<const Eigen::ArrayXd> s(source.data(), n);
  t = rho * s + (1.0 - rho) * t;
}

void add_exploration(std::vector<double>& action, double std, Rng& rng) {
  for (double& a : action) a = clip(a + normal(rng, 0.0, std), -1.0, 1.0);
}

Vector td_target(const Vector& reward, const Vector& done, const Vector& q1, const Vector& q2,
                 double gamma) {
  Vector out(reward.size());
  for (Eigen::Index i = 0; i < reward.size(); ++i) {
    out(i) = done(i) != 0.0 ? reward(i) : reward(i) + gamma * std::min(q1(i), q2(i));
  }
  return out;
}

}  // namespace hyperl
