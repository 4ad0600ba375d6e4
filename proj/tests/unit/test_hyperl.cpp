#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "hyperl/errors.hpp"
#include "hyperl/hyper_td3.hpp"
#include "hyperl/ks_env.hpp"
#include "oracles.hpp"

using namespace hyperl;

namespace {

EnvInfo small_env(int obs = 3, int act = 2) {
  EnvInfo e;
  e.obs_dim = obs;
  e.action_dim = act;
  e.normalizer = {-0.5, 0.5};
  return e;
}

Td3Config small_cfg() {
  Td3Config c;
  c.batch_size = 4;
  c.warmup_steps = 10;
  return c;
}

HyperlOptions tiny(ContextKind kind) {
  HyperlOptions o;
  o.context = kind;
  o.main_hidden = {5};
  o.embed_dims = {4};
  return o;
}

Batch random_batch(int n, int obs, int act, std::uint64_t seed) {
  Rng rng = make_rng(seed, 3);
  Batch b;
  b.obs = Matrix(obs, n);
  b.next_obs = Matrix(obs, n);
  b.action = Matrix(act, n);
  b.reward = Vector(n);
  b.mu = Vector(n);
  b.done = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < obs; ++i) {
      b.obs(i, j) = uniform(rng, -1.0, 1.0);
      b.next_obs(i, j) = uniform(rng, -1.0, 1.0);
    }
    for (int i = 0; i < act; ++i) b.action(i, j) = uniform(rng, -1.0, 1.0);
    b.reward(j) = uniform(rng, -2.0, 0.0);
    b.mu(j) = uniform(rng, -0.5, 0.5);
  }
  return b;
}

ReplayBuffer filled_buffer(int n, int obs, int act) {
  ReplayBuffer buf(100, obs, act);
  const Batch b = random_batch(n, obs, act, 77);
  for (int j = 0; j < n; ++j) {
    Transition t;
    t.obs.assign(b.obs.col(j).data(), b.obs.col(j).data() + obs);
    t.next_obs.assign(b.next_obs.col(j).data(), b.next_obs.col(j).data() + obs);
    t.action.assign(b.action.col(j).data(), b.action.col(j).data() + act);
    t.reward = b.reward(j);
    t.mu = b.mu(j);
    buf.push(t);
  }
  return buf;
}

Matrix stack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

}  // namespace

TEST_SUITE("hyperl") {

TEST_CASE("context construction") {
  const KsEnv env;
  const MuNormalizer n = env.mu_normalizer();
  const std::vector<double> y(64, 0.5);
  CHECK(context_build(y, 0.225, ContextKind::param_only, n, false, nullptr) == std::vector<double>{1.0});
  CHECK(context_build(y, 0.0, ContextKind::param_only, n, false, nullptr) == std::vector<double>{0.0});
  const auto z = context_build(y, 0.1125, ContextKind::state_and_param, n, false, nullptr);
  REQUIRE(z.size() == 65);
  CHECK(z[0] == 0.5);
  CHECK(z[64] == doctest::Approx(0.5));
  CHECK_THROWS_AS(context_build(std::vector<double>(882, 0.0), 0.05, ContextKind::state_and_param, n, true,
                                nullptr),
                  ConfigError);
  const ConvEncoder enc{EncoderSpec{}};
  CHECK(context_build(std::vector<double>(882, 0.0), 0.05, ContextKind::state_and_param, n, true, &enc)
            .size() == 21);
}

TEST_CASE("context grouping") {
  Matrix z(1, 5);
  z << 0.1, -0.2, 0.1, 0.3, -0.2;
  const ContextGroups merged = group_contexts(z, true);
  CHECK(merged.unique.cols() == 3);
  std::set<Eigen::Index> all;
  for (std::size_t g = 0; g < merged.members.size(); ++g) {
    for (Eigen::Index j : merged.members[g]) {
      CHECK(z(0, j) == merged.unique(0, static_cast<Eigen::Index>(g)));
      all.insert(j);
    }
  }
  CHECK(all.size() == 5);
  CHECK(group_contexts(z, false).unique.cols() == 5);
}

TEST_CASE("construction and zero hypernetwork") {
  HyperlAgent a(small_cfg(), tiny(ContextKind::param_only), small_env(), std::nullopt, 1);
  CHECK(a.target_h_actor() == a.h_actor());
  CHECK(a.target_h_critic1() == a.h_critic1());
  CHECK(a.target_h_critic2() == a.h_critic2());
  CHECK(a.context_dim() == 1);
  CHECK(a.kind() == AgentKind::hyperl_param);
  CHECK(a.actor_spec().layers().front().in_dim == 3);
  CHECK(a.critic_spec().layers().front().in_dim == 5);

  std::fill(a.h_actor().begin(), a.h_actor().end(), 0.0);
  Rng rng = make_rng(0, 0);
  for (double mu : {-0.4, 0.0, 0.3}) {
    for (double v : a.select_action(std::vector<double>{0.3, 1.0, -2.0}, mu, false, rng)) CHECK(v == 0.0);
  }
}

TEST_CASE("param_only generation ignores the state") {
  HyperlAgent a(small_cfg(), tiny(ContextKind::param_only), small_env(), std::nullopt, 2);
  const std::vector<double> y1{0.1, 0.2, 0.3}, y2{-0.5, 0.9, 0.0};
  CHECK(a.context_of(y1, 0.2) == a.context_of(y2, 0.2));
  CHECK(a.generate_actor(a.context_of(y1, 0.2)) == a.generate_actor(a.context_of(y2, 0.2)));
  // The action is the generated actor applied to y.
  Rng rng = make_rng(0, 0);
  const auto theta = a.generate_actor(a.context_of(y1, 0.2));
  const auto expected = oracle::mlp({{3, 5, 0}, {5, 2, 1}}, theta, y2);
  const auto got = a.select_action(y2, 0.2, false, rng);
  for (int i = 0; i < 2; ++i) CHECK(std::abs(got[i] - expected[i]) < 1e-14);
  CHECK(a.select_action(y1, 0.2, false, rng) == a.select_action(y1, 0.2, false, rng));
}

TEST_CASE("state_and_param actions depend on mu") {
  HyperlAgent a(small_cfg(), tiny(ContextKind::state_and_param), small_env(), std::nullopt, 3);
  CHECK(a.kind() == AgentKind::hyperl_state_param);
  CHECK(a.context_dim() == 4);
  Rng rng = make_rng(0, 0);
  const std::vector<double> y{0.4, -0.1, 0.7};
  CHECK(a.select_action(y, -0.3, false, rng) != a.select_action(y, 0.3, false, rng));
  const auto z = a.context_of(y, 0.25);
  CHECK(z == std::vector<double>{0.4, -0.1, 0.7, 0.5});
}

TEST_CASE("distinct mu give distinct generated critics") {
  HyperlOptions opts = tiny(ContextKind::param_only);
  opts.embed_dims = {64, 64};
  HyperlAgent a(small_cfg(), opts, small_env(), std::nullopt, 4);
  const Batch b = random_batch(6, 3, 2, 5);
  const Matrix z = a.contexts(b.obs, b.mu);
  const Matrix thetas = hyper_forward_batch(a.critic_hyper_spec(), a.h_critic1(), z);
  std::set<std::vector<double>> distinct;
  for (Eigen::Index j = 0; j < 6; ++j) {
    distinct.insert(std::vector<double>(thetas.col(j).data(), thetas.col(j).data() + thetas.rows()));
  }
  CHECK(distinct.size() == 6);
}

TEST_CASE("targets are generated from the next-state context") {
  HyperlAgent a(small_cfg(), tiny(ContextKind::state_and_param), small_env(), std::nullopt, 5);
  Batch b = random_batch(4, 3, 2, 6);
  CHECK(a.target_contexts(b) == a.contexts(b.next_obs, b.mu));
  CHECK(a.target_contexts(b) != a.contexts(b.obs, b.mu));
  Batch moved = b;
  moved.obs.setZero();
  Rng r1 = make_rng(8, 0), r2 = make_rng(8, 0);
  CHECK(a.compute_td_target(b, r1).target == a.compute_td_target(moved, r2).target);
  moved = b;
  moved.next_obs.array() += 0.25;
  Rng r3 = make_rng(8, 0);
  r1 = make_rng(8, 0);
  CHECK(a.compute_td_target(b, r1).target != a.compute_td_target(moved, r3).target);
}

TEST_CASE("critic and actor losses: hypernetwork gradients match finite differences") {
  for (ContextKind kind : {ContextKind::param_only, ContextKind::state_and_param}) {
    CAPTURE(static_cast<int>(kind));
    HyperlAgent a(small_cfg(), tiny(kind), small_env(2, 1), std::nullopt, 6);
    Batch b = random_batch(4, 2, 1, 7);
    b.mu(2) = b.mu(0);  // one merged group for param_only
    const bool merge = kind == ContextKind::param_only;
    const ContextGroups groups = group_contexts(a.contexts(b.obs, b.mu), merge);
    Rng rng = make_rng(9, 0);
    const Vector target = a.compute_td_target(b, rng).target;
    const Matrix critic_in = stack(b.obs, b.action);
    const HyperSpec& hc = a.critic_hyper_spec();
    const HyperSpec& ha = a.actor_hyper_spec();

    auto critic_loss = [&](const std::vector<double>& h) {
      return mse_loss(generated_forward(hc, h, groups, critic_in, nullptr), target, nullptr);
    };
    GeneratedTape tape;
    Matrix up;
    mse_loss(generated_forward(hc, a.h_critic1(), groups, critic_in, &tape), target, &up);
    std::vector<double> g(a.h_critic1().size(), 0.0);
    generated_backward(hc, a.h_critic1(), groups, tape, up, g, nullptr, nullptr);
    CHECK(oracle::max_rel_error(g, oracle::central_diff(critic_loss, a.h_critic1())) < 1e-5);

    auto actor_loss = [&](const std::vector<double>& h) {
      const Matrix act = generated_forward(ha, h, groups, b.obs, nullptr);
      return -generated_forward(hc, a.h_critic1(), groups, stack(b.obs, act), nullptr).mean();
    };
    GeneratedTape at, ct;
    const Matrix act = generated_forward(ha, a.h_actor(), groups, b.obs, &at);
    const Matrix q = generated_forward(hc, a.h_critic1(), groups, stack(b.obs, act), &ct);
    const Matrix upq = Matrix::Constant(1, q.cols(), -1.0 / static_cast<double>(q.cols()));
    Matrix gin;
    generated_backward(hc, a.h_critic1(), groups, ct, upq, {}, &gin, nullptr);
    std::vector<double> ga(a.h_actor().size(), 0.0);
    generated_backward(ha, a.h_actor(), groups, at, gin.bottomRows(1), ga, nullptr, nullptr);
    CHECK(oracle::max_rel_error(ga, oracle::central_diff(actor_loss, a.h_actor())) < 1e-5);
  }
}

TEST_CASE("one critic step reduces the loss and leaves targets alone") {
  HyperlAgent a(small_cfg(), tiny(ContextKind::param_only), small_env(), std::nullopt, 7);
  const Batch b = random_batch(1, 3, 2, 8);
  Vector target(1);
  target(0) = 2.5;
  const auto th = a.target_h_critic1();
  const auto ta = a.target_h_actor();
  const auto [p1, p2] = a.update_critics(b, target);
  const auto [n1, n2] = a.update_critics(b, target);
  CHECK(n1 < p1);
  CHECK(n2 < p2);
  a.update_actor(b);
  CHECK(a.target_h_critic1() == th);
  CHECK(a.target_h_actor() == ta);
  a.soft_update();
  CHECK(a.target_h_critic1() != th);
}

TEST_CASE("train step gating, delay and state round trip") {
  HyperlAgent a(small_cfg(), tiny(ContextKind::param_only), small_env(), std::nullopt, 8);
  ReplayBuffer small = filled_buffer(3, 3, 2);
  ReplayBuffer full = filled_buffer(20, 3, 2);
  Rng rng = make_rng(3, 0);
  CHECK(a.train_step(full, rng, 10).skipped == "warmup");
  CHECK(a.train_step(small, rng, 50).skipped == "buffer");
  for (int k = 0; k < 9; ++k) {
    const TrainDiagnostics d = a.train_step(full, rng, 11 + k);
    CHECK(d.performed);
    CHECK(d.actor_updated == (k % 2 == 1));
    CHECK(std::isfinite(d.critic_loss1));
  }
  CHECK(a.critic_updates() == 9);
  CHECK(a.actor_updates() == 4);

  HyperlAgent b(small_cfg(), tiny(ContextKind::param_only), small_env(), std::nullopt, 99);
  b.import_state(a.export_state());
  Rng r1 = make_rng(5, 0), r2 = make_rng(5, 0);
  a.train_step(full, r1, 100);
  b.train_step(full, r2, 100);
  CHECK(a.h_actor() == b.h_actor());
  CHECK(a.target_h_critic2() == b.target_h_critic2());
  HyperlAgent other(small_cfg(), tiny(ContextKind::state_and_param), small_env(), std::nullopt, 1);
  CHECK_THROWS_AS(other.import_state(a.export_state()), DimensionError);
}

TEST_CASE("frozen generated actor equals a TD3 actor bit for bit") {
  HyperlAgent h(small_cfg(), tiny(ContextKind::param_only), small_env(), std::nullopt, 9);
  Td3Agent t(small_cfg(), {5}, small_env(), std::nullopt, 10);
  const double mu = 0.15;
  t.actor() = h.generate_actor(h.context_of(std::vector<double>{0, 0, 0}, mu));
  Rng r1 = make_rng(2, 0), r2 = make_rng(2, 0);
  Rng ry = make_rng(3, 0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> y(3);
    for (double& v : y) v = uniform(ry, -2.0, 2.0);
    CHECK(h.select_action(y, mu, true, r1) == t.select_action(y, mu, true, r2));
  }
}

}  // TEST_SUITE
