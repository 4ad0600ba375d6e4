#include "hyperl/toy_env.hpp"

#include "hyperl/errors.hpp"
#include "hyperl/rng.hpp"

namespace hyperl {

DoubleIntegratorEnv::DoubleIntegratorEnv(ToyConfig cfg) : cfg_(cfg) {
  if (cfg_.dt <= 0.0 || cfg_.horizon < 1) throw ConfigError("toy dt/horizon invalid");
  refresh();
}

void DoubleIntegratorEnv::reset(std::uint64_t seed, ResetMode, std::optional<double>) {
  Rng rng = make_rng(seed, 0x746f79);
  const double x = uniform(rng, -cfg_.x_range, cfg_.x_range);
  const double v = uniform(rng, -cfg_.v_range, cfg_.v_range);
  set_state(x, v);
}

void DoubleIntegratorEnv::set_state(double x, double v) {
  x_ = x;
  v_ = v;
  t_ = 0;
  refresh();
}

EnvStep DoubleIntegratorEnv::step(std::span<const double> action) {
  if (action.size() != 1) throw DimensionError("toy action must have 1 entry");
  if (t_ >= cfg_.horizon) throw DimensionError("toy step past the horizon");
  const double u = clip(action[0], -1.0, 1.0);
  x_ += cfg_.dt * v_ + 0.5 * cfg_.dt * cfg_.dt * u;
  v_ += cfg_.dt * u;
  ++t_;
  refresh();
  EnvStep s;
  s.state_cost = cfg_.wx * x_ * x_ + cfg_.wv * v_ * v_;
  s.action_cost = cfg_.wa * u * u;
  s.reward = -(s.state_cost + s.action_cost);
  return s;
}

std::vector<double> DoubleIntegratorEnv::physical_action(std::span<const double> action) const {
  return clip_actions(action, -1.0, 1.0);
}

std::unique_ptr<Environment> DoubleIntegratorEnv::clone() const {
  return std::make_unique<DoubleIntegratorEnv>(*this);
}

void DoubleIntegratorEnv::refresh() {
  obs_ = {x_, v_, static_cast<double>(t_) / cfg_.horizon};
}

}  // namespace hyperl
