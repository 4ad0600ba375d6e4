#pragma once

#include <array>

#include "hyperl/env.hpp"

namespace hyperl {

// Finite-horizon 1-D double integrator used to sanity-check the agents.
//   x' = x + dt v + dt^2 u / 2,  v' = v + dt u,  u = clip(a, -1, 1)
//   r  = -(wx x'^2 + wv v'^2 + wa u^2)
// Observation (x, v, k / horizon). The episode end is terminal because the
// observation carries the remaining time.
struct ToyConfig {
  double dt = 0.5;
  int horizon = 5;
  double x_range = 1.0;  // x0 ~ U(-x_range, x_range)
  double v_range = 0.5;
  double wx = 1.0;
  double wv = 0.1;
  double wa = 0.05;
};

class DoubleIntegratorEnv : public Environment {
 public:
  explicit DoubleIntegratorEnv(ToyConfig cfg = {});

  std::string name() const override { return "toy"; }
  int observation_dim() const override { return 3; }
  int action_dim() const override { return 1; }
  int horizon() const override { return cfg_.horizon; }
  bool horizon_is_terminal() const override { return true; }
  MuNormalizer mu_normalizer() const override { return {-1.0, 1.0}; }

  void reset(std::uint64_t seed, ResetMode mode, std::optional<double> mu_override) override;
  EnvStep step(std::span<const double> action) override;

  std::span<const double> observation() const override { return obs_; }
  double mu() const override { return 0.0; }
  int t_index() const override { return t_; }
  std::vector<double> physical_action(std::span<const double> action) const override;
  std::unique_ptr<Environment> clone() const override;

  const ToyConfig& config() const { return cfg_; }
  void set_state(double x, double v);
  double x() const { return x_; }
  double v() const { return v_; }

 private:
  void refresh();

  ToyConfig cfg_;
  double x_ = 0.0;
  double v_ = 0.0;
  int t_ = 0;
  std::array<double, 3> obs_{};
};

}  // namespace hyperl
