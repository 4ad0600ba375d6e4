#include <doctest.h>

#include <cmath>
#include <vector>

#include "hyperl/errors.hpp"
#include "hyperl/toy_env.hpp"

using namespace hyperl;

TEST_SUITE("toy_env") {

TEST_CASE("double integrator dynamics and reward") {
  DoubleIntegratorEnv env;
  env.reset(0, ResetMode::train, std::nullopt);
  env.set_state(0.4, -0.2);
  const EnvStep s = env.step(std::vector<double>{0.6});
  const double x = 0.4 + 0.5 * -0.2 + 0.25 * 0.6 / 2.0;
  const double v = -0.2 + 0.5 * 0.6;
  CHECK(env.x() == doctest::Approx(x));
  CHECK(env.v() == doctest::Approx(v));
  CHECK(s.reward == doctest::Approx(-(x * x + 0.1 * v * v + 0.05 * 0.36)));
  CHECK(s.reward == -(s.state_cost + s.action_cost));
  CHECK(env.t_index() == 1);
  CHECK(env.observation()[2] == doctest::Approx(0.2));
}

TEST_CASE("actions are clipped and the horizon is terminal") {
  DoubleIntegratorEnv env;
  CHECK(env.horizon_is_terminal());
  env.reset(1, ResetMode::eval, std::nullopt);
  env.set_state(0.0, 0.0);
  env.step(std::vector<double>{5.0});
  CHECK(env.v() == doctest::Approx(0.5));
  CHECK(env.physical_action(std::vector<double>{-3.0})[0] == -1.0);
  CHECK_THROWS_AS(env.step(std::vector<double>{0.0, 0.0}), DimensionError);
  for (int k = 1; k < env.horizon(); ++k) env.step(std::vector<double>{0.0});
  CHECK_THROWS_AS(env.step(std::vector<double>{0.0}), DimensionError);
}

TEST_CASE("reset is seeded and within range") {
  DoubleIntegratorEnv a, b;
  for (std::uint64_t s = 0; s < 100; ++s) {
    a.reset(s, ResetMode::train, std::nullopt);
    b.reset(s, ResetMode::train, std::nullopt);
    CHECK(a.x() == b.x());
    CHECK(a.v() == b.v());
    CHECK(std::abs(a.x()) <= 1.0);
    CHECK(std::abs(a.v()) <= 0.5);
    CHECK(a.t_index() == 0);
  }
}

}  // TEST_SUITE
