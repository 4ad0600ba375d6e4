#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hyperl {

struct AdamOptions {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  AdamOptions options;

  AdamState() = default;
  AdamState(std::size_t n, AdamOptions opts)
      : first_moment(n, 0.0), second_moment(n, 0.0), options(opts) {}
};

// Bias-corrected Adam update of params in place. Throws NonFiniteError naming
// the first offending gradient index; params and state are untouched then.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

}  // namespace hyperl
