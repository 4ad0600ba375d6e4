#include "hyperl/adam.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "hyperl/errors.hpp"

namespace hyperl {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad) {
  const std::size_t n = params.size();
  if (grad.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw DimensionError("adam_step: params, grad and moments must have equal length");
  }
  const auto n_eig = static_cast<Eigen::Index>(n);
  if (!Eigen::Map<const Eigen::ArrayXd>(grad.data(), n_eig).allFinite()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(grad[i])) {
        throw NonFiniteError("non-finite gradient at parameter index " + std::to_string(i));
      }
    }
  }
  const AdamOptions& o = state.options;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  // lr * m_hat / (sqrt(v_hat) + eps) with the bias corrections folded into
  // the step size and epsilon.
  const double step = o.lr * std::sqrt(c2) / c1;
  const double eps = o.epsilon * std::sqrt(c2);
  const double b1 = o.beta1, b2 = o.beta2;
  double* __restrict m = state.first_moment.data();
  double* __restrict v = state.second_moment.data();
  double* __restrict p = params.data();
  const double* __restrict gp = grad.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = gp[i];
    const double mi = b1 * m[i] + (1.0 - b1) * gi;
    const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
    m[i] = mi;
    v[i] = vi;
    p[i] -= step * mi / (std::sqrt(vi) + eps);
  }
}

}  // namespace hyperl
