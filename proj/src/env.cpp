#include "hyperl/env.hpp"

#include <algorithm>

namespace hyperl {

double clip(double x, double lo, double hi) { return std::clamp(x, lo, hi); }

std::vector<double> clip_actions(std::span<const double> a, double lo, double hi) {
  std::vector<double> out(a.begin(), a.end());
  for (double& v : out) v = clip(v, lo, hi);
  return out;
}

}  // namespace hyperl
