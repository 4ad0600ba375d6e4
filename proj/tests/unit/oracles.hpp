#pragma once

// Reference implementations used only by tests. They share no code with the
// library beyond the public layout contracts.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

// Straight-line re-evaluation of a dense network from the documented flat
// layout: per layer, row-major weights then bias.
struct Layer {
  int in = 0;
  int out = 0;
  int act = 0;  // 0 relu, 1 tanh, 2 linear
};

inline std::vector<double> mlp(const std::vector<Layer>& layers, std::span<const double> p,
                               std::vector<double> x) {
  std::size_t off = 0;
  for (const Layer& l : layers) {
    std::vector<double> y(static_cast<std::size_t>(l.out), 0.0);
    for (int o = 0; o < l.out; ++o) {
      double s = 0.0;
      for (int i = 0; i < l.in; ++i) s += p[off + static_cast<std::size_t>(o * l.in + i)] * x[i];
      y[o] = s;
    }
    off += static_cast<std::size_t>(l.in * l.out);
    for (int o = 0; o < l.out; ++o) {
      double v = y[o] + p[off + static_cast<std::size_t>(o)];
      if (l.act == 0) v = std::max(0.0, v);
      if (l.act == 1) v = std::tanh(v);
      y[o] = v;
    }
    off += static_cast<std::size_t>(l.out);
    x = std::move(y);
  }
  return x;
}

// Central differences of a scalar function of a parameter vector.
inline std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Max over entries of |a - f| / max(|a|, |f|, floor * max|a|). The floor
// keeps entries that are zero up to rounding from dominating.
inline double max_rel_error(std::span<const double> analytic, std::span<const double> numeric,
                            double floor = 1e-3) {
  double scale = 0.0;
  for (double a : analytic) scale = std::max(scale, std::abs(a));
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor * scale, 1e-300});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace oracle
