#include "hyperl/ks_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hyperl/errors.hpp"
#include "hyperl/rng.hpp"

namespace hyperl {
namespace {

constexpr int kContourPoints = 64;

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::vector<double> KsConfig::default_train_mu() {
  std::vector<double> mu;
  for (int i = -9; i <= 9; ++i) mu.push_back(i / 40.0);
  return mu;
}

void KsConfig::validate() const {
  if (length <= 0.0) throw ConfigError("ks length must be positive");
  if (grid < 8 || (grid & (grid - 1)) != 0) throw ConfigError("ks grid must be a power of two >= 8");
  if (actuators < 1) throw ConfigError("ks actuators must be >= 1");
  if (kernel_std <= 0.0) throw ConfigError("ks kernel_std must be positive");
  if (alpha < 0.0) throw ConfigError("ks alpha must be non-negative");
  if (control_dt <= 0.0 || substeps < 1) throw ConfigError("ks control_dt/substeps invalid");
  if (horizon < 1) throw ConfigError("ks horizon must be >= 1");
  if (train_mu.empty()) throw ConfigError("ks train_mu grid is empty");
  if (!(eval_mu_lo <= eval_mu_hi)) throw ConfigError("ks eval mu range is inverted");
}

double KsConfig::actuator_center(int i) const { return (i + 0.5) * length / actuators; }

KsSolver::KsSolver(KsConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int n = cfg_.grid;
  const double base = 2.0 * std::numbers::pi / cfg_.length;
  k_.resize(n);
  lin_.resize(n);
  dealias_.resize(n);
  for (int j = 0; j < n; ++j) {
    const int mode = j <= n / 2 ? j : j - n;
    const double kk = base * mode;
    k_[j] = (j == n / 2) ? 0.0 : kk;
    lin_[j] = kk * kk - kk * kk * kk * kk;
    dealias_[j] = std::abs(mode) <= n / 3 ? 1.0 : 0.0;
  }

  const int na = cfg_.actuators;
  actuator_basis_.assign(static_cast<std::size_t>(n) * na, 0.0);
  for (int j = 0; j < n; ++j) {
    const double x = grid_point(j);
    for (int i = 0; i < na; ++i) {
      const double m = cfg_.actuator_center(i);
      double v = 0.0;
      for (int image = -1; image <= 1; ++image) {
        const double d = (x - m + image * cfg_.length) / cfg_.kernel_std;
        v += 0.5 * std::exp(-d * d);
      }
      actuator_basis_[static_cast<std::size_t>(j) * na + i] = v;
    }
  }
  default_coeffs_ = make_coefficients(cfg_.control_dt / cfg_.substeps);
}

KsSolver::Coefficients KsSolver::make_coefficients(double dt) const {
  const int n = cfg_.grid;
  Coefficients c;
  c.dt = dt;
  c.e.resize(n);
  c.e2.resize(n);
  c.q.resize(n);
  c.f1.resize(n);
  c.f2.resize(n);
  c.f3.resize(n);
  for (int j = 0; j < n; ++j) {
    const double hl = dt * lin_[j];
    c.e[j] = std::exp(hl);
    c.e2[j] = std::exp(hl / 2.0);
    // Contour-integral evaluation of the phi-functions (upper half circle,
    // real part) avoids cancellation near hl = 0.
    double q = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0;
    for (int m = 1; m <= kContourPoints; ++m) {
      const Complex r = std::exp(Complex(0.0, std::numbers::pi * (m - 0.5) / kContourPoints));
      const Complex lr = hl + r;
      const Complex lr2 = lr * lr;
      const Complex lr3 = lr2 * lr;
      const Complex ex = std::exp(lr);
      q += std::real((std::exp(lr / 2.0) - 1.0) / lr);
      f1 += std::real((-4.0 - lr + ex * (4.0 - 3.0 * lr + lr2)) / lr3);
      f2 += std::real((2.0 + lr + ex * (-2.0 + lr)) / lr3);
      f3 += std::real((-4.0 - 3.0 * lr - lr2 + ex * (4.0 - lr)) / lr3);
    }
    c.q[j] = dt * q / kContourPoints;
    c.f1[j] = dt * f1 / kContourPoints;
    c.f2[j] = dt * f2 / kContourPoints;
    c.f3[j] = dt * f3 / kContourPoints;
  }
  return c;
}

std::vector<double> KsSolver::actuation_field(std::span<const double> a) const {
  const int na = cfg_.actuators;
  if (a.size() != static_cast<std::size_t>(na)) {
    throw DimensionError("ks action has " + std::to_string(a.size()) + " entries, expected " +
                         std::to_string(na));
  }
  std::vector<double> field(cfg_.grid, 0.0);
  for (int j = 0; j < cfg_.grid; ++j) {
    double v = 0.0;
    for (int i = 0; i < na; ++i) {
      v += clip(a[i], -1.0, 1.0) * actuator_basis_[static_cast<std::size_t>(j) * na + i];
    }
    field[j] = v;
  }
  return field;
}

void KsSolver::nonlinear(const std::vector<Complex>& v, const std::vector<Complex>& forcing,
                         std::vector<Complex>& out) const {
  const int n = cfg_.grid;
  std::vector<Complex> phys;
  fft_.inv(phys, v);
  for (auto& p : phys) p = Complex(p.real() * p.real(), 0.0);
  std::vector<Complex> sq;
  fft_.fwd(sq, phys);
  out.resize(n);
  for (int j = 0; j < n; ++j) {
    out[j] = Complex(0.0, -0.5 * k_[j]) * sq[j] * dealias_[j] + forcing[j];
  }
}

void KsSolver::advance(std::vector<double>& y, double mu, std::span<const double> field, double dt,
                       int steps) const {
  const int n = cfg_.grid;
  if (y.size() != static_cast<std::size_t>(n) || field.size() != static_cast<std::size_t>(n)) {
    throw DimensionError("ks state/field must have " + std::to_string(n) + " entries");
  }
  const Coefficients local = dt == default_coeffs_.dt ? Coefficients{} : make_coefficients(dt);
  const Coefficients& c = dt == default_coeffs_.dt ? default_coeffs_ : local;

  // Forcing -mu cos(4 pi x / L) + u(x); the cosine sits exactly in modes +-2.
  std::vector<Complex> forcing;
  std::vector<Complex> field_c(field.begin(), field.end());
  fft_.fwd(forcing, field_c);
  const Complex cos_amp(-mu * n / 2.0, 0.0);
  forcing[2] += cos_amp;
  forcing[n - 2] += cos_amp;

  std::vector<Complex> v;
  std::vector<Complex> y_c(y.begin(), y.end());
  fft_.fwd(v, y_c);

  std::vector<Complex> nv, na, nb, nc, a(n), b(n), cc(n);
  for (int s = 0; s < steps; ++s) {
    nonlinear(v, forcing, nv);
    for (int j = 0; j < n; ++j) a[j] = c.e2[j] * v[j] + c.q[j] * nv[j];
    nonlinear(a, forcing, na);
    for (int j = 0; j < n; ++j) b[j] = c.e2[j] * v[j] + c.q[j] * na[j];
    nonlinear(b, forcing, nb);
    for (int j = 0; j < n; ++j) cc[j] = c.e2[j] * a[j] + c.q[j] * (2.0 * nb[j] - nv[j]);
    nonlinear(cc, forcing, nc);
    for (int j = 0; j < n; ++j) {
      v[j] = c.e[j] * v[j] + nv[j] * c.f1[j] + 2.0 * (na[j] + nb[j]) * c.f2[j] + nc[j] * c.f3[j];
    }
  }
  std::vector<Complex> out;
  fft_.inv(out, v);
  for (int j = 0; j < n; ++j) y[j] = out[j].real();
}

KsStepResult KsSolver::step(const KsState& s, std::span<const double> a) const {
  if (s.t_index >= cfg_.horizon) {
    throw DimensionError("ks_step called at t_index " + std::to_string(s.t_index) +
                         " >= horizon " + std::to_string(cfg_.horizon));
  }
  const std::vector<double> field = actuation_field(a);
  KsStepResult r;
  r.state = s;
  advance(r.state.y, s.mu, field, default_coeffs_.dt, cfg_.substeps);
  r.state.t_index = s.t_index + 1;
  if (!all_finite(r.state.y)) throw BlowUpError(s.t_index, s.mu);
  double c1 = 0.0;
  for (double v : r.state.y) c1 += v * v;
  double c2 = 0.0;
  for (double ai : a) {
    const double v = clip(ai, -1.0, 1.0);
    c2 += v * v;
  }
  r.state_cost = c1;
  r.action_cost = c2;
  r.reward = -0.5 * c1 - 0.5 * cfg_.alpha * c2;
  return r;
}

KsState ks_reset(const KsSolver& solver, std::uint64_t seed, ResetMode mode,
                 std::optional<double> mu_override, int warmup) {
  const KsConfig& cfg = solver.config();
  Rng rng = make_rng(seed, 0x6b73);
  KsState s;
  if (mu_override) {
    if (!(*mu_override >= cfg.eval_mu_lo && *mu_override <= cfg.eval_mu_hi)) {
      throw ConfigError("ks mu override " + std::to_string(*mu_override) + " outside [" +
                        std::to_string(cfg.eval_mu_lo) + ", " + std::to_string(cfg.eval_mu_hi) +
                        "]");
    }
    s.mu = *mu_override;
  } else if (mode == ResetMode::train) {
    s.mu = cfg.train_mu[uniform_index(rng, cfg.train_mu.size())];
  } else {
    s.mu = uniform(rng, cfg.eval_mu_lo, cfg.eval_mu_hi);
  }
  s.y.assign(cfg.grid, 0.0);
  for (int mode_n = 1; mode_n <= cfg.ic_modes; ++mode_n) {
    const double amp = uniform(rng, -cfg.ic_amplitude, cfg.ic_amplitude);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    for (int j = 0; j < cfg.grid; ++j) {
      const double x = solver.grid_point(j);
      s.y[j] += amp * std::cos(2.0 * std::numbers::pi * mode_n * x / cfg.length + phase);
    }
  }
  if (warmup > 0) {
    const std::vector<double> zero(cfg.grid, 0.0);
    solver.advance(s.y, s.mu, zero, cfg.control_dt / cfg.substeps, cfg.substeps * warmup);
    if (!all_finite(s.y)) throw BlowUpError(0, s.mu);
  }
  s.t_index = 0;
  return s;
}

KsEnv::KsEnv(KsConfig cfg) : solver_(std::move(cfg)) {
  state_.y.assign(solver_.config().grid, 0.0);
}

MuNormalizer KsEnv::mu_normalizer() const {
  const auto& mu = solver_.config().train_mu;
  const auto [lo, hi] = std::minmax_element(mu.begin(), mu.end());
  if (*lo == *hi) return {*lo - 1.0, *hi + 1.0};
  return {*lo, *hi};
}

void KsEnv::reset(std::uint64_t seed, ResetMode mode, std::optional<double> mu_override) {
  state_ = ks_reset(solver_, seed, mode, mu_override, warmup_);
}

EnvStep KsEnv::step(std::span<const double> action) {
  KsStepResult r = solver_.step(state_, action);
  state_ = std::move(r.state);
  return {r.reward, r.state_cost, solver_.config().alpha * r.action_cost};
}

std::vector<double> KsEnv::physical_action(std::span<const double> action) const {
  return clip_actions(action, -1.0, 1.0);
}

std::unique_ptr<Environment> KsEnv::clone() const { return std::make_unique<KsEnv>(*this); }

}  // namespace hyperl
