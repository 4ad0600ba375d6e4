#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "hyperl/env.hpp"

namespace hyperl {

// Parametric Kuramoto-Sivashinsky problem
//   y_t + y y_x + y_xx + y_xxxx + mu cos(4 pi x / L) = sum_i a_i psi(x, m_i)
// on a periodic domain [0, L), with Gaussian actuators
//   psi(x, m) = 0.5 exp(-((x - m) / sigma)^2).
struct KsConfig {
  double length = 22.0;
  int grid = 64;
  int actuators = 8;
  double kernel_std = 0.8;
  double alpha = 0.1;
  double control_dt = 0.25;
  int substeps = 5;
  int horizon = 200;
  std::vector<double> train_mu = default_train_mu();
  double eval_mu_lo = -0.25;
  double eval_mu_hi = 0.25;
  // Initial condition: sum_{n=1..ic_modes} c_n cos(2 pi n x / L + phi_n),
  // c_n ~ U(-ic_amplitude, ic_amplitude), phi_n ~ U(0, 2 pi).
  int ic_modes = 3;
  double ic_amplitude = 0.5;

  static std::vector<double> default_train_mu();
  void validate() const;
  double actuator_center(int i) const;  // 0-based, (i + 1/2) L / Na
};

struct KsState {
  std::vector<double> y;
  int t_index = 0;
  double mu = 0.0;
};

struct KsStepResult {
  KsState state;
  double reward = 0.0;
  double state_cost = 0.0;   // ||y'||^2
  double action_cost = 0.0;  // ||a||^2 (unweighted)
};

// Fourier pseudo-spectral ETDRK4 integrator with 2/3-rule dealiasing. The
// actuation field is held constant over each control interval.
class KsSolver {
 public:
  explicit KsSolver(KsConfig cfg);

  const KsConfig& config() const { return cfg_; }
  double dx() const { return cfg_.length / cfg_.grid; }
  double grid_point(int j) const { return j * dx(); }

  // u(x_j) = sum_i clip(a_i) psi_per(x_j, m_i), nearest-image periodization.
  std::vector<double> actuation_field(std::span<const double> a) const;

  // One control interval with the solver's own substep count.
  KsStepResult step(const KsState& s, std::span<const double> a) const;

  // Advances y by `steps` ETDRK4 steps of size dt under a frozen forcing field.
  // Coefficients for dt are computed on demand (cached for the configured dt).
  void advance(std::vector<double>& y, double mu, std::span<const double> field, double dt,
               int steps) const;

 private:
  using Complex = std::complex<double>;

  struct Coefficients {
    double dt = 0.0;
    std::vector<double> e, e2, q, f1, f2, f3;
  };

  Coefficients make_coefficients(double dt) const;
  void nonlinear(const std::vector<Complex>& v, const std::vector<Complex>& forcing,
                 std::vector<Complex>& out) const;

  KsConfig cfg_;
  std::vector<double> k_;         // wavenumber used for derivatives (Nyquist zeroed)
  std::vector<double> lin_;       // k^2 - k^4
  std::vector<double> dealias_;   // 1 for kept modes
  std::vector<double> actuator_basis_;  // grid x actuators, row-major
  Coefficients default_coeffs_;
  // kissfft keeps plan caches behind non-const methods; each solver is used by
  // one thread at a time.
  mutable Eigen::FFT<double> fft_;
};

// Samples mu (train grid / eval interval unless overridden) and the initial
// condition from `seed`, then optionally runs `warmup` uncontrolled control
// steps (the returned t_index stays 0).
KsState ks_reset(const KsSolver& solver, std::uint64_t seed, ResetMode mode,
                 std::optional<double> mu_override, int warmup = 0);

class KsEnv : public Environment {
 public:
  explicit KsEnv(KsConfig cfg = {});

  std::string name() const override { return "ks"; }
  int observation_dim() const override { return solver_.config().grid; }
  int action_dim() const override { return solver_.config().actuators; }
  int horizon() const override { return solver_.config().horizon; }
  MuNormalizer mu_normalizer() const override;

  void reset(std::uint64_t seed, ResetMode mode, std::optional<double> mu_override) override;
  EnvStep step(std::span<const double> action) override;

  std::span<const double> observation() const override { return state_.y; }
  double mu() const override { return state_.mu; }
  int t_index() const override { return state_.t_index; }
  std::vector<double> physical_action(std::span<const double> action) const override;

  std::unique_ptr<Environment> clone() const override;

  const KsSolver& solver() const { return solver_; }
  const KsState& state() const { return state_; }
  void set_state(KsState s) { state_ = std::move(s); }
  // Uncontrolled steps applied after every reset (figure-style rollouts).
  void set_reset_warmup(int steps) { warmup_ = steps; }

 private:
  KsSolver solver_;
  KsState state_;
  int warmup_ = 0;
};

}  // namespace hyperl
