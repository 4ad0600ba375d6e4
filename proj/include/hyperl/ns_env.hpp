#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hyperl/env.hpp"

namespace hyperl {

// 2D incompressible Navier-Stokes on the unit square, collocated n x n grid
// including boundary nodes. The bottom edge carries the scalar control as a
// uniform tangential velocity; the other edges are no-slip walls.
//
// Field layout (velocity): index ((j * n) + i) * 2 + c, with i the x index,
// j the y index and c in {0: x-component, 1: y-component}. Pressure uses
// index j * n + i.
struct NsConfig {
  int n = 21;
  double rho = 1.0;
  std::vector<double> train_mu = {0.01, 0.025, 0.05, 0.075, 0.1};
  double eval_mu_lo = 0.009;
  double eval_mu_hi = 0.12;
  double alpha = 0.01;
  double horizon_time = 0.2;
  int control_steps = 20;
  double u_ref = 2.0;
  double mu_ref = 0.1;
  double action_lo = 0.0;
  double action_hi = 4.0;
  // Reference control schedule u(t) = intercept + slope * t.
  double schedule_intercept = 3.0;
  double schedule_slope = -5.0;
  double init_amplitude = 5.0;
  // Infinity-norm bound on the post-projection divergence.
  double cg_tolerance = 1e-10;
  int cg_max_iterations = 5000;

  double h() const { return 1.0 / (n - 1); }
  double control_dt() const { return horizon_time / control_steps; }
  double schedule(double t) const { return schedule_intercept + schedule_slope * t; }
  std::size_t field_size() const { return static_cast<std::size_t>(n) * n * 2; }
  void validate() const;
};

struct NsState {
  std::vector<double> velocity;
  std::vector<double> pressure;
  int t_index = 0;
  double mu = 0.0;
  double boundary_control = 0.0;
};

struct ReferenceTrajectory {
  int n = 0;
  int control_steps = 0;
  double mu_ref = 0.0;
  double control_dt = 0.0;
  double schedule_intercept = 0.0;
  double schedule_slope = 0.0;
  std::vector<std::vector<double>> fields;  // control_steps + 1 velocity fields
};

struct ProjectionStats {
  int substeps = 0;
  int cg_iterations = 0;     // summed over substeps
  double max_divergence = 0.0;  // after the last projection
};

class NsSolver {
 public:
  explicit NsSolver(NsConfig cfg);

  const NsConfig& config() const { return cfg_; }

  // Advances one control interval with the bottom tangential velocity set to
  // `control` (physical units, not clipped here). Throws BlowUpError or
  // SolverError.
  NsState advance(const NsState& s, double control, ProjectionStats* stats = nullptr) const;

  // Writes Dirichlet values onto every boundary node.
  void apply_boundary(std::vector<double>& velocity, double control) const;

  double kinetic_energy(std::span<const double> velocity) const;
  // max |div y| over interior nodes, central differences.
  double max_divergence(std::span<const double> velocity) const;

 private:
  void substep(std::vector<double>& vel, std::vector<double>& phi, double mu, double dt,
               double control, ProjectionStats* stats) const;
  double stable_dt(std::span<const double> vel, double mu) const;
  void apply_a(const std::vector<double>& phi, std::vector<double>& out,
               std::vector<double>& gx, std::vector<double>& gy) const;

  NsConfig cfg_;
};

struct NsStepResult {
  NsState state;
  double reward = 0.0;
  double state_cost = 0.0;   // mean squared deviation from the reference
  double action_cost = 0.0;  // (u - u_ref)^2, unweighted
};

NsStepResult ns_step(const NsSolver& solver, const ReferenceTrajectory& ref, const NsState& s,
                     double control, ProjectionStats* stats = nullptr);

NsState ns_reset(const NsConfig& cfg, std::uint64_t seed, ResetMode mode,
                 std::optional<double> mu_override);

ReferenceTrajectory generate_reference(const NsConfig& cfg);
void save_reference(const ReferenceTrajectory& ref, const std::filesystem::path& path);
ReferenceTrajectory load_reference(const std::filesystem::path& path);

class NsEnv : public Environment {
 public:
  explicit NsEnv(NsConfig cfg = {});
  NsEnv(NsConfig cfg, std::shared_ptr<const ReferenceTrajectory> ref);

  std::string name() const override { return "ns"; }
  int observation_dim() const override { return static_cast<int>(solver_.config().field_size()); }
  int action_dim() const override { return 1; }
  int horizon() const override { return solver_.config().control_steps; }
  MuNormalizer mu_normalizer() const override;
  bool field_observation() const override { return true; }
  int field_height() const override { return solver_.config().n; }
  int field_width() const override { return solver_.config().n; }

  void reset(std::uint64_t seed, ResetMode mode, std::optional<double> mu_override) override;
  EnvStep step(std::span<const double> action) override;

  std::span<const double> observation() const override { return state_.velocity; }
  double mu() const override { return state_.mu; }
  int t_index() const override { return state_.t_index; }
  std::vector<double> physical_action(std::span<const double> action) const override;

  std::unique_ptr<Environment> clone() const override;

  const NsSolver& solver() const { return solver_; }
  const NsState& state() const { return state_; }
  const ReferenceTrajectory& reference() const { return *ref_; }
  const ProjectionStats& last_projection() const { return last_stats_; }

 private:
  NsSolver solver_;
  std::shared_ptr<const ReferenceTrajectory> ref_;
  NsState state_;
  ProjectionStats last_stats_;
};

}  // namespace hyperl
