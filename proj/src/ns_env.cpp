#include "hyperl/ns_env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "hyperl/errors.hpp"
#include "hyperl/rng.hpp"

namespace hyperl {
namespace {

constexpr const char* kReferenceMagic = "HYPERL_NS_REFERENCE";
constexpr int kReferenceVersion = 1;

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void write_le_doubles(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
}

void read_le_doubles(std::istream& in, std::span<double> values) {
  for (double& v : values) {
    char buf[8];
    in.read(buf, 8);
    if (!in) throw ConfigError("reference file truncated");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
}

}  // namespace

void NsConfig::validate() const {
  if (n < 5) throw ConfigError("ns grid must have at least 5 nodes per side");
  if (rho <= 0.0) throw ConfigError("ns rho must be positive");
  if (train_mu.empty()) throw ConfigError("ns train_mu set is empty");
  for (double m : train_mu) {
    if (!(m > 0.0)) throw ConfigError("ns viscosities must be strictly positive");
  }
  if (!(eval_mu_lo > 0.0) || !(eval_mu_lo <= eval_mu_hi)) throw ConfigError("ns eval mu range invalid");
  if (control_steps < 1 || horizon_time <= 0.0) throw ConfigError("ns horizon invalid");
  if (!(mu_ref > 0.0)) throw ConfigError("ns mu_ref must be positive");
  if (!(action_lo < action_hi)) throw ConfigError("ns action bounds inverted");
  if (cg_tolerance <= 0.0 || cg_max_iterations < 1) throw ConfigError("ns cg settings invalid");
}

NsSolver::NsSolver(NsConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

void NsSolver::apply_boundary(std::vector<double>& vel, double control) const {
  const int n = cfg_.n;
  auto set = [&](int i, int j, double u, double v) {
    const std::size_t k = (static_cast<std::size_t>(j) * n + i) * 2;
    vel[k] = u;
    vel[k + 1] = v;
  };
  for (int j = 0; j < n; ++j) {
    set(0, j, 0.0, 0.0);
    set(n - 1, j, 0.0, 0.0);
  }
  for (int i = 0; i < n; ++i) {
    set(i, n - 1, 0.0, 0.0);
    set(i, 0, control, 0.0);
  }
}

double NsSolver::kinetic_energy(std::span<const double> vel) const {
  double e = 0.0;
  for (double v : vel) e += v * v;
  const double h = cfg_.h();
  return 0.5 * h * h * e;
}

double NsSolver::max_divergence(std::span<const double> vel) const {
  const int n = cfg_.n;
  const double inv2h = 1.0 / (2.0 * cfg_.h());
  auto at = [&](int i, int j, int c) { return vel[(static_cast<std::size_t>(j) * n + i) * 2 + c]; };
  double m = 0.0;
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      const double d = (at(i + 1, j, 0) - at(i - 1, j, 0) + at(i, j + 1, 1) - at(i, j - 1, 1)) * inv2h;
      m = std::max(m, std::abs(d));
    }
  }
  return m;
}

double NsSolver::stable_dt(std::span<const double> vel, double mu) const {
  double umax = 0.0, vmax = 0.0;
  for (std::size_t k = 0; k < vel.size(); k += 2) {
    umax = std::max(umax, std::abs(vel[k]));
    vmax = std::max(vmax, std::abs(vel[k + 1]));
  }
  const double h = cfg_.h();
  double dt = 0.25 * h * h / mu;
  const double speed = std::max(umax, vmax);
  if (speed > 0.0) dt = std::min(dt, 0.5 * h / speed);
  // Combined advection-diffusion bound keeps the explicit update monotone.
  dt = std::min(dt, 0.9 / ((umax + vmax) / h + 4.0 * mu / (h * h)));
  return dt;
}

// out = -D(G phi): phi and out live on the full grid with zero boundary rows.
void NsSolver::apply_a(const std::vector<double>& phi, std::vector<double>& out,
                       std::vector<double>& gx, std::vector<double>& gy) const {
  const int n = cfg_.n;
  const double inv2h = 1.0 / (2.0 * cfg_.h());
  auto idx = [n](int i, int j) { return static_cast<std::size_t>(j) * n + i; };
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      gx[idx(i, j)] = (phi[idx(i + 1, j)] - phi[idx(i - 1, j)]) * inv2h;
      gy[idx(i, j)] = (phi[idx(i, j + 1)] - phi[idx(i, j - 1)]) * inv2h;
    }
  }
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      out[idx(i, j)] =
          -(gx[idx(i + 1, j)] - gx[idx(i - 1, j)] + gy[idx(i, j + 1)] - gy[idx(i, j - 1)]) * inv2h;
    }
  }
}

void NsSolver::substep(std::vector<double>& vel, std::vector<double>& phi, double mu, double dt,
                       double control, ProjectionStats* stats) const {
  const int n = cfg_.n;
  const double h = cfg_.h();
  const double inv_h = 1.0 / h;
  const double inv_h2 = inv_h * inv_h;
  auto idx = [n](int i, int j) { return static_cast<std::size_t>(j) * n + i; };
  auto at = [&](int i, int j, int c) { return vel[idx(i, j) * 2 + c]; };

  // Provisional velocity: explicit upwind advection + central diffusion.
  std::vector<double> star = vel;
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      const double uc = at(i, j, 0);
      const double vc = at(i, j, 1);
      for (int c = 0; c < 2; ++c) {
        const double q = at(i, j, c);
        const double dqdx = uc >= 0.0 ? (q - at(i - 1, j, c)) * inv_h : (at(i + 1, j, c) - q) * inv_h;
        const double dqdy = vc >= 0.0 ? (q - at(i, j - 1, c)) * inv_h : (at(i, j + 1, c) - q) * inv_h;
        const double lap =
            (at(i + 1, j, c) + at(i - 1, j, c) + at(i, j + 1, c) + at(i, j - 1, c) - 4.0 * q) * inv_h2;
        star[idx(i, j) * 2 + c] = q + dt * (-(uc * dqdx + vc * dqdy) + mu * lap);
      }
    }
  }
  apply_boundary(star, control);

  // Projection: solve A phi = -div(star), A = -D G, then star -= G phi.
  const double inv2h = 0.5 * inv_h;
  const std::size_t cells = static_cast<std::size_t>(n) * n;
  std::vector<double> b(cells, 0.0);
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      b[idx(i, j)] = -(star[idx(i + 1, j) * 2] - star[idx(i - 1, j) * 2] +
                       star[idx(i, j + 1) * 2 + 1] - star[idx(i, j - 1) * 2 + 1]) *
                     inv2h;
    }
  }
  std::fill(phi.begin(), phi.end(), 0.0);
  std::vector<double> r = b, p = b, ap(cells, 0.0), gx(cells, 0.0), gy(cells, 0.0);
  auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
    return s;
  };
  auto inf_norm = [](const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
  };
  double rr = dot(r, r);
  int iter = 0;
  while (inf_norm(r) > cfg_.cg_tolerance) {
    if (iter >= cfg_.cg_max_iterations) {
      throw SolverError("pressure Poisson solve did not converge", inf_norm(r));
    }
    apply_a(p, ap, gx, gy);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rr / pap;
    for (std::size_t k = 0; k < cells; ++k) {
      phi[k] += alpha * p[k];
      r[k] -= alpha * ap[k];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t k = 0; k < cells; ++k) p[k] = r[k] + beta * p[k];
    ++iter;
  }
  const double final_residual = inf_norm(r);
  if (final_residual > cfg_.cg_tolerance) {
    throw SolverError("pressure Poisson solve stalled", final_residual);
  }
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 1; i < n - 1; ++i) {
      star[idx(i, j) * 2] -= (phi[idx(i + 1, j)] - phi[idx(i - 1, j)]) * inv2h;
      star[idx(i, j) * 2 + 1] -= (phi[idx(i, j + 1)] - phi[idx(i, j - 1)]) * inv2h;
    }
  }
  vel = std::move(star);
  if (stats) {
    stats->substeps += 1;
    stats->cg_iterations += iter;
  }
}

NsState NsSolver::advance(const NsState& s, double control, ProjectionStats* stats) const {
  if (s.velocity.size() != cfg_.field_size()) {
    throw DimensionError("ns velocity field has " + std::to_string(s.velocity.size()) +
                         " entries, expected " + std::to_string(cfg_.field_size()));
  }
  if (!std::isfinite(control)) throw NonFiniteError("ns control is not finite");
  NsState out = s;
  out.boundary_control = control;
  apply_boundary(out.velocity, control);
  const std::size_t cells = static_cast<std::size_t>(cfg_.n) * cfg_.n;
  std::vector<double> phi(cells, 0.0);
  ProjectionStats local;
  const double total = cfg_.control_dt();
  double t = 0.0;
  double last_dt = total;
  while (t < total) {
    const double remaining = total - t;
    double dt = stable_dt(out.velocity, s.mu);
    if (!std::isfinite(dt) || dt <= 0.0) throw BlowUpError(s.t_index, s.mu);
    if (remaining <= dt * (1.0 + 1e-12)) {
      dt = remaining;
      t = total;
    } else {
      t += dt;
    }
    substep(out.velocity, phi, s.mu, dt, control, &local);
    last_dt = dt;
    if (!all_finite(out.velocity)) throw BlowUpError(s.t_index, s.mu);
  }
  out.pressure.assign(cells, 0.0);
  for (std::size_t k = 0; k < cells; ++k) out.pressure[k] = cfg_.rho * phi[k] / last_dt;
  out.t_index = s.t_index + 1;
  local.max_divergence = max_divergence(out.velocity);
  if (stats) *stats = local;
  return out;
}

NsStepResult ns_step(const NsSolver& solver, const ReferenceTrajectory& ref, const NsState& s,
                     double control, ProjectionStats* stats) {
  const NsConfig& cfg = solver.config();
  if (s.t_index >= cfg.control_steps) {
    throw DimensionError("ns_step called at t_index " + std::to_string(s.t_index) +
                         " >= horizon " + std::to_string(cfg.control_steps));
  }
  if (ref.n != cfg.n || static_cast<int>(ref.fields.size()) < s.t_index + 2) {
    throw DimensionError("reference trajectory does not cover this step");
  }
  const double u = clip(control, cfg.action_lo, cfg.action_hi);
  NsStepResult r;
  r.state = solver.advance(s, u, stats);
  const auto& target = ref.fields[static_cast<std::size_t>(s.t_index) + 1];
  double sq = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double d = r.state.velocity[k] - target[k];
    sq += d * d;
  }
  r.state_cost = sq / static_cast<double>(target.size());
  r.action_cost = (u - cfg.u_ref) * (u - cfg.u_ref);
  r.reward = -0.5 * r.state_cost - 0.5 * cfg.alpha * r.action_cost;
  return r;
}

NsState ns_reset(const NsConfig& cfg, std::uint64_t seed, ResetMode mode,
                 std::optional<double> mu_override) {
  cfg.validate();
  Rng rng = make_rng(seed, 0x6e73);
  NsState s;
  if (mu_override) {
    if (!(*mu_override > 0.0)) {
      throw ConfigError("ns viscosity override must be positive, got " + std::to_string(*mu_override));
    }
    s.mu = *mu_override;
  } else if (mode == ResetMode::train) {
    s.mu = cfg.train_mu[uniform_index(rng, cfg.train_mu.size())];
  } else {
    s.mu = uniform(rng, cfg.eval_mu_lo, cfg.eval_mu_hi);
  }
  const double a = cfg.init_amplitude;
  s.velocity.resize(cfg.field_size());
  for (double& v : s.velocity) v = uniform(rng, -a, a);
  s.pressure.resize(static_cast<std::size_t>(cfg.n) * cfg.n);
  for (double& p : s.pressure) p = uniform(rng, -a, a);
  NsSolver(cfg).apply_boundary(s.velocity, 0.0);
  s.t_index = 0;
  s.boundary_control = 0.0;
  return s;
}

ReferenceTrajectory generate_reference(const NsConfig& cfg) {
  NsSolver solver(cfg);
  ReferenceTrajectory ref;
  ref.n = cfg.n;
  ref.control_steps = cfg.control_steps;
  ref.mu_ref = cfg.mu_ref;
  ref.control_dt = cfg.control_dt();
  ref.schedule_intercept = cfg.schedule_intercept;
  ref.schedule_slope = cfg.schedule_slope;
  NsState s;
  s.mu = cfg.mu_ref;
  s.velocity.assign(cfg.field_size(), 0.0);
  s.pressure.assign(static_cast<std::size_t>(cfg.n) * cfg.n, 0.0);
  ref.fields.push_back(s.velocity);
  for (int k = 0; k < cfg.control_steps; ++k) {
    s = solver.advance(s, cfg.schedule(k * cfg.control_dt()));
    ref.fields.push_back(s.velocity);
  }
  return ref;
}

void save_reference(const ReferenceTrajectory& ref, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::ostringstream header;
  header.precision(17);
  header << kReferenceMagic << ' ' << kReferenceVersion << '\n'
         << "nx " << ref.n << '\n'
         << "ny " << ref.n << '\n'
         << "components 2\n"
         << "control_steps " << ref.control_steps << '\n'
         << "mu_ref " << ref.mu_ref << '\n'
         << "control_dt " << ref.control_dt << '\n'
         << "schedule " << ref.schedule_intercept << ' ' << ref.schedule_slope << '\n'
         << "end\n";
  out << header.str();
  for (const auto& f : ref.fields) write_le_doubles(out, f);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ReferenceTrajectory load_reference(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open reference file " + path.string());
  ReferenceTrajectory ref;
  std::string line;
  std::getline(in, line);
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != kReferenceMagic || version != kReferenceVersion) {
      throw ConfigError("not a version-1 reference file: " + path.string());
    }
  }
  int nx = 0, ny = 0, comps = 0;
  while (std::getline(in, line) && line != "end") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "nx") ls >> nx;
    else if (key == "ny") ls >> ny;
    else if (key == "components") ls >> comps;
    else if (key == "control_steps") ls >> ref.control_steps;
    else if (key == "mu_ref") ls >> ref.mu_ref;
    else if (key == "control_dt") ls >> ref.control_dt;
    else if (key == "schedule") ls >> ref.schedule_intercept >> ref.schedule_slope;
    else throw ConfigError("unknown reference header key '" + key + "'");
  }
  if (line != "end" || nx != ny || nx < 2 || comps != 2 || ref.control_steps < 1) {
    throw ConfigError("malformed reference header in " + path.string());
  }
  ref.n = nx;
  const std::size_t size = static_cast<std::size_t>(nx) * ny * 2;
  ref.fields.assign(static_cast<std::size_t>(ref.control_steps) + 1, std::vector<double>(size));
  for (auto& f : ref.fields) read_le_doubles(in, f);
  return ref;
}

NsEnv::NsEnv(NsConfig cfg)
    : solver_(cfg), ref_(std::make_shared<ReferenceTrajectory>(generate_reference(cfg))) {
  state_ = ns_reset(solver_.config(), 0, ResetMode::train, std::nullopt);
}

NsEnv::NsEnv(NsConfig cfg, std::shared_ptr<const ReferenceTrajectory> ref)
    : solver_(std::move(cfg)), ref_(std::move(ref)) {
  if (!ref_ || ref_->n != solver_.config().n ||
      ref_->control_steps != solver_.config().control_steps) {
    throw ConfigError("reference trajectory does not match the ns configuration");
  }
  state_ = ns_reset(solver_.config(), 0, ResetMode::train, std::nullopt);
}

MuNormalizer NsEnv::mu_normalizer() const {
  const auto& mu = solver_.config().train_mu;
  const auto [lo, hi] = std::minmax_element(mu.begin(), mu.end());
  if (*lo == *hi) return {*lo - 1.0, *hi + 1.0};
  return {*lo, *hi};
}

void NsEnv::reset(std::uint64_t seed, ResetMode mode, std::optional<double> mu_override) {
  state_ = ns_reset(solver_.config(), seed, mode, mu_override);
}

EnvStep NsEnv::step(std::span<const double> action) {
  if (action.size() != 1) throw DimensionError("ns action must have exactly one entry");
  const double u = physical_action(action)[0];
  NsStepResult r = ns_step(solver_, *ref_, state_, u, &last_stats_);
  state_ = std::move(r.state);
  return {r.reward, r.state_cost, solver_.config().alpha * r.action_cost};
}

std::vector<double> NsEnv::physical_action(std::span<const double> action) const {
  const NsConfig& c = solver_.config();
  std::vector<double> out;
  out.reserve(action.size());
  for (double a : action) {
    const double t = clip(a, -1.0, 1.0);
    out.push_back(c.action_lo + 0.5 * (t + 1.0) * (c.action_hi - c.action_lo));
  }
  return out;
}

std::unique_ptr<Environment> NsEnv::clone() const { return std::make_unique<NsEnv>(*this); }

}  // namespace hyperl
