#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hyperl {

enum class ResetMode { train, eval };

// Affine map of a training parameter range onto [-1, 1].
struct MuNormalizer {
  double lo = -1.0;
  double hi = 1.0;

  double operator()(double mu) const { return 2.0 * (mu - lo) / (hi - lo) - 1.0; }
};

struct EnvStep {
  double reward = 0.0;
  double state_cost = 0.0;   // c1 as logged
  double action_cost = 0.0;  // alpha * c2 as logged
};

// Episodic control environment driven by normalized actions in [-1, 1]^m.
// Values outside the box are clipped before they reach the dynamics.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int observation_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;
  // Whether reaching the horizon ends the task (true) or merely truncates
  // the episode (false, bootstrapping continues).
  virtual bool horizon_is_terminal() const { return false; }
  virtual MuNormalizer mu_normalizer() const = 0;
  // Observation is a 2-component field that must be encoded before the
  // networks see it.
  virtual bool field_observation() const { return false; }
  virtual int field_height() const { return 0; }
  virtual int field_width() const { return 0; }

  virtual void reset(std::uint64_t seed, ResetMode mode, std::optional<double> mu_override) = 0;
  // Throws BlowUpError when the state becomes non-finite.
  virtual EnvStep step(std::span<const double> action) = 0;

  virtual std::span<const double> observation() const = 0;
  virtual double mu() const = 0;
  virtual int t_index() const = 0;
  // Maps a normalized action to the physical control fed to the dynamics.
  virtual std::vector<double> physical_action(std::span<const double> action) const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

double clip(double x, double lo, double hi);
std::vector<double> clip_actions(std::span<const double> a, double lo, double hi);

}  // namespace hyperl
