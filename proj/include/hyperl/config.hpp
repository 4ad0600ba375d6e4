#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hyperl/agent.hpp"
#include "hyperl/ks_env.hpp"
#include "hyperl/ns_env.hpp"
#include "hyperl/toy_env.hpp"

namespace hyperl {

struct ExperimentConfig {
  std::string env = "ks";  // ks | ns | toy
  AgentConfig agent;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  int episodes = 0;  // 0: environment default (ks 1500, ns 500, toy 100)
  int eval_every = 50;
  int eval_mu_count = 10;
  std::optional<double> eval_mu;  // fixes mu for every evaluation episode
  int checkpoint_every = 50;      // 0: only at the end
  std::size_t replay_capacity = 1000000;
  bool log_wall_time = true;
  std::string out = "runs/default";
  std::string ns_reference;  // empty: generate (and store in the run directory)
  KsConfig ks;
  NsConfig ns;
  ToyConfig toy;

  // Fills environment-dependent defaults and validates. Throws ConfigError.
  void resolve();
  std::vector<int> default_phases() const;
};

struct ConfigKey {
  std::string name;
  std::string type;  // int | real | bool | string | int_list | real_list | agent | optional_real
  std::string help;
};

const std::vector<ConfigKey>& config_keys();

// Applies one typed key. Throws ConfigError for unknown keys or bad values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& cfg, const std::string& key);

// "key = value" lines; '#' or ';' starts a comment line; no sections.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

// Precedence: overrides > file values > built-in defaults.
ExperimentConfig build_config(const std::map<std::string, std::string>& file_values,
                              const std::map<std::string, std::string>& overrides);

// Every key in registry order, one "key = value" line each.
std::string config_to_text(const ExperimentConfig& cfg);

// FNV-1a 64 of the resolved config text without the keys that do not change
// a run's trajectory (out, episodes, checkpoint_every, log_wall_time,
// ns_reference).
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace hyperl
