#include "hyperl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "hyperl/errors.hpp"

namespace hyperl {
namespace {

std::string fmt_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_num(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': cannot parse '" + raw + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + raw + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  const std::string v = trim(raw);
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_num<T>(key, item));
  return out;
}

template <class T>
std::string fmt_list(const std::vector<T>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt_real(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

struct KeyDef {
  ConfigKey key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define HY_REAL(name, field, help)                                                          \
  KeyDef{{name, "real", help},                                                              \
         [](ExperimentConfig& c, const std::string& v) { c.field = parse_num<double>(name, v); }, \
         [](const ExperimentConfig& c) { return fmt_real(c.field); }}
#define HY_INT(name, field, help)                                                        \
  KeyDef{{name, "int", help},                                                            \
         [](ExperimentConfig& c, const std::string& v) { c.field = parse_num<int>(name, v); }, \
         [](const ExperimentConfig& c) { return std::to_string(c.field); }}
#define HY_INTLIST(name, field, help)                                                          \
  KeyDef{{name, "int_list", help},                                                             \
         [](ExperimentConfig& c, const std::string& v) { c.field = parse_list<int>(name, v); }, \
         [](const ExperimentConfig& c) { return fmt_list(c.field); }}
#define HY_REALLIST(name, field, help)                                                            \
  KeyDef{{name, "real_list", help},                                                               \
         [](ExperimentConfig& c, const std::string& v) { c.field = parse_list<double>(name, v); }, \
         [](const ExperimentConfig& c) { return fmt_list(c.field); }}

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> defs = {
      KeyDef{{"env", "string", "environment: ks | ns | toy"},
             [](ExperimentConfig& c, const std::string& v) { c.env = trim(v); },
             [](const ExperimentConfig& c) { return c.env; }},
      KeyDef{{"agent", "agent", "td3_no_mu | td3_concat | hyperl_param | hyperl_state_param"},
             [](ExperimentConfig& c, const std::string& v) { c.agent.kind = parse_agent_kind(trim(v)); },
             [](const ExperimentConfig& c) { return to_string(c.agent.kind); }},
      KeyDef{{"seed", "int_list", "master seeds, one independent run each"},
             [](ExperimentConfig& c, const std::string& v) {
               c.seeds = parse_list<std::uint64_t>("seed", v);
             },
             [](const ExperimentConfig& c) { return fmt_list(c.seeds); }},
      HY_INT("episodes", episodes, "training episodes per seed (0: ks 1500, ns 500, toy 100)"),
      HY_INT("eval_every", eval_every, "evaluation round every N training episodes (0: never)"),
      HY_INT("eval_mu_count", eval_mu_count, "evaluation episodes per round"),
      KeyDef{{"eval_mu", "optional_real", "fixed evaluation mu (none: sample the eval range)"},
             [](ExperimentConfig& c, const std::string& v) {
               const std::string t = trim(v);
               if (t == "none" || t.empty()) {
                 c.eval_mu.reset();
               } else {
                 c.eval_mu = parse_num<double>("eval_mu", t);
               }
             },
             [](const ExperimentConfig& c) { return c.eval_mu ? fmt_real(*c.eval_mu) : "none"; }},
      HY_INT("checkpoint_every", checkpoint_every, "checkpoint every N episodes (0: only at the end)"),
      KeyDef{{"replay_capacity", "int", "replay buffer capacity"},
             [](ExperimentConfig& c, const std::string& v) {
               const long long n = parse_num<long long>("replay_capacity", v);
               if (n < 1) throw ConfigError("replay_capacity must be >= 1");
               c.replay_capacity = static_cast<std::size_t>(n);
             },
             [](const ExperimentConfig& c) { return std::to_string(c.replay_capacity); }},
      KeyDef{{"log_wall_time", "bool", "record wall_ms (false writes 0 for byte-stable logs)"},
             [](ExperimentConfig& c, const std::string& v) { c.log_wall_time = parse_bool("log_wall_time", v); },
             [](const ExperimentConfig& c) { return std::string(c.log_wall_time ? "true" : "false"); }},
      KeyDef{{"out", "string", "run directory"},
             [](ExperimentConfig& c, const std::string& v) { c.out = trim(v); },
             [](const ExperimentConfig& c) { return c.out; }},
      KeyDef{{"ns_reference", "string", "reference trajectory file (empty: generate into the run directory)"},
             [](ExperimentConfig& c, const std::string& v) {
               const std::string t = trim(v);
               c.ns_reference = t == "none" ? "" : t;
             },
             [](const ExperimentConfig& c) { return c.ns_reference.empty() ? "none" : c.ns_reference; }},

      HY_REAL("gamma", agent.td3.gamma, "discount"),
      HY_REAL("rho", agent.td3.rho, "Polyak rate"),
      HY_REAL("explore_std", agent.td3.explore_std, "exploration noise std (normalized action units)"),
      HY_REAL("target_noise", agent.td3.target_noise, "target-policy smoothing noise std"),
      HY_REAL("noise_clip", agent.td3.noise_clip, "target noise clip"),
      HY_INT("policy_delay", agent.td3.policy_delay, "critic updates per actor update"),
      HY_INT("batch_size", agent.td3.batch_size, "mini-batch size"),
      HY_INT("warmup_steps", agent.td3.warmup_steps, "uniform random steps before training"),
      HY_REAL("actor_lr", agent.td3.actor_adam.lr, "Adam learning rate of the actor (or its hypernetwork)"),
      HY_REAL("critic_lr", agent.td3.critic_adam.lr, "Adam learning rate of the critics and encoder"),
      KeyDef{{"adam_beta1", "real", "Adam beta1"},
             [](ExperimentConfig& c, const std::string& v) {
               c.agent.td3.actor_adam.beta1 = c.agent.td3.critic_adam.beta1 = parse_num<double>("adam_beta1", v);
             },
             [](const ExperimentConfig& c) { return fmt_real(c.agent.td3.actor_adam.beta1); }},
      KeyDef{{"adam_beta2", "real", "Adam beta2"},
             [](ExperimentConfig& c, const std::string& v) {
               c.agent.td3.actor_adam.beta2 = c.agent.td3.critic_adam.beta2 = parse_num<double>("adam_beta2", v);
             },
             [](const ExperimentConfig& c) { return fmt_real(c.agent.td3.actor_adam.beta2); }},
      KeyDef{{"adam_epsilon", "real", "Adam epsilon"},
             [](ExperimentConfig& c, const std::string& v) {
               c.agent.td3.actor_adam.epsilon = c.agent.td3.critic_adam.epsilon =
                   parse_num<double>("adam_epsilon", v);
             },
             [](const ExperimentConfig& c) { return fmt_real(c.agent.td3.actor_adam.epsilon); }},
      HY_INTLIST("td3_hidden", agent.td3_hidden, "TD3 hidden layer widths"),
      HY_INTLIST("hyper_main_hidden", agent.hyper_main_hidden, "hidden widths of hypernetwork-generated networks"),
      HY_INTLIST("hyper_embed", agent.hyper_embed, "hypernetwork trunk widths (none: linear heads)"),

      HY_INT("enc_channels", agent.encoder.channels, "encoder conv channels"),
      HY_INT("enc_fc_hidden", agent.encoder.fc_hidden, "encoder dense hidden width"),
      HY_INT("enc_output_dim", agent.encoder.output_dim, "encoder feature dimension"),
      HY_REAL("enc_bn_momentum", agent.encoder.bn_momentum, "batch-norm running-stat momentum"),
      HY_REAL("enc_bn_epsilon", agent.encoder.bn_epsilon, "batch-norm epsilon"),

      HY_REAL("ks_length", ks.length, "KS domain length"),
      HY_INT("ks_grid", ks.grid, "KS grid points (power of two)"),
      HY_INT("ks_actuators", ks.actuators, "KS actuator count"),
      HY_REAL("ks_kernel_std", ks.kernel_std, "KS actuator kernel width"),
      HY_REAL("ks_alpha", ks.alpha, "KS action-cost weight"),
      HY_REAL("ks_control_dt", ks.control_dt, "KS control interval"),
      HY_INT("ks_substeps", ks.substeps, "ETDRK4 steps per control interval"),
      HY_INT("ks_horizon", ks.horizon, "KS control steps per episode"),
      HY_REALLIST("ks_train_mu", ks.train_mu, "KS training mu grid"),
      HY_REAL("ks_eval_mu_lo", ks.eval_mu_lo, "KS evaluation mu lower bound"),
      HY_REAL("ks_eval_mu_hi", ks.eval_mu_hi, "KS evaluation mu upper bound"),
      HY_INT("ks_ic_modes", ks.ic_modes, "KS initial-condition cosine modes"),
      HY_REAL("ks_ic_amplitude", ks.ic_amplitude, "KS initial-condition amplitude bound"),

      HY_INT("ns_n", ns.n, "NS grid points per side"),
      HY_REAL("ns_rho", ns.rho, "NS density"),
      HY_REALLIST("ns_train_mu", ns.train_mu, "NS training viscosities"),
      HY_REAL("ns_eval_mu_lo", ns.eval_mu_lo, "NS evaluation viscosity lower bound"),
      HY_REAL("ns_eval_mu_hi", ns.eval_mu_hi, "NS evaluation viscosity upper bound"),
      HY_REAL("ns_alpha", ns.alpha, "NS action-cost weight"),
      HY_REAL("ns_horizon_time", ns.horizon_time, "NS episode duration"),
      HY_INT("ns_control_steps", ns.control_steps, "NS control steps per episode"),
      HY_REAL("ns_u_ref", ns.u_ref, "NS reference control"),
      HY_REAL("ns_mu_ref", ns.mu_ref, "NS viscosity of the reference trajectory"),
      HY_REAL("ns_action_lo", ns.action_lo, "NS control lower bound"),
      HY_REAL("ns_action_hi", ns.action_hi, "NS control upper bound"),
      HY_REAL("ns_schedule_intercept", ns.schedule_intercept, "reference control u(t) = intercept + slope t"),
      HY_REAL("ns_schedule_slope", ns.schedule_slope, "reference control slope"),
      HY_REAL("ns_init_amplitude", ns.init_amplitude, "NS initial fields ~ U(-a, a)"),
      HY_REAL("ns_cg_tolerance", ns.cg_tolerance, "pressure solve max-norm residual"),
      HY_INT("ns_cg_max_iterations", ns.cg_max_iterations, "pressure solve iteration cap"),

      HY_REAL("toy_dt", toy.dt, "double-integrator time step"),
      HY_INT("toy_horizon", toy.horizon, "double-integrator horizon"),
  };
  return defs;
}

#undef HY_REAL
#undef HY_INT
#undef HY_INTLIST
#undef HY_REALLIST

const KeyDef& find_key(const std::string& key) {
  for (const auto& d : registry()) {
    if (d.key.name == key) return d;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void ExperimentConfig::resolve() {
  if (env != "ks" && env != "ns" && env != "toy") throw ConfigError("env must be ks, ns or toy");
  if (episodes == 0) episodes = env == "ks" ? 1500 : env == "ns" ? 500 : 100;
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) throw ConfigError("seeds must be distinct");
  if (eval_every < 0 || checkpoint_every < 0) throw ConfigError("eval_every/checkpoint_every must be >= 0");
  if (eval_mu_count < 1) throw ConfigError("eval_mu_count must be >= 1");
  if (out.empty()) throw ConfigError("out must not be empty");
  agent.td3.validate();
  for (const auto* widths : {&agent.td3_hidden, &agent.hyper_main_hidden}) {
    if (widths->empty()) throw ConfigError("hidden width lists must not be empty");
  }
  for (const auto* widths : {&agent.td3_hidden, &agent.hyper_main_hidden, &agent.hyper_embed}) {
    for (int w : *widths) {
      if (w < 1) throw ConfigError("layer widths must be >= 1");
    }
  }
  ks.validate();
  ns.validate();
  if (toy.dt <= 0.0 || toy.horizon < 1) throw ConfigError("toy_dt/toy_horizon invalid");
  EncoderSpec e = agent.encoder;
  e.height = e.width = ns.n;
  try {
    e.validate();
  } catch (const DimensionError& err) {
    throw ConfigError(err.what());
  }
  if (eval_mu) {
    if (env == "ks" && !(*eval_mu >= ks.eval_mu_lo && *eval_mu <= ks.eval_mu_hi)) {
      throw ConfigError("eval_mu outside the ks evaluation range");
    }
    if (env == "ns" && !(*eval_mu > 0.0)) throw ConfigError("eval_mu must be positive for ns");
  }
}

std::vector<int> ExperimentConfig::default_phases() const {
  if (env == "ns") return {250, 450};
  if (env == "ks") return {500, 1000};
  return {};
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& d : registry()) out.push_back(d.key);
    return out;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  find_key(key).set(cfg, value);
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) {
  return find_key(key).get(cfg);
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::istringstream in(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    if (!item.parents.empty()) throw ConfigError("config sections are not supported ('" + item.fullname() + "')");
    std::string joined;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) {
      if (i) joined += ',';
      joined += item.inputs[i];
    }
    find_key(item.name);
    out[item.name] = joined;
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ExperimentConfig build_config(const std::map<std::string, std::string>& file_values,
                              const std::map<std::string, std::string>& overrides) {
  ExperimentConfig cfg;
  // Registry order keeps dependent keys (e.g. adam betas) deterministic.
  for (const auto& d : registry()) {
    if (auto it = file_values.find(d.key.name); it != file_values.end()) d.set(cfg, it->second);
  }
  for (const auto& d : registry()) {
    if (auto it = overrides.find(d.key.name); it != overrides.end()) d.set(cfg, it->second);
  }
  for (const auto& [k, v] : file_values) find_key(k);
  for (const auto& [k, v] : overrides) find_key(k);
  cfg.resolve();
  return cfg;
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& d : registry()) out += d.key.name + " = " + d.get(cfg) + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  static const std::set<std::string> skip = {"out", "episodes", "checkpoint_every", "log_wall_time",
                                            "ns_reference"};
  std::string text;
  for (const auto& d : registry()) {
    if (skip.count(d.key.name)) continue;
    text += d.key.name + " = " + d.get(cfg) + "\n";
  }
  return fnv1a64(text);
}

}  // namespace hyperl
