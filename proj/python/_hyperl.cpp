#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "hyperl/cli.hpp"
#include "hyperl/config.hpp"
#include "hyperl/errors.hpp"
#include "hyperl/harness.hpp"
#include "hyperl/hypernet.hpp"
#include "hyperl/mlp.hpp"
#include "hyperl/stats.hpp"

namespace py = pybind11;
using namespace hyperl;

namespace {

ResetMode parse_mode(const std::string& s) {
  if (s == "train") return ResetMode::train;
  if (s == "eval") return ResetMode::eval;
  throw ConfigError("reset mode must be train or eval, got " + s);
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "linear") return Activation::linear;
  throw ConfigError("unknown activation " + s);
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

struct PyAgent {
  std::shared_ptr<Agent> agent;
  Rng rng;
};

}  // namespace

PYBIND11_MODULE(_hyperl, m) {
  m.doc() = "Hypernetwork TD3 for parametric PDE control";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);
  py::register_exception<BlowUpError>(m, "BlowUpError", PyExc_ArithmeticError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  // Configuration.
  py::class_<ExperimentConfig>(m, "Config")
      .def("get", [](const ExperimentConfig& c, const std::string& k) { return get_config_value(c, k); })
      .def("set",
           [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             set_config_value(c, k, v);
             c.resolve();
           })
      .def("to_text", [](const ExperimentConfig& c) { return config_to_text(c); })
      .def("hash", [](const ExperimentConfig& c) { return config_hash(c); })
      .def_readonly("env", &ExperimentConfig::env)
      .def_readonly("seeds", &ExperimentConfig::seeds)
      .def_readonly("episodes", &ExperimentConfig::episodes)
      .def_readonly("out", &ExperimentConfig::out)
      .def("__repr__", [](const ExperimentConfig& c) { return "<Config env=" + c.env + " out=" + c.out + ">"; });
  m.def("build_config", &build_config, py::arg("file_values") = std::map<std::string, std::string>{},
        py::arg("overrides") = std::map<std::string, std::string>{});
  m.def("parse_config_text", &parse_config_text);
  m.def("config_keys", [] {
    std::vector<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& k : config_keys()) out.emplace_back(k.name, k.type, k.help);
    return out;
  });

  // Run logs and statistics.
  py::class_<EpisodeRecord>(m, "EpisodeRecord")
      .def(py::init<>())
      .def_readwrite("phase", &EpisodeRecord::phase)
      .def_readwrite("seed", &EpisodeRecord::seed)
      .def_readwrite("episode", &EpisodeRecord::episode)
      .def_readwrite("mu", &EpisodeRecord::mu)
      .def_readwrite("cum_reward", &EpisodeRecord::cum_reward)
      .def_readwrite("state_cost", &EpisodeRecord::state_cost)
      .def_readwrite("action_cost", &EpisodeRecord::action_cost)
      .def_readwrite("steps", &EpisodeRecord::steps)
      .def_readwrite("wall_ms", &EpisodeRecord::wall_ms)
      .def_readwrite("blowup", &EpisodeRecord::blowup)
      .def(py::self == py::self)
      .def("__repr__", [](const EpisodeRecord& r) { return "<EpisodeRecord " + format_record(r) + ">"; });
  m.attr("RUNLOG_HEADER") = kRunLogHeader;
  m.attr("STATS_HEADER") = kStatsHeader;
  m.def("format_record", &format_record);
  m.def("parse_record", &parse_record);
  m.def("read_runlog", &read_runlog);
  m.def("write_runlog", &write_runlog);

  py::class_<PhaseRow>(m, "PhaseRow")
      .def_readonly("label", &PhaseRow::label)
      .def_readonly("boundary", &PhaseRow::boundary)
      .def_readonly("count", &PhaseRow::count)
      .def_readonly("mean", &PhaseRow::mean)
      .def_readonly("std", &PhaseRow::std);
  m.def("aggregate_phase_stats",
        [](const std::vector<EpisodeRecord>& r, const std::vector<int>& b) { return aggregate_phase_stats(r, b); },
        py::arg("records"), py::arg("boundaries") = std::vector<int>{});
  m.def(
      "bootstrap_ci",
      [](const std::vector<std::vector<double>>& per_seed, double confidence, int resamples, std::uint64_t seed) {
        Rng rng = make_rng(seed, 0);
        const Interval i = bootstrap_ci(per_seed, confidence, resamples, rng);
        return std::make_pair(i.low, i.high);
      },
      py::arg("per_seed"), py::arg("confidence") = 0.95, py::arg("resamples") = 2000, py::arg("seed") = 0);
  m.def("rewards_by_seed", &rewards_by_seed);
  m.def("filter_phase", &filter_phase);
  m.def(
      "write_stats_csv",
      [](const std::vector<EpisodeRecord>& r, const std::filesystem::path& path, const std::vector<int>& b,
         double confidence, int resamples, std::uint64_t seed) {
        StatsOptions o;
        o.boundaries = b;
        o.confidence = confidence;
        o.resamples = resamples;
        o.seed = seed;
        write_stats_csv(r, o, path);
      },
      py::arg("records"), py::arg("path"), py::arg("boundaries") = std::vector<int>{},
      py::arg("confidence") = 0.95, py::arg("resamples") = 2000, py::arg("seed") = 0);

  // Networks.
  m.def(
      "mlp_forward",
      [](const std::vector<int>& dims, const std::string& out_act, const std::vector<double>& params,
         const std::vector<double>& x) {
        if (dims.size() < 2) throw ConfigError("dims needs input and output widths");
        const std::vector<int> hidden(dims.begin() + 1, dims.end() - 1);
        const MlpSpec spec = MlpSpec::dense(dims.front(), hidden, dims.back(), parse_activation(out_act));
        return mlp_forward(FlatParams(spec, params), x);
      },
      py::arg("dims"), py::arg("output_activation"), py::arg("params"), py::arg("x"));
  m.def(
      "mlp_param_count",
      [](const std::vector<int>& dims) {
        const std::vector<int> hidden(dims.begin() + 1, dims.end() - 1);
        return MlpSpec::dense(dims.front(), hidden, dims.back(), Activation::linear).total_params();
      },
      py::arg("dims"));
  m.def(
      "mlp_init",
      [](const std::vector<int>& dims, std::uint64_t seed) {
        const std::vector<int> hidden(dims.begin() + 1, dims.end() - 1);
        return init_params(MlpSpec::dense(dims.front(), hidden, dims.back(), Activation::linear), seed).values;
      },
      py::arg("dims"), py::arg("seed"));
  m.def(
      "hyper_generate",
      [](int context_dim, const std::vector<int>& embed, const std::vector<int>& target_dims,
         const std::vector<double>& hyper_params, const std::vector<double>& context) {
        const std::vector<int> hidden(target_dims.begin() + 1, target_dims.end() - 1);
        const MlpSpec target = MlpSpec::dense(target_dims.front(), hidden, target_dims.back(), Activation::tanh);
        return hyper_forward(HyperParams(HyperSpec(context_dim, embed, target), hyper_params), context).values;
      },
      py::arg("context_dim"), py::arg("embed"), py::arg("target_dims"), py::arg("hyper_params"),
      py::arg("context"));
  m.def(
      "hyper_init",
      [](int context_dim, const std::vector<int>& embed, const std::vector<int>& target_dims, std::uint64_t seed) {
        const std::vector<int> hidden(target_dims.begin() + 1, target_dims.end() - 1);
        const MlpSpec target = MlpSpec::dense(target_dims.front(), hidden, target_dims.back(), Activation::tanh);
        return hyper_init(HyperSpec(context_dim, embed, target), seed).values;
      },
      py::arg("context_dim"), py::arg("embed"), py::arg("target_dims"), py::arg("seed"));

  // Environments.
  py::class_<Environment, std::shared_ptr<Environment>>(m, "Environment")
      .def_property_readonly("name", &Environment::name)
      .def_property_readonly("observation_dim", &Environment::observation_dim)
      .def_property_readonly("action_dim", &Environment::action_dim)
      .def_property_readonly("horizon", &Environment::horizon)
      .def_property_readonly("mu", &Environment::mu)
      .def_property_readonly("t_index", &Environment::t_index)
      .def_property_readonly("observation", [](const Environment& e) { return to_vec(e.observation()); })
      .def(
          "reset",
          [](Environment& e, std::uint64_t seed, const std::string& mode, std::optional<double> mu) {
            e.reset(seed, parse_mode(mode), mu);
          },
          py::arg("seed"), py::arg("mode") = "train", py::arg("mu") = py::none())
      .def("step",
           [](Environment& e, const std::vector<double>& a) {
             const EnvStep s = e.step(a);
             return std::make_tuple(s.reward, s.state_cost, s.action_cost);
           })
      .def("physical_action", [](const Environment& e, const std::vector<double>& a) { return e.physical_action(a); });
  m.def("make_env", [](const ExperimentConfig& cfg) { return std::shared_ptr<Environment>(make_env(cfg)); });

  // Agents.
  py::class_<PyAgent>(m, "Agent")
      .def_property_readonly("kind", [](const PyAgent& a) { return to_string(a.agent->kind()); })
      .def_property_readonly("action_dim", [](const PyAgent& a) { return a.agent->action_dim(); })
      .def(
          "act",
          [](PyAgent& a, const std::vector<double>& obs, double mu, bool explore) {
            return a.agent->select_action(obs, mu, explore, a.rng);
          },
          py::arg("obs"), py::arg("mu"), py::arg("explore") = false)
      .def("state", [](const PyAgent& a) {
        std::map<std::string, std::vector<double>> out;
        for (auto& arr : a.agent->export_state()) out[arr.name] = std::move(arr.values);
        return out;
      });
  m.def(
      "make_agent",
      [](const ExperimentConfig& cfg, const Environment& env, std::uint64_t seed) {
        return PyAgent{std::shared_ptr<Agent>(make_agent(cfg.agent, EnvInfo::from(env), seed)), make_rng(seed, 1)};
      },
      py::arg("config"), py::arg("env"), py::arg("seed") = 0);

  // Harness.
  py::class_<Trainer>(m, "Trainer")
      .def(py::init<ExperimentConfig, std::uint64_t>(), py::arg("config"), py::arg("seed"))
      .def_property_readonly("episode", &Trainer::episode)
      .def_property_readonly("global_step", &Trainer::global_step)
      .def_property_readonly("seed", &Trainer::seed)
      .def("train_episode", &Trainer::train_episode, py::call_guard<py::gil_scoped_release>())
      .def("evaluate", &Trainer::evaluate, py::arg("mu") = py::none(), py::call_guard<py::gil_scoped_release>())
      .def(
          "act",
          [](const Trainer& t, const std::vector<double>& obs, double mu) {
            Rng unused = make_rng(0, 0);
            return t.agent().select_action(obs, mu, false, unused);
          },
          py::arg("obs"), py::arg("mu"))
      .def("save_checkpoint", [](const Trainer& t, const std::filesystem::path& dir) {
        save_checkpoint(dir, t.checkpoint());
      })
      .def("restore", [](Trainer& t, const std::filesystem::path& dir) { t.restore(load_checkpoint(dir)); })
      .def(
          "rollout",
          [](Trainer& t, std::uint64_t seed, std::optional<double> mu, int controller_on_step,
             std::optional<std::filesystem::path> csv) {
            RolloutOptions o;
            o.controller_on_step = controller_on_step;
            Trajectory traj;
            const EpisodeRecord r = rollout(t.env(), &t.agent(), seed, ResetMode::eval, mu, o, nullptr, &traj);
            if (csv) write_trajectory_csv(*csv, traj);
            return r;
          },
          py::arg("seed"), py::arg("mu") = py::none(), py::arg("controller_on_step") = 0,
          py::arg("csv") = py::none());

  m.def(
      "run_training",
      [](const ExperimentConfig& cfg, bool resume) {
        TrainOptions o;
        o.resume = resume;
        py::gil_scoped_release release;
        return run_training(cfg, o).records;
      },
      py::arg("config"), py::arg("resume") = false);
  m.def(
      "run_evaluation",
      [](const std::filesystem::path& root, std::optional<double> mu) { return run_evaluation(root, mu).records; },
      py::arg("checkpoint"), py::arg("mu") = py::none());
  m.def(
      "export_uncontrolled_trajectory",
      [](const ExperimentConfig& cfg, std::uint64_t seed, std::optional<double> mu, const std::filesystem::path& csv) {
        auto env = make_env(cfg);
        Trajectory traj;
        const EpisodeRecord r = rollout(*env, nullptr, seed, ResetMode::eval, mu, {}, nullptr, &traj);
        write_trajectory_csv(csv, traj);
        return r;
      },
      py::arg("config"), py::arg("seed"), py::arg("mu"), py::arg("csv"));
  m.def("derive_seed", &derive_seed);

  // Command line.
  m.def("cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = parse_and_dispatch(args, out, err);
    return std::make_tuple(code, out.str(), err.str());
  });
}
