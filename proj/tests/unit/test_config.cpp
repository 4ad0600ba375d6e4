#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "hyperl/checkpoint.hpp"
#include "hyperl/config.hpp"
#include "hyperl/errors.hpp"

using namespace hyperl;

TEST_SUITE("config") {

TEST_CASE("defaults") {
  ExperimentConfig c = build_config({}, {});
  CHECK(c.env == "ks");
  CHECK(c.agent.kind == AgentKind::hyperl_param);
  CHECK(c.episodes == 1500);
  CHECK(c.seeds.size() == 5);
  CHECK(c.eval_mu_count == 10);
  CHECK(c.eval_every == 50);
  CHECK(c.replay_capacity == 1000000u);
  CHECK(c.agent.td3.gamma == 0.99);
  CHECK(c.agent.td3.batch_size == 256);
  CHECK(c.default_phases() == std::vector<int>{500, 1000});
  ExperimentConfig n = build_config({{"env", "ns"}}, {});
  CHECK(n.episodes == 500);
  CHECK(n.default_phases() == std::vector<int>{250, 450});
}

TEST_CASE("precedence: override beats file beats default") {
  // (default, file, override) triples on three keys of different types.
  const std::map<std::string, std::string> file{{"gamma", "0.95"}, {"episodes", "7"}, {"agent", "td3_concat"}};
  const ExperimentConfig f = build_config(file, {});
  CHECK(f.agent.td3.gamma == 0.95);
  CHECK(f.episodes == 7);
  CHECK(f.agent.kind == AgentKind::td3_concat);
  const ExperimentConfig o =
      build_config(file, {{"gamma", "0.9"}, {"episodes", "3"}, {"agent", "td3_no_mu"}});
  CHECK(o.agent.td3.gamma == 0.9);
  CHECK(o.episodes == 3);
  CHECK(o.agent.kind == AgentKind::td3_no_mu);
  const ExperimentConfig d = build_config({}, {{"episodes", "3"}});
  CHECK(d.agent.td3.gamma == 0.99);
  CHECK(d.agent.kind == AgentKind::hyperl_param);
}

TEST_CASE("config text parsing") {
  const auto m = parse_config_text("# comment\nenv = ns\n; other\n\nseed = 1,2\ntd3_hidden=32,32\n");
  CHECK(m.at("env") == "ns");
  CHECK(m.at("seed") == "1,2");
  CHECK(m.at("td3_hidden") == "32,32");
  const ExperimentConfig c = build_config(m, {});
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c.agent.td3_hidden == std::vector<int>{32, 32});

  const auto p = std::filesystem::temp_directory_path() / "hyperl_test_cfg.txt";
  std::ofstream(p) << "agent = td3_no_mu\nepisodes = 4\n";
  CHECK(read_config_file(p).at("episodes") == "4");
  std::filesystem::remove(p);
  CHECK_THROWS_AS(read_config_file(p), ConfigError);
}

TEST_CASE("invalid values are rejected") {
  CHECK_THROWS_AS(build_config({{"nonsense", "1"}}, {}), ConfigError);
  CHECK_THROWS_AS(build_config({}, {{"episodes", "abc"}}), ConfigError);
  CHECK_THROWS_AS(build_config({}, {{"episodes", "-1"}}), ConfigError);
  CHECK_THROWS_AS(build_config({}, {{"seed", "1,1"}}), ConfigError);
  CHECK_THROWS_AS(build_config({}, {{"env", "heat"}}), ConfigError);
  CHECK_THROWS_AS(build_config({}, {{"agent", "ppo"}}), ConfigError);
  CHECK_THROWS_AS(build_config({}, {{"gamma", "1.5"}}), ConfigError);
  CHECK_THROWS_AS(build_config({}, {{"ks_grid", "48"}}), ConfigError);
  CHECK_THROWS_AS(build_config({}, {{"log_wall_time", "maybe"}}), ConfigError);
  CHECK_THROWS_AS(build_config({}, {{"eval_mu", "0.3"}}), ConfigError);
  CHECK_NOTHROW(build_config({}, {{"eval_mu", "0.25"}}));
}

TEST_CASE("resolved text round trips and every key is printed") {
  ExperimentConfig c = build_config({}, {{"env", "toy"}, {"eval_mu", "0.1"}, {"hyper_embed", "none"}});
  CHECK(c.agent.hyper_embed.empty());
  const std::string text = config_to_text(c);
  std::set<std::string> printed;
  for (const auto& [k, v] : parse_config_text(text)) printed.insert(k);
  CHECK(printed.size() == config_keys().size());
  const ExperimentConfig back = build_config(parse_config_text(text), {});
  CHECK(config_to_text(back) == text);
  for (const auto& key : config_keys()) CHECK(get_config_value(back, key.name) == get_config_value(c, key.name));
}

TEST_CASE("config hash ignores bookkeeping keys") {
  const ExperimentConfig a = build_config({}, {});
  const ExperimentConfig b = build_config({}, {{"out", "elsewhere"}, {"episodes", "9"}, {"log_wall_time", "false"}});
  const ExperimentConfig c = build_config({}, {{"rho", "0.01"}});
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("checkpoint files round trip") {
  CheckpointData d;
  d.config_hash = 0x1234abcdull;
  d.seed = 3;
  d.episode = 12;
  d.global_step = 2400;
  d.replay_size = 5;
  d.replay_cursor = 5;
  d.rng = {{"explore", "1 2 3"}, {"train", "4 5 6"}};
  d.arrays = {{"actor", {1.0, -0.0, 1e-310, 3.141592653589793}}, {"empty", {}}, {"b", {2.0}}};
  d.config_text = "env = ks\nagent = hyperl_param\n";
  const auto dir = std::filesystem::temp_directory_path() / "hyperl_test_ckpt";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir, d);
  CHECK(std::filesystem::exists(dir / "manifest.txt"));
  CHECK(std::filesystem::file_size(dir / "arrays.bin") == 5 * sizeof(double));
  const CheckpointData back = load_checkpoint(dir);
  CHECK(back.version == kCheckpointVersion);
  CHECK(back.config_hash == d.config_hash);
  CHECK(back.seed == 3);
  CHECK(back.episode == 12);
  CHECK(back.global_step == 2400);
  CHECK(back.replay_size == 5);
  CHECK(back.rng == d.rng);
  CHECK(back.config_text == d.config_text);
  REQUIRE(back.arrays.size() == 3);
  CHECK(back.arrays[0].name == "actor");
  CHECK(back.arrays[0].values == d.arrays[0].values);
  CHECK(std::signbit(back.arrays[0].values[1]));
  CHECK(back.arrays[1].values.empty());

  std::filesystem::resize_file(dir / "arrays.bin", 3 * sizeof(double));
  CHECK_THROWS_AS(load_checkpoint(dir), ConfigError);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_checkpoint(dir), ConfigError);
}

}  // TEST_SUITE
