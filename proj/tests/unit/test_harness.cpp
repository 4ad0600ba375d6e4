#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "hyperl/errors.hpp"
#include "hyperl/harness.hpp"

using namespace hyperl;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / "hyperl_test_harness" / name;
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<EpisodeRecord> by_seed(std::vector<EpisodeRecord> v) {
  std::stable_sort(v.begin(), v.end(),
                   [](const EpisodeRecord& a, const EpisodeRecord& b) { return a.seed < b.seed; });
  return v;
}

ExperimentConfig toy_config(const std::string& out, const std::string& agent = "td3_no_mu") {
  return build_config({}, {{"env", "toy"},
                           {"agent", agent},
                           {"seed", "0,1"},
                           {"episodes", "6"},
                           {"eval_every", "3"},
                           {"eval_mu_count", "2"},
                           {"checkpoint_every", "2"},
                           {"td3_hidden", "16"},
                           {"hyper_main_hidden", "8"},
                           {"hyper_embed", "4"},
                           {"batch_size", "4"},
                           {"warmup_steps", "6"},
                           {"log_wall_time", "false"},
                           {"out", out}});
}

ExperimentConfig tiny_ks(const std::string& out) {
  return build_config({}, {{"env", "ks"},
                           {"agent", "hyperl_param"},
                           {"seed", "4"},
                           {"episodes", "3"},
                           {"ks_horizon", "4"},
                           {"eval_every", "3"},
                           {"hyper_main_hidden", "8"},
                           {"hyper_embed", "4"},
                           {"batch_size", "4"},
                           {"warmup_steps", "4"},
                           {"log_wall_time", "false"},
                           {"out", out}});
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("derived seeds are distinct across tags and indices") {
  std::vector<std::uint64_t> seen;
  for (std::uint64_t tag = 0; tag < 4; ++tag) {
    for (std::uint64_t i = 0; i < 50; ++i) seen.push_back(derive_seed(7, tag, i));
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  CHECK(derive_seed(7, 1, 2) == derive_seed(7, 1, 2));
  CHECK(derive_seed(7, 1, 2) != derive_seed(8, 1, 2));
}

TEST_CASE("one toy episode per seed") {
  ExperimentConfig cfg = toy_config(scratch("one").string());
  cfg.episodes = 1;
  cfg.eval_every = 0;
  const RunLog log = run_training(cfg);
  const auto train = std::count_if(log.records.begin(), log.records.end(),
                                   [](const EpisodeRecord& r) { return r.phase == "train"; });
  CHECK(train == 2);
  for (const auto& r : log.records) CHECK(r.steps == 5);
  CHECK(std::filesystem::exists(cfg.out + "/config.txt"));
  CHECK(std::filesystem::exists(cfg.out + "/train.csv"));
  CHECK(std::filesystem::exists(checkpoint_dir(cfg.out, 0) / "manifest.txt"));
  CHECK(std::filesystem::exists(checkpoint_dir(cfg.out, 1) / "manifest.txt"));
  // Frozen resolved config.
  CHECK(build_config(read_config_file(cfg.out + "/config.txt"), {}).episodes == 1);
}

TEST_CASE("identical configuration gives byte-identical logs") {
  for (const std::string agent : {"td3_concat", "hyperl_param"}) {
    ExperimentConfig a = toy_config(scratch("det_a").string(), agent);
    ExperimentConfig b = toy_config(scratch("det_b").string(), agent);
    const RunLog la = run_training(a);
    const RunLog lb = run_training(b);
    CHECK(la.records == lb.records);
    CHECK(slurp(a.out + "/train.csv") == slurp(b.out + "/train.csv"));
    CHECK(slurp(a.out + "/eval.csv") == slurp(b.out + "/eval.csv"));
    CHECK(la.records.size() == 2 * (6 + 2 * 2));
  }
}

TEST_CASE("resume after a checkpoint reproduces the tail") {
  const ExperimentConfig full = toy_config(scratch("full").string());
  const RunLog reference = run_training(full);

  ExperimentConfig part = toy_config(scratch("part").string());
  part.episodes = 4;
  run_training(part);
  part.episodes = 6;
  TrainOptions opts;
  opts.resume = true;
  run_training(part, opts);
  // Seeds run one after another, so the resumed file interleaves them
  // differently; per seed the rows are identical.
  for (const std::string file : {"/train.csv", "/eval.csv"}) {
    CHECK(by_seed(read_runlog(full.out + file)) == by_seed(read_runlog(part.out + file)));
  }

  // A checkpoint of a different configuration is refused.
  ExperimentConfig other = toy_config(scratch("other").string());
  other.agent.td3.rho = 0.01;
  Trainer t(other, 0);
  CHECK_THROWS_AS(t.restore(load_checkpoint(checkpoint_dir(full.out, 0))), ConfigError);
}

TEST_CASE("trainer checkpoint restore continues identically") {
  const ExperimentConfig cfg = toy_config(scratch("trainer").string());
  Trainer a(cfg, 1);
  for (int e = 0; e < 3; ++e) a.train_episode();
  const CheckpointData ck = a.checkpoint();
  const auto dir = scratch("trainer_ck");
  save_checkpoint(dir, ck);
  Trainer b(cfg, 1);
  b.restore(load_checkpoint(dir));
  CHECK(b.episode() == 3);
  CHECK(b.global_step() == a.global_step());
  for (int e = 0; e < 3; ++e) CHECK(a.train_episode() == b.train_episode());
  CHECK(a.evaluate() == b.evaluate());
}

TEST_CASE("KS training mu stays on the grid; evaluation samples the eval range") {
  const ExperimentConfig cfg = tiny_ks(scratch("ks").string());
  Trainer t(cfg, 4);
  for (int e = 0; e < 12; ++e) {
    const EpisodeRecord r = t.train_episode();
    CHECK(std::find(cfg.ks.train_mu.begin(), cfg.ks.train_mu.end(), r.mu) != cfg.ks.train_mu.end());
    CHECK(r.steps == 4);
  }
  const auto ev = t.evaluate();
  CHECK(ev.size() == 10);
  bool off_grid = false;
  for (const auto& r : ev) {
    CHECK(r.phase == "eval");
    CHECK(r.episode == 12);
    CHECK(r.mu >= -0.25);
    CHECK(r.mu <= 0.25);
    off_grid |= std::find(cfg.ks.train_mu.begin(), cfg.ks.train_mu.end(), r.mu) == cfg.ks.train_mu.end();
  }
  CHECK(off_grid);
  CHECK(t.evaluate() == ev);
  for (const auto& r : t.evaluate(0.25)) CHECK(r.mu == 0.25);
}

TEST_CASE("run_evaluation reads checkpoints") {
  const ExperimentConfig cfg = tiny_ks(scratch("ks_eval").string());
  run_training(cfg);
  const RunLog a = run_evaluation(cfg.out + "/ckpt", 0.25);
  CHECK(a.records.size() == 10);
  for (const auto& r : a.records) CHECK(r.mu == 0.25);
  const RunLog b = run_evaluation(checkpoint_dir(cfg.out, 4), std::nullopt);
  const RunLog c = run_evaluation(checkpoint_dir(cfg.out, 4), std::nullopt);
  CHECK(b.records == c.records);
  CHECK_THROWS_AS(run_evaluation(scratch("nothing"), std::nullopt), ConfigError);
}

TEST_CASE("trajectory export agrees with the episode record") {
  const ExperimentConfig cfg = tiny_ks(scratch("traj").string());
  Trainer t(cfg, 4);
  t.train_episode();
  Trajectory traj;
  RolloutOptions ro;
  ro.controller_on_step = 2;
  const EpisodeRecord r = rollout(t.env(), &t.agent(), 11, ResetMode::eval, 0.1, ro, nullptr, &traj);
  REQUIRE(traj.steps.size() == 4);
  double sum = 0.0, c1 = 0.0, c2 = 0.0;
  for (const auto& s : traj.steps) {
    sum += s.reward;
    c1 += s.state_cost;
    c2 += s.action_cost;
  }
  CHECK(r.cum_reward == sum);
  CHECK(r.state_cost == c1);
  CHECK(r.action_cost == c2);
  CHECK_FALSE(traj.steps[0].controlled);
  for (double a : traj.steps[1].action) CHECK(a == 0.0);
  CHECK(traj.steps[2].controlled);

  const auto p = scratch("traj_csv") / "t.csv";
  std::filesystem::create_directories(p.parent_path());
  write_trajectory_csv(p, traj);
  std::ifstream in(p);
  std::string header, row;
  std::getline(in, header);
  CHECK(header.rfind("t_index,mu,controlled,y_0,", 0) == 0);
  CHECK(std::count(header.begin(), header.end(), ',') == 3 + 64 + 8 + 3 - 1);
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  CHECK(rows == 5);

  // The uncontrolled rollout is the zero action throughout.
  Trajectory zero;
  rollout(t.env(), nullptr, 11, ResetMode::eval, 0.1, RolloutOptions{}, nullptr, &zero);
  CHECK(zero.steps[1].obs == traj.steps[1].obs);
}

}  // TEST_SUITE
