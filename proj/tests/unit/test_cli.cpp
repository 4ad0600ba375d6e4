#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hyperl/cli.hpp"
#include "hyperl/config.hpp"
#include "hyperl/runlog.hpp"

using namespace hyperl;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = parse_and_dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / "hyperl_test_cli" / name;
  std::filesystem::remove_all(p);
  return p;
}

std::vector<std::string> small_train(const std::string& out) {
  return {"train", "--env", "ks", "--agent", "hyperl_param", "--seed", "0", "--episodes", "2", "--out", out,
          "--ks_horizon", "3", "--hyper_main_hidden", "8", "--hyper_embed", "4", "--batch_size", "4",
          "--warmup_steps", "2", "--eval_every", "0", "--log_wall_time", "false"};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
  const Result help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("train") != std::string::npos);
  const Result thelp = run({"train", "--help"});
  CHECK(thelp.code == 0);
  for (const auto& key : config_keys()) CHECK(thelp.out.find("--" + key.name) != std::string::npos);

  const Result none = run({});
  CHECK(none.code == 2);
  CHECK(none.err.rfind("error: exit=2 kind=config message=", 0) == 0);
  const Result unknown = run({"train", "--no-such-flag", "1"});
  CHECK(unknown.code == 2);
  CHECK(std::count(unknown.err.begin(), unknown.err.end(), '\n') == 1);
  CHECK(run({"frobnicate"}).code == 2);
}

TEST_CASE("show-config prints every key with precedence applied") {
  const auto cfgfile = scratch("cfg") / "c.txt";
  std::filesystem::create_directories(cfgfile.parent_path());
  std::ofstream(cfgfile) << "gamma = 0.95\nrho = 0.02\n";
  const Result r = run({"train", "--config", cfgfile.string(), "--rho", "0.03", "--show-config"});
  REQUIRE(r.code == 0);
  const auto m = parse_config_text(r.out);
  CHECK(m.size() == config_keys().size());
  CHECK(m.at("gamma") == "0.95");
  CHECK(m.at("rho") == "0.03");
  CHECK(m.at("batch_size") == "256");

  CHECK(run({"train", "--episodes", "abc", "--show-config"}).code == 2);
  CHECK(run({"train", "--config", "/nonexistent/file.txt", "--show-config"}).code == 2);
}

TEST_CASE("train, eval, stats and export-traj") {
  const auto out = scratch("run");
  const Result t = run(small_train(out.string()));
  REQUIRE(t.code == 0);
  CHECK(t.out.find("episode=1 seed=0 reward=") != std::string::npos);
  CHECK(t.out.find("episode=2 seed=0 reward=") != std::string::npos);
  CHECK(std::filesystem::exists(out / "train.csv"));
  CHECK(std::filesystem::exists(out / "config.txt"));
  CHECK(std::filesystem::exists(out / "ckpt" / "seed_0" / "manifest.txt"));

  const Result e = run({"eval", "--checkpoint", (out / "ckpt").string(), "--mu", "0.25"});
  REQUIRE(e.code == 0);
  const auto ev = read_runlog(out / "ckpt" / "eval_cli.csv");
  CHECK(ev.size() == 10);
  for (const auto& r : ev) CHECK(r.mu == 0.25);
  CHECK(run({"eval", "--checkpoint", (out / "ckpt").string(), "--mu", "0.3"}).code == 2);
  CHECK(run({"eval", "--checkpoint", (out / "missing").string()}).code == 2);

  const Result s = run({"stats", "--log", (out / "train.csv").string(), "--phases", "1"});
  REQUIRE(s.code == 0);
  CHECK(s.out.rfind("phase,window,episodes,seeds,mean,std,ci_low,ci_high\n", 0) == 0);
  CHECK(s.out.find("train,all,2,1,") != std::string::npos);
  CHECK(s.out.find("train,>1,1,1,") != std::string::npos);
  CHECK(run({"stats", "--log", (out / "train.csv").string(), "--phases", "500,1000"}).code == 2);
  CHECK(run({"stats", "--log", (out / "train.csv").string(), "--phases", "x"}).code == 2);

  const auto traj = out / "traj.csv";
  const Result x = run({"export-traj", "--checkpoint", (out / "ckpt").string(), "--mu", "0.1",
                        "--controller-on", "1", "--output", traj.string()});
  REQUIRE(x.code == 0);
  CHECK(std::filesystem::exists(traj));
  const Result u = run({"export-traj", "--env", "ks", "--ks_horizon", "3", "--output", (out / "u.csv").string()});
  CHECK(u.code == 0);
}

TEST_CASE("NS reference generation") {
  const auto out = scratch("ref");
  const Result r = run({"gen-reference", "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(out / "reference.bin"));
  const auto other = out / "copy.bin";
  CHECK(run({"gen-reference", "--output", other.string()}).code == 0);
  std::ifstream a(out / "reference.bin", std::ios::binary), b(other, std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

}  // TEST_SUITE
