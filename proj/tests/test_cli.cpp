#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "mpe/cli.hpp"
#include "mpe/uai.hpp"
#include "mpe/weights.hpp"
#include "testing.hpp"

using namespace mpe;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mpels");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string model_file() {
  static const std::string p = testing::write_temp("cli_model.uai", serialize_uai(testing::random_model(21, {12, 12, 2, 3, 3, 1.3}))).string();
  return p;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "mpe_tests" / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("validate") {
  const auto r = cli({"validate", model_file()});
  CHECK(r.code == 0);
  CHECK(r.out.find("variables 12\n") != std::string::npos);
  CHECK(r.out.find("factors 16\n") != std::string::npos);
  CHECK(r.out.find("hash ") != std::string::npos);
}

TEST_CASE("drift prints the bound") {
  const auto r = cli({"drift", "--trials", "2000", "--log-level", "quiet"});
  CHECK(r.code == 0);
  CHECK(r.out.find("bound 40.0\n") != std::string::npos);
  CHECK(r.out.find("mean_tau ") != std::string::npos);
}

TEST_CASE("solve is reproducible") {
  const std::vector<std::string> args{"solve", model_file(), "--steps", "300", "--seed", "4", "--method", "gls+"};
  const auto a = cli(args), b = cli(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("best_F ") != std::string::npos);
  CHECK(cli({"solve", model_file(), "--steps", "300", "--seed", "5"}).code == 0);
}

TEST_CASE("exit codes") {
  CHECK(cli({"validate", model_file(), "--bogus"}).code == 1);
  CHECK(cli({"nonsense"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"validate", "/nonexistent/model.uai"}).code == 2);
  const auto bad_model = testing::write_temp("cli_bad.uai", "MARKOV\n2\n2 2\n1\n1 0\n3\n0.5 0.5\n");
  const auto r = cli({"validate", bad_model.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("parse error") != std::string::npos);
  const auto bad_w = testing::write_temp("cli_bad.mpew", "not a weight file");
  CHECK(cli({"solve", model_file(), "--weights", bad_w.string(), "--steps", "10"}).code == 2);
  CHECK(cli({"solve", model_file(), "--lambda", "0.5", "--steps", "10"}).code == 1);
  CHECK(cli({"datagen", model_file(), "--budget-steps", "50", "--queries", "1"}).code == 1);
  CHECK(cli({"eval", model_file(), "--steps", "100", "--checkpoints", "50,200"}).code == 1);
}

TEST_CASE("neural solve with zero weights") {
  const auto m = load_uai(model_file());
  const auto w = testing::write_temp("cli_zero.mpew", "");
  save_weights(zero_weights(meta_for_model(m, 8, 2, 1, 1, 8)), w);
  const auto r = cli({"solve", model_file(), "--weights", w.string(), "--lambda", "0.3", "--steps", "50"});
  CHECK(r.code == 0);
  CHECK(r.out.find("best_F ") != std::string::npos);
}

TEST_CASE("datagen writes a dataset and manifest") {
  const auto dir = fresh_dir("cli_datagen");
  const auto r = cli({"datagen", model_file(), "--stl", "10", "--budget-steps", "100", "--queries", "2", "--workers",
                      "1", "--out", dir.string(), "--log-level", "quiet"});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "dataset.jsonl"));
  CHECK(fs::exists(dir / "manifest.toml"));
  CHECK(r.out.find("records 22\n") != std::string::npos);
  const auto manifest = read_text_file(dir / "manifest.toml");
  CHECK(manifest.find("stl = \"10\"") != std::string::npos);
  CHECK(manifest.find("[manifest]") != std::string::npos);
}

TEST_CASE("config file and flag precedence") {
  const auto dir = fresh_dir("cli_config");
  const auto cfg = testing::write_temp("cli_config.toml", "steps = 120\nseed = 9\nmethod = \"greedy\"\n");
  const auto a = cli({"solve", model_file(), "--config", cfg.string()});
  const auto b = cli({"solve", model_file(), "--steps", "120", "--seed", "9"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  const auto c = cli({"solve", model_file(), "--config", cfg.string(), "--seed", "10"});
  const auto d = cli({"solve", model_file(), "--steps", "120", "--seed", "10"});
  CHECK(c.out == d.out);

  // A written manifest reloads as a config and reproduces the run.
  const auto e = cli({"solve", model_file(), "--steps", "80", "--seed", "3", "--out", dir.string()});
  REQUIRE(e.code == 0);
  const auto f = cli({"solve", model_file(), "--config", (dir / "manifest.toml").string()});
  CHECK(f.code == 0);
  CHECK(e.out == f.out);
}

TEST_CASE("eval and sweep") {
  const auto dir = fresh_dir("cli_eval");
  const auto r = cli({"eval", model_file(), "--method", "all", "--queries", "2", "--steps", "100", "--checkpoints",
                      "50,100", "--workers", "1", "--out", dir.string(), "--csv", "--plots", "--log-level", "quiet"});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "results.csv"));
  CHECK(fs::exists(dir / "summary.csv"));
  CHECK(fs::exists(dir / "curves.svg"));
  CHECK(r.out.find("gls+") != std::string::npos);

  const auto m = load_uai(model_file());
  const auto w = testing::write_temp("cli_rand.mpew", "");
  save_weights(testing::random_weights(meta_for_model(m, 8, 2, 1, 1, 8), 2), w);
  const auto s = cli({"sweep", model_file(), "--weights", w.string(), "--lambda", "0,0.5", "--queries", "2",
                      "--steps", "60", "--checkpoints", "60", "--workers", "1", "--log-level", "quiet"});
  CHECK(s.code == 0);
  CHECK(s.out.find("selected_lambda ") != std::string::npos);
  CHECK(cli({"sweep", model_file(), "--steps", "60", "--checkpoints", "60"}).code == 1);
}
