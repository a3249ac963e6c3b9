#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mpe/eval.hpp"
#include "testing.hpp"

using namespace mpe;

namespace {

RunResult rr(std::size_t q, const std::string& m, double f, std::size_t step = 10) {
  RunResult r;
  r.query = q;
  r.method = m;
  r.checkpoints[step] = f;
  return r;
}

std::vector<RunResult> series(const std::string& m, const std::vector<double>& fs) {
  std::vector<RunResult> out;
  for (std::size_t i = 0; i < fs.size(); ++i) out.push_back(rr(i, m, fs[i]));
  return out;
}

struct Fixture {
  GraphicalModel model = testing::random_model(7, {15, 15, 2, 3, 3, 1.3});
  std::vector<QuerySpec> queries;
  Fixture() {
    Rng rng(7);
    for (int i = 0; i < 4; ++i) queries.push_back(testing::random_query(model, testing::random_full(model, rng), 0.8, rng));
  }
};

std::vector<Method> two_methods(std::size_t steps = 200) {
  SearchConfig g;
  g.max_steps = steps;
  SearchConfig gl = g;
  gl.gls = GlsConfig{};
  auto ll = std::make_shared<LLScorer>();
  return {{"greedy", ll, g}, {"gls+", ll, gl}};
}

}  // namespace

TEST_CASE("run_matrix layout and checkpoints") {
  Fixture fx;
  const std::vector<std::size_t> cps{25, 50, 100, 200};
  const auto all = run_matrix(fx.model, fx.queries, two_methods(), cps, {3, 1});
  REQUIRE(all.size() == 8);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].query == i / 2);
    CHECK(all[i].method == (i % 2 ? "gls+" : "greedy"));
    CHECK_FALSE(all[i].error);
    REQUIRE(all[i].checkpoints.size() == 4);
    double prev = kZeroLog;
    for (auto [s, f] : all[i].checkpoints) {
      CHECK(f >= prev);
      prev = f;
    }
    CHECK(all[i].sec_per_step_mean >= 0.0);
  }
  // Same start for both methods: the step-0 state is shared, so neither is
  // below F(x0) and rerunning reproduces every value.
  const auto again = run_matrix(fx.model, fx.queries, two_methods(), cps, {3, 2});
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i].checkpoints == again[i].checkpoints);
}

TEST_CASE("checkpoint values are the incumbent") {
  Fixture fx;
  const std::vector<std::size_t> cps{30, 60};
  auto ms = two_methods(60);
  const auto all = run_matrix(fx.model, fx.queries, ms, cps, {11, 1});
  for (std::size_t qi = 0; qi < fx.queries.size(); ++qi) {
    const std::uint64_t qs = derive_seed(11, qi);
    const auto x0 = random_assignment(fx.model, fx.queries[qi], derive_seed(qs, 0));
    SearchConfig c = ms[0].cfg;
    c.seed = derive_seed(qs, 1);
    const auto t = greedy_search(fx.model, fx.queries[qi], LLScorer{}, c, x0);
    double best = kZeroLog;
    for (const auto& s : t.states)
      if (s.step <= 30) best = std::max(best, s.f);
    CHECK(all[2 * qi].checkpoints.at(30) == best);
    CHECK(all[2 * qi].checkpoints.at(60) == t.best_f);
  }
}

TEST_CASE("win percentage") {
  const auto a = series("a", {1, 2, 3, 4});
  const auto b = series("b", {0, 2, 5, 3});
  CHECK(win_percentage(a, b, 10) == 62.5);
  CHECK(win_percentage(b, a, 10) == 37.5);
  CHECK(win_percentage(a, a, 10) == 50.0);
  // 87.5: three wins, one tie within tolerance
  const auto c = series("c", {-10, -10, -10, -10.0 * (1 + 1e-12)});
  const auto d = series("d", {-11, -12, -13, -10});
  CHECK(win_percentage(c, d, 10) == 87.5);
  // equal infinities tie
  CHECK(win_percentage(series("x", {kZeroLog}), series("y", {kZeroLog}), 10) == 50.0);
  CHECK(win_percentage(series("x", {-1}), series("y", {kZeroLog}), 10) == 100.0);

  CHECK_THROWS_AS(win_percentage(a, b, 11), EvaluationError);
  CHECK_THROWS_AS(win_percentage(a, series("e", {1, 2}), 10), EvaluationError);
  auto shifted = b;
  shifted[0].query = 9;
  CHECK_THROWS_AS(win_percentage(a, shifted, 10), EvaluationError);
}

TEST_CASE("win percentage symmetry and recount") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> fa, fb;
    for (int i = 0; i < 15; ++i) {
      fa.push_back(static_cast<double>(uniform_index(rng, 4)));
      fb.push_back(static_cast<double>(uniform_index(rng, 4)));
    }
    const auto a = series("a", fa), b = series("b", fb);
    double wins = 0;
    for (int i = 0; i < 15; ++i) wins += fa[i] > fb[i] ? 1.0 : fa[i] == fb[i] ? 0.5 : 0.0;
    CHECK(win_percentage(a, b, 10) == doctest::Approx(wins / 15 * 100));
    CHECK(win_percentage(a, b, 10) + win_percentage(b, a, 10) == doctest::Approx(100.0));
  }
}

TEST_CASE("percent improvement") {
  CHECK(pct_improvement(series("s", {-10}), series("d", {-8}), 10) == doctest::Approx(20.0));
  CHECK(pct_improvement(series("s", {-10, -5}), series("d", {-8, -5}), 10) == doctest::Approx(10.0));
  CHECK(pct_improvement(series("s", {4}), series("d", {5}), 10) == doctest::Approx(25.0));
  std::size_t used = 99;
  const double v = pct_improvement(series("s", {0, kZeroLog, -10, -1}), series("d", {-1, -1, kZeroLog, -0.5}), 10, &used);
  CHECK(used == 1);
  CHECK(v == doctest::Approx(50.0));
  CHECK(std::isnan(pct_improvement(series("s", {0}), series("d", {1}), 10, &used)));
  CHECK(used == 0);
  CHECK(pct_improvement(series("s", {-3, -7}), series("d", {-3, -7}), 10) == 0.0);
}

TEST_CASE("summarize rows") {
  std::vector<RunResult> all;
  for (auto r : series("base", {-10, -10})) all.push_back(r);
  for (auto r : series("new", {-8, -10})) all.push_back(r);
  const auto rows = summarize(all, {"base", "new"}, "base", {10});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].method_a == "new");
  CHECK(rows[0].method_b == "base");
  CHECK(rows[0].win_pct == 75.0);
  CHECK(rows[0].pct_impr == doctest::Approx(10.0));
}

TEST_CASE("lambda sweep") {
  Fixture fx;
  const auto w = std::make_shared<ScorerWeights>(
      testing::random_weights(meta_for_model(fx.model, 8, 2, 1, 1, 16), 4));
  SearchConfig cfg;
  cfg.max_steps = 100;
  const std::vector<std::size_t> cps{50, 100};

  SUBCASE("lambda 0 reproduces plain greedy") {
    const auto t = lambda_sweep(fx.model, fx.queries, w, {0.0}, cfg, cps, {5, 1});
    const auto g = run_matrix(fx.model, fx.queries, {{"greedy", std::make_shared<LLScorer>(), cfg}}, cps, {5, 1});
    for (auto s : cps) CHECK(t.rows[0].mean.at(s) == checkpoint_stats(g, s).first);
  }
  SUBCASE("duplicate lambdas give identical rows; argmax is selected") {
    const auto t = lambda_sweep(fx.model, fx.queries, w, {0.5, 1.0, 0.5, 0.0}, cfg, cps, {5, 2});
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[0].mean == t.rows[2].mean);
    CHECK(t.rows[0].sd == t.rows[2].sd);
    for (const auto& r : t.rows) CHECK(r.mean.at(100) <= t.rows[t.selected].mean.at(100));
    for (std::size_t i = 0; i < t.selected; ++i) CHECK(t.rows[i].mean.at(100) < t.rows[t.selected].mean.at(100));
    CHECK(t.selected_lambda() == t.rows[t.selected].lambda);
  }
  CHECK_THROWS_AS(lambda_sweep(fx.model, fx.queries, w, {}, cfg, cps), ConfigError);
  CHECK_THROWS_AS(lambda_sweep(fx.model, {}, w, {0.5}, cfg, cps), ConfigError);
}

TEST_CASE("checkpoint validation") {
  CHECK_NOTHROW(check_checkpoints({1, 5, 10}, 10));
  CHECK_THROWS_AS(check_checkpoints({}, 10), ConfigError);
  CHECK_THROWS_AS(check_checkpoints({0, 5}, 10), ConfigError);
  CHECK_THROWS_AS(check_checkpoints({5, 5}, 10), ConfigError);
  CHECK_THROWS_AS(check_checkpoints({5, 11}, 10), ConfigError);
}

TEST_CASE("failed runs are recorded") {
  Fixture fx;
  std::vector<Method> ms{{"broken", nullptr, SearchConfig{}}};
  const auto all = run_matrix(fx.model, fx.queries, ms, {10});
  for (const auto& r : all) {
    REQUIRE(r.error);
    CHECK(r.checkpoints.empty());
  }
  CHECK_THROWS_AS(win_percentage(all, all, 10), EvaluationError);
}

TEST_CASE("csv output") {
  std::ostringstream a;
  auto r = rr(0, "greedy", -1.5, 500);
  r.checkpoints[1000] = kZeroLog;
  r.sec_per_step_mean = 0.25;
  write_results_csv(a, {r});
  CHECK(a.str() == "query,method,step,F,sec_per_step\n0,greedy,500,-1.5,0.25\n0,greedy,1000,-inf,0.25\n");

  std::ostringstream b;
  write_summary_csv(b, {{"x", "y", 10, 62.5, std::nan("")}});
  CHECK(b.str() == "method_a,method_b,step,win_pct,pct_impr\nx,y,10,62.5,nan\n");

  std::ostringstream c;
  SweepTable t;
  t.rows.push_back({0.2, {{10, -3.0}}, {{10, 0.5}}});
  t.rows.push_back({0.7, {{10, -2.0}}, {{10, 0.0}}});
  t.selected = 1;
  write_sweep_csv(c, t);
  CHECK(c.str() == "lambda,step,mean_F,sd_F,selected\n0.2,10,-3,0.5,0\n0.7,10,-2,0,1\n");

  CHECK(format_real(0.1) == "0.1");
  CHECK(format_real(-std::numeric_limits<double>::infinity()) == "-inf");
}
