#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpe/scorer.hpp"
#include "mpe/search.hpp"
#include "testing.hpp"

using namespace mpe;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> mm(std::vector<double> g) { return minmax_normalize(g); }

std::shared_ptr<const ScorerWeights> small_weights(const GraphicalModel& m, std::uint64_t seed) {
  return std::make_shared<ScorerWeights>(testing::random_weights(meta_for_model(m, 8, 2, 1, 1, 8), seed));
}

}  // namespace

TEST_CASE("ll_scorer examples") {
  GraphicalModel m({2, 2}, {Factor({0, 1}, {std::log(.1), std::log(.2), std::log(.3), std::log(.4)})});
  const std::vector<Move> moves{{0, 1}, {1, 1}};
  const auto s = ll_scorer(m, Assignment(2), QuerySpec::all_query(m), moves);
  CHECK(s[0] == doctest::Approx(std::log(.3) - std::log(.1)));
  CHECK(s[1] == doctest::Approx(std::log(.2) - std::log(.1)));

  GraphicalModel loose({2, 3}, {Factor({0}, {0.0, 1.0})});
  const std::vector<Move> mv{{1, 1}, {1, 2}};
  CHECK(ll_scorer(loose, Assignment(2), QuerySpec::all_query(loose), mv) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("ll_scorer matches a full recompute") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto m = testing::random_model(s);
    Rng rng(s);
    const auto x = testing::random_full(m, rng);
    const auto q = QuerySpec::all_query(m);
    const auto moves = enumerate_neighbors(m, x, q);
    const auto g = ll_scorer(m, x, q, moves);
    for (std::size_t i = 0; i < moves.size(); ++i)
      CHECK(testing::close_rel(g[i], testing::brute_f(m, apply(x, moves[i])) - testing::brute_f(m, x)));
  }
}

TEST_CASE("oracle scores") {
  GraphicalModel m({2, 3, 2}, {});
  const auto q = QuerySpec::all_query(m);
  const Assignment ref(std::vector<Value>{1, 2, 0});
  const auto at_ref = enumerate_neighbors(m, ref, q);
  const auto zeros = oracle_scores(ref, ref, q, at_ref);
  CHECK(std::all_of(zeros.begin(), zeros.end(), [](double v) { return v == 0.0; }));

  const Assignment x(std::vector<Value>{0, 0, 0});
  const std::vector<Move> moves{{0, 1}, {1, 1}, {1, 2}, {2, 1}};
  CHECK(oracle_scores(ref, x, q, moves) == std::vector<double>{1.0, 0.0, 1.0, 0.0});

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto a = testing::random_full(m, rng);
    const auto r = testing::random_full(m, rng);
    const auto ms = enumerate_neighbors(m, a, q);
    const auto sc = oracle_scores(r, a, q, ms);
    for (std::size_t k = 0; k < ms.size(); ++k) {
      const bool reduces = testing::brute_hamming(apply(a, ms[k]), r, q) < testing::brute_hamming(a, r, q);
      CHECK(sc[k] == (reduces ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("minmax examples and sentinels") {
  CHECK(mm({-1, 0, 3}) == std::vector<double>{0.0, 0.25, 1.0});
  CHECK(mm({5, 5, 5}) == std::vector<double>{0.5, 0.5, 0.5});
  CHECK(mm({-kInf, 1, 3}) == std::vector<double>{0.0, 0.0, 1.0});
  CHECK(mm({-kInf, 2, 2}) == std::vector<double>{0.0, 0.5, 0.5});
  CHECK(mm({kInf, 1, 3, -kInf}) == std::vector<double>{1.0, 0.0, 0.0, 0.0});
  CHECK(mm({-kInf, -kInf}) == std::vector<double>{0.5, 0.5});
  CHECK(mm({}).empty());
}

TEST_CASE("minmax preserves order and spans [0,1]") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> g(2 + uniform_index(rng, 20));
    for (auto& v : g) v = (uniform01(rng) - 0.5) * 100.0;
    const auto n = minmax_normalize(g);
    CHECK(*std::min_element(n.begin(), n.end()) == 0.0);
    CHECK(*std::max_element(n.begin(), n.end()) == 1.0);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j)
        if (g[i] < g[j]) CHECK(n[i] < n[j]);
  }
}

TEST_CASE("combined scorer arithmetic") {
  // Two moves whose normalized LL is [0, 1]; a network biased to 1 then 0.
  GraphicalModel m({2, 2}, {Factor({0}, {0.0, -1.0}), Factor({1}, {0.0, 2.0})});
  auto meta = meta_for_model(m, 2, 1, 1, 1, 2);
  auto w = zero_weights(meta);
  // Logit = embedding[0] of the move token through an identity path.
  w.tensors["embed"].data = {0, 0, 50, 0, 0, 0, -50, 0};
  w.tensors["enc.in.w"].data = {0, 0, 0, 0, 1, 0, 0, 0};
  w.tensors["enc.0.w1"].data = {0, 0, 0, 0};
  w.tensors["head.w"].data = {1, 0};
  w.tensors["head.b"].data = {-25};
  auto shared = std::make_shared<ScorerWeights>(w);
  const std::vector<Move> moves{{0, 1}, {1, 1}};
  const auto q = QuerySpec::all_query(m);
  const Assignment x(2);
  const auto nn = neural_forward(*shared, x, q, moves);
  CHECK(nn[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(nn[1] == doctest::Approx(0.0).epsilon(1e-9));
  const auto out = CombinedScorer({0.5}, shared).score_all(m, x, q, moves);
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] == doctest::Approx(0.5));
  CHECK(CombinedScorer({1.0}, shared).score_all(m, x, q, moves) == nn);
  CHECK(CombinedScorer({0.0}, shared).score_all(m, x, q, moves) == std::vector<double>{0.0, 1.0});
}

TEST_CASE("combined scorer is a convex combination") {
  const auto m = testing::random_model(5, {6, 6, 2, 3, 2, 1.5});
  const auto w = small_weights(m, 9);
  const auto q = QuerySpec::all_query(m);
  Rng rng(2);
  for (double lam : {0.0, 0.2, 0.7, 1.0}) {
    const auto x = testing::random_full(m, rng);
    const auto moves = enumerate_neighbors(m, x, q);
    const auto a = minmax_normalize(ll_scorer(m, x, q, moves));
    const auto b = neural_forward(*w, x, q, moves);
    const auto c = CombinedScorer({lam}, w).score_all(m, x, q, moves);
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c[i] >= std::min(a[i], b[i]) - 1e-12);
      CHECK(c[i] <= std::max(a[i], b[i]) + 1e-12);
    }
  }
  CHECK_THROWS_AS(CombinedScorer({1.5}, w), ConfigError);
  CHECK_THROWS_AS(CombinedScorer({-0.1}, w), ConfigError);
}

TEST_CASE("lambda zero selects the LL argmax") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto m = testing::random_model(200 + s, {5, 10, 2, 4, 3, 1.3, 0.1});
    const auto w = small_weights(m, s);
    const auto q = QuerySpec::all_query(m);
    Rng rng(s);
    const auto x = testing::random_full(m, rng);
    const auto moves = enumerate_neighbors(m, x, q);
    const auto ll = ll_scorer(m, x, q, moves);
    const auto c = CombinedScorer({0.0}, w).score_all(m, x, q, moves);
    CHECK(std::max_element(ll.begin(), ll.end()) - ll.begin() == std::max_element(c.begin(), c.end()) - c.begin());
  }
}

TEST_CASE("scorer output length matches the move list") {
  const auto m = testing::random_model(6);
  const auto w = small_weights(m, 1);
  const auto q = QuerySpec::all_query(m);
  const auto x = Assignment(m.num_vars());
  const auto moves = enumerate_neighbors(m, x, q);
  CHECK(LLScorer{}.score_all(m, x, q, moves).size() == moves.size());
  CHECK(OracleScorer(x).score_all(m, x, q, moves).size() == moves.size());
  CHECK(NeuralScorer(w).score_all(m, x, q, moves).size() == moves.size());
  CHECK(CombinedScorer({0.3}, w).score_all(m, x, q, moves).size() == moves.size());
}
