/*
 * Copyright 2026 The kbudget Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "kbudget/search.hpp"
#include "model_gradcheck.hpp"
#include "search_oracle.hpp"

#include <doctest.h>

#include <algorithm>

using namespace kbudget;

namespace {

Dataset val_set(Index stacks, Index size, std::uint64_t seed) {
  Dataset d = generate_phantom_dataset(PhantomConfig{stacks, size, 3, seed});
  d.split = SplitTag::val;
  return d;
}

Recoverer identity_model() {
  return build_model(ArchConfig{1, 2, 4, 8, 3, 3}, ModelMode::mimo, 1);
}

}  // namespace

TEST_SUITE("search") {

TEST_CASE("an identity model scores exactly like zero-filling") {
  const Dataset val = val_set(5, 32, 2);
  for (MaskKind kind : {MaskKind::lowpass, MaskKind::random}) {
    const auto strategy = make_strategy({2.5, 4.0, 6.0}, 32, kind);
    const StrategyScore score = evaluate_strategy(identity_model(), val, strategy, 17);
    CHECK(std::abs(score.mean_l1 - oracle::zero_fill_mean_l1(val, strategy, 17)) < 1e-10);
    CHECK(score.psnr == score.zf_psnr);
    CHECK(score.psnr_per_sequence.size() == 3);
    CHECK(score.cost == doctest::Approx(12 + 8 + 5));
    CHECK(score.feasible);
  }
}

TEST_CASE("full sampling is perfect") {
  const StrategyScore score = evaluate_strategy(identity_model(), val_set(2, 16, 3), make_strategy({1, 1, 1}, 16), 0);
  CHECK(score.mean_l1 == 0.0);
  CHECK(score.psnr == kPsnrPerfect);
  CHECK(score.ssim == doctest::Approx(1.0));
}

TEST_CASE("evaluation is deterministic and paired") {
  const Dataset val = val_set(3, 32, 4);
  const auto a = make_strategy({3, 4, 5}, 32, MaskKind::random);
  const auto b = make_strategy({3, 6, 7}, 32, MaskKind::random);
  const StrategyScore sa = evaluate_strategy(ZeroFill{}, val, a, 5), sb = evaluate_strategy(ZeroFill{}, val, b, 5);
  CHECK(sa.mean_l1 == evaluate_strategy(ZeroFill{}, val, a, 5).mean_l1);
  // Shared lambda_1: same masks, same sequence-1 scores.
  CHECK(sa.l1_per_sequence[0] == sb.l1_per_sequence[0]);
  CHECK(sa.l1_per_sequence[1] != sb.l1_per_sequence[1]);
  CHECK(sa.mean_l1 != evaluate_strategy(ZeroFill{}, val, a, 6).mean_l1);
}

TEST_CASE("evaluation errors") {
  CHECK_THROWS_AS(evaluate_strategy(ZeroFill{}, Dataset{}, make_strategy({2, 2, 2}, 32), 0), ConfigError);
  const Dataset val = val_set(1, 32, 1);
  CHECK_THROWS_AS(evaluate_strategy(ZeroFill{}, val, make_strategy({2, 2}, 32), 0), ArgumentError);
  const Recoverer two = build_model(ArchConfig{1, 1, 2, 2, 2, 2}, ModelMode::mimo, 0);
  CHECK_THROWS_AS(evaluate_strategy(two, val, make_strategy({2, 2, 2}, 32), 0), ShapeError);
}

TEST_CASE("search matches a brute-force evaluate-and-sort loop") {
  const Dataset val = val_set(4, 32, 6);
  const TimeModel tm({1, 1, 1});
  const TimeBudget budget(2.0);
  const auto candidates = oracle::cube_candidates(32, MaskKind::random);
  REQUIRE(candidates.size() == 27);
  const Recoverer model = testing::with_random_output(std::get<RecoveryModel>(identity_model()), 3);

  const Ranking ranking = search_strategies(model, val, candidates, tm, budget, 11, 3);
  const auto expected = oracle::brute_force_ranking(model, val, candidates, tm, budget, 11);
  REQUIRE(ranking.size() == expected.size());
  CHECK(ranking.size() == 27);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(ranking.entries[i].strategy == expected[i].strategy);
    CHECK(ranking.entries[i].mean_l1 == expected[i].mean_l1);
  }

  SUBCASE("candidate order does not matter") {
    auto shuffled = candidates;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + 5, shuffled.end());
    const Ranking again = search_strategies(model, val, shuffled, tm, budget, 11, 1);
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(again.entries[i].strategy == ranking.entries[i].strategy);
  }
}

TEST_CASE("infeasible candidates are dropped") {
  const Dataset val = val_set(2, 32, 7);
  const TimeModel tm({1, 1, 1});
  const TimeBudget budget(4.0);
  std::vector<SamplingStrategy> candidates{make_strategy({4, 4, 4}, 32), make_strategy({1, 1, 1}, 32),
                                           make_strategy({4, 8, 8}, 32)};
  const Ranking ranking = search_strategies(ZeroFill{}, val, candidates, tm, budget, 0);
  CHECK(ranking.size() == 2);
  for (const auto& e : ranking.entries) {
    CHECK(e.strategy.factors != std::vector<double>{1, 1, 1});
    CHECK(e.feasible);
    CHECK(e.cost == acquisition_cost(e.strategy.line_counts, tm));
    CHECK(e.cost <= budget.t_max(tm, 32));
  }
  const std::vector<SamplingStrategy> single{make_strategy({4, 4, 4}, 32)};
  CHECK(search_strategies(ZeroFill{}, val, single, tm, budget, 0).size() == 1);

  const std::vector<SamplingStrategy> none{make_strategy({1, 1, 1}, 32)};
  CHECK_THROWS_WITH_AS(search_strategies(ZeroFill{}, val, none, tm, budget, 0),
                       doctest::Contains("infeasible budget"), InfeasibleBudgetError);
  CHECK_THROWS_AS(search_strategies(ZeroFill{}, val, std::vector<SamplingStrategy>{}, tm, budget, 0), ArgumentError);
}

TEST_CASE("top_k") {
  const Dataset val = val_set(2, 32, 8);
  const auto candidates = oracle::cube_candidates(32, MaskKind::lowpass);
  const Ranking ranking = search_strategies(ZeroFill{}, val, candidates, TimeModel({1, 1, 1}), TimeBudget(2.0), 0);
  CHECK(top_k(ranking, 3).size() == 3);
  CHECK(top_k(ranking, 100).size() == ranking.size());
  const double best = std::min_element(ranking.entries.begin(), ranking.entries.end(),
                                       [](const auto& a, const auto& b) { return a.mean_l1 < b.mean_l1; })
                          ->mean_l1;
  CHECK(top_k(ranking, 1)[0].mean_l1 == best);
  CHECK_THROWS_AS(top_k(ranking, 0), ArgumentError);
}

TEST_CASE("ranking ties fall back to cost, then factors") {
  StrategyScore a, b, c;
  a.mean_l1 = b.mean_l1 = c.mean_l1 = 0.1;
  a.cost = 20;
  b.cost = 10;
  c.cost = 10;
  b.strategy.factors = {2, 3};
  c.strategy.factors = {2, 4};
  CHECK(ranks_before(b, a));
  CHECK(ranks_before(b, c));
  CHECK_FALSE(ranks_before(c, b));
}

TEST_CASE("correlation study") {
  const std::vector<double> blind{30.1, 28.4, 31.0, 27.7};
  std::vector<double> negated;
  for (double v : blind) negated.push_back(60.0 - v);
  CHECK(correlation_study(blind, blind) == doctest::Approx(1.0));
  CHECK(correlation_study(blind, negated) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(correlation_study(blind, std::vector<double>{1, 2, 3}), ArgumentError);
  CHECK_THROWS_AS(correlation_study(std::vector<double>{1}, std::vector<double>{1}), ArgumentError);
}

}  // TEST_SUITE
