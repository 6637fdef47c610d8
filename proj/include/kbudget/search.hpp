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

#pragma once

// Strategy search with a trained blind model: score every feasible candidate
// by the model's mean L1 on a validation set and rank ascending.

#include "kbudget/data.hpp"
#include "kbudget/model.hpp"
#include "kbudget/sampling.hpp"

#include <optional>

namespace kbudget {

struct StrategyScore {
  SamplingStrategy strategy;
  double mean_l1 = 0.0;
  double psnr = 0.0;  // stacked channels; kPsnrPerfect when exact
  double ssim = 0.0;
  std::vector<double> psnr_per_sequence;
  std::vector<double> ssim_per_sequence;
  std::vector<double> l1_per_sequence;
  double zf_psnr = 0.0;  // same metric on the zero-filled input
  bool feasible = true;
  double cost = 0.0;
};

/// Ascending mean_l1, then lower cost, then lexicographic factors.
struct Ranking {
  std::vector<StrategyScore> entries;

  std::size_t size() const { return entries.size(); }
};

struct BudgetSpec {
  TimeModel time_model;
  TimeBudget budget;
};

/// Seed of the evaluation mask for (stack, sequence, factor). Strategies that
/// share lambda_s share the realization on every stack.
std::uint64_t evaluation_mask_seed(std::uint64_t eval_seed, Index stack, Index sequence, double factor);

/// Mean metrics of the recoverer on `val` under one strategy. Without a
/// budget the cost uses unit per-line times and `feasible` stays true.
StrategyScore evaluate_strategy(const Recoverer& recoverer, const Dataset& val, const SamplingStrategy& strategy,
                                std::uint64_t eval_seed, const std::optional<BudgetSpec>& budget = std::nullopt);

/// Drops infeasible candidates, evaluates the rest (across `threads` workers),
/// and sorts. Throws InfeasibleBudgetError when nothing fits the budget.
Ranking search_strategies(const Recoverer& recoverer, const Dataset& val,
                          std::span<const SamplingStrategy> candidates, const TimeModel& time_model,
                          const TimeBudget& budget, std::uint64_t eval_seed, unsigned threads = 1);

/// Ranking order predicate.
bool ranks_before(const StrategyScore& a, const StrategyScore& b);

std::vector<StrategyScore> top_k(const Ranking& ranking, std::size_t k);

/// Pearson r between two aligned score vectors.
double correlation_study(std::span<const double> blind_scores, std::span<const double> dedicated_scores);

}  // namespace kbudget
