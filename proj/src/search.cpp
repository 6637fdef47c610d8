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

#include "kbudget/kspace.hpp"
#include "kbudget/metrics.hpp"
#include "kbudget/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace kbudget {

namespace {

constexpr Index kEvalChunk = 4;

struct Accumulator {
  double l1 = 0.0, psnr = 0.0, ssim = 0.0, zf_psnr = 0.0;
  std::vector<double> l1_seq, psnr_seq, ssim_seq;

  explicit Accumulator(Index s)
      : l1_seq(static_cast<std::size_t>(s)), psnr_seq(static_cast<std::size_t>(s)), ssim_seq(static_cast<std::size_t>(s)) {}

  void add(const MultiSequenceStack& pred, const MultiSequenceStack& input, const MultiSequenceStack& gt) {
    double stack_l1 = 0.0;
    for (Index s = 0; s < gt.num_sequences(); ++s) {
      const auto i = static_cast<std::size_t>(s);
      const double l1 = l1_distance(pred[s], gt[s]);
      stack_l1 += l1;
      l1_seq[i] += l1;
      psnr_seq[i] += kbudget::psnr(pred[s], gt[s]);
      ssim_seq[i] += kbudget::ssim(pred[s], gt[s]);
    }
    l1 += stack_l1 / static_cast<double>(gt.num_sequences());
    psnr += psnr_stack(pred.sequences, gt.sequences);
    ssim += ssim_stack(pred.sequences, gt.sequences);
    zf_psnr += psnr_stack(input.sequences, gt.sequences);
  }
};

}  // namespace

std::uint64_t evaluation_mask_seed(std::uint64_t eval_seed, Index stack, Index sequence, double factor) {
  const auto micro = static_cast<std::uint64_t>(std::llround(factor * 1e6));
  return derive_seed(eval_seed, static_cast<std::uint64_t>(stack), static_cast<std::uint64_t>(sequence), micro);
}

StrategyScore evaluate_strategy(const Recoverer& recoverer, const Dataset& val, const SamplingStrategy& strategy,
                                std::uint64_t eval_seed, const std::optional<BudgetSpec>& budget) {
  if (val.stacks.empty()) throw ConfigError("validation set is empty");
  val.validate();
  const Index num_sequences = val.num_sequences();
  const Index channels = input_channels(recoverer);
  if (channels != 0 && channels != num_sequences)
    throw ShapeError("recoverer expects " + std::to_string(channels) + " channels, data has " +
                     std::to_string(num_sequences));
  if (strategy.num_sequences() != num_sequences)
    throw ArgumentError("strategy has " + std::to_string(strategy.num_sequences()) + " factors for " +
                        std::to_string(num_sequences) + " sequences");

  const Index num_lines = val.height();
  Accumulator acc(num_sequences);
  for (Index start = 0; start < val.size(); start += kEvalChunk) {
    const Index stop = std::min(val.size(), start + kEvalChunk);
    std::vector<MultiSequenceStack> inputs;
    for (Index i = start; i < stop; ++i) {
      const auto& stack = val.stacks[static_cast<std::size_t>(i)];
      MultiSequenceStack input;
      for (Index s = 0; s < num_sequences; ++s) {
        const double factor = strategy.factors[static_cast<std::size_t>(s)];
        Rng rng(evaluation_mask_seed(eval_seed, i, s, factor));
        const SamplingMask mask = make_mask(strategy.mask_kind, num_lines, lines_for_factor(num_lines, factor), rng);
        input.sequences.push_back(zero_filled_recon(stack[s], mask));
      }
      inputs.push_back(std::move(input));
    }
    const Tensor output = recover(recoverer, to_tensor(inputs));
    for (Index i = start; i < stop; ++i)
      acc.add(to_stack(output, i - start), inputs[static_cast<std::size_t>(i - start)],
              val.stacks[static_cast<std::size_t>(i)]);
  }

  const double count = static_cast<double>(val.size());
  StrategyScore score;
  score.strategy = strategy;
  score.mean_l1 = acc.l1 / count;
  score.psnr = acc.psnr / count;
  score.ssim = acc.ssim / count;
  score.zf_psnr = acc.zf_psnr / count;
  for (Index s = 0; s < num_sequences; ++s) {
    const auto i = static_cast<std::size_t>(s);
    score.l1_per_sequence.push_back(acc.l1_seq[i] / count);
    score.psnr_per_sequence.push_back(acc.psnr_seq[i] / count);
    score.ssim_per_sequence.push_back(acc.ssim_seq[i] / count);
  }

  std::vector<Index> counts;
  for (double f : strategy.factors) counts.push_back(lines_for_factor(num_lines, f));
  if (budget) {
    score.cost = acquisition_cost(counts, budget->time_model);
    score.feasible = is_feasible(strategy, budget->time_model, budget->budget, num_lines);
  } else {
    score.cost = acquisition_cost(counts, TimeModel(std::vector<double>(counts.size(), 1.0)));
    score.feasible = true;
  }
  return score;
}

bool ranks_before(const StrategyScore& a, const StrategyScore& b) {
  if (a.mean_l1 != b.mean_l1) return a.mean_l1 < b.mean_l1;
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.strategy.factors < b.strategy.factors;
}

Ranking search_strategies(const Recoverer& recoverer, const Dataset& val,
                          std::span<const SamplingStrategy> candidates, const TimeModel& time_model,
                          const TimeBudget& budget, std::uint64_t eval_seed, unsigned threads) {
  if (candidates.empty()) throw ArgumentError("no candidate strategies");
  val.validate();
  std::vector<const SamplingStrategy*> feasible;
  for (const auto& c : candidates)
    if (c.num_sequences() == time_model.num_sequences() && is_feasible(c, time_model, budget, val.height()))
      feasible.push_back(&c);
  if (feasible.empty()) throw InfeasibleBudgetError("infeasible budget: no candidate strategy fits T_max");

  const BudgetSpec spec{time_model, budget};
  Ranking ranking;
  ranking.entries.resize(feasible.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&]() {
    for (std::size_t i = next++; i < feasible.size(); i = next++) {
      try {
        ranking.entries[i] = evaluate_strategy(recoverer, val, *feasible[i], eval_seed, spec);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(feasible.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::sort(ranking.entries.begin(), ranking.entries.end(), ranks_before);
  return ranking;
}

std::vector<StrategyScore> top_k(const Ranking& ranking, std::size_t k) {
  if (k < 1) throw ArgumentError("top_k needs K >= 1");
  const auto n = std::min(k, ranking.entries.size());
  return {ranking.entries.begin(), ranking.entries.begin() + static_cast<std::ptrdiff_t>(n)};
}

double correlation_study(std::span<const double> blind_scores, std::span<const double> dedicated_scores) {
  if (blind_scores.size() != dedicated_scores.size())
    throw ArgumentError("correlation study: score lists differ in length");
  if (blind_scores.size() < 2) throw ArgumentError("correlation study: need at least two strategies");
  const Eigen::Map<const Eigen::ArrayXd> x(blind_scores.data(), static_cast<Index>(blind_scores.size()));
  const Eigen::Map<const Eigen::ArrayXd> y(dedicated_scores.data(), static_cast<Index>(dedicated_scores.size()));
  return pearson(x, y);
}

}  // namespace kbudget
