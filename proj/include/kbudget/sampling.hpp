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

#include "kbudget/core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kbudget {

/// Binary selection over the N phase-encode lines (rows of a DC-centred
/// spectrum). Always contains the DC line floor(N/2).
class SamplingMask {
 public:
  /// Validates: length >= 2, cardinality >= 1, DC line set.
  explicit SamplingMask(std::vector<std::uint8_t> bits);

  Index size() const { return static_cast<Index>(bits_.size()); }
  Index cardinality() const { return cardinality_; }
  bool operator[](Index line) const { return bits_[static_cast<std::size_t>(line)] != 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  /// Selected line indices in ascending order.
  std::vector<Index> lines() const;

  bool operator==(const SamplingMask&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
  Index cardinality_ = 0;
};

enum class MaskKind { lowpass, random };

std::string_view to_string(MaskKind kind);
MaskKind parse_mask_kind(std::string_view text);

/// Per-line acquisition time of each sequence.
struct TimeModel {
  std::vector<double> per_line_times;

  explicit TimeModel(std::vector<double> times);
  Index num_sequences() const { return static_cast<Index>(per_line_times.size()); }
  double total() const;
};

/// Overall acceleration target; T_max = (sum_s t_s * N) / budget_factor.
struct TimeBudget {
  double budget_factor;

  explicit TimeBudget(double factor);
  double t_max(const TimeModel& time_model, Index num_lines) const;
};

/// Undersampling factor per sequence together with the derived line counts
/// floor(N / lambda_s).
struct SamplingStrategy {
  std::vector<double> factors;
  std::vector<Index> line_counts;
  Index num_lines = 0;
  MaskKind mask_kind = MaskKind::lowpass;

  Index num_sequences() const { return static_cast<Index>(factors.size()); }
  bool operator==(const SamplingStrategy&) const = default;
};

/// Builds a strategy, checking 1 <= lambda_s <= max_factor.
SamplingStrategy make_strategy(std::vector<double> factors, Index num_lines,
                               MaskKind kind = MaskKind::lowpass, double max_factor = 8.0);

/// floor(N / lambda) clamped to >= 1.
Index lines_for_factor(Index num_lines, double factor);

/// Contiguous block [c - floor(n/2), c + ceil(n/2) - 1] around c = floor(N/2).
SamplingMask make_lowpass_mask(Index num_lines, Index count);

/// Centre block of max(1, ceil(center_fraction * N)) lines, the remaining
/// count drawn uniformly without replacement from the other lines.
SamplingMask make_random_mask(Index num_lines, Index count, double center_fraction, Rng& rng);

/// Default centre block for random masks: 4 lines, or all lines when fewer are
/// requested.
double default_center_fraction(Index num_lines, Index count);

/// Mask of `count` lines of the given kind; lowpass masks ignore the rng.
SamplingMask make_mask(MaskKind kind, Index num_lines, Index count, Rng& rng);

/// sum_s t_s * n_s.
double acquisition_cost(std::span<const Index> line_counts, const TimeModel& time_model);

bool is_feasible(const SamplingStrategy& strategy, const TimeModel& time_model,
                 const TimeBudget& budget, Index num_lines);

/// Solves sum_s t_s / lambda_s = T_max / N for the last factor. Returns
/// nullopt when the solution falls outside [1, max_factor].
std::optional<double> solve_last_factor(std::span<const double> known_factors,
                                        const TimeModel& time_model, const TimeBudget& budget,
                                        double max_factor);

/// Candidate values for one free factor.
using FactorGrid = std::vector<double>;

/// `count` values from lo to hi inclusive, log- or linearly spaced.
FactorGrid make_grid(double lo, double hi, Index count, bool log_spaced);

/// 20 log-spaced values in [1, 8].
FactorGrid default_grid();

/// Parses "lo:hi:count:log|lin".
FactorGrid parse_grid_spec(std::string_view spec);

/// Parses comma-separated factors, e.g. "2.90,2.44,7.82".
std::vector<double> parse_factors(std::string_view text);

/// Cartesian product of the grids over the first S-1 factors, the last factor
/// solved onto the budget simplex; combinations without a valid last factor are
/// dropped. Sorted lexicographically by factors.
std::vector<SamplingStrategy> enumerate_simplex_strategies(std::span<const FactorGrid> grids,
                                                           const TimeModel& time_model,
                                                           const TimeBudget& budget,
                                                           double max_factor, Index num_lines,
                                                           MaskKind kind = MaskKind::lowpass);

/// Each lambda_s uniform on [1, max_factor]; no budget check.
SamplingStrategy sample_random_strategy(Index num_sequences, double max_factor, Index num_lines,
                                        MaskKind kind, Rng& rng);

std::string format_factors(std::span<const double> factors);

}  // namespace kbudget
