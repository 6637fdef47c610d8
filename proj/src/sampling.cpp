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

#include "kbudget/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace kbudget {

namespace {

double parse_double(std::string_view text, std::string_view what) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ArgumentError("malformed " + std::string(what) + " '" + std::string(text) + "'");
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

Index dc_line(Index num_lines) { return num_lines / 2; }

}  // namespace

SamplingMask::SamplingMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  if (bits_.size() < 2) throw ArgumentError("mask needs at least 2 lines");
  for (auto& b : bits_) b = b ? 1 : 0;
  cardinality_ = std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
  if (cardinality_ < 1) throw ArgumentError("mask selects no lines");
  if (!bits_[static_cast<std::size_t>(dc_line(size()))]) throw ArgumentError("mask drops the DC line");
}

std::vector<Index> SamplingMask::lines() const {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(cardinality_));
  for (Index i = 0; i < size(); ++i)
    if ((*this)[i]) out.push_back(i);
  return out;
}

std::string_view to_string(MaskKind kind) { return kind == MaskKind::lowpass ? "lowpass" : "random"; }

MaskKind parse_mask_kind(std::string_view text) {
  if (text == "lowpass") return MaskKind::lowpass;
  if (text == "random") return MaskKind::random;
  throw ArgumentError("unknown mask kind '" + std::string(text) + "'");
}

TimeModel::TimeModel(std::vector<double> times) : per_line_times(std::move(times)) {
  if (per_line_times.empty()) throw ArgumentError("time model is empty");
  for (double t : per_line_times)
    if (!(t > 0.0) || !std::isfinite(t)) throw ArgumentError("per-line times must be positive");
}

double TimeModel::total() const {
  return std::accumulate(per_line_times.begin(), per_line_times.end(), 0.0);
}

TimeBudget::TimeBudget(double factor) : budget_factor(factor) {
  if (!(factor > 1.0) || !std::isfinite(factor)) throw ArgumentError("budget factor must exceed 1");
}

double TimeBudget::t_max(const TimeModel& time_model, Index num_lines) const {
  return time_model.total() * static_cast<double>(num_lines) / budget_factor;
}

SamplingStrategy make_strategy(std::vector<double> factors, Index num_lines, MaskKind kind,
                               double max_factor) {
  if (factors.empty()) throw ArgumentError("strategy has no factors");
  SamplingStrategy strategy;
  strategy.num_lines = num_lines;
  strategy.mask_kind = kind;
  for (double f : factors) {
    if (!(f >= 1.0) || !(f <= max_factor)) {
      std::ostringstream msg;
      msg << "undersampling factor " << f << " outside [1, " << max_factor << "]";
      throw ArgumentError(msg.str());
    }
    strategy.line_counts.push_back(lines_for_factor(num_lines, f));
  }
  strategy.factors = std::move(factors);
  return strategy;
}

Index lines_for_factor(Index num_lines, double factor) {
  if (num_lines < 2 || num_lines % 2 != 0) throw ArgumentError("line count must be even and >= 2");
  if (!(factor >= 1.0)) throw ArgumentError("undersampling factor must be >= 1");
  const auto n = static_cast<Index>(std::floor(static_cast<double>(num_lines) / factor));
  return std::clamp<Index>(n, 1, num_lines);
}

SamplingMask make_lowpass_mask(Index num_lines, Index count) {
  if (count < 1 || count > num_lines) throw ArgumentError("lowpass line count out of range");
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(num_lines), 0);
  const Index first = dc_line(num_lines) - count / 2;
  for (Index i = 0; i < count; ++i) bits[static_cast<std::size_t>(first + i)] = 1;
  return SamplingMask(std::move(bits));
}

SamplingMask make_random_mask(Index num_lines, Index count, double center_fraction, Rng& rng) {
  if (count < 1 || count > num_lines) throw ArgumentError("random mask line count out of range");
  if (!(center_fraction >= 0.0 && center_fraction <= 1.0))
    throw ArgumentError("center fraction must lie in [0, 1]");
  const Index block = std::max<Index>(
      1, static_cast<Index>(std::ceil(center_fraction * static_cast<double>(num_lines) - 1e-9)));
  if (block > count) throw ArgumentError("centre block larger than requested line count");

  std::vector<std::uint8_t> bits(make_lowpass_mask(num_lines, block).bits());
  std::vector<Index> pool;
  pool.reserve(static_cast<std::size_t>(num_lines - block));
  for (Index i = 0; i < num_lines; ++i)
    if (!bits[static_cast<std::size_t>(i)]) pool.push_back(i);
  // Partial Fisher-Yates: the first `count - block` entries form the sample.
  const auto take = static_cast<std::size_t>(count - block);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
    bits[static_cast<std::size_t>(pool[i])] = 1;
  }
  return SamplingMask(std::move(bits));
}

double default_center_fraction(Index num_lines, Index count) {
  return static_cast<double>(std::min<Index>(4, count)) / static_cast<double>(num_lines);
}

SamplingMask make_mask(MaskKind kind, Index num_lines, Index count, Rng& rng) {
  if (kind == MaskKind::lowpass) return make_lowpass_mask(num_lines, count);
  return make_random_mask(num_lines, count, default_center_fraction(num_lines, count), rng);
}

double acquisition_cost(std::span<const Index> line_counts, const TimeModel& time_model) {
  if (static_cast<Index>(line_counts.size()) != time_model.num_sequences())
    throw ArgumentError("line counts and time model differ in length");
  double cost = 0.0;
  for (std::size_t s = 0; s < line_counts.size(); ++s)
    cost += time_model.per_line_times[s] * static_cast<double>(line_counts[s]);
  return cost;
}

bool is_feasible(const SamplingStrategy& strategy, const TimeModel& time_model,
                 const TimeBudget& budget, Index num_lines) {
  if (strategy.num_sequences() != time_model.num_sequences()) return false;
  std::vector<Index> counts;
  counts.reserve(strategy.factors.size());
  for (double f : strategy.factors) counts.push_back(lines_for_factor(num_lines, f));
  return acquisition_cost(counts, time_model) <= budget.t_max(time_model, num_lines);
}

std::optional<double> solve_last_factor(std::span<const double> known_factors,
                                        const TimeModel& time_model, const TimeBudget& budget,
                                        double max_factor) {
  const auto& t = time_model.per_line_times;
  if (known_factors.size() + 1 != t.size()) return std::nullopt;
  // T_max / N, independent of N.
  double remaining = time_model.total() / budget.budget_factor;
  for (std::size_t s = 0; s < known_factors.size(); ++s) remaining -= t[s] / known_factors[s];
  if (!(remaining > 0.0)) return std::nullopt;
  const double last = t.back() / remaining;
  if (last < 1.0 || last > max_factor) return std::nullopt;
  return last;
}

FactorGrid make_grid(double lo, double hi, Index count, bool log_spaced) {
  if (count < 1) throw ArgumentError("grid count must be >= 1");
  if (!(lo >= 1.0) || !(hi >= lo)) throw ArgumentError("grid bounds must satisfy 1 <= lo <= hi");
  FactorGrid grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  for (Index i = 0; i < count; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(count - 1);
    grid[static_cast<std::size_t>(i)] =
        log_spaced ? std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo))) : lo + u * (hi - lo);
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

FactorGrid default_grid() { return make_grid(1.0, 8.0, 20, true); }

FactorGrid parse_grid_spec(std::string_view spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 4) throw ArgumentError("grid spec must be lo:hi:count:log|lin");
  const double lo = parse_double(parts[0], "grid lower bound");
  const double hi = parse_double(parts[1], "grid upper bound");
  const double count = parse_double(parts[2], "grid count");
  if (count != std::floor(count)) throw ArgumentError("grid count must be an integer");
  bool log_spaced = false;
  if (parts[3] == "log")
    log_spaced = true;
  else if (parts[3] != "lin")
    throw ArgumentError("grid spacing must be 'log' or 'lin'");
  return make_grid(lo, hi, static_cast<Index>(count), log_spaced);
}

std::vector<double> parse_factors(std::string_view text) {
  std::vector<double> out;
  for (auto part : split(text, ',')) out.push_back(parse_double(part, "strategy factor"));
  return out;
}

std::vector<SamplingStrategy> enumerate_simplex_strategies(std::span<const FactorGrid> grids,
                                                           const TimeModel& time_model,
                                                           const TimeBudget& budget,
                                                           double max_factor, Index num_lines,
                                                           MaskKind kind) {
  const auto free = static_cast<std::size_t>(time_model.num_sequences() - 1);
  if (grids.size() != free) throw ArgumentError("need one grid per free factor");
  for (const auto& g : grids)
    if (g.empty()) throw ArgumentError("empty candidate grid");

  std::vector<SamplingStrategy> out;
  std::vector<std::size_t> odometer(free, 0);
  std::vector<double> factors(free);
  while (true) {
    for (std::size_t i = 0; i < free; ++i) factors[i] = grids[i][odometer[i]];
    if (auto last = solve_last_factor(factors, time_model, budget, max_factor)) {
      std::vector<double> full(factors);
      full.push_back(*last);
      SamplingStrategy strategy = make_strategy(std::move(full), num_lines, kind, max_factor);
      // Flooring keeps the cost under T_max; the check only guards rounding in
      // the solved factor.
      if (is_feasible(strategy, time_model, budget, num_lines)) out.push_back(std::move(strategy));
    }
    std::size_t i = 0;
    for (; i < free; ++i) {
      if (++odometer[i] < grids[i].size()) break;
      odometer[i] = 0;
    }
    if (i == free) break;
  }
  std::sort(out.begin(), out.end(),
            [](const SamplingStrategy& a, const SamplingStrategy& b) { return a.factors < b.factors; });
  return out;
}

SamplingStrategy sample_random_strategy(Index num_sequences, double max_factor, Index num_lines,
                                        MaskKind kind, Rng& rng) {
  if (!(max_factor >= 1.0)) throw ArgumentError("max factor must be >= 1");
  std::vector<double> factors(static_cast<std::size_t>(num_sequences));
  for (auto& f : factors) f = uniform(rng, 1.0, max_factor);
  return make_strategy(std::move(factors), num_lines, kind, max_factor);
}

std::string format_factors(std::span<const double> factors) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) out += ',';
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, factors[i]);
    out.append(buf, end);
  }
  return out;
}

}  // namespace kbudget
