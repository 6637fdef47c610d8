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

// CSV and SVG artefacts. Numbers are written in shortest round-trip form;
// infinities as "inf".

#include "kbudget/search.hpp"
#include "kbudget/training.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace kbudget {

std::string format_number(double value);
double parse_number(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a column; throws ArgumentError when absent.
  std::size_t column(std::string_view name) const;
  std::vector<double> numbers(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
std::string to_csv(const CsvTable& table);

/// Columns lambda_1..S, n_1..S, cost, feasible, mean_l1, psnr, ssim,
/// psnr_s1..sS, ssim_s1..sS, zf_psnr; one row per entry in ranking order.
CsvTable ranking_table(const Ranking& ranking);

/// epoch, train_loss, val_loss, seconds.
CsvTable train_report_table(const TrainReport& report);

/// scope, mean_l1, psnr, ssim: the stacked aggregate, then one row per
/// sequence.
CsvTable evaluation_table(const StrategyScore& score);

struct ScatterOptions {
  std::string x_column = "zf_psnr";
  std::string y_column = "psnr";
  std::size_t highlight = 3;  // leading rows drawn as top-K
};

/// Standalone SVG scatter plot of two ranking columns, one circle per row.
std::string scatter_svg(const CsvTable& ranking, const ScatterOptions& options);

}  // namespace kbudget
