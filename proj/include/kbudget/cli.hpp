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

#include "kbudget/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace kbudget::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kNumeric = 4,
  kInfeasible = 5,
};

/// Runs one command line (without the program name). `--config FILE` merges
/// flat key=value lines; flags given on the command line win.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// Merges config-file entries into `args` as `--key value` pairs for every key
/// not already present.
std::vector<std::string> apply_config_overlay(std::vector<std::string> args);

/// "zero-fill" selects the model-free baseline; an existing file is a KBM1
/// model; otherwise PATH.s1, PATH.s2, ... are loaded as a SISO suite.
Recoverer load_recoverer(const std::string& path);

/// Path of SISO model `s` (0-based) written under `base`.
std::filesystem::path siso_model_path(const std::filesystem::path& base, Index s);

}  // namespace kbudget::cli
