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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <tuple>
#include <vector>

namespace kbudget {

/// S co-registered images on one H x W grid, intensities in [0, 1].
struct MultiSequenceStack {
  std::vector<Imaged> sequences;

  Index num_sequences() const { return static_cast<Index>(sequences.size()); }
  Index height() const { return sequences.empty() ? 0 : sequences.front().rows(); }
  Index width() const { return sequences.empty() ? 0 : sequences.front().cols(); }

  const Imaged& operator[](Index s) const { return sequences[static_cast<std::size_t>(s)]; }
  Imaged& operator[](Index s) { return sequences[static_cast<std::size_t>(s)]; }

  /// Throws ConfigError unless S >= 1, H and W even and >= 8, shapes agree,
  /// and every value is finite and in [0, 1].
  void validate() const;

  bool operator==(const MultiSequenceStack& other) const;
};

enum class SplitTag { train, val, test };

std::string_view to_string(SplitTag tag);

struct Dataset {
  std::vector<MultiSequenceStack> stacks;
  SplitTag split = SplitTag::train;

  Index size() const { return static_cast<Index>(stacks.size()); }
  Index num_sequences() const { return stacks.empty() ? 0 : stacks.front().num_sequences(); }
  Index height() const { return stacks.empty() ? 0 : stacks.front().height(); }
  Index width() const { return stacks.empty() ? 0 : stacks.front().width(); }

  /// Non-empty, every stack valid, all stacks share (S, H, W).
  void validate() const;

  /// Single-sequence view of sequence `s` of every stack (used for SISO).
  Dataset select_sequence(Index s) const;

  bool operator==(const Dataset& other) const;
};

struct PhantomConfig {
  Index num_stacks = 1;
  Index size = 64;
  Index num_sequences = 3;
  std::uint64_t seed = 0;
  Index num_ellipses = 8;

  void validate() const;

  /// Seed of the per-tissue intensity table of sequence `s`.
  std::uint64_t contrast_seed(Index s) const;
};

/// Deterministic synthetic brain-like phantoms. Each stack renders one shared
/// tissue label map (skull ring, brain body, random inner ellipses) once per
/// sequence through a sequence-specific intensity table. Background is exactly
/// zero in every sequence.
Dataset generate_phantom_dataset(const PhantomConfig& config);

// MSV1 binary format, little-endian:
//   "MSV1" | u32 version=1 | u32 num_stacks | u32 S | u32 H | u32 W |
//   f64 values, stack-major, sequence-major, row-major.
inline constexpr std::uint32_t kMsvVersion = 1;
inline constexpr std::size_t kMsvHeaderBytes = 4 + 5 * 4;

void write_msv(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_msv(const std::filesystem::path& path, SplitTag split = SplitTag::train);

/// Seeded permutation followed by a contiguous split. Validation and test get
/// floor(fraction * n) stacks, train takes the remainder.
std::tuple<Dataset, Dataset, Dataset> split_dataset(const Dataset& dataset,
                                                    const std::array<double, 3>& fractions,
                                                    std::uint64_t seed);

/// Binary PGM (P5) of one sequence, scaled by 255 and rounded half-up.
void export_pgm(const MultiSequenceStack& stack, Index sequence_index,
                const std::filesystem::path& path);

}  // namespace kbudget
