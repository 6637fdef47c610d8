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

// Residual dense recovery network.
//
//   shallow   3x3 conv, in -> G0
//   D blocks  C densely connected 3x3 convs (growth G, ReLU), 1x1 local
//             fusion back to G0, local residual
//   global    1x1 fusion of all block outputs -> G0, plus shallow features
//   output    3x3 conv G0 -> out, plus the network input
//
// The output conv starts at exactly zero, so a fresh model is the identity
// map and reproduces its zero-filled input.

#include "kbudget/autodiff.hpp"
#include "kbudget/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace kbudget {

enum class ModelMode : std::uint32_t { mimo = 0, siso = 1 };

std::string_view to_string(ModelMode mode);

struct ArchConfig {
  Index num_blocks = 4;       // D
  Index convs_per_block = 4;  // C
  Index growth = 16;          // G
  Index base_channels = 32;   // G0
  Index in_channels = 3;
  Index out_channels = 3;

  void validate() const;
  bool operator==(const ArchConfig&) const = default;
};

/// Default architecture with in/out channels set for the mode.
ArchConfig default_arch(Index num_sequences, ModelMode mode);

struct Parameter {
  std::string name;
  Shape shape;
  Eigen::ArrayXd values;

  bool operator==(const Parameter& other) const {
    return name == other.name && shape == other.shape && values.size() == other.values.size() &&
           (values == other.values).all();
  }
};

struct RecoveryModel {
  ArchConfig arch;
  ModelMode mode = ModelMode::mimo;
  std::uint64_t init_seed = 0;
  std::vector<Parameter> parameters;

  Index num_parameters() const;
  const Parameter& parameter(std::string_view name) const;
  bool operator==(const RecoveryModel&) const = default;
};

/// Names and shapes of every parameter, in storage order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ArchConfig& arch);

/// Glorot-uniform weights, zero biases, zero output conv.
RecoveryModel build_model(const ArchConfig& arch, ModelMode mode, std::uint64_t seed);

/// Forward pass over explicit parameter tensors (in parameter_layout order).
Tensor model_forward_with(const ArchConfig& arch, std::span<const Tensor> params, const Tensor& input,
                          Tape* tape = nullptr);

/// Inference. Input (B, in_channels, H, W); output has the same shape.
Tensor model_forward(const RecoveryModel& model, const Tensor& input);

struct ForwardPass {
  Tensor output;
  std::vector<Tensor> parameters;  // leaves whose gradients backward fills
};

/// Training forward pass recording onto `tape`.
ForwardPass model_forward(const RecoveryModel& model, const Tensor& input, Tape& tape);

// KBM1 model file, little-endian:
//   "KBM1" | u32 D | u32 C | u32 G | u32 G0 | u32 in | u32 out | u32 mode |
//   u64 init_seed | u32 parameter count |
//   per parameter: u32 name length | name bytes | u32 rank=4 | 4 x u32 dims |
//                  f64 values
void save_model(const RecoveryModel& model, const std::filesystem::path& path);
RecoveryModel load_model(const std::filesystem::path& path);

/// One single-channel model per sequence.
struct SisoSuite {
  std::vector<RecoveryModel> models;
};

/// Zero-filled baseline: returns its input.
struct ZeroFill {};

using Recoverer = std::variant<RecoveryModel, SisoSuite, ZeroFill>;

/// Channels the recoverer consumes, or 0 when it accepts any count.
Index input_channels(const Recoverer& recoverer);

/// Applies the recoverer to a (B, S, H, W) batch. SISO suites route channel s
/// through model s.
Tensor recover(const Recoverer& recoverer, const Tensor& input);

}  // namespace kbudget
