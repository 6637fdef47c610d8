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

#include "kbudget/autodiff.hpp"
#include "kbudget/data.hpp"
#include "kbudget/model.hpp"
#include "kbudget/sampling.hpp"

#include <functional>
#include <optional>

namespace kbudget {

enum class TrainMode { blind, fixed_strategy };

struct EpochLog {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainConfig {
  Index epochs = 20;
  Index batch_size = 4;
  AdamConfig adam{};
  double max_factor = 8.0;  // k
  MaskKind mask_kind = MaskKind::lowpass;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::blind;
  std::optional<SamplingStrategy> fixed_strategy;
  /// Called after every epoch; not part of the result.
  std::function<void(const EpochLog&)> on_epoch;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> seconds;
  double initial_val_loss = 0.0;  // before the first update
  Index best_epoch = 0;           // 0 means the initial parameters were kept
};

struct TrainingExample {
  MultiSequenceStack input;   // zero-filled reconstructions
  MultiSequenceStack target;  // fully sampled stack
};

/// Masks each sequence with lines_for_factor(H, lambda_s) lines of the
/// strategy's mask kind (random masks draw from `rng`) and zero-fills.
TrainingExample make_training_example(const MultiSequenceStack& stack, const SamplingStrategy& strategy,
                                      Rng& rng);

/// Packs stacks into a (B, S, H, W) tensor.
Tensor to_tensor(std::span<const MultiSequenceStack> stacks);

/// Unpacks batch item `n` of a (B, S, H, W) tensor.
MultiSequenceStack to_stack(const Tensor& t, Index n);

/// Blind recovery model training: each example draws its own lambda_s
/// uniformly from [1, k] per sequence. Returns the parameters with the lowest
/// validation loss, where validation uses seed-derived strategies and masks
/// frozen for the whole run.
std::pair<RecoveryModel, TrainReport> train_brm(RecoveryModel model, const Dataset& train,
                                                const Dataset& val, const TrainConfig& config);

/// Training on one fixed strategy; masks are still redrawn per example when
/// the mask kind is random. Passing a trained blind model fine-tunes it.
std::pair<RecoveryModel, TrainReport> train_dedicated(RecoveryModel model, const SamplingStrategy& strategy,
                                                      const Dataset& train, const Dataset& val,
                                                      TrainConfig config);

/// Seed of the SISO model for sequence `s`; sequence 0 keeps the base seed.
std::uint64_t siso_seed(std::uint64_t base, Index s);

/// One single-channel blind model per sequence, trained on that sequence only.
/// Architecture sizes come from `arch`; its channel counts are overridden.
std::pair<SisoSuite, std::vector<TrainReport>> train_siso_suite(const ArchConfig& arch, const Dataset& train,
                                                                const Dataset& val, const TrainConfig& config);

}  // namespace kbudget
