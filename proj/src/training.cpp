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

#include "kbudget/training.hpp"

#include "kbudget/kspace.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace kbudget {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kValidationStream = 0x7A11D;
constexpr std::uint64_t kShuffleStream = 0x5E0F;
constexpr std::uint64_t kExampleStream = 0xE8A3;

struct ValidationSet {
  std::vector<Tensor> inputs;
  std::vector<Tensor> targets;
};

SamplingStrategy draw_strategy(const TrainConfig& config, Index num_sequences, Index num_lines, Rng& rng) {
  if (config.mode == TrainMode::fixed_strategy) return *config.fixed_strategy;
  return sample_random_strategy(num_sequences, config.max_factor, num_lines, config.mask_kind, rng);
}

ValidationSet build_validation(const Dataset& val, const TrainConfig& config) {
  ValidationSet out;
  const auto n = static_cast<std::size_t>(val.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < n; start += batch) {
    std::vector<MultiSequenceStack> inputs, targets;
    for (std::size_t i = start; i < std::min(n, start + batch); ++i) {
      Rng rng(derive_seed(config.seed, kValidationStream, i));
      const auto strategy = draw_strategy(config, val.num_sequences(), val.height(), rng);
      auto example = make_training_example(val.stacks[i], strategy, rng);
      inputs.push_back(std::move(example.input));
      targets.push_back(std::move(example.target));
    }
    out.inputs.push_back(to_tensor(inputs));
    out.targets.push_back(to_tensor(targets));
  }
  return out;
}

double validation_loss(const RecoveryModel& model, const ValidationSet& val) {
  double total = 0.0, count = 0.0;
  for (std::size_t b = 0; b < val.inputs.size(); ++b) {
    const Tensor out = model_forward(model, val.inputs[b]);
    const double weight = static_cast<double>(val.inputs[b].size());
    total += l1_loss(out, val.targets[b]).item() * weight;
    count += weight;
  }
  return total / count;
}

void check_compatible(const RecoveryModel& model, const Dataset& data, const char* which) {
  data.validate();
  if (model.arch.in_channels != data.num_sequences())
    throw ConfigError(std::string(which) + " set has " + std::to_string(data.num_sequences()) +
                      " sequences but the model expects " + std::to_string(model.arch.in_channels));
}

std::pair<RecoveryModel, TrainReport> run_training(RecoveryModel model, const Dataset& train,
                                                   const Dataset& val, const TrainConfig& config) {
  config.validate();
  check_compatible(model, train, "training");
  check_compatible(model, val, "validation");
  if (train.height() != val.height() || train.width() != val.width())
    throw ConfigError("training and validation images differ in size");

  const Index num_sequences = train.num_sequences();
  const Index num_lines = train.height();
  const ValidationSet validation = build_validation(val, config);

  TrainReport report;
  report.initial_val_loss = validation_loss(model, validation);
  RecoveryModel best = model;
  double best_loss = report.initial_val_loss;

  AdamState adam;
  const auto n = static_cast<std::size_t>(train.size());
  std::vector<std::size_t> order(n);
  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle, i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      std::vector<MultiSequenceStack> inputs, targets;
      for (std::size_t i = start; i < stop; ++i) {
        Rng rng(derive_seed(config.seed, kExampleStream, static_cast<std::uint64_t>(epoch), i));
        const auto strategy = draw_strategy(config, num_sequences, num_lines, rng);
        auto example = make_training_example(train.stacks[order[i]], strategy, rng);
        inputs.push_back(std::move(example.input));
        targets.push_back(std::move(example.target));
      }

      Tape tape;
      const ForwardPass pass = model_forward(model, to_tensor(inputs), tape);
      const Tensor loss = l1_loss(pass.output, to_tensor(targets), &tape);
      if (!std::isfinite(loss.item()))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      tape.backward(loss);

      std::vector<Eigen::ArrayXd> values, grads;
      values.reserve(model.parameters.size());
      grads.reserve(model.parameters.size());
      for (std::size_t p = 0; p < model.parameters.size(); ++p) {
        values.push_back(std::move(model.parameters[p].values));
        grads.push_back(pass.parameters[p].grad());
      }
      adam_step(values, grads, adam, config.adam);
      for (std::size_t p = 0; p < model.parameters.size(); ++p) {
        if (!values[p].allFinite())
          throw NumericError("parameter '" + model.parameters[p].name + "' became non-finite at epoch " +
                             std::to_string(epoch));
        model.parameters[p].values = std::move(values[p]);
      }
      loss_sum += loss.item() * static_cast<double>(stop - start);
    }

    const double val_loss = validation_loss(model, validation);
    if (!std::isfinite(val_loss)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.train_loss.push_back(loss_sum / static_cast<double>(n));
    report.val_loss.push_back(val_loss);
    report.seconds.push_back(seconds);
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = model;
      report.best_epoch = epoch;
    }
    if (config.on_epoch) config.on_epoch({epoch, report.train_loss.back(), val_loss, seconds});
  }
  return {std::move(best), std::move(report)};
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(max_factor >= 1.0)) throw ConfigError("max factor k must be >= 1");
  if (!(adam.lr >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.epsilon > 0.0))
    throw ConfigError("invalid optimizer settings");
  if ((mode == TrainMode::fixed_strategy) != fixed_strategy.has_value())
    throw ConfigError("a fixed strategy is required exactly in fixed-strategy mode");
}

TrainingExample make_training_example(const MultiSequenceStack& stack, const SamplingStrategy& strategy,
                                      Rng& rng) {
  if (strategy.num_sequences() != stack.num_sequences())
    throw ArgumentError("strategy has " + std::to_string(strategy.num_sequences()) + " factors for " +
                        std::to_string(stack.num_sequences()) + " sequences");
  const Index num_lines = stack.height();
  TrainingExample example{MultiSequenceStack{}, stack};
  example.input.sequences.reserve(stack.sequences.size());
  for (Index s = 0; s < stack.num_sequences(); ++s) {
    const Index count = lines_for_factor(num_lines, strategy.factors[static_cast<std::size_t>(s)]);
    const SamplingMask mask = make_mask(strategy.mask_kind, num_lines, count, rng);
    example.input.sequences.push_back(zero_filled_recon(stack[s], mask));
  }
  return example;
}

Tensor to_tensor(std::span<const MultiSequenceStack> stacks) {
  if (stacks.empty()) throw ArgumentError("no stacks to pack");
  const auto& first = stacks.front();
  const Shape shape{static_cast<Index>(stacks.size()), first.num_sequences(), first.height(), first.width()};
  Tensor t(shape);
  for (Index n = 0; n < shape.n; ++n) {
    const auto& stack = stacks[static_cast<std::size_t>(n)];
    if (stack.num_sequences() != shape.c || stack.height() != shape.h || stack.width() != shape.w)
      throw ShapeError("stacks differ in shape");
    auto dst = t.item_matrix(n);
    for (Index s = 0; s < shape.c; ++s) dst.row(s) = stack[s].reshaped<Eigen::RowMajor>().transpose().matrix();
  }
  return t;
}

MultiSequenceStack to_stack(const Tensor& t, Index n) {
  const Shape shape = t.shape();
  MultiSequenceStack stack;
  const auto src = t.item_matrix(n);
  for (Index s = 0; s < shape.c; ++s) {
    Imaged img(shape.h, shape.w);
    img.reshaped<Eigen::RowMajor>() = src.row(s).transpose().array();
    stack.sequences.push_back(std::move(img));
  }
  return stack;
}

std::pair<RecoveryModel, TrainReport> train_brm(RecoveryModel model, const Dataset& train,
                                                const Dataset& val, const TrainConfig& config) {
  if (config.mode != TrainMode::blind) throw ConfigError("train_brm needs a blind training config");
  return run_training(std::move(model), train, val, config);
}

std::pair<RecoveryModel, TrainReport> train_dedicated(RecoveryModel model, const SamplingStrategy& strategy,
                                                      const Dataset& train, const Dataset& val,
                                                      TrainConfig config) {
  config.mode = TrainMode::fixed_strategy;
  config.fixed_strategy = strategy;
  config.mask_kind = strategy.mask_kind;
  if (strategy.num_lines != train.height())
    throw ConfigError("strategy line counts were derived for " + std::to_string(strategy.num_lines) +
                      " lines, images have " + std::to_string(train.height()));
  return run_training(std::move(model), train, val, config);
}

std::uint64_t siso_seed(std::uint64_t base, Index s) {
  return base + static_cast<std::uint64_t>(s) * 0x9e3779b97f4a7c15ULL;
}

std::pair<SisoSuite, std::vector<TrainReport>> train_siso_suite(const ArchConfig& arch, const Dataset& train,
                                                                const Dataset& val, const TrainConfig& config) {
  train.validate();
  if (train.num_sequences() < 1) throw ConfigError("dataset has no sequences");
  ArchConfig single = arch;
  single.in_channels = single.out_channels = 1;

  SisoSuite suite;
  std::vector<TrainReport> reports;
  for (Index s = 0; s < train.num_sequences(); ++s) {
    TrainConfig per = config;
    per.seed = siso_seed(config.seed, s);
    RecoveryModel init = build_model(single, ModelMode::siso, per.seed);
    auto [model, report] = train_brm(std::move(init), train.select_sequence(s), val.select_sequence(s), per);
    suite.models.push_back(std::move(model));
    reports.push_back(std::move(report));
  }
  return {std::move(suite), std::move(reports)};
}

}  // namespace kbudget
