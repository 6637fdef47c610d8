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

#include "kbudget/model.hpp"

#include "kbudget/io.hpp"

#include <algorithm>
#include <cmath>

namespace kbudget {

std::string_view to_string(ModelMode mode) { return mode == ModelMode::mimo ? "mimo" : "siso"; }

void ArchConfig::validate() const {
  if (num_blocks < 1 || convs_per_block < 1 || growth < 1 || base_channels < 1 || in_channels < 1 ||
      out_channels < 1)
    throw ConfigError("architecture counts must all be >= 1");
}

ArchConfig default_arch(Index num_sequences, ModelMode mode) {
  ArchConfig arch;
  arch.in_channels = arch.out_channels = mode == ModelMode::mimo ? num_sequences : 1;
  return arch;
}

Index RecoveryModel::num_parameters() const {
  Index total = 0;
  for (const auto& p : parameters) total += p.values.size();
  return total;
}

const Parameter& RecoveryModel::parameter(std::string_view name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw ArgumentError("no parameter named '" + std::string(name) + "'");
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ArchConfig& arch) {
  arch.validate();
  std::vector<std::pair<std::string, Shape>> layout;
  const auto conv = [&layout](const std::string& name, Index out, Index in, Index k) {
    layout.emplace_back(name + ".weight", Shape{out, in, k, k});
    layout.emplace_back(name + ".bias", Shape{1, out, 1, 1});
  };
  const Index g0 = arch.base_channels, g = arch.growth;
  conv("shallow", g0, arch.in_channels, 3);
  for (Index d = 0; d < arch.num_blocks; ++d) {
    const std::string block = "rdb" + std::to_string(d);
    for (Index c = 0; c < arch.convs_per_block; ++c)
      conv(block + ".conv" + std::to_string(c), g, g0 + c * g, 3);
    conv(block + ".fuse", g0, g0 + arch.convs_per_block * g, 1);
  }
  conv("global_fuse", g0, arch.num_blocks * g0, 1);
  conv("output", arch.out_channels, g0, 3);
  return layout;
}

RecoveryModel build_model(const ArchConfig& arch, ModelMode mode, std::uint64_t seed) {
  arch.validate();
  if (arch.in_channels != arch.out_channels)
    throw ConfigError("recovery models map S channels to S channels");
  if (mode == ModelMode::siso && arch.in_channels != 1)
    throw ConfigError("SISO models have exactly one channel");

  RecoveryModel model{arch, mode, seed, {}};
  Rng rng(derive_seed(seed, 0x1417ULL));
  for (auto& [name, shape] : parameter_layout(arch)) {
    Eigen::ArrayXd values = Eigen::ArrayXd::Zero(shape.size());
    const bool is_weight = name.ends_with(".weight");
    if (is_weight && !name.starts_with("output.")) {
      const double fan_in = static_cast<double>(shape.c * shape.h * shape.w);
      const double fan_out = static_cast<double>(shape.n * shape.h * shape.w);
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (Index i = 0; i < values.size(); ++i) values(i) = uniform(rng, -bound, bound);
    }
    model.parameters.push_back({name, shape, std::move(values)});
  }
  return model;
}

Tensor model_forward_with(const ArchConfig& arch, std::span<const Tensor> params, const Tensor& input,
                          Tape* tape) {
  if (input.shape().c != arch.in_channels)
    throw ShapeError("model expects " + std::to_string(arch.in_channels) + " input channels, got " +
                     std::to_string(input.shape().c));
  std::size_t next = 0;
  const auto conv = [&](const Tensor& x) {
    const Tensor& w = params[next++];
    const Tensor& b = params[next++];
    return conv2d(x, w, b, tape);
  };

  const Tensor shallow = conv(input);
  Tensor h = shallow;
  std::vector<Tensor> block_outputs;
  for (Index d = 0; d < arch.num_blocks; ++d) {
    std::vector<Tensor> features{h};
    for (Index c = 0; c < arch.convs_per_block; ++c)
      features.push_back(relu(conv(concat_channels(features, tape)), tape));
    h = add(conv(concat_channels(features, tape)), h, tape);
    block_outputs.push_back(h);
  }
  const Tensor global = add(conv(concat_channels(block_outputs, tape)), shallow, tape);
  return add(conv(global), input, tape);
}

namespace {

std::vector<Tensor> as_tensors(const RecoveryModel& model, bool requires_grad) {
  std::vector<Tensor> out;
  out.reserve(model.parameters.size());
  for (const auto& p : model.parameters) out.emplace_back(p.shape, p.values, requires_grad);
  return out;
}

}  // namespace

Tensor model_forward(const RecoveryModel& model, const Tensor& input) {
  return model_forward_with(model.arch, as_tensors(model, false), input, nullptr);
}

ForwardPass model_forward(const RecoveryModel& model, const Tensor& input, Tape& tape) {
  ForwardPass pass{Tensor{}, as_tensors(model, true)};
  pass.output = model_forward_with(model.arch, pass.parameters, input, &tape);
  return pass;
}

void save_model(const RecoveryModel& model, const std::filesystem::path& path) {
  std::string bytes("KBM1");
  const auto& a = model.arch;
  for (Index v : {a.num_blocks, a.convs_per_block, a.growth, a.base_channels, a.in_channels, a.out_channels})
    io::put_u32(bytes, static_cast<std::uint32_t>(v));
  io::put_u32(bytes, static_cast<std::uint32_t>(model.mode));
  io::put_u64(bytes, model.init_seed);
  io::put_u32(bytes, static_cast<std::uint32_t>(model.parameters.size()));
  for (const auto& p : model.parameters) {
    io::put_u32(bytes, static_cast<std::uint32_t>(p.name.size()));
    bytes += p.name;
    io::put_u32(bytes, 4);
    for (Index d : {p.shape.n, p.shape.c, p.shape.h, p.shape.w}) io::put_u32(bytes, static_cast<std::uint32_t>(d));
    for (Index i = 0; i < p.values.size(); ++i) io::put_f64(bytes, p.values(i));
  }
  io::write_file(path, bytes);
}

RecoveryModel load_model(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  const std::string where = path.string();
  if (bytes.size() < 4 || bytes.compare(0, 4, "KBM1") != 0) throw FormatError(where + ": bad magic");
  io::Reader in(bytes, path);
  in.skip(4);

  RecoveryModel model;
  auto& a = model.arch;
  for (Index* field : {&a.num_blocks, &a.convs_per_block, &a.growth, &a.base_channels, &a.in_channels,
                       &a.out_channels})
    *field = static_cast<Index>(in.u32());
  const std::uint32_t mode = in.u32();
  if (mode > 1) throw FormatError(where + ": unknown model mode " + std::to_string(mode));
  model.mode = static_cast<ModelMode>(mode);
  model.init_seed = in.u64();
  try {
    a.validate();
  } catch (const ConfigError& e) {
    throw FormatError(where + ": " + e.what());
  }
  if (a.num_blocks > 1024 || a.convs_per_block > 1024 || a.growth > 4096 || a.base_channels > 4096 ||
      a.in_channels > 4096 || a.out_channels > 4096)
    throw FormatError(where + ": implausible architecture");

  const auto layout = parameter_layout(a);
  const std::uint32_t count = in.u32();
  if (count != layout.size())
    throw FormatError(where + ": expected " + std::to_string(layout.size()) + " parameters, found " +
                      std::to_string(count));
  for (const auto& [name, shape] : layout) {
    const std::uint32_t length = in.u32();
    const std::string stored = in.str(length);
    if (stored != name) throw FormatError(where + ": expected parameter '" + name + "', found '" + stored + "'");
    if (in.u32() != 4) throw FormatError(where + ": parameter '" + name + "' is not rank 4");
    Shape s;
    for (Index* d : {&s.n, &s.c, &s.h, &s.w}) *d = static_cast<Index>(in.u32());
    if (s != shape)
      throw FormatError(where + ": parameter '" + name + "' has shape " + to_string(s) + ", expected " +
                        to_string(shape));
    Eigen::ArrayXd values(shape.size());
    for (Index i = 0; i < values.size(); ++i) values(i) = in.f64();
    if (!values.allFinite()) throw FormatError(where + ": parameter '" + name + "' is not finite");
    model.parameters.push_back({name, shape, std::move(values)});
  }
  if (in.remaining() != 0) throw FormatError(where + ": trailing bytes");
  if (model.mode == ModelMode::siso && a.in_channels != 1)
    throw FormatError(where + ": SISO model with more than one channel");
  return model;
}

Index input_channels(const Recoverer& recoverer) {
  return std::visit(
      [](const auto& r) -> Index {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, RecoveryModel>)
          return r.arch.in_channels;
        else if constexpr (std::is_same_v<T, SisoSuite>)
          return static_cast<Index>(r.models.size());
        else
          return 0;
      },
      recoverer);
}

Tensor recover(const Recoverer& recoverer, const Tensor& input) {
  return std::visit(
      [&input](const auto& r) -> Tensor {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, RecoveryModel>) {
          return model_forward(r, input);
        } else if constexpr (std::is_same_v<T, SisoSuite>) {
          const Shape s = input.shape();
          if (s.c != static_cast<Index>(r.models.size()))
            throw ShapeError("SISO suite has " + std::to_string(r.models.size()) + " models, input has " +
                             std::to_string(s.c) + " channels");
          std::vector<Tensor> outputs;
          for (Index ch = 0; ch < s.c; ++ch) {
            Tensor single(Shape{s.n, 1, s.h, s.w});
            for (Index n = 0; n < s.n; ++n) single.item_matrix(n) = input.item_matrix(n).row(ch);
            outputs.push_back(model_forward(r.models[static_cast<std::size_t>(ch)], single));
          }
          return concat_channels(outputs);
        } else {
          return input.clone();
        }
      },
      recoverer);
}

}  // namespace kbudget
