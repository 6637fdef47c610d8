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

#include "kbudget/data.hpp"

#include "kbudget/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace kbudget {

namespace {

enum Tissue : int { kBackground = 0, kSkull, kParenchyma, kGrey, kFluid, kLesion, kNumTissues };

struct Ellipse {
  double cx, cy, a, b, angle;

  bool contains(double x, double y) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dx = x - cx, dy = y - cy;
    const double u = (c * dx + s * dy) / a;
    const double v = (-s * dx + c * dy) / b;
    return u * u + v * v <= 1.0;
  }
};

Image<int> render_labels(Index n, Index num_ellipses, Rng& rng) {
  const double tilt = uniform(rng, -0.15, 0.15);
  const Ellipse head{uniform(rng, -0.04, 0.04), uniform(rng, -0.04, 0.04),
                     uniform(rng, 0.78, 0.88), uniform(rng, 0.86, 0.94), tilt};
  const double thickness = uniform(rng, 0.06, 0.10);
  const Ellipse brain{head.cx, head.cy, head.a - thickness, head.b - thickness, tilt};

  std::vector<std::pair<Ellipse, Tissue>> blobs;
  blobs.reserve(static_cast<std::size_t>(num_ellipses));
  for (Index i = 0; i < num_ellipses; ++i) {
    const double r = 0.55 * std::sqrt(uniform01(rng));
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const Ellipse e{brain.cx + r * std::cos(phi) * brain.a, brain.cy + r * std::sin(phi) * brain.b,
                    uniform(rng, 0.06, 0.30), uniform(rng, 0.06, 0.30),
                    uniform(rng, 0.0, std::numbers::pi)};
    const auto tissue = static_cast<Tissue>(kGrey + static_cast<int>(uniform_index(rng, 3)));
    blobs.emplace_back(e, tissue);
  }

  Image<int> labels = Image<int>::Zero(n, n);
  const double half = static_cast<double>(n) / 2.0;
  for (Index row = 0; row < n; ++row) {
    const double y = (static_cast<double>(row) + 0.5 - half) / half;
    for (Index col = 0; col < n; ++col) {
      const double x = (static_cast<double>(col) + 0.5 - half) / half;
      if (!head.contains(x, y)) continue;
      if (!brain.contains(x, y)) {
        labels(row, col) = kSkull;
        continue;
      }
      int label = kParenchyma;
      for (const auto& [e, tissue] : blobs)
        if (e.contains(x, y)) label = tissue;
      labels(row, col) = label;
    }
  }
  return labels;
}

// Smooth multiplicative shading shared by all sequences of one stack.
Imaged render_shading(Index n, Rng& rng) {
  const double wx = uniform(rng, 1.0, 3.0), wy = uniform(rng, 1.0, 3.0);
  const double px = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double py = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double depth = uniform(rng, 0.04, 0.10);
  Imaged shading(n, n);
  const double half = static_cast<double>(n) / 2.0;
  for (Index row = 0; row < n; ++row) {
    const double y = (static_cast<double>(row) + 0.5 - half) / half;
    for (Index col = 0; col < n; ++col) {
      const double x = (static_cast<double>(col) + 0.5 - half) / half;
      shading(row, col) = 1.0 + depth * std::sin(wx * x + px) * std::cos(wy * y + py);
    }
  }
  return shading;
}

bool is_even_at_least_8(Index v) { return v >= 8 && v % 2 == 0; }

}  // namespace

void MultiSequenceStack::validate() const {
  if (sequences.empty()) throw ConfigError("stack has no sequences");
  const Index h = height(), w = width();
  if (!is_even_at_least_8(h) || !is_even_at_least_8(w)) {
    std::ostringstream msg;
    msg << "stack dimensions " << h << "x" << w << " must be even and >= 8";
    throw ConfigError(msg.str());
  }
  for (const auto& img : sequences) {
    if (img.rows() != h || img.cols() != w) throw ConfigError("sequences differ in shape");
    if (!img.allFinite()) throw ConfigError("stack contains non-finite values");
    if ((img < 0.0).any() || (img > 1.0).any()) throw ConfigError("stack values outside [0, 1]");
  }
}

bool MultiSequenceStack::operator==(const MultiSequenceStack& other) const {
  if (sequences.size() != other.sequences.size()) return false;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    if (sequences[s].rows() != other.sequences[s].rows() ||
        sequences[s].cols() != other.sequences[s].cols())
      return false;
    if ((sequences[s] != other.sequences[s]).any()) return false;
  }
  return true;
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
  }
  return "unknown";
}

void Dataset::validate() const {
  if (stacks.empty()) throw ConfigError("dataset is empty");
  for (const auto& stack : stacks) {
    stack.validate();
    if (stack.num_sequences() != num_sequences() || stack.height() != height() ||
        stack.width() != width())
      throw ConfigError("dataset stacks differ in (S, H, W)");
  }
}

Dataset Dataset::select_sequence(Index s) const {
  if (s < 0 || s >= num_sequences()) throw ArgumentError("sequence index out of range");
  Dataset out;
  out.split = split;
  out.stacks.reserve(stacks.size());
  for (const auto& stack : stacks) out.stacks.push_back(MultiSequenceStack{{stack[s]}});
  return out;
}

bool Dataset::operator==(const Dataset& other) const {
  return split == other.split && stacks == other.stacks;
}

void PhantomConfig::validate() const {
  if (num_stacks < 1) throw ConfigError("num_stacks must be >= 1");
  if (num_sequences < 1) throw ConfigError("num_sequences must be >= 1");
  if (!is_even_at_least_8(size)) throw ConfigError("size must be even and >= 8");
  if (num_ellipses < 0) throw ConfigError("num_ellipses must be >= 0");
}

std::uint64_t PhantomConfig::contrast_seed(Index s) const {
  return derive_seed(seed, 0xC0417A57ULL, static_cast<std::uint64_t>(s));
}

Dataset generate_phantom_dataset(const PhantomConfig& config) {
  config.validate();

  // Per-sequence tissue intensities, one table per sequence for the whole
  // dataset (a fixed acquisition protocol).
  std::vector<std::array<double, kNumTissues>> contrast(static_cast<std::size_t>(config.num_sequences));
  for (Index s = 0; s < config.num_sequences; ++s) {
    Rng rng(config.contrast_seed(s));
    auto& table = contrast[static_cast<std::size_t>(s)];
    table[kBackground] = 0.0;
    for (int t = kSkull; t < kNumTissues; ++t) table[t] = uniform(rng, 0.15, 0.90);
  }

  Dataset dataset;
  dataset.stacks.reserve(static_cast<std::size_t>(config.num_stacks));
  for (Index i = 0; i < config.num_stacks; ++i) {
    Rng rng(derive_seed(config.seed, 0xA4A70111ULL, static_cast<std::uint64_t>(i)));
    const Image<int> labels = render_labels(config.size, config.num_ellipses, rng);
    const Imaged shading = render_shading(config.size, rng);

    MultiSequenceStack stack;
    stack.sequences.reserve(static_cast<std::size_t>(config.num_sequences));
    for (const auto& table : contrast) {
      Imaged img = labels.unaryExpr([&table](int label) { return table[static_cast<std::size_t>(label)]; });
      img = (img * shading).min(1.0).max(0.0);
      stack.sequences.push_back(std::move(img));
    }
    dataset.stacks.push_back(std::move(stack));
  }
  return dataset;
}

void write_msv(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::string bytes;
  bytes.reserve(kMsvHeaderBytes + static_cast<std::size_t>(dataset.size() * dataset.num_sequences() *
                                                           dataset.height() * dataset.width()) *
                                      8);
  bytes.append("MSV1", 4);
  io::put_u32(bytes, kMsvVersion);
  io::put_u32(bytes, static_cast<std::uint32_t>(dataset.size()));
  io::put_u32(bytes, static_cast<std::uint32_t>(dataset.num_sequences()));
  io::put_u32(bytes, static_cast<std::uint32_t>(dataset.height()));
  io::put_u32(bytes, static_cast<std::uint32_t>(dataset.width()));
  for (const auto& stack : dataset.stacks)
    for (const auto& img : stack.sequences)
      for (Index k = 0; k < img.size(); ++k) io::put_f64(bytes, img.data()[k]);
  io::write_file(path, bytes);
}

Dataset read_msv(const std::filesystem::path& path, SplitTag split) {
  const std::string bytes = io::read_file(path);
  io::Reader in(bytes, path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "MSV1") != 0)
    throw FormatError(path.string() + ": bad magic");
  in.skip(4);
  if (bytes.size() < kMsvHeaderBytes) throw FormatError(path.string() + ": truncated header");
  const std::uint32_t version = in.u32();
  if (version != kMsvVersion)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  const std::uint64_t num_stacks = in.u32();
  const std::uint64_t s = in.u32();
  const std::uint64_t h = in.u32();
  const std::uint64_t w = in.u32();
  if (num_stacks == 0) throw FormatError(path.string() + ": num_stacks is zero");
  if (s == 0) throw FormatError(path.string() + ": num_sequences is zero");
  if (!is_even_at_least_8(static_cast<Index>(h))) throw FormatError(path.string() + ": bad height");
  if (!is_even_at_least_8(static_cast<Index>(w))) throw FormatError(path.string() + ": bad width");

  // Four u32 factors can overflow 64 bits; compare in 128.
  const unsigned __int128 count = static_cast<unsigned __int128>(num_stacks) * s * h * w;
  const unsigned __int128 expected = kMsvHeaderBytes + count * 8;
  if (bytes.size() < expected) throw FormatError(path.string() + ": truncated payload");
  if (bytes.size() > expected) throw FormatError(path.string() + ": trailing bytes after payload");

  Dataset dataset;
  dataset.split = split;
  dataset.stacks.resize(num_stacks);
  for (auto& stack : dataset.stacks) {
    stack.sequences.reserve(s);
    for (std::uint64_t q = 0; q < s; ++q) {
      Imaged img(static_cast<Index>(h), static_cast<Index>(w));
      for (Index k = 0; k < img.size(); ++k) {
        const double v = in.f64();
        if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite value");
        if (v < 0.0 || v > 1.0) throw FormatError(path.string() + ": value outside [0, 1]");
        img.data()[k] = v;
      }
      stack.sequences.push_back(std::move(img));
    }
  }
  return dataset;
}

std::tuple<Dataset, Dataset, Dataset> split_dataset(const Dataset& dataset,
                                                    const std::array<double, 3>& fractions,
                                                    std::uint64_t seed) {
  for (double f : fractions)
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");

  const auto n = static_cast<std::size_t>(dataset.size());
  // Guard against products like 0.05 * 20 landing just under an integer.
  const auto portion = [n](double f) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = portion(fractions[1]);
  const std::size_t n_test = portion(fractions[2]);
  const std::size_t n_train = n - n_val - n_test;
  if (n_train == 0 || n_val == 0 || n_test == 0) throw ConfigError("split produces an empty subset");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x5B717ULL));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  Dataset train, val, test;
  train.split = SplitTag::train;
  val.split = SplitTag::val;
  test.split = SplitTag::test;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& stack = dataset.stacks[order[i]];
    if (i < n_train)
      train.stacks.push_back(stack);
    else if (i < n_train + n_val)
      val.stacks.push_back(stack);
    else
      test.stacks.push_back(stack);
  }
  return {std::move(train), std::move(val), std::move(test)};
}

void export_pgm(const MultiSequenceStack& stack, Index sequence_index,
                const std::filesystem::path& path) {
  if (sequence_index < 0 || sequence_index >= stack.num_sequences())
    throw ArgumentError("sequence index " + std::to_string(sequence_index) + " out of range");
  const Imaged& img = stack[sequence_index];
  std::string bytes = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
  for (Index k = 0; k < img.size(); ++k) {
    const double scaled = std::floor(std::clamp(img.data()[k], 0.0, 1.0) * 255.0 + 0.5);
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(scaled)));
  }
  io::write_file(path, bytes);
}

}  // namespace kbudget
