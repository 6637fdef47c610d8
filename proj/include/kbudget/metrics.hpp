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

// Image quality and statistics. PSNR peak and SSIM dynamic range are taken
// from the ground truth, since MR intensities have no fixed scale. A perfect
// reconstruction has PSNR = +infinity (kPsnrPerfect).

#include "kbudget/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace kbudget {

inline constexpr double kPsnrPerfect = std::numeric_limits<double>::infinity();

struct SsimParams {
  Index window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

struct MetricReport {
  double l1 = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

namespace detail {

template <typename A, typename B>
void require_same_shape(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("metric arguments differ in shape");
}

inline Eigen::ArrayXd gaussian_window(const SsimParams& params) {
  Eigen::ArrayXd w(params.window);
  const double centre = static_cast<double>(params.window - 1) / 2.0;
  for (Index i = 0; i < params.window; ++i) {
    const double d = static_cast<double>(i) - centre;
    w(i) = std::exp(-d * d / (2.0 * params.sigma * params.sigma));
  }
  return w / w.sum();
}

/// Valid-mode separable filtering with a symmetric kernel.
inline Imaged filter_valid(const Imaged& x, const Eigen::ArrayXd& kernel) {
  const Index k = kernel.size();
  const Index rows = x.rows() - k + 1, cols = x.cols() - k + 1;
  Imaged vertical = Imaged::Zero(rows, x.cols());
  for (Index i = 0; i < k; ++i) vertical += kernel(i) * x.middleRows(i, rows);
  Imaged out = Imaged::Zero(rows, cols);
  for (Index j = 0; j < k; ++j) out += kernel(j) * vertical.middleCols(j, cols);
  return out;
}

}  // namespace detail

/// Mean absolute difference.
template <typename A, typename B>
double l1_distance(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b) {
  detail::require_same_shape(a, b);
  if (a.size() == 0) throw ArgumentError("l1_distance of empty arrays");
  return (a.derived().template cast<double>() - b.derived().template cast<double>()).abs().mean();
}

/// 20 log10(peak / RMSE) with the peak supplied by the caller.
template <typename A, typename B>
double psnr_with_peak(const Eigen::ArrayBase<A>& pred, const Eigen::ArrayBase<B>& gt, double peak) {
  detail::require_same_shape(pred, gt);
  const double mse = (pred.derived().template cast<double>() - gt.derived().template cast<double>())
                         .square()
                         .mean();
  if (mse == 0.0) return kPsnrPerfect;
  return 20.0 * std::log10(peak / std::sqrt(mse));
}

/// PSNR with peak max(gt). Throws on a constant ground truth.
template <typename A, typename B>
double psnr(const Eigen::ArrayBase<A>& pred, const Eigen::ArrayBase<B>& gt) {
  if (gt.size() == 0 || gt.maxCoeff() == gt.minCoeff())
    throw ArgumentError("psnr: zero dynamic range in ground truth");
  return psnr_with_peak(pred, gt, static_cast<double>(gt.maxCoeff()));
}

/// Mean SSIM over all fully contained Gaussian windows, dynamic range given.
inline double ssim_with_range(const Imaged& pred, const Imaged& gt, double dynamic_range,
                              const SsimParams& params = {}) {
  detail::require_same_shape(pred, gt);
  if (pred.rows() < params.window || pred.cols() < params.window)
    throw ArgumentError("ssim: image smaller than the " + std::to_string(params.window) + "px window");
  const Eigen::ArrayXd w = detail::gaussian_window(params);
  const double c1 = std::pow(params.k1 * dynamic_range, 2);
  const double c2 = std::pow(params.k2 * dynamic_range, 2);

  const Imaged mu_x = detail::filter_valid(pred, w);
  const Imaged mu_y = detail::filter_valid(gt, w);
  const Imaged var_x = detail::filter_valid(pred.square(), w) - mu_x.square();
  const Imaged var_y = detail::filter_valid(gt.square(), w) - mu_y.square();
  const Imaged cov = detail::filter_valid(pred * gt, w) - mu_x * mu_y;

  const Imaged map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) /
                     ((mu_x.square() + mu_y.square() + c1) * (var_x + var_y + c2));
  return map.mean();
}

/// SSIM with dynamic range max(gt).
inline double ssim(const Imaged& pred, const Imaged& gt, const SsimParams& params = {}) {
  return ssim_with_range(pred, gt, gt.maxCoeff(), params);
}

/// Peak over every channel of a stack.
inline double stack_peak(std::span<const Imaged> gt) {
  if (gt.empty()) throw ArgumentError("empty stack");
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& g : gt) peak = std::max(peak, g.maxCoeff());
  return peak;
}

/// Multi-channel PSNR, treating the stack like the channels of a colour
/// image: one peak over all channels, RMSE over all elements.
inline double psnr_stack(std::span<const Imaged> pred, std::span<const Imaged> gt) {
  if (pred.size() != gt.size()) throw ShapeError("stacks differ in channel count");
  const double peak = stack_peak(gt);
  double min_value = std::numeric_limits<double>::infinity();
  double squared = 0.0;
  double count = 0.0;
  for (std::size_t s = 0; s < gt.size(); ++s) {
    detail::require_same_shape(pred[s], gt[s]);
    squared += (pred[s] - gt[s]).square().sum();
    count += static_cast<double>(gt[s].size());
    min_value = std::min(min_value, gt[s].minCoeff());
  }
  if (peak == min_value) throw ArgumentError("psnr: zero dynamic range in ground truth");
  if (squared == 0.0) return kPsnrPerfect;
  return 20.0 * std::log10(peak / std::sqrt(squared / count));
}

/// Per-channel SSIM averaged over channels, with the dynamic range shared
/// across the stack.
inline double ssim_stack(std::span<const Imaged> pred, std::span<const Imaged> gt,
                         const SsimParams& params = {}) {
  if (pred.size() != gt.size()) throw ShapeError("stacks differ in channel count");
  const double range = stack_peak(gt);
  double total = 0.0;
  for (std::size_t s = 0; s < gt.size(); ++s) total += ssim_with_range(pred[s], gt[s], range, params);
  return total / static_cast<double>(gt.size());
}

/// Sample Pearson correlation.
template <typename A, typename B>
double pearson(const Eigen::DenseBase<A>& x, const Eigen::DenseBase<B>& y) {
  if (x.size() != y.size()) throw ArgumentError("pearson: length mismatch");
  if (x.size() < 2) throw ArgumentError("pearson: need at least two samples");
  const Eigen::ArrayXd xa = x.derived().reshaped().template cast<double>().array();
  const Eigen::ArrayXd ya = y.derived().reshaped().template cast<double>().array();
  const Eigen::ArrayXd dx = xa - xa.mean();
  const Eigen::ArrayXd dy = ya - ya.mean();
  const double sxx = dx.square().sum(), syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0) throw ArgumentError("pearson: constant input");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace kbudget
