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

// Centred orthonormal 2-D Fourier transforms and Cartesian undersampling.
//
// Spectra are stored DC-centred: zero frequency sits at (H/2, W/2). Both
// directions carry a 1/sqrt(H*W) factor so the pair is unitary. Phase-encode
// lines are spectrum rows.

#include "kbudget/core.hpp"
#include "kbudget/sampling.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <vector>

namespace kbudget {

namespace detail {

template <typename Scalar>
void require_even(Index rows, Index cols) {
  if (rows < 2 || cols < 2 || rows % 2 != 0 || cols % 2 != 0)
    throw ArgumentError("Fourier transforms need even dimensions, got " + std::to_string(rows) +
                        "x" + std::to_string(cols));
}

/// In-place unnormalized 2-D DFT along rows then columns.
template <typename Scalar>
void dft2_inplace(ComplexImage<Scalar>& data, bool inverse) {
  using Complex = std::complex<Scalar>;
  Eigen::FFT<Scalar> fft;
  fft.SetFlag(Eigen::FFT<Scalar>::Unscaled);
  const Index rows = data.rows(), cols = data.cols();

  std::vector<Complex> in(static_cast<std::size_t>(cols)), out;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) in[static_cast<std::size_t>(c)] = data(r, c);
    inverse ? fft.inv(out, in) : fft.fwd(out, in);
    for (Index c = 0; c < cols; ++c) data(r, c) = out[static_cast<std::size_t>(c)];
  }
  in.resize(static_cast<std::size_t>(rows));
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) in[static_cast<std::size_t>(r)] = data(r, c);
    inverse ? fft.inv(out, in) : fft.fwd(out, in);
    for (Index r = 0; r < rows; ++r) data(r, c) = out[static_cast<std::size_t>(r)];
  }
}

/// Half-size circular shift; its own inverse for even dimensions.
template <typename Derived>
auto fftshift(const Eigen::ArrayBase<Derived>& x) {
  using Plain = typename Derived::PlainObject;
  const Index rows = x.rows(), cols = x.cols();
  const Index hr = rows / 2, hc = cols / 2;
  Plain out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out((r + hr) % rows, (c + hc) % cols) = x(r, c);
  return out;
}

}  // namespace detail

/// Orthonormal forward DFT of a real image, DC-centred.
template <typename Derived>
ComplexImage<typename Derived::Scalar> fft2_centered(const Eigen::ArrayBase<Derived>& image) {
  using Scalar = typename Derived::Scalar;
  detail::require_even<Scalar>(image.rows(), image.cols());
  ComplexImage<Scalar> spectrum = image.derived().template cast<std::complex<Scalar>>();
  detail::dft2_inplace<Scalar>(spectrum, false);
  spectrum /= std::sqrt(static_cast<Scalar>(image.size()));
  return detail::fftshift(spectrum);
}

/// Inverse of fft2_centered.
template <typename Scalar>
ComplexImage<Scalar> ifft2_centered(const ComplexImage<Scalar>& spectrum) {
  detail::require_even<Scalar>(spectrum.rows(), spectrum.cols());
  ComplexImage<Scalar> image = detail::fftshift(spectrum);
  detail::dft2_inplace<Scalar>(image, true);
  image /= std::sqrt(static_cast<Scalar>(spectrum.size()));
  return image;
}

/// Zeroes every spectrum row whose mask bit is clear.
template <typename Scalar>
ComplexImage<Scalar> apply_mask(const ComplexImage<Scalar>& spectrum, const SamplingMask& mask) {
  if (mask.size() != spectrum.rows())
    throw ArgumentError("mask length " + std::to_string(mask.size()) + " does not match " +
                        std::to_string(spectrum.rows()) + " phase-encode lines");
  ComplexImage<Scalar> out = spectrum;
  for (Index r = 0; r < out.rows(); ++r)
    if (!mask[r]) out.row(r).setZero();
  return out;
}

/// Magnitude of the inverse transform of the masked spectrum: the
/// zero-filled reconstruction that serves as network input. A full mask
/// returns |image| exactly instead of a round trip through the transforms.
template <typename Derived>
Image<typename Derived::Scalar> zero_filled_recon(const Eigen::ArrayBase<Derived>& image,
                                                  const SamplingMask& mask) {
  if (mask.size() != image.rows())
    throw ArgumentError("mask length " + std::to_string(mask.size()) + " does not match " +
                        std::to_string(image.rows()) + " phase-encode lines");
  if (mask.cardinality() == mask.size()) {
    detail::require_even<typename Derived::Scalar>(image.rows(), image.cols());
    return image.abs();
  }
  return ifft2_centered(apply_mask(fft2_centered(image), mask)).abs();
}

}  // namespace kbudget
