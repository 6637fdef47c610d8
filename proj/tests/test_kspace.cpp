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
#include "kbudget/kspace.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace kbudget;
using kbudget::testing::random_image;

namespace {

SamplingMask rows_mask(Index n, std::initializer_list<Index> rows) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n), 0);
  for (Index r : rows) bits[static_cast<std::size_t>(r)] = 1;
  return SamplingMask(bits);
}

}  // namespace

TEST_SUITE("kspace") {

TEST_CASE("2x2 ones has all its energy at the centre") {
  const ComplexImaged f = fft2_centered(Imaged::Ones(2, 2).eval());
  CHECK(std::abs(f(1, 1) - std::complex<double>(2.0, 0.0)) < 1e-15);
  CHECK(std::abs(f(0, 0)) < 1e-15);
  CHECK(std::abs(f(0, 1)) < 1e-15);
  CHECK(std::abs(f(1, 0)) < 1e-15);
}

TEST_CASE("impulse has a flat magnitude spectrum") {
  Imaged x = Imaged::Zero(8, 16);
  x(3, 5) = 1.0;
  const ComplexImaged f = fft2_centered(x);
  CHECK(((f.abs() - 1.0 / std::sqrt(128.0)).abs() < 1e-14).all());
}

TEST_CASE("odd dimensions are rejected") {
  CHECK_THROWS_AS(fft2_centered(Imaged::Zero(7, 8).eval()), ArgumentError);
  CHECK_THROWS_AS(ifft2_centered(ComplexImaged::Zero(8, 9).eval()), ArgumentError);
}

TEST_CASE("round trip and Parseval") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Imaged x = random_image(32, 32, seed);
    const ComplexImaged f = fft2_centered(x);
    const ComplexImaged back = ifft2_centered(f);
    CHECK((back.real() - x).abs().maxCoeff() < 1e-10);
    CHECK(back.imag().abs().maxCoeff() < 1e-10);
    const double e_img = x.square().sum(), e_spec = f.abs2().sum();
    CHECK(std::abs(e_img - e_spec) / e_img < 1e-10);
  }
}

TEST_CASE("inverse of simple spectra") {
  CHECK((ifft2_centered(ComplexImaged::Zero(8, 8).eval()).abs() == 0.0).all());
  ComplexImaged centre = ComplexImaged::Zero(8, 8);
  centre(4, 4) = 3.0;
  const ComplexImaged img = ifft2_centered(centre);
  CHECK(((img.real() - 3.0 / 8.0).abs() < 1e-14).all());
  CHECK((img.imag().abs() < 1e-14).all());
}

TEST_CASE("transforms match the naive DFT") {
  const Imaged x = random_image(8, 8, 42);
  const ComplexImaged fast = fft2_centered(x);
  const ComplexImaged slow = oracle::naive_dft2_centered(x.cast<std::complex<double>>(), false);
  CHECK((fast - slow).abs().maxCoeff() < 1e-12);
  const ComplexImaged slow_back = oracle::naive_dft2_centered(slow, true);
  CHECK((slow_back.real() - x).abs().maxCoeff() < 1e-12);
}

TEST_CASE("apply_mask keeps selected rows only") {
  const ComplexImaged f = fft2_centered(random_image(8, 8, 1));
  SUBCASE("full mask is the identity") {
    CHECK((apply_mask(f, SamplingMask(std::vector<std::uint8_t>(8, 1))) == f).all());
  }
  SUBCASE("DC row only") {
    const ComplexImaged m = apply_mask(f, rows_mask(8, {4}));
    for (Index r = 0; r < 8; ++r) CHECK(((m.row(r) == f.row(r)).all() || r != 4));
    CHECK((m.topRows(4) == std::complex<double>(0.0)).all());
    CHECK((m.bottomRows(3) == std::complex<double>(0.0)).all());
  }
  SUBCASE("energy is the sum of kept row energies") {
    const SamplingMask mask = rows_mask(8, {1, 4, 6});
    const ComplexImaged m = apply_mask(f, mask);
    double expected = 0.0;
    for (Index r : {1, 4, 6})
      for (Index c = 0; c < 8; ++c) expected += std::norm(f(r, c));
    CHECK(m.abs2().sum() == doctest::Approx(expected).epsilon(1e-14));
    CHECK((apply_mask(m, mask) == m).all());
  }
  SUBCASE("length mismatch") { CHECK_THROWS_AS(apply_mask(f, rows_mask(6, {3})), ArgumentError); }
}

TEST_CASE("zero-filled reconstruction") {
  SUBCASE("full mask returns the input") {
    const Imaged x = random_image(16, 16, 3);
    CHECK((zero_filled_recon(x, SamplingMask(std::vector<std::uint8_t>(16, 1))) - x).abs().maxCoeff() < 1e-10);
  }
  SUBCASE("constant image survives a DC-only mask") {
    const Imaged x = Imaged::Constant(16, 16, 0.7);
    CHECK((zero_filled_recon(x, rows_mask(16, {8})) - 0.7).abs().maxCoeff() < 1e-10);
  }
  SUBCASE("phantom slice under a random mask matches the naive DFT") {
    const Dataset d = generate_phantom_dataset(PhantomConfig{1, 16, 1, 2});
    Rng rng(9);
    const SamplingMask mask = make_random_mask(16, 6, 0.125, rng);
    const Imaged fast = zero_filled_recon(d.stacks[0][0], mask);
    const Imaged slow = oracle::naive_zero_fill(d.stacks[0][0], mask.bits());
    CHECK((fast - slow).abs().maxCoeff() < 1e-8);
  }
  SUBCASE("positively homogeneous") {
    const Imaged x = random_image(16, 16, 5);
    const SamplingMask mask = rows_mask(16, {5, 8, 11});
    CHECK((zero_filled_recon((2.5 * x).eval(), mask) - 2.5 * zero_filled_recon(x, mask)).abs().maxCoeff() <
          1e-12);
  }
}

}  // TEST_SUITE
