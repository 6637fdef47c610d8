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

#include "kbudget/autodiff.hpp"

#include "model_gradcheck.hpp"

#include <doctest.h>

#include <array>

using namespace kbudget;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Eigen::ArrayXd v(shape.size());
  for (Index i = 0; i < v.size(); ++i) v(i) = uniform(rng, lo, hi);
  return Tensor(shape, v);
}

// Values with |v| >= margin, so ReLU and |.| kinks stay out of reach of h.
Tensor away_from_zero(Shape shape, std::uint64_t seed, double margin = 1e-3) {
  Tensor t = random_tensor(shape, seed);
  for (Index i = 0; i < t.size(); ++i) {
    double& v = t.values()(i);
    if (std::abs(v) < margin) v = v < 0 ? -margin : margin;
  }
  return t;
}

// mean(x + 2): l1 against a target below every x in [-1, 1], so the loss is
// linear. A small offset keeps rounding noise in the differences small.
Tensor linear_loss(const Tensor& x, Tape* tape) {
  const Tensor target(x.shape(), Eigen::ArrayXd::Constant(x.size(), -2.0));
  return l1_loss(x, target, tape);
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("conv2d forward") {
  SUBCASE("1x1 unit kernel is the identity") {
    const Tensor x = random_tensor({2, 1, 4, 6}, 1);
    const Tensor w({1, 1, 1, 1}, Eigen::ArrayXd::Ones(1));
    const Tensor b({1, 1, 1, 1});
    const Tensor y = conv2d(x, w, b);
    CHECK(y.shape() == x.shape());
    CHECK((y.values() == x.values()).all());
  }
  SUBCASE("3x3 ones on a centred impulse") {
    Tensor x({1, 1, 7, 7});
    x.values()(3 * 7 + 3) = 1.0;
    const Tensor w({1, 1, 3, 3}, Eigen::ArrayXd::Ones(9));
    const Tensor y = conv2d(x, w, Tensor({1, 1, 1, 1}));
    for (Index r = 0; r < 7; ++r)
      for (Index c = 0; c < 7; ++c) {
        const bool inside = std::abs(r - 3) <= 1 && std::abs(c - 3) <= 1;
        CHECK(y.values()(r * 7 + c) == (inside ? 1.0 : 0.0));
      }
  }
  SUBCASE("output shape and bias") {
    const Tensor x = random_tensor({2, 3, 5, 4}, 2);
    const Tensor w = random_tensor({6, 3, 3, 3}, 3);
    Tensor b({1, 6, 1, 1});
    b.values().setConstant(0.5);
    const Tensor y = conv2d(x, w, b);
    CHECK(y.shape() == Shape{2, 6, 5, 4});
    const Tensor y0 = conv2d(x, w, Tensor({1, 6, 1, 1}));
    CHECK(((y.values() - y0.values() - 0.5).abs() < 1e-15).all());
  }
  SUBCASE("zero padding at the border, hand computed") {
    // 2x2 input, 3x3 kernel with a distinct weight per tap.
    const Tensor x({1, 1, 2, 2}, (Eigen::ArrayXd(4) << 1, 2, 3, 4).finished());
    const Tensor w({1, 1, 3, 3}, (Eigen::ArrayXd(9) << 1, 2, 3, 4, 5, 6, 7, 8, 9).finished());
    const Tensor y = conv2d(x, w, Tensor({1, 1, 1, 1}));
    // y(0,0) = 5*1 + 6*2 + 8*3 + 9*4
    CHECK(y.values()(0) == 77.0);
    // y(1,1) = 1*1 + 2*2 + 4*3 + 5*4
    CHECK(y.values()(3) == 37.0);
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(conv2d(random_tensor({1, 2, 4, 4}, 1), random_tensor({1, 3, 3, 3}, 2), Tensor({1, 1, 1, 1})),
                    ShapeError);
    CHECK_THROWS_AS(conv2d(random_tensor({1, 2, 4, 4}, 1), random_tensor({1, 2, 5, 5}, 2), Tensor({1, 1, 1, 1})),
                    ShapeError);
  }
}

TEST_CASE("elementwise primitives") {
  const Tensor x({1, 1, 1, 2}, (Eigen::ArrayXd(2) << -1, 2).finished());
  CHECK((relu(x).values() == (Eigen::ArrayXd(2) << 0, 2).finished()).all());
  const Tensor pos = random_tensor({1, 2, 3, 3}, 4, 0.0, 1.0);
  CHECK((relu(pos).values() == pos.values()).all());

  const Tensor a = random_tensor({1, 2, 3, 3}, 5), b = random_tensor({1, 2, 3, 3}, 6);
  CHECK((add(a, Tensor(a.shape())).values() == a.values()).all());
  CHECK((add(a, b).values() == add(b, a).values()).all());
  CHECK_THROWS_AS(add(a, random_tensor({1, 1, 3, 3}, 7)), ShapeError);

  const Tensor zero({1, 1, 1, 2});
  const Tensor p({1, 1, 1, 2}, (Eigen::ArrayXd(2) << 1, -1).finished());
  CHECK(l1_loss(p, zero).item() == 1.0);
  CHECK(l1_loss(a, a).item() == 0.0);
  CHECK_THROWS_AS(l1_loss(a, zero), ShapeError);
}

TEST_CASE("concat_channels") {
  const Tensor a = random_tensor({2, 2, 3, 4}, 1), b = random_tensor({2, 3, 3, 4}, 2);
  const std::array<Tensor, 1> one{a};
  CHECK((concat_channels(one).values() == a.values()).all());
  const std::array<Tensor, 2> two{a, b};
  const Tensor c = concat_channels(two);
  CHECK(c.shape() == Shape{2, 5, 3, 4});
  // Item 1, channel 2 of the result is item 1, channel 0 of b.
  CHECK((c.item_matrix(1).row(2).array() == b.item_matrix(1).row(0).array()).all());
  const std::array<Tensor, 2> bad{a, random_tensor({2, 1, 3, 5}, 3)};
  CHECK_THROWS_AS(concat_channels(bad), ShapeError);
}

TEST_CASE("gradient check of the checker itself") {
  const Tensor x = random_tensor({1, 1, 2, 3}, 8);
  SUBCASE("linear function is exact") {
    // mean(x + 2) has gradient 1/6 everywhere.
    const auto r = finite_difference_check([](const Tensor& t, Tape* tape) { return linear_loss(t, tape); }, x);
    CHECK(r.max_rel_error < 1e-8);
    CHECK(r.analytic == doctest::Approx(1.0 / 6.0));
  }
  SUBCASE("fan-out through two uses of one tensor") {
    // l1(x + x, -4) = mean(2x + 4).
    const auto f = [](const Tensor& t, Tape* tape) {
      const Tensor target(t.shape(), Eigen::ArrayXd::Constant(t.size(), -4.0));
      return l1_loss(add(t, t, tape), target, tape);
    };
    const auto r = finite_difference_check(f, x);
    CHECK(r.max_rel_error < 1e-8);
    CHECK(r.analytic == doctest::Approx(2.0 / 6.0));
  }
  SUBCASE("quadratic") {
    // A 1x1 conv of a scalar with itself is t * t; l1 against -1 gives t^2 + 1.
    const auto f = [](const Tensor& t, Tape* tape) {
      const Tensor target(t.shape(), Eigen::ArrayXd::Constant(1, -1.0));
      return l1_loss(conv2d(t, t, Tensor({1, 1, 1, 1}), tape), target, tape);
    };
    const Tensor s({1, 1, 1, 1}, Eigen::ArrayXd::Constant(1, 0.7));
    const auto r = finite_difference_check(f, s);
    CHECK(r.max_rel_error < 1e-8);
    CHECK(r.analytic == doctest::Approx(1.4));
  }
  SUBCASE("worst coordinate is reported") {
    // A deliberately wrong backward on coordinate 4.
    const auto f = [](const Tensor& t, Tape* tape) {
      Tensor out = Tensor::scalar(t.values().sum());
      if (tape) {
        const std::array<Tensor, 1> in{t};
        tape->record(out, in, [t, out]() {
          Eigen::ArrayXd& g = Tape::grad_of(t);
          g += Tape::grad_of(out)(0);
          g(4) += 1.0;
        });
      }
      return out;
    };
    const auto r = finite_difference_check(f, x);
    CHECK(r.worst_index == 4);
    CHECK(r.max_rel_error == doctest::Approx(0.5));
  }
}

TEST_CASE("primitive gradients match finite differences") {
  SUBCASE("conv2d input, weight and bias, k = 3 and k = 1") {
    for (Index k : {1, 3}) {
      const Tensor x = random_tensor({2, 3, 4, 5}, 10);
      const Tensor w = random_tensor({2, 3, k, k}, 11);
      const Tensor b = random_tensor({1, 2, 1, 1}, 12);
      const Tensor target = testing::offset_target(conv2d(x, w, b), 13, 1e-3, 2e-3);
      const auto via_x = [&](const Tensor& t, Tape* tape) { return l1_loss(conv2d(t, w, b, tape), target, tape); };
      const auto via_w = [&](const Tensor& t, Tape* tape) { return l1_loss(conv2d(x, t, b, tape), target, tape); };
      const auto via_b = [&](const Tensor& t, Tape* tape) { return l1_loss(conv2d(x, w, t, tape), target, tape); };
      CHECK(finite_difference_check(via_x, x).max_rel_error < 1e-6);
      CHECK(finite_difference_check(via_w, w).max_rel_error < 1e-6);
      CHECK(finite_difference_check(via_b, b).max_rel_error < 1e-6);
    }
  }
  SUBCASE("relu away from the kink") {
    const Tensor x = away_from_zero({1, 2, 3, 3}, 14);
    const auto f = [](const Tensor& t, Tape* tape) { return linear_loss(relu(t, tape), tape); };
    const auto r = finite_difference_check(f, x);
    CHECK(r.max_rel_error < 1e-6);
    Tape tape;
    Tensor leaf = x.clone(true);
    tape.backward(f(leaf, &tape));
    const Eigen::ArrayXd g = leaf.grad() * static_cast<double>(x.size());
    for (Index i = 0; i < x.size(); ++i) CHECK(g(i) == doctest::Approx(x.values()(i) > 0 ? 1.0 : 0.0));
  }
  SUBCASE("l1 gradient is sign / count") {
    const Tensor x = away_from_zero({1, 1, 3, 4}, 15);
    const Tensor zero(x.shape());
    const auto f = [&](const Tensor& t, Tape* tape) { return l1_loss(t, zero, tape); };
    CHECK(finite_difference_check(f, x).max_rel_error < 1e-6);
    Tape tape;
    Tensor leaf = x.clone(true);
    tape.backward(f(leaf, &tape));
    for (Index i = 0; i < x.size(); ++i)
      CHECK(leaf.grad()(i) == (x.values()(i) > 0 ? 1.0 : -1.0) / 12.0);
  }
  SUBCASE("concat splits the gradient in order") {
    const Tensor a = random_tensor({1, 2, 3, 3}, 16), b = random_tensor({1, 1, 3, 3}, 17);
    const Tensor target = random_tensor({1, 3, 3, 3}, 18, 10.0, 20.0);
    // The probe conv makes each channel's gradient distinct.
    const Tensor w = random_tensor({3, 3, 1, 1}, 19);
    const Tensor bias({1, 3, 1, 1});
    const auto via_a = [&](const Tensor& t, Tape* tape) {
      const std::array<Tensor, 2> xs{t, b};
      return l1_loss(conv2d(concat_channels(xs, tape), w, bias, tape), target, tape);
    };
    const auto via_b = [&](const Tensor& t, Tape* tape) {
      const std::array<Tensor, 2> xs{a, t};
      return l1_loss(conv2d(concat_channels(xs, tape), w, bias, tape), target, tape);
    };
    CHECK(finite_difference_check(via_a, a).max_rel_error < 1e-6);
    CHECK(finite_difference_check(via_b, b).max_rel_error < 1e-6);
  }
  SUBCASE("add passes the upstream gradient to both inputs") {
    const Tensor x = random_tensor({1, 2, 2, 2}, 20), y = random_tensor({1, 2, 2, 2}, 21);
    const Tensor target = random_tensor({1, 2, 2, 2}, 22, 10.0, 20.0);
    const auto via_x = [&](const Tensor& t, Tape* tape) { return l1_loss(add(t, y, tape), target, tape); };
    const auto via_y = [&](const Tensor& t, Tape* tape) { return l1_loss(add(x, t, tape), target, tape); };
    CHECK(finite_difference_check(via_x, x).max_rel_error < 1e-6);
    CHECK(finite_difference_check(via_y, y).max_rel_error < 1e-6);
  }
  SUBCASE("composite conv, relu, loss on a 1x1x4x4 input") {
    const Tensor x = random_tensor({1, 1, 4, 4}, 23);
    const Tensor w = random_tensor({2, 1, 3, 3}, 24);
    const Tensor b = random_tensor({1, 2, 1, 1}, 25);
    const Tensor target = random_tensor({1, 2, 4, 4}, 26);
    const auto f = [&](const Tensor& t, Tape* tape) { return l1_loss(relu(conv2d(t, w, b, tape), tape), target, tape); };
    CHECK(finite_difference_check(f, x).max_rel_error < 1e-6);
  }
}

TEST_CASE("backward contract") {
  SUBCASE("root must be on the tape") {
    Tape tape;
    const Tensor x = random_tensor({1, 1, 2, 2}, 1);
    CHECK_THROWS_AS(tape.backward(l1_loss(x, x)), UsageError);
    Tensor leaf = x.clone(true);
    const Tensor out = add(leaf, leaf, &tape);
    CHECK_THROWS_AS(tape.backward(out), UsageError);
  }
  SUBCASE("zero loss at offset points") {
    const Tensor x = away_from_zero({1, 1, 3, 3}, 2);
    Tape tape;
    Tensor leaf = x.clone(true);
    tape.backward(l1_loss(add(leaf, Tensor(x.shape()), &tape), x.clone(), &tape));
    // pred == target: the subgradient at 0 is 0.
    CHECK((leaf.grad() == 0.0).all());
  }
  SUBCASE("identical tapes give bit-identical gradients") {
    const Tensor x = random_tensor({1, 2, 5, 5}, 3);
    const Tensor w = random_tensor({3, 2, 3, 3}, 4);
    const Tensor b = random_tensor({1, 3, 1, 1}, 5);
    const Tensor target = random_tensor({1, 3, 5, 5}, 6);
    Eigen::ArrayXd first;
    for (int run = 0; run < 2; ++run) {
      Tape tape;
      Tensor wl = w.clone(true);
      tape.backward(l1_loss(relu(conv2d(x, wl, b, &tape), &tape), target, &tape));
      if (run == 0) first = wl.grad();
      else CHECK((wl.grad() == first).all());
    }
  }
}

TEST_CASE("adam") {
  SUBCASE("first step from zero with unit gradient") {
    std::array<Eigen::ArrayXd, 1> p{Eigen::ArrayXd::Zero(1)};
    const std::array<Eigen::ArrayXd, 1> g{Eigen::ArrayXd::Ones(1)};
    AdamState state;
    adam_step(p, g, state);
    CHECK(state.step == 1);
    // m_hat = v_hat = 1, so the step is lr / (1 + eps).
    CHECK(p[0](0) == doctest::Approx(-1e-4 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(p[0](0) == doctest::Approx(-9.99999e-5).epsilon(1e-6));
  }
  SUBCASE("zero gradient leaves parameters and moments alone") {
    std::array<Eigen::ArrayXd, 1> p{Eigen::ArrayXd::Constant(3, 0.3)};
    const std::array<Eigen::ArrayXd, 1> g{Eigen::ArrayXd::Zero(3)};
    AdamState state;
    adam_step(p, g, state);
    CHECK((p[0] == 0.3).all());
    CHECK((state.m[0] == 0.0).all());
    CHECK((state.v[0] == 0.0).all());
  }
  SUBCASE("constant gradient moves monotonically against its sign") {
    std::array<Eigen::ArrayXd, 1> p{Eigen::ArrayXd::Zero(2)};
    const std::array<Eigen::ArrayXd, 1> g{(Eigen::ArrayXd(2) << 0.5, -2.0).finished()};
    AdamState state;
    adam_step(p, g, state);
    const Eigen::ArrayXd after1 = p[0];
    adam_step(p, g, state);
    CHECK(after1(0) < 0.0);
    CHECK(p[0](0) < after1(0));
    CHECK(after1(1) > 0.0);
    CHECK(p[0](1) > after1(1));
  }
  SUBCASE("lr = 0 is the identity") {
    std::array<Eigen::ArrayXd, 1> p{Eigen::ArrayXd::LinSpaced(4, -1, 1)};
    const Eigen::ArrayXd before = p[0];
    const std::array<Eigen::ArrayXd, 1> g{Eigen::ArrayXd::Constant(4, 3.0)};
    AdamState state;
    AdamConfig cfg;
    cfg.lr = 0.0;
    for (int i = 0; i < 3; ++i) adam_step(p, g, state, cfg);
    CHECK((p[0] == before).all());
  }
  SUBCASE("shape mismatch") {
    std::array<Eigen::ArrayXd, 1> p{Eigen::ArrayXd::Zero(2)};
    const std::array<Eigen::ArrayXd, 1> g{Eigen::ArrayXd::Zero(3)};
    AdamState state;
    CHECK_THROWS_AS(adam_step(p, g, state), ShapeError);
  }
}

}  // TEST_SUITE
