// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "pedpipe/errors.hpp"
#include "pedpipe/ops.hpp"
#include "pedpipe/optim.hpp"
#include "support/gradient_cases.hpp"
#include "support/oracles.hpp"

using namespace pedpipe;
using pedpipe::testing::random_tensor;

TEST_SUITE("core_math") {
  TEST_CASE("every primitive matches central differences") {
    for (const auto& op : pedpipe::testing::gradient_ops()) {
      if (op.group != pedpipe::testing::GradientGroup::primitive) continue;
      const double worst = pedpipe::testing::worst_gradient_error(op, 50, 1234);
      INFO(op.name << " worst relative error " << worst);
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("scalar reference values") {
    const Tensor s = softmax(Tensor::from({3}, {1, 2, 3}));
    CHECK(s.data()[0] == doctest::Approx(0.09003057).epsilon(1e-7));
    CHECK(s.data()[1] == doctest::Approx(0.24472847).epsilon(1e-7));
    CHECK(s.data()[2] == doctest::Approx(0.66524096).epsilon(1e-7));
    CHECK(log_sigmoid(Tensor::scalar(-5)).item() == doctest::Approx(-5.0067153).epsilon(1e-7));
    CHECK(softplus(Tensor::scalar(1)).item() == doctest::Approx(1.3132617).epsilon(1e-7));
    CHECK(gelu(Tensor::scalar(1)).item() == doctest::Approx(0.8413447).epsilon(1e-7));
  }

  TEST_CASE("extreme inputs stay finite") {
    CHECK(log_sigmoid(Tensor::scalar(-1000)).item() == doctest::Approx(-1000));
    CHECK(log_sigmoid(Tensor::scalar(1000)).item() == 0.0);
    CHECK(softplus(Tensor::scalar(1000)).item() == doctest::Approx(1000));
    CHECK(std::isfinite(stable_sigmoid(-1e300)));
    const Tensor s = softmax(Tensor::from({3}, {1000, 0, -1000}));
    CHECK(s.data()[0] == doctest::Approx(1.0));
    CHECK(std::isfinite(s.data()[2]));
  }

  TEST_CASE("masked scores get zero attention weight") {
    Rng rng(7);
    const Tensor p = softmax(mask_future(random_tensor({4, 4}, rng, -5, 5, false)), -1);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j) CHECK(p.at(i, j) == 0.0);
  }

  TEST_CASE("shape mismatches name both shapes") {
    const Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({3, 2});
    CHECK_THROWS_AS(add(a, b), DimensionError);
    CHECK_THROWS_AS(matmul(a, a), DimensionError);
    try {
      add(a, b);
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
      CHECK(msg.find("[3x2]") != std::string::npos);
    }
    CHECK_THROWS_AS(embedding_lookup(Tensor::zeros({4, 2}), TokenSeq{4}), IndexError);
  }

  TEST_CASE("a tensor used twice accumulates both gradient paths") {
    Tensor x = Tensor::from({2}, {1.5, -2.0}, true);
    sum(mul(x, x)).backward();
    CHECK(x.grad()[0] == doctest::Approx(3.0));
    CHECK(x.grad()[1] == doctest::Approx(-4.0));
  }

  TEST_CASE("no-grad mode records nothing") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    NoGradGuard guard;
    const Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.is_leaf());
  }

  TEST_CASE("rng streams are reproducible and independent") {
    Rng a(42), b(42), c(42, 1);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng d(42);
    CHECK(d.next_u64() != c.next_u64());
    Rng e(9);
    for (int i = 0; i < 1000; ++i) {
      const double u = e.uniform();
      CHECK((u >= 0.0 && u < 1.0));
      CHECK(e.below(7) < 7);
    }
    const auto pick = e.sample_without_replacement(20, 10);
    CHECK(std::set<std::size_t>(pick.begin(), pick.end()).size() == 10);
    CHECK(Rng(5).fork(3).next_u64() == Rng(5).fork(3).next_u64());
  }

  TEST_CASE("adamw step matches the closed form") {
    Tensor p = Tensor::from({2}, {0.5, -1.0}, true);
    sum(mul(p, Tensor::from({2}, {2.0, -3.0}))).backward();
    AdamWOptions opt{0.1, 0.9, 0.999, 1e-8, 0.01};
    AdamW adam({{"p", p}}, opt);
    adam.step();
    // First step: m_hat = g, v_hat = g^2, so the Adam update is lr * sign(g).
    const double e0 = 0.5 - 0.1 * 0.01 * 0.5 - 0.1 * 2.0 / (2.0 + 1e-8);
    const double e1 = -1.0 + 0.1 * 0.01 * 1.0 + 0.1 * 3.0 / (3.0 + 1e-8);
    CHECK(p.data()[0] == doctest::Approx(e0).epsilon(1e-12));
    CHECK(p.data()[1] == doctest::Approx(e1).epsilon(1e-12));
    CHECK(adam.state().step == 1);
  }

  TEST_CASE("adamw refuses non-finite gradients without touching anything") {
    Tensor good = Tensor::from({1}, {1.0}, true), bad = Tensor::from({1}, {1.0}, true);
    sum(good).backward();
    sum(mul(bad, Tensor::from({1}, {std::nan("")}))).backward();
    AdamW adam({{"good", good}, {"bad", bad}}, {});
    CHECK_THROWS_AS(adam.step(), NonFiniteError);
    CHECK(good.data()[0] == 1.0);
    CHECK(adam.state().step == 0);
  }
}
