// Copyright 2026 The dlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "dlm/error.hpp"
#include "dlm/rng.hpp"
#include "dlm/tensor.hpp"
#include "gradient_suites.hpp"
#include "test_util.hpp"

using namespace dlm;
using dlm::testing::error_of;
using dlm::testing::grad_check;
using dlm::testing::grad_check_oracle;
using dlm::testing::is_marker;
using dlm::testing::random_tensor;
using dlm::testing::detail::mm;
using dlm::testing::detail::sum_of;
using dlm::testing::detail::Vec;
using dlm::testing::detail::Vecs;

namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor leaf(Shape s, std::vector<float> v, bool grad = true) {
  return Tensor::from_data(std::move(s), std::move(v), grad);
}

constexpr double kOpTol = 1e-4;
constexpr int kSeeds = 20;

}  // namespace

TEST_CASE("matmul examples") {
  Tape tape;
  const Tensor eye = leaf({2, 2}, {1, 0, 0, 1});
  const Tensor m = leaf({2, 2}, {1, 2, 3, 4});
  CHECK(values(matmul(tape, eye, m)) == std::vector<float>{1, 2, 3, 4});

  const Tensor r = matmul(tape, leaf({1, 2}, {1, 2}), leaf({2, 1}, {0, 0}));
  CHECK(r.shape() == Shape{1, 1});
  CHECK(r.at(0) == 0.0f);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  const auto msg = error_of(ErrorKind::kDimension,
                            [&] { matmul(tape, Tensor::zeros({2, 3}), Tensor::zeros({2, 3})); });
  REQUIRE_FALSE(is_marker(msg));
  CHECK(msg.find("[2x3]") != std::string::npos);
  CHECK(msg.find(" x ") != std::string::npos);
}

TEST_CASE("matmul gradient of sum matches finite differences") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed);
    Tensor a = random_tensor(rng, {3, 4});
    Tensor b = random_tensor(rng, {4, 2});
    const auto r = grad_check_oracle({a, b}, [&](Tape& t) { return sum(t, matmul(t, a, b)); },
                                     [](const Vecs& x) { return Vec{sum_of(mm(x[0], x[1], 3, 4, 2))}; });
    CHECK(r.max_forward_error <= 1e-6);
    CHECK_MESSAGE(r.max_grad_error <= kOpTol, r.worst);
  }
}

TEST_CASE("softmax examples") {
  Tape tape(false);
  const auto u = softmax(tape, leaf({3}, {0, 0, 0}, false));
  for (float v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-7));

  const auto big = softmax(tape, leaf({2}, {1000, 0}, false));
  CHECK(std::isfinite(big.at(0)));
  CHECK(std::isfinite(big.at(1)));
  CHECK(big.at(0) == doctest::Approx(1.0));
  CHECK(big.at(1) == doctest::Approx(0.0));
}

TEST_CASE("softmax matches a 113-bit oracle") {
  using Quad = boost::multiprecision::cpp_bin_float_quad;
  const std::vector<float> x = {1, 2, 3};
  Quad z = 0;
  std::vector<Quad> e;
  for (float v : x) {
    e.push_back(boost::multiprecision::exp(Quad(v)));
    z += e.back();
  }
  Tape tape(false);
  const auto s = softmax(tape, leaf({3}, x, false));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double oracle = static_cast<double>(e[i] / z);
    CHECK(std::abs(s.at(i) - oracle) <= 1e-6);
  }
}

TEST_CASE("softmax rejects non-finite input") {
  Tape tape;
  CHECK_FALSE(is_marker(error_of(ErrorKind::kNumericDomain,
                                 [&] { softmax(tape, leaf({2}, {0.0f, NAN}, false)); })));
  CHECK_FALSE(is_marker(error_of(ErrorKind::kNumericDomain,
                                 [&] { softmax(tape, leaf({2}, {INFINITY, 0.0f}, false)); })));
}

TEST_CASE("softmax sums to one and is permutation-equivariant") {
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(12);
    Tensor x = random_tensor(rng, {n}, -20.0, 20.0, false);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<float> px(n);
    for (std::size_t i = 0; i < n; ++i) px[i] = x.at(perm[i]);

    Tape tape(false);
    const auto s = softmax(tape, x);
    const auto ps = softmax(tape, leaf({n}, px, false));
    double total = 0.0;
    for (float v : s.data()) {
      CHECK(v >= 0.0f);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-6);
    for (std::size_t i = 0; i < n; ++i) CHECK(ps.at(i) == s.at(perm[i]));
  }
}

TEST_CASE("elementwise examples") {
  Tape tape(false);
  CHECK(elementwise(tape, Pointwise::kTanh, leaf({1}, {0}, false)).at(0) == 0.0f);
  CHECK(elementwise(tape, Pointwise::kSigmoid, leaf({1}, {0}, false)).at(0) == 0.5f);
  CHECK(values(elementwise(tape, Pointwise::kAdd, leaf({2}, {1, 2}, false), leaf({2}, {3, 4}, false))) ==
        std::vector<float>{4, 6});
  CHECK(values(elementwise(tape, Pointwise::kMul, Tensor::scalar(2.0f), leaf({2}, {3, 4}, false))) ==
        std::vector<float>{6, 8});
  CHECK(elementwise(tape, Pointwise::kLog, leaf({1}, {1}, false)).at(0) == 0.0f);
}

TEST_CASE("elementwise errors") {
  Tape tape;
  CHECK_FALSE(is_marker(
      error_of(ErrorKind::kNumericDomain, [&] { elementwise(tape, Pointwise::kLog, leaf({2}, {1, 0}, false)); })));
  CHECK_FALSE(is_marker(
      error_of(ErrorKind::kNumericDomain, [&] { log(tape, leaf({1}, {-1}, false)); })));
  CHECK_FALSE(is_marker(error_of(ErrorKind::kDimension, [&] {
    add(tape, leaf({2}, {1, 2}, false), leaf({3}, {1, 2, 3}, false));
  })));
}

TEST_CASE("sigmoid derivative at 1 matches finite differences") {
  Tensor x = leaf({1}, {1.0f});
  const auto r = grad_check({x}, [&](Tape& t) { return sigmoid(t, x); });
  CHECK_MESSAGE(r.max_error <= kOpTol, r.worst);
  // Analytic value as a second witness.
  const double s = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(x.grad()[0] == doctest::Approx(s * (1 - s)).epsilon(1e-6));
}

TEST_CASE("conv1d_same examples") {
  Tape tape(false);
  // Impulse response: averaging filter centred on the delta.
  const Tensor delta = leaf({5}, {0, 0, 1, 0, 0}, false);
  const Tensor avg = leaf({1, 3}, {1.0f / 3, 1.0f / 3, 1.0f / 3}, false);
  const auto y = conv1d_same(tape, delta, avg);
  CHECK(y.shape() == Shape{5, 1});
  const std::vector<float> expect = {0, 1.0f / 3, 1.0f / 3, 1.0f / 3, 0};
  CHECK(values(y) == expect);

  // An asymmetric filter shows the reversal.
  const auto z = conv1d_same(tape, delta, leaf({1, 3}, {1, 2, 3}, false));
  CHECK(values(z) == std::vector<float>{0, 3, 2, 1, 0});

  const auto zeros = conv1d_same(tape, Tensor::zeros({6}), leaf({2, 3}, {1, 2, 3, 4, 5, 6}, false));
  for (float v : zeros.data()) CHECK(v == 0.0f);

  CHECK_FALSE(is_marker(error_of(ErrorKind::kConfig, [&] {
    conv1d_same(tape, Tensor::zeros({6}), Tensor::zeros({1, 4}));
  })));
}

TEST_CASE("conv1d_same matches a sliding-window oracle") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(100 + seed);
    const std::size_t T = 7, K = 2, w = 3;
    Tensor s = random_tensor(rng, {T}, -2, 2, false);
    Tensor f = random_tensor(rng, {K, w}, -2, 2, false);
    Tape tape(false);
    const auto y = conv1d_same(tape, s, f);
    REQUIRE(y.shape() == Shape{T, K});
    const long half = static_cast<long>(w / 2);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < K; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
          const long src = static_cast<long>(t) - half + static_cast<long>(j);
          if (src < 0 || src >= static_cast<long>(T)) continue;
          acc += static_cast<double>(f.at(k, j)) * s.at(static_cast<std::size_t>(src));
        }
        CHECK(std::abs(y.at(t, k) - acc) <= 1e-6);
      }
    }
  }
}

TEST_CASE("backward examples") {
  Tensor x = leaf({3}, {1, 2, 3});
  {
    Tape tape;
    tape.backward(sum(tape, x));
  }
  CHECK(values(Tensor::from_data({3}, {x.grad().begin(), x.grad().end()})) == std::vector<float>{1, 1, 1});

  Tensor y = leaf({2}, {1, 2});
  {
    Tape tape;
    tape.backward(sum(tape, mul(tape, y, y)));
  }
  CHECK(y.grad()[0] == 2.0f);
  CHECK(y.grad()[1] == 4.0f);

  Tape tape;
  const Tensor v = mul(tape, x, x);
  CHECK_FALSE(is_marker(error_of(ErrorKind::kContract, [&] { tape.backward(v); })));
}

TEST_CASE("gradients accumulate across branches") {
  Rng rng(3);
  Tensor x = random_tensor(rng, {4});
  Tensor a = random_tensor(rng, {4}, -2, 2, false);
  Tensor b = random_tensor(rng, {4}, -2, 2, false);
  {
    Tape tape;
    tape.backward(add(tape, sum(tape, mul(tape, x, a)), sum(tape, tanh(tape, mul(tape, x, b)))));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const double th = std::tanh(static_cast<double>(x.at(i)) * b.at(i));
    const double expect = a.at(i) + b.at(i) * (1 - th * th);
    CHECK(x.grad()[i] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("leaf and tape bookkeeping") {
  Tensor x = leaf({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(x.is_leaf());
  CHECK_FALSE(x.node_id().has_value());
  CHECK(x.grad().size() == x.numel());
  CHECK(shape_numel(x.shape()) == x.data().size());

  Tape tape;
  const auto y = tanh(tape, x);
  CHECK_FALSE(y.is_leaf());
  CHECK(tape.size() == 1);

  Tape inference(false);
  const auto z = tanh(inference, x);
  CHECK(z.is_leaf());
  CHECK_FALSE(z.requires_grad());
  CHECK(inference.size() == 0);
  CHECK(values(y) == values(z));

  CHECK_FALSE(is_marker(error_of(ErrorKind::kDimension, [] { Tensor::from_data({2, 2}, {1, 2, 3}); })));
}

TEST_CASE("same seed gives bitwise identical tensors") {
  Rng r1(42), r2(42);
  const auto a = random_tensor(r1, {5, 5});
  const auto b = random_tensor(r2, {5, 5});
  CHECK(values(a) == values(b));
  Tape t1(false), t2(false);
  CHECK(values(softmax(t1, row(t1, a, 2))) == values(softmax(t2, row(t2, b, 2))));
}

TEST_CASE("per-op finite-difference suite") {
  for (int seed = 0; seed < kSeeds; ++seed) {
    CAPTURE(seed);
    for (const auto& r : dlm::testing::op_gradient_checks(seed)) {
      CHECK_MESSAGE(r.forward_error <= 1e-5, (r.name + " forward"));
      CHECK_MESSAGE(r.error <= kOpTol, (r.name + ": " + r.worst));
    }
  }
}
