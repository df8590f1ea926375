// Copyright 2026 The Veridex Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "veridex/autodiff.hpp"
#include "veridex/errors.hpp"
#include "veridex/random.hpp"

using namespace veridex;
using namespace veridex::ad;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool grad = false) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::matrix(r, c, std::move(v), grad);
}

Tensor random_vector(std::size_t n, Rng& rng, bool grad = false) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::vector(std::move(v), grad);
}

}  // namespace

TEST_CASE("tensor construction checks shapes") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({0}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor({1, 1, 1}, {1}), DimensionError);
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6.0);
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("matmul identity and scalar cases") {
  Tape tape;
  Var a = tape.input(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var out = matmul(a, tape.input(Tensor::identity(2)));
  CHECK(out.value() == Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var six = matmul(tape.input(Tensor::matrix(1, 1, {2})), tape.input(Tensor::matrix(1, 1, {3})));
  CHECK(six.value()[0] == 6.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(11);
  for (auto [m, k, n] : {std::tuple{3, 2, 4}, {16, 16, 16}, {5, 9, 1}, {1, 7, 3}}) {
    Tape tape;
    const Tensor a = random_matrix(m, k, rng), b = random_matrix(k, n, rng);
    const auto got = oracle::to_mat(matmul(tape.input(a), tape.input(b)).value());
    CHECK(oracle::max_abs_diff(got, oracle::matmul(oracle::to_mat(a), oracle::to_mat(b))) <= 1e-12);
  }
}

TEST_CASE("matmul rejects mismatched inner extents naming both shapes") {
  Tape tape;
  try {
    matmul(tape.input(Tensor::zeros({2, 3})), tape.input(Tensor::zeros({2, 2})));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("softmax examples") {
  Tape tape;
  auto half = softmax(tape.input(Tensor::vector({0, 0}))).value();
  CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-12));
  auto big = softmax(tape.input(Tensor::vector({1000, 0}))).value();
  CHECK(std::abs(big[0] - 1.0) <= 1e-9);
  CHECK(std::abs(big[1]) <= 1e-9);
  CHECK(std::isfinite(big[1]));

  Rng rng(3);
  const Tensor x = random_vector(7, rng);
  auto got = oracle::to_vec(softmax(tape.input(x)).value());
  CHECK(oracle::max_abs_diff(got, oracle::softmax(oracle::to_vec(x))) <= 1e-15);
}

TEST_CASE("softmax rows sum to one for large magnitudes") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(12);
    for (auto& x : v) x = rng.uniform(-1e4, 1e4);
    Tape tape;
    Var y = softmax(tape.input(Tensor::matrix(3, 4, v)), 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(std::isfinite(y.value().at(r, c)));
        s += y.value().at(r, c);
      }
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("elementwise activations") {
  Tape tape;
  CHECK(relu(tape.input(Tensor::vector({-1, 0, 2}))).value() == Tensor::vector({0, 0, 2}));
  CHECK(sigmoid(tape.input(Tensor::vector({0}))).value()[0] == 0.5);

  Tensor x = Tensor::vector({0.0, 1.0, -2.0}, true);
  Tape t2;
  t2.backward(sum(relu(t2.parameter(x))));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("tanh gradient matches finite differences") {
  Rng rng(17);
  Tensor x = random_vector(6, rng, true);
  Tensor w = random_vector(6, rng);
  auto r = oracle::check_gradients({&x}, [&](Tape& t) { return sum(mul(tanh(t.parameter(x)), t.input(w))); });
  CHECK(r.worst < 1e-6);
}

TEST_CASE("concat examples and backward split") {
  Tape tape;
  CHECK(concat(tape.input(Tensor::vector({1, 2})), tape.input(Tensor::vector({3}))).value() ==
        Tensor::vector({1, 2, 3}));
  CHECK_THROWS_AS(concat(tape.input(Tensor::zeros({2, 2})), tape.input(Tensor::zeros({3, 3})), 1), DimensionError);
  Tensor a = Tensor::vector({1, 2, 3}, true), b = Tensor::vector({4, 5, 6}, true);
  Tape t2;
  Var c = concat(t2.parameter(a), t2.parameter(b));
  CHECK(c.size() == 6);
  t2.backward(sum(c));
  for (double g : a.grad()) CHECK(g == 1.0);
  for (double g : b.grad()) CHECK(g == 1.0);
}

TEST_CASE("backward basics") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor unused = Tensor::vector({1, 2}, true);
  Tape tape;
  Var xv = tape.parameter(x);
  tape.parameter(unused);
  tape.backward(mul(xv, xv));
  CHECK(x.grad()[0] == 6.0);
  REQUIRE(unused.has_grad());
  CHECK(unused.grad()[0] == 0.0);
  CHECK(unused.grad()[1] == 0.0);

  Tape t2;
  CHECK_THROWS_AS(t2.backward(t2.input(Tensor::vector({1, 2}))), DimensionError);
}

TEST_CASE("gradients of every primitive op match finite differences") {
  Rng rng(23);
  Tensor a = random_matrix(3, 4, rng, true);
  Tensor b = random_matrix(4, 2, rng, true);
  Tensor v = random_vector(4, rng, true);
  Tensor u = random_vector(3, rng, true);
  Tensor mask = Tensor::matrix(3, 3, {1, 0, 1, 1, 1, 0, 0, 1, 1});
  auto r = oracle::check_gradients({&a, &b, &v, &u}, [&](Tape& t) {
    Var A = t.parameter(a), B = t.parameter(b), V = t.parameter(v), U = t.parameter(u);
    Var ab = sigmoid(matmul(A, B));                      // 3 x 2
    Var av = tanh(matmul(A, V));                         // 3
    Var ua = matmul(U, A);                               // 4
    Var sq = matmul(A, transpose(A));                    // 3 x 3
    Var att = masked_softmax_rows(sq, mask);
    Var cat = concat(ab, ab, 1);                         // 3 x 4
    Var prod = mul(cat, A);
    Var total = add(sum(prod), sum(mul(av, U)));
    total = add(total, sum(scale(sub(ua, V), 0.5)));
    total = add(total, sum(mean_rows(att)));
    total = add(total, sum(mul(sum_rows(att), av)));
    total = add(total, sum(gather(softmax(ua), std::vector<std::size_t>{2, 0})));
    total = add(total, sum(slice(row(A, 1), 1, 2)));
    std::vector<Var> rows{av, U};
    total = add(total, sum(mul(stack_rows(rows), stack_rows(rows))));
    total = add(total, cross_entropy(ua, 1));
    total = add(total, sum(softmax(ab, 0)));
    total = add(total, sum(mul(topk_renormalize(softmax(ua), 2), V)));
    return total;
  });
  CHECK(r.worst < 1e-6);
}

TEST_CASE("cross entropy equals negative log softmax") {
  Tape tape;
  Var l = cross_entropy(tape.input(Tensor::vector({2.0, -1.0, 0.5})), 0);
  const auto p = oracle::softmax({2.0, -1.0, 0.5});
  CHECK(l.value()[0] == doctest::Approx(-std::log(p[0])).epsilon(1e-12));
  CHECK_THROWS_AS(cross_entropy(tape.input(Tensor::vector({1, 2})), 2), DimensionError);
}

TEST_CASE("topk indices break ties toward the lower index") {
  const std::vector<double> v{0.25, 0.25, 0.25, 0.25};
  CHECK(topk_indices(v, 2) == std::vector<std::size_t>{0, 1});
  const std::vector<double> w{0.1, 0.5, 0.5, 0.3};
  CHECK(topk_indices(w, 3) == std::vector<std::size_t>{1, 2, 3});
}

TEST_CASE("finite checks detect NaN when enabled") {
  Tape tape(true);
  Var x = tape.input(Tensor::vector({-1.0}));
  CHECK_THROWS_AS(elementwise(scale(x, std::numeric_limits<double>::infinity()), Activation::kTanh), NumericError);
}

TEST_CASE("backward accumulates into parameter gradients") {
  Tensor x = Tensor::scalar(2.0, true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    Var v = tape.parameter(x);
    tape.backward(mul(v, v));
  }
  CHECK(x.grad()[0] == 8.0);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  Tensor w = Tensor::vector({1.0, -2.0}, true);
  w.zero_grad();
  AdamState state(AdamOptions{.learning_rate = 0.1});
  std::vector<Tensor*> ps{&w};
  for (int i = 0; i < 5; ++i) adam_step(ps, state);
  CHECK(w == Tensor::vector({1.0, -2.0}));
  CHECK(state.steps() == 5);
}

TEST_CASE("adam minimizes w^2") {
  Tensor w = Tensor::scalar(1.0, true);
  AdamState state(AdamOptions{.learning_rate = 0.1});
  std::vector<Tensor*> ps{&w};
  for (int i = 0; i < 200; ++i) {
    w.zero_grad();
    Tape tape;
    Var x = tape.parameter(w);
    tape.backward(mul(x, x));
    adam_step(ps, state);
  }
  CHECK(std::abs(w[0]) < 1e-2);
}

TEST_CASE("adam first step moves by about lr against the gradient") {
  Tensor w = Tensor::vector({0.0, 0.0}, true);
  w.zero_grad();
  const std::vector<double> g{3.0, -0.02};
  w.accumulate_grad(g);
  AdamState state(AdamOptions{.learning_rate = 0.01});
  std::vector<Tensor*> ps{&w};
  adam_step(ps, state);
  CHECK(w[0] == doctest::Approx(-0.01).epsilon(1e-5));
  CHECK(w[1] == doctest::Approx(0.01).epsilon(1e-4));
  REQUIRE(state.first_moments().size() == 1);
  CHECK(state.first_moments()[0].size() == 2);
}

TEST_CASE("adam rejects shape changes and missing gradients") {
  Tensor w = Tensor::vector({1.0}, true);
  AdamState state;
  std::vector<Tensor*> ps{&w};
  CHECK_THROWS(adam_step(ps, state));
  w.zero_grad();
  adam_step(ps, state);
  Tensor other = Tensor::vector({1.0, 2.0}, true);
  other.zero_grad();
  std::vector<Tensor*> ps2{&other};
  CHECK_THROWS_AS(adam_step(ps2, state), DimensionError);
}
