#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "matgraph/optim.hpp"
#include "matgraph/tensor.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace matgraph;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using testing::gradient_error;
using testing::project;
using testing::random_tensor;


TEST_CASE("finite-difference gradients for every primitive") {
  const auto start = std::chrono::steady_clock::now();
  for (const auto& c : testing::primitive_cases()) {
    CAPTURE(c.name);
    CHECK(testing::worst_error(c) < testing::kGradTolerance);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60.0);
}

TEST_CASE("primitive values") {
  Tape<float> t;
  Var z = t.softmax_rows(t.constant(Tensor<float>(1, 3, 0.0f)));
  for (float p : t.value(z).data) CHECK(p == doctest::Approx(1.0 / 3.0));
  Var l = t.leaky_relu(t.constant(Tensor<float>(1, 1, -1.0f)), 0.2f);
  CHECK(t.value(l).data[0] == doctest::Approx(-0.2));
  Var r = t.relu(t.constant(Tensor<float>(1, 2, {-1.0f, 2.0f})));
  CHECK(t.value(r).data == std::vector<float>{0.0f, 2.0f});
}

TEST_CASE("shape errors name the primitive") {
  Tape<float> t;
  Var a = t.constant(Tensor<float>(2, 3));
  Var b = t.constant(Tensor<float>(2, 3));
  try {
    t.matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).rfind("matmul", 0) == 0);
  }
  CHECK_THROWS_WITH_AS(t.add(a, t.constant(Tensor<float>(3, 2))), doctest::Contains("add"), ShapeError);
  CHECK_THROWS_WITH_AS(t.concat_cols({a, t.constant(Tensor<float>(1, 1))}), doctest::Contains("concat_cols"), ShapeError);
  CHECK_THROWS_WITH_AS(t.index_select_rows(a, {5}), doctest::Contains("index_select_rows"), ShapeError);
  CHECK_THROWS_WITH_AS(t.scatter_add_rows(a, {0}, 2), doctest::Contains("scatter_add_rows"), ShapeError);
  CHECK_THROWS_WITH_AS(t.lstm_pointwise(a, b), doctest::Contains("lstm_cell_step"), ShapeError);
  CHECK_THROWS_AS(Tensor<float>(2, 2, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST_CASE("softmax rows are normalised and positive") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    Tape<float> t;
    auto x = random_tensor(1 + rng() % 8, 1 + rng() % 25, rng, 1 + trial).cast<float>();
    const auto& p = t.value(t.softmax_rows(t.constant(x)));
    for (std::size_t r = 0; r < p.rows; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < p.cols; ++c) {
        CHECK(std::max(p.at(r, c), Tape<float>::kProbFloor) > 0.0f);
        s += p.at(r, c);
      }
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("weighted cross-entropy reductions") {
  Tape<double> t;
  Var half = t.constant(Tensor<double>(1, 2, {0.5, 0.5}));
  CHECK(t.value(t.weighted_cross_entropy(half, {0}, {2.0, 1.0}, {1})).data[0] == doctest::Approx(0.6931).epsilon(1e-4));

  std::mt19937_64 rng(2);
  Tensor<double> logits = random_tensor(6, 4, rng);
  Var p = t.softmax_rows(t.constant(logits));
  std::vector<std::int32_t> y{0, 1, 2, 3, 1, 0};
  std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1};
  double ce = 0;
  int n = 0;
  for (std::size_t r = 0; r < 6; ++r)
    if (mask[r]) {
      ce -= std::log(t.value(p).at(r, y[r]));
      ++n;
    }
  CHECK(t.value(t.weighted_cross_entropy(p, y, {1, 1, 1, 1}, mask)).data[0] == doctest::Approx(ce / n).epsilon(1e-6));
  CHECK(t.value(t.weighted_cross_entropy(p, y, {3, 3, 3, 3}, mask)).data[0] == doctest::Approx(ce / n).epsilon(1e-6));

  Tensor<double> onehot(3, 3);
  for (int i = 0; i < 3; ++i) onehot.at(i, i) = 1.0;
  CHECK(t.value(t.weighted_cross_entropy(t.constant(onehot), {0, 1, 2}, {1, 2, 3}, {1, 1, 1})).data[0] <= 1e-6);

  Tensor<float> zero(1, 2, {0.0f, 1.0f});
  Tape<float> tf;
  const float clamped = tf.value(tf.weighted_cross_entropy(tf.constant(zero), {0}, {1, 1}, {1})).data[0];
  CHECK(std::isfinite(clamped));
  CHECK(clamped == doctest::Approx(-std::log(1e-12)).epsilon(1e-4));
}

TEST_CASE("cosine schedule") {
  CHECK(ad::cosine_lr(0, 100, 0.001) == doctest::Approx(0.001));
  CHECK(ad::cosine_lr(100, 100, 0.001) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(ad::cosine_lr(100, 100, 0.001)) < 1e-15);
  CHECK(ad::cosine_lr(50, 100, 0.001) == doctest::Approx(0.0005));
  CHECK_THROWS_AS(ad::cosine_lr(0, 0, 0.001), ConfigError);
}

TEST_CASE("adam matches a hand-computed update") {
  ad::ParamStore<double> ps;
  auto& w = ps.add("w", Tensor<double>(1, 2, {1.0, -2.0}));
  ad::Adam<double> opt;
  std::vector<double> m(2, 0), v(2, 0), p{1.0, -2.0};
  const std::vector<std::vector<double>> grads{{0.5, -1.0}, {0.1, 0.2}, {-0.3, 0.0}};
  for (std::size_t step = 0; step < grads.size(); ++step) {
    w.grad = grads[step];
    opt.step(ps, 0.01);
    for (int k = 0; k < 2; ++k) {
      m[k] = 0.9 * m[k] + 0.1 * grads[step][k];
      v[k] = 0.999 * v[k] + 0.001 * grads[step][k] * grads[step][k];
      const double mh = m[k] / (1 - std::pow(0.9, step + 1));
      const double vh = v[k] / (1 - std::pow(0.999, step + 1));
      p[k] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(w.data[k] == doctest::Approx(p[k]).epsilon(1e-12));
    }
  }
  CHECK(opt.steps() == 3);
}

TEST_CASE("batch norm in eval mode is a fixed affine map") {
  std::mt19937_64 rng(3);
  Tensor<double> mean = random_tensor(1, 4, rng), var(1, 4, 0.7), gamma = random_tensor(1, 4, rng),
                 beta = random_tensor(1, 4, rng);
  ad::BatchNormBuffers<double> buf{&mean, &var};
  auto run = [&](const Tensor<double>& x) {
    Tape<double> t;
    return t.value(t.batch_norm(t.constant(x), t.constant(gamma), t.constant(beta), buf, false));
  };
  const Tensor<double> frozen = mean;
  Tensor<double> x = random_tensor(5, 4, rng);
  auto y1 = run(x);
  auto y2 = run(x);
  CHECK(y1.data == y2.data);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      CHECK(y1.at(r, c) == doctest::Approx(gamma.data[c] * (x.at(r, c) - mean.data[c]) / std::sqrt(0.7 + 1e-5) + beta.data[c]));
  // a single row is still well defined in eval mode
  CHECK(run(random_tensor(1, 4, rng)).rows == 1);
  CHECK(mean.data == frozen.data);
}

TEST_CASE("batch norm in training mode updates running statistics with momentum 0.1") {
  Tensor<double> mean(1, 1, 0.0), var(1, 1, 1.0);
  ad::BatchNormBuffers<double> buf{&mean, &var};
  Tape<double> t;
  Var y = t.batch_norm(t.constant(Tensor<double>(2, 1, {1.0, 3.0})), t.constant(Tensor<double>(1, 1, 1.0)),
                       t.constant(Tensor<double>(1, 1, 0.0)), buf, true);
  CHECK(mean.data[0] == doctest::Approx(0.2));
  CHECK(var.data[0] == doctest::Approx(0.9 + 0.1 * 2.0));
  CHECK(t.value(y).data[0] == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)));
}

TEST_CASE("backward visits each node once and accumulates into parameters") {
  Tensor<double> w(1, 1, 3.0);
  w.requires_grad = true;
  Tape<double> t;
  Var a = t.leaf(w);
  Var y = t.sum(t.add(t.add(a, a), a));
  t.backward(y);
  CHECK(w.grad[0] == doctest::Approx(3.0));
  Tape<double> t2;
  Tensor<double> m(2, 2, 1.0);
  m.requires_grad = true;
  CHECK_THROWS_AS(t2.backward(t2.leaf(m)), ShapeError);
}

TEST_CASE("the finite-difference oracle flags a wrong gradient") {
  std::mt19937_64 rng(1);
  std::vector<Tensor<double>> in{random_tensor(3, 3, rng)};
  // detaching the input zeroes the tape gradient while the value still moves
  testing::ScalarFn detached = [](Tape<double>& t, const std::vector<Var>& v) {
    return project(t, t.relu(t.constant(t.value(v[0]))), 5);
  };
  CHECK(gradient_error(in, detached) > 0.5);
}
