#include <doctest.h>

#include <cmath>

#include "mammil/error.hpp"
#include "mammil/gradcheck.hpp"
#include "mammil/ops.hpp"
#include "support.hpp"

using namespace mammil;
using testing::random_tensor;

TEST_CASE("linear: identity and zero weights") {
  Tape tape(Tape::Mode::inference);
  const Tensor x = Tensor::from({1, 2}, {1, 2});
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const Tensor zero_b = Tensor::from({2}, {0, 0});
  Tensor y = ops::linear(tape, x, eye, zero_b);
  CHECK(y[0] == 1);
  CHECK(y[1] == 2);

  y = ops::linear(tape, x, Tensor::zeros({2, 2}), Tensor::from({2}, {3, 4}));
  CHECK(y[0] == 3);
  CHECK(y[1] == 4);
}

TEST_CASE("linear: matches triple-loop oracle") {
  Rng rng(11);
  Tape tape(Tape::Mode::inference);
  for (int rep = 0; rep < 5; ++rep) {
    const Tensor x = random_tensor({3, 4}, rng), w = random_tensor({4, 2}, rng), b = random_tensor({2}, rng);
    const Tensor y = ops::linear(tape, x, w, b);
    const auto ref = oracle::affine(testing::to_mat(x), testing::to_mat(w), testing::to_vec(b));
    CHECK(testing::max_abs_diff(y, ref) < 1e-14);
  }
}

TEST_CASE("linear: shape mismatch names both shapes") {
  Tape tape(Tape::Mode::inference);
  try {
    ops::linear(tape, Tensor::zeros({2, 3}), Tensor::zeros({4, 2}), Tensor());
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("elementwise values") {
  Tape tape(Tape::Mode::inference);
  const Tensor r = ops::relu(tape, Tensor::from({2}, {-1, 2}));
  CHECK(r[0] == 0);
  CHECK(r[1] == 2);
  CHECK(ops::silu(tape, Tensor::scalar(0))[0] == 0);
  CHECK(ops::softplus(tape, Tensor::scalar(0))[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // Overflow-safe at large magnitudes.
  CHECK(ops::softplus(tape, Tensor::scalar(1000))[0] == doctest::Approx(1000));
  CHECK(ops::softplus(tape, Tensor::scalar(-1000))[0] >= 0);
  CHECK(std::isfinite(ops::sigmoid(tape, Tensor::scalar(-1000))[0]));
}

TEST_CASE("softmax examples") {
  Tape tape(Tape::Mode::inference);
  Tensor s = ops::softmax(tape, Tensor::from({2}, {0, 0}), 0);
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(0.5));

  s = ops::softmax(tape, Tensor::from({2}, {1000, 0}), 0);
  CHECK(std::isfinite(s[0]));
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] == doctest::Approx(0.0));

  s = ops::softmax(tape, Tensor::from({3}, {1, 2, 3}), 0);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(s[i] - std::exp(double(i + 1)) / z) < 1e-15);
}

TEST_CASE("softmax sums to one along either axis at magnitude 1e4") {
  Rng rng(5);
  Tape tape(Tape::Mode::inference);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor x = random_tensor({4, 5}, rng, -1e4, 1e4);
    const Tensor a0 = ops::softmax(tape, x, 0);
    const Tensor a1 = ops::softmax(tape, x, 1);
    for (std::size_t c = 0; c < 5; ++c) {
      double s = 0;
      for (std::size_t r = 0; r < 4; ++r) {
        CHECK(a0.at(r, c) >= 0);
        s += a0.at(r, c);
      }
      CHECK(std::abs(s - 1) < 1e-12);
    }
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 5; ++c) s += a1.at(r, c);
      CHECK(std::abs(s - 1) < 1e-12);
    }
  }
}

TEST_CASE("layer_norm examples") {
  Tape tape(Tape::Mode::inference);
  Tensor y = ops::layer_norm(tape, Tensor::from({1, 3}, {5, 5, 5}), Tensor::filled({3}, 1), Tensor::zeros({3}));
  for (int i = 0; i < 3; ++i) CHECK(y[i] == 0);

  y = ops::layer_norm(tape, Tensor::from({1, 2}, {1, -1}), Tensor::filled({2}, 1), Tensor::zeros({2}), 1e-12);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(-1.0));

  y = ops::layer_norm(tape, Tensor::zeros({1, 2}), Tensor::filled({2}, 1), Tensor::from({2}, {2, 3}));
  CHECK(y[0] == 2);
  CHECK(y[1] == 3);
}

TEST_CASE("layer_norm rows have zero mean and unit variance") {
  Rng rng(9);
  Tape tape(Tape::Mode::inference);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor x = random_tensor({3, 7}, rng, -50, 50);
    const Tensor y = ops::layer_norm(tape, x, Tensor::filled({7}, 1), Tensor::zeros({7}), 1e-12);
    for (std::size_t r = 0; r < 3; ++r) {
      double mean = 0, var = 0;
      for (std::size_t c = 0; c < 7; ++c) mean += y.at(r, c);
      mean /= 7;
      for (std::size_t c = 0; c < 7; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean);
      var /= 7;
      CHECK(std::abs(mean) < 1e-10);
      CHECK(std::abs(var - 1) < 1e-6);
    }
  }
}

TEST_CASE("backward examples") {
  SUBCASE("sum(x^2) at 3") {
    Tensor x = Tensor::from({1}, {3}, true);
    Tape tape;
    Tensor loss = ops::sum(tape, ops::mul(tape, x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 6);
  }
  SUBCASE("sum(relu(x)) at [-1, 1]") {
    Tensor x = Tensor::from({2}, {-1, 1}, true);
    Tape tape;
    Tensor loss = ops::sum(tape, ops::relu(tape, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 0);
    CHECK(x.grad()[1] == 1);
  }
  SUBCASE("relu adjoint at exactly zero is zero") {
    Tensor x = Tensor::from({1}, {0}, true);
    Tape tape;
    Tensor loss = ops::sum(tape, ops::relu(tape, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 0);
  }
  SUBCASE("tensor consumed twice accumulates both adjoints") {
    Tensor x = Tensor::from({1}, {2}, true);
    Tape tape;
    Tensor loss = ops::sum(tape, ops::add(tape, ops::scale(tape, x, 3), ops::mul(tape, x, x)));
    tape.backward(loss);
    CHECK(x.grad()[0] == 7);
  }
}

TEST_CASE("backward twice without reset is a state error") {
  Tensor x = Tensor::from({1}, {1}, true);
  Tape tape;
  Tensor loss = ops::sum(tape, ops::mul(tape, x, x));
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), StateError);
  tape.reset();
  CHECK(tape.size() == 0);
}

TEST_CASE("inference tape records nothing") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape(Tape::Mode::inference);
  ops::sum(tape, ops::silu(tape, x));
  CHECK(tape.size() == 0);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const Tensor x0 = random_tensor({3, 4}, rng);
    const Tensor w = random_tensor({4, 2}, rng);
    const real alpha = real(-2.75);
    auto grads = [&](real scale) {
      Tensor x = x0.clone(true);
      Tape tape;
      Tensor loss = ops::scale(tape, ops::sum(tape, ops::silu(tape, ops::linear(tape, x, w, Tensor()))), scale);
      tape.backward(loss);
      return testing::to_vec(Tensor::from(x.shape(), {x.grad().begin(), x.grad().end()}));
    };
    const auto g1 = grads(1), ga = grads(alpha);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(ga[i] - alpha * g1[i]) < 1e-12);
  }
}

TEST_CASE("finite_diff_check examples") {
  Rng rng(21);
  const Tensor x = random_tensor({2, 2}, rng);
  CHECK(finite_diff_check([](Tape& t, const Tensor& v) { return ops::sum(t, v); }, x) < 1e-9);
  CHECK(finite_diff_check([](Tape& t, const Tensor& v) { return ops::sum(t, ops::mul(t, v, v)); }, x) < 1e-6);
  const Tensor g = random_tensor({2}, rng), b = random_tensor({2}, rng);
  CHECK(finite_diff_check([&](Tape& t, const Tensor& v) { return ops::sum(t, ops::mul(t, ops::layer_norm(t, v, g, b), v)); },
                          x) < 1e-4);
  const Tensor w = random_tensor({2, 3}, rng);
  CHECK(finite_diff_check([&](Tape& t, const Tensor& v) { return ops::sum(t, ops::silu(t, ops::linear(t, v, w, Tensor()))); },
                          x) < 1e-5);
}

TEST_CASE("finite_diff_check rejects non-scalar output") {
  const Tensor x = Tensor::from({2}, {1, 2});
  CHECK_THROWS_AS(finite_diff_check([](Tape& t, const Tensor& v) { return ops::relu(t, v); }, x), ValidationError);
}

TEST_CASE("every primitive passes finite differences on 10 seeded inputs") {
  const auto weights_for = [](Rng& rng, const Tensor& out) { return random_tensor(out.shape(), rng); };
  Rng rng(101);
  for (int rep = 0; rep < 10; ++rep) {
    const Tensor x = random_tensor({3, 4}, rng, -2, 2);
    for (auto op : {ops::Unary::relu, ops::Unary::silu, ops::Unary::tanh, ops::Unary::softplus, ops::Unary::exp,
                    ops::Unary::sigmoid}) {
      const Tensor w = weights_for(rng, x);
      const double err = finite_diff_check(
          [&](Tape& t, const Tensor& v) { return ops::sum(t, ops::mul(t, ops::unary(t, op, v), w)); }, x);
      CHECK(err < 1e-5);
    }
    for (std::size_t axis : {0, 1}) {
      const Tensor w = weights_for(rng, x);
      CHECK(finite_diff_check(
                [&](Tape& t, const Tensor& v) { return ops::sum(t, ops::mul(t, ops::softmax(t, v, axis), w)); }, x) <
            1e-5);
    }
    const Tensor g = random_tensor({4}, rng), b = random_tensor({4}, rng), w = weights_for(rng, x);
    CHECK(finite_diff_check(
              [&](Tape& t, const Tensor& v) { return ops::sum(t, ops::mul(t, ops::layer_norm(t, v, g, b), w)); }, x) <
          1e-5);
    const Tensor m = random_tensor({4, 2}, rng), wm = random_tensor({3, 2}, rng);
    CHECK(finite_diff_check([&](Tape& t, const Tensor& v) { return ops::sum(t, ops::mul(t, ops::matmul(t, v, m), wm)); },
                            x) < 1e-5);
    const Tensor wt = random_tensor({4, 3}, rng);
    CHECK(finite_diff_check(
              [&](Tape& t, const Tensor& v) { return ops::sum(t, ops::mul(t, ops::transpose(t, v), wt)); }, x) < 1e-5);
    const std::vector<std::size_t> idx{2, 0, 0, 1};
    const Tensor wg = random_tensor({4, 4}, rng);
    CHECK(finite_diff_check(
              [&](Tape& t, const Tensor& v) { return ops::sum(t, ops::mul(t, ops::gather_rows(t, v, idx), wg)); }, x) <
          1e-5);
  }
}

TEST_CASE("gather_rows and reverse_rows") {
  Tape tape(Tape::Mode::inference);
  const Tensor x = Tensor::from({3, 2}, {0, 1, 10, 11, 20, 21});
  const std::vector<std::size_t> idx{2, 0};
  const Tensor g = ops::gather_rows(tape, x, idx);
  CHECK(g.at(0, 0) == 20);
  CHECK(g.at(1, 1) == 1);
  const Tensor r = ops::reverse_rows(tape, x);
  CHECK(r.at(0, 1) == 21);
  CHECK(r.at(2, 0) == 0);
  const std::vector<std::size_t> bad{3};
  CHECK_THROWS(ops::gather_rows(tape, x, bad));
}
