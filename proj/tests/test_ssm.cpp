#include <doctest.h>

#include <cmath>

#include "mammil/error.hpp"
#include "mammil/gradcheck.hpp"
#include "mammil/ops.hpp"
#include "mammil/ssm.hpp"
#include "support.hpp"

using namespace mammil;
using testing::random_tensor;

namespace {

struct ScanCase {
  ssm::Dims dims;
  Tensor x, b, c, delta, a_log;
};

ScanCase random_case(Rng& rng, std::size_t M, ssm::Dims dims) {
  return {dims,
          random_tensor({M, dims.width()}, rng),
          random_tensor({M, dims.state_dim}, rng),
          random_tensor({M, dims.state_dim}, rng),
          random_tensor({M, dims.heads}, rng, 0.05, 2.0),
          random_tensor({dims.heads}, rng, -1.0, 1.0)};
}

Tensor run(const ScanCase& s, const Tensor& x) {
  Tape tape(Tape::Mode::inference);
  return ssm::scan(tape, x, s.b, s.c, s.delta, s.a_log, s.dims);
}

oracle::Mat run_oracle(const ScanCase& s) {
  return oracle::scan(testing::to_mat(s.x), testing::to_mat(s.b), testing::to_mat(s.c), testing::to_mat(s.delta),
                      testing::to_vec(s.a_log), s.dims.heads, s.dims.head_dim);
}

}  // namespace

TEST_CASE("discretize examples") {
  const std::vector<real> b{1, -2};
  CHECK(ssm::discretize(-1, 0, b).a_bar == 1);
  const auto d = ssm::discretize(-1, std::log(2.0), b);
  CHECK(d.a_bar == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d.b_bar[1] == doctest::Approx(-2 * std::log(2.0)));
  CHECK(ssm::discretize(-1, 20, b).a_bar == doctest::Approx(2.0611536e-9).epsilon(1e-6));
}

TEST_CASE("scan: M=1 collapses to a scaled input") {
  Rng rng(1);
  const auto s = random_case(rng, 1, {2, 3, 4});
  const Tensor y = run(s, s.x);
  double bc = 0;
  for (std::size_t n = 0; n < 4; ++n) bc += s.b[n] * s.c[n];
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t p = 0; p < 3; ++p) {
      const std::size_t col = h * 3 + p;
      CHECK(std::abs(y[col] - s.delta[h] * bc * s.x[col]) < 1e-14);
    }
}

TEST_CASE("scan: vanishing transition makes the recurrence memoryless") {
  Rng rng(2);
  auto s = random_case(rng, 6, {2, 2, 3});
  // exp(-exp(6)·40) underflows to exactly 0.
  for (auto& v : s.a_log.data()) v = 6;
  for (auto& v : s.delta.data()) v = 40;
  const Tensor y = run(s, s.x);
  for (std::size_t i = 0; i < 6; ++i) {
    double bc = 0;
    for (std::size_t n = 0; n < 3; ++n) bc += s.b.at(i, n) * s.c.at(i, n);
    for (std::size_t col = 0; col < 4; ++col) CHECK(std::abs(y.at(i, col) - 40 * bc * s.x.at(i, col)) < 1e-10);
  }
}

TEST_CASE("scan: matches the unrolled-sum oracle") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t M = 1 + rep % 16;
    const ssm::Dims dims{1 + std::size_t(rep) % 3, 1 + std::size_t(rep) % 4, 1 + std::size_t(rep / 3) % 4};
    const auto s = random_case(rng, M, dims);
    CHECK(testing::max_abs_diff(run(s, s.x), run_oracle(s)) < 1e-10);
  }
}

TEST_CASE("scan: linear in x for fixed selective parameters") {
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const auto s = random_case(rng, 12, {2, 3, 4});
    const Tensor x2 = random_tensor(s.x.shape(), rng);
    Tape tape(Tape::Mode::inference);
    const Tensor y_sum = run(s, ops::add(tape, s.x, x2));
    const Tensor y1 = run(s, s.x), y2 = run(s, x2);
    const Tensor y_scaled = run(s, ops::scale(tape, s.x, -3.5));
    for (std::size_t i = 0; i < y1.numel(); ++i) {
      CHECK(std::abs(y_sum[i] - (y1[i] + y2[i])) < 1e-10);
      CHECK(std::abs(y_scaled[i] - (-3.5 * y1[i])) < 1e-10);
    }
  }
}

TEST_CASE("scan: causal") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t M = 10, t = 1 + std::size_t(rep) % 9;
    const auto s = random_case(rng, M, {2, 2, 3});
    const Tensor y = run(s, s.x);
    Tensor x = s.x.clone();
    for (std::size_t col = 0; col < x.cols(); ++col) x.at(t, col) += 5;
    const Tensor y2 = run(s, x);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t col = 0; col < y.cols(); ++col) CHECK(y.at(i, col) == y2.at(i, col));
    bool changed = false;
    for (std::size_t col = 0; col < y.cols(); ++col) changed |= y.at(t, col) != y2.at(t, col);
    CHECK(changed);
  }
}

TEST_CASE("scan: stable over 100000 steps") {
  Rng rng(6);
  const std::size_t M = 100000;
  auto s = random_case(rng, M, {2, 2, 2});
  s.delta = random_tensor({M, 2}, rng, 1e-3, 40.0);
  const Tensor y = run(s, s.x);
  for (real v : y.data()) REQUIRE(std::isfinite(v));
}

TEST_CASE("scan: non-finite input is a numeric error naming the step") {
  Rng rng(7);
  auto s = random_case(rng, 5, {1, 2, 2});
  s.x.at(3, 1) = std::numeric_limits<real>::infinity();
  try {
    run(s, s.x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 3") != std::string::npos);
  }
}

TEST_CASE("scan: shape errors") {
  Rng rng(8);
  const auto s = random_case(rng, 4, {2, 2, 3});
  Tape tape(Tape::Mode::inference);
  CHECK_THROWS_AS(ssm::scan(tape, s.x, s.c.reshaped({3, 4}), s.c, s.delta, s.a_log, s.dims), DimensionError);
  CHECK_THROWS_AS(ssm::scan(tape, s.x, s.b, s.c, s.delta, s.a_log, {3, 2, 3}), DimensionError);
}

TEST_CASE("scan: gradients match finite differences") {
  Rng rng(9);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t M = 1 + rep % 6;
    const ssm::Dims dims{2, 1 + std::size_t(rep) % 2, 1 + std::size_t(rep) % 3};
    auto s = random_case(rng, M, dims);
    std::vector<Tensor> params{s.x.clone(true), s.b.clone(true), s.c.clone(true), s.delta.clone(true),
                               s.a_log.clone(true)};
    const Tensor w = random_tensor({M, dims.width()}, rng);
    const double err = finite_diff_check_params(
        [&](Tape& t) {
          return ops::sum(t, ops::mul(t, ssm::scan(t, params[0], params[1], params[2], params[3], params[4], dims), w));
        },
        params);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("selective_params: softplus(0) gives delta = log 2") {
  Rng rng(10);
  auto p = ssm::HeadParams::init({2, 2, 3}, rng);
  for (auto& v : p.delta_bias.data()) v = 0;
  const Tensor x = random_tensor({5, 4}, rng);
  Tape tape(Tape::Mode::inference);
  const auto sel = ssm::selective_params(tape, x, p);
  for (real v : sel.delta.data()) CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("selective_params: delta is positive and W_B = 0 silences the scan") {
  Rng rng(11);
  auto p = testing::random_head_params({2, 3, 2}, rng);
  const Tensor x = random_tensor({7, 6}, rng, -20, 20);
  Tape tape(Tape::Mode::inference);
  const auto sel = ssm::selective_params(tape, x, p);
  for (real v : sel.delta.data()) CHECK(v > 0);
  for (auto& v : p.w_b.data()) v = 0;
  const Tensor y = ssm::forward(tape, x, p);
  for (real v : y.data()) CHECK(v == 0);
}

TEST_CASE("init: A is negative and initial delta lies in [0.01, 0.1]") {
  Rng rng(12);
  const auto p = ssm::HeadParams::init({4, 8, 4}, rng);
  for (real v : p.a_log.data()) {
    CHECK(std::exp(v) >= 1.0);
    CHECK(std::exp(v) <= 2.0);
  }
  for (real v : p.delta_bias.data()) {
    const double dt = ops::softplus_value(v);
    CHECK(dt >= 0.01 - 1e-12);
    CHECK(dt <= 0.1 + 1e-12);
  }
  for (real v : p.w_delta.data()) CHECK(v == 0);
}

TEST_CASE("bi_ssm: M=1 averages both directions") {
  Rng rng(13);
  const ssm::Dims dims{2, 2, 3};
  const auto f = testing::random_head_params(dims, rng), b = testing::random_head_params(dims, rng);
  const Tensor x = random_tensor({1, 4}, rng);
  Tape tape(Tape::Mode::inference);
  const Tensor y = ssm::bi_ssm(tape, x, f, b);
  const Tensor yf = ssm::forward(tape, x, f), yb = ssm::forward(tape, x, b);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(y[i] - 0.5 * (yf[i] + yb[i])) < 1e-15);
}

TEST_CASE("bi_ssm: tied parameters commute with reversal") {
  Rng rng(14);
  const ssm::Dims dims{2, 2, 3};
  const auto p = testing::random_head_params(dims, rng);
  for (int rep = 0; rep < 5; ++rep) {
    const Tensor x = random_tensor({9, 4}, rng);
    Tape tape(Tape::Mode::inference);
    const Tensor a = ssm::bi_ssm(tape, ops::reverse_rows(tape, x), p, p);
    const Tensor b = ops::reverse_rows(tape, ssm::bi_ssm(tape, x, p, p));
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
  }
}

TEST_CASE("bi_ssm: matches the two-direction oracle") {
  Rng rng(15);
  for (int rep = 0; rep < 10; ++rep) {
    const ssm::Dims dims{2, 2, 3};
    const auto f = testing::random_head_params(dims, rng), b = testing::random_head_params(dims, rng);
    const Tensor x = random_tensor({8, 4}, rng);
    Tape tape(Tape::Mode::inference);
    const Tensor y = ssm::bi_ssm(tape, x, f, b);
    const auto ref = oracle::bi_ssm(testing::to_mat(x), testing::to_oracle(f), testing::to_oracle(b));
    CHECK(testing::max_abs_diff(y, ref) < 1e-10);
  }
}

TEST_CASE("bi_ssm: gradients match finite differences") {
  Rng rng(16);
  const ssm::Dims dims{2, 2, 3};
  auto f = testing::random_head_params(dims, rng), b = testing::random_head_params(dims, rng);
  Tensor x = random_tensor({6, 4}, rng, -1, 1, true);
  const Tensor w = random_tensor({6, 4}, rng);
  std::vector<Tensor> params{x};
  for (auto& [n, t] : f.named("f")) params.push_back(t);
  for (auto& [n, t] : b.named("b")) params.push_back(t);
  const double err = finite_diff_check_params(
      [&](Tape& t) { return ops::sum(t, ops::mul(t, ssm::bi_ssm(t, x, f, b), w)); }, params);
  CHECK(err < 1e-4);
}
