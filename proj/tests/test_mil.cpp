#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mammil/error.hpp"
#include "mammil/mil.hpp"
#include "support.hpp"

using namespace mammil;
using testing::random_tensor;

namespace {

double nll(std::initializer_list<real> logits, std::size_t bin, Event ev) {
  Tape tape(Tape::Mode::inference);
  return survival_nll(tape, Tensor::from({1, logits.size()}, logits), bin, ev)[0];
}

double ce(std::initializer_list<real> logits, std::size_t label) {
  Tape tape(Tape::Mode::inference);
  return cross_entropy(tape, Tensor::from({1, logits.size()}, logits), label)[0];
}

}  // namespace

TEST_CASE("attention_pool: M=1 and identical rows") {
  Rng rng(1);
  for (bool gated : {false, true}) {
    const auto pool = AttentionPool::init(4, 3, gated, rng);
    Tape tape(Tape::Mode::inference);
    const Tensor h1 = random_tensor({1, 4}, rng);
    const auto one = attention_pool(tape, h1, pool);
    CHECK(one.alpha[0] == doctest::Approx(1.0).epsilon(1e-15));
    for (std::size_t d = 0; d < 4; ++d) CHECK(std::abs(one.z[d] - h1[d]) < 1e-15);

    std::vector<real> rows;
    for (int i = 0; i < 5; ++i) rows.insert(rows.end(), h1.data().begin(), h1.data().end());
    const auto same = attention_pool(tape, Tensor::from({5, 4}, rows), pool);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(same.alpha[i] - 0.2) < 1e-15);
    for (std::size_t d = 0; d < 4; ++d) CHECK(std::abs(same.z[d] - h1[d]) < 1e-14);
  }
}

TEST_CASE("attention_pool: permutation invariant, weights equivariant and normalized") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto pool = AttentionPool::init(5, 4, rep % 2 == 1, rng);
    const std::size_t M = 2 + std::size_t(rep) % 9;
    const Tensor h = random_tensor({M, 5}, rng, -2, 2);
    Permutation perm(M);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Tape tape(Tape::Mode::inference);
    const auto a = attention_pool(tape, h, pool);
    const auto b = attention_pool(tape, ops::gather_rows(tape, h, perm), pool);
    double total = 0;
    for (std::size_t t = 0; t < M; ++t) {
      CHECK(std::abs(b.alpha[t] - a.alpha[perm[t]]) < 1e-12);
      CHECK(a.alpha[t] > 0);
      total += a.alpha[t];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    for (std::size_t d = 0; d < 5; ++d) CHECK(std::abs(a.z[d] - b.z[d]) < 1e-12);
  }
}

TEST_CASE("attention_pool: dimension mismatch") {
  Rng rng(3);
  const auto pool = AttentionPool::init(4, 3, false, rng);
  Tape tape(Tape::Mode::inference);
  CHECK_THROWS_AS(attention_pool(tape, random_tensor({3, 5}, rng), pool), DimensionError);
}

TEST_CASE("cross_entropy examples") {
  CHECK(ce({0, 0, 0, 0}, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(std::abs(ce({1000, 0, 0}, 0)) < 1e-12);
  CHECK(ce({1, 2}, 0) == doctest::Approx(1 + std::log1p(std::exp(-1.0))).epsilon(1e-15));
  CHECK(ce({1, 2}, 0) == doctest::Approx(1.313262).epsilon(1e-6));
  CHECK(std::isfinite(ce({-1000, 1000}, 0)));
  CHECK_THROWS_AS(ce({0, 0}, 2), ValidationError);
}

TEST_CASE("cross_entropy is non-negative") {
  Rng rng(4);
  for (int rep = 0; rep < 200; ++rep) {
    Tape tape(Tape::Mode::inference);
    const Tensor logits = random_tensor({1, 5}, rng, -30, 30);
    CHECK(cross_entropy(tape, logits, std::size_t(rep) % 5)[0] >= 0);
  }
}

TEST_CASE("survival_nll examples") {
  CHECK(nll({0}, 0, Event::observed) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::abs(nll({-1000}, 0, Event::censored)) < 1e-12);
  CHECK(nll({0, 0, 0}, 1, Event::observed) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-15));
  CHECK(std::isfinite(nll({1000, 1000}, 1, Event::observed)));
  CHECK_THROWS_AS(nll({0, 0}, 2, Event::censored), ValidationError);
}

TEST_CASE("survival_nll: observed = censored at bin-1 minus log h(bin)") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<real> logits(4);
    for (auto& v : logits) v = u(rng);
    const std::size_t bin = 1 + std::size_t(rep) % 3;
    Tape tape(Tape::Mode::inference);
    const Tensor t = Tensor::from({1, 4}, logits);
    const double observed = survival_nll(tape, t, bin, Event::observed)[0];
    const double censored = survival_nll(tape, t, bin - 1, Event::censored)[0];
    const double h = oracle::sigmoid(logits[bin]);
    CHECK(std::abs(observed - (censored - std::log(h))) < 1e-12);
  }
}

TEST_CASE("hazards lie in (0,1) and survival is non-increasing") {
  Rng rng(6);
  std::uniform_real_distribution<double> u(-8, 8);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<real> logits(5);
    for (auto& v : logits) v = u(rng);
    const auto h = hazards(logits);
    const auto s = survival_curve(logits);
    double prev = 1, risk = 0;
    for (std::size_t t = 0; t < 5; ++t) {
      CHECK(h[t] > 0);
      CHECK(h[t] < 1);
      CHECK(s[t] <= prev);
      CHECK(std::abs(s[t] - prev * (1 - h[t])) < 1e-15);
      prev = s[t];
      risk += 1 - s[t];
    }
    CHECK(std::abs(risk_score(logits) - risk) < 1e-12);
  }
}

TEST_CASE("accuracy") {
  const std::vector<double> p{0.9, 0.1};
  const std::vector<std::size_t> y{1, 0};
  CHECK(accuracy(p, y) == 1.0);
  const std::vector<double> half{0.5};
  const std::vector<std::size_t> pos{1}, neg{0};
  CHECK(accuracy(half, pos) == 1.0);
  CHECK(accuracy(half, neg) == 0.0);
  CHECK(kDecisionThreshold == 0.5);
  CHECK_THROWS_AS(accuracy(std::vector<double>{}, std::vector<std::size_t>{}), ValidationError);
  CHECK_THROWS_AS(accuracy(p, pos), ValidationError);

  Rng rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> probs(17);
    std::vector<std::size_t> labels(17);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < 17; ++i) {
      probs[i] = u(rng);
      labels[i] = rng() % 2;
      hits += (probs[i] >= 0.5) == (labels[i] == 1);
    }
    CHECK(accuracy(probs, labels) == double(hits) / 17);
  }
}

TEST_CASE("accuracy_argmax") {
  const std::vector<double> probs{0.2, 0.7, 0.1, 0.5, 0.2, 0.3};
  const std::vector<std::size_t> y{1, 2};
  CHECK(accuracy_argmax(probs, 3, y) == 0.5);
}

TEST_CASE("auc examples") {
  const std::vector<std::size_t> y{0, 0, 1, 1};
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.4, 0.8}, y) == 0.875);
  CHECK(auc(std::vector<double>{0.1, 0.2, 0.3, 0.4}, y) == 1.0);
  CHECK(auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, y) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<std::size_t>{1, 1}), UndefinedMetric);
}

TEST_CASE("auc matches pair enumeration and ignores monotone transforms") {
  Rng rng(8);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng() % 29;
    std::vector<double> s(n), t(n);
    std::vector<std::size_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng() % 10) / 10;  // coarse grid forces ties
      y[i] = rng() % 2;
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(std::abs(auc(s, y) - oracle::auc_pairs(s, y)) < 1e-12);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3 * s[i]) - 7;
    CHECK(auc(t, y) == auc(s, y));
  }
}

TEST_CASE("macro_auc averages one-vs-rest") {
  const std::vector<double> probs{0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.1, 0.2, 0.7, 0.6, 0.3, 0.1};
  const std::vector<std::size_t> y{0, 1, 2, 1};
  double expect = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> s;
    std::vector<std::size_t> b;
    for (std::size_t i = 0; i < 4; ++i) {
      s.push_back(probs[i * 3 + c]);
      b.push_back(y[i] == c);
    }
    expect += oracle::auc_pairs(s, b) / 3;
  }
  CHECK(std::abs(macro_auc(probs, 3, y) - expect) < 1e-12);
}

TEST_CASE("c_index examples") {
  const std::vector<double> times{1, 2, 3, 4};
  const std::vector<Event> all(4, Event::observed);
  CHECK(c_index(std::vector<double>{4, 3, 2, 1}, times, all) == 1.0);
  CHECK(c_index(std::vector<double>{2, 2, 2, 2}, times, all) == 0.5);
  // Pairs (0,1), (0,2), (1,2); event 2 is censored but still the later member.
  const std::vector<Event> ev{Event::observed, Event::observed, Event::censored};
  CHECK(c_index(std::vector<double>{3, 2, 1}, std::vector<double>{1, 2, 3}, ev) == 1.0);
  CHECK(std::abs(c_index(std::vector<double>{3, 1, 2}, std::vector<double>{1, 2, 3}, ev) - 2.0 / 3) < 1e-15);
  CHECK_THROWS_AS(
      c_index(std::vector<double>{1, 2}, std::vector<double>{1, 2}, std::vector<Event>{Event::censored, Event::observed}),
      UndefinedMetric);
  CHECK_THROWS_AS(c_index(std::vector<double>{1, 2}, std::vector<double>{3, 3}, std::vector<Event>(2, Event::observed)), UndefinedMetric);
}

TEST_CASE("c_index matches pair enumeration; negating risks complements it") {
  Rng rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  int checked = 0;
  while (checked < 100) {
    const std::size_t n = 2 + rng() % 29;
    std::vector<double> r(n), t(n), neg(n);
    std::vector<Event> ev(n);
    std::vector<bool> obs(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = u(rng);
      neg[i] = -r[i];
      t[i] = double(rng() % 8);
      obs[i] = rng() % 4 != 0;
      ev[i] = obs[i] ? Event::observed : Event::censored;
    }
    double den = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) den += t[i] < t[j] && obs[i];
    if (den == 0) {
      CHECK_THROWS_AS(c_index(r, t, ev), UndefinedMetric);
      continue;
    }
    ++checked;
    const double c = c_index(r, t, ev);
    CHECK(std::abs(c - oracle::cindex_pairs(r, t, obs)) < 1e-12);
    CHECK(std::abs(c_index(neg, t, ev) - (1 - c)) < 1e-12);
  }
}

TEST_CASE("MetricsReport text") {
  MetricsReport r;
  r.loss = 0.25;
  r.accuracy = 1.0;
  r.auc = 0.875;
  r.extra["n"] = 4;
  CHECK(r.to_text() == "accuracy=1.000000\nauc=0.875000\nloss=0.250000\nn=4.000000\n");
  MetricsReport s;
  s.loss = 1;
  s.c_index = 0.5;
  CHECK(s.to_text() == "c_index=0.500000\nloss=1.000000\n");
}
