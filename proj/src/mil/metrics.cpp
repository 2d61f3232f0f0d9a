#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mammil/error.hpp"
#include "mammil/mil.hpp"

namespace mammil {

namespace {
void require_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ValidationError(std::string(what) + ": input lengths differ");
  if (a == 0) throw ValidationError(std::string(what) + ": empty input");
}
}  // namespace

double accuracy(std::span<const double> positive_probs, std::span<const std::size_t> labels) {
  require_lengths(positive_probs.size(), labels.size(), "accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t pred = positive_probs[i] >= kDecisionThreshold ? 1 : 0;
    correct += pred == labels[i];
  }
  return double(correct) / double(labels.size());
}

double accuracy_argmax(std::span<const double> probs, std::size_t num_classes, std::span<const std::size_t> labels) {
  if (num_classes == 0 || probs.size() != labels.size() * num_classes) {
    throw ValidationError("accuracy_argmax: probability matrix does not match labels");
  }
  require_lengths(labels.size(), labels.size(), "accuracy_argmax");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto row = probs.subspan(i * num_classes, num_classes);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += pred == labels[i];
  }
  return double(correct) / double(labels.size());
}

double auc(std::span<const double> scores, std::span<const std::size_t> labels) {
  require_lengths(scores.size(), labels.size(), "auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mann-Whitney U from mid-ranks; tied groups share their average rank.
  double positive_rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const double mid_rank = 0.5 * double(start + 1 + end);
    for (std::size_t t = start; t < end; ++t) {
      if (labels[order[t]] == 1) {
        positive_rank_sum += mid_rank;
        ++n_pos;
      }
    }
    start = end;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("auc: needs at least one positive and one negative");
  const double u = positive_rank_sum - double(n_pos) * double(n_pos + 1) / 2.0;
  return u / (double(n_pos) * double(n_neg));
}

double macro_auc(std::span<const double> probs, std::size_t num_classes, std::span<const std::size_t> labels) {
  if (num_classes < 2 || probs.size() != labels.size() * num_classes) {
    throw ValidationError("macro_auc: probability matrix does not match labels");
  }
  if (num_classes == 2) {
    std::vector<double> pos(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) pos[i] = probs[i * 2 + 1];
    return auc(pos, labels);
  }
  double total = 0;
  std::vector<double> col(labels.size());
  std::vector<std::size_t> bin(labels.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      col[i] = probs[i * num_classes + c];
      bin[i] = labels[i] == c ? 1 : 0;
    }
    total += auc(col, bin);
  }
  return total / double(num_classes);
}

double c_index(std::span<const double> risks, std::span<const double> times, std::span<const Event> events) {
  require_lengths(risks.size(), times.size(), "c_index");
  require_lengths(risks.size(), events.size(), "c_index");
  double concordant = 0;
  std::size_t comparable = 0;
  for (std::size_t i = 0; i < risks.size(); ++i) {
    if (events[i] != Event::observed) continue;
    for (std::size_t j = 0; j < risks.size(); ++j) {
      if (!(times[i] < times[j])) continue;
      ++comparable;
      if (risks[i] > risks[j]) concordant += 1;
      else if (risks[i] == risks[j]) concordant += 0.5;
    }
  }
  if (comparable == 0) throw UndefinedMetric("c_index: no comparable pairs");
  return concordant / double(comparable);
}

std::string MetricsReport::to_text() const {
  std::string out;
  char buf[128];
  auto line = [&](const std::string& key, double v) {
    std::snprintf(buf, sizeof buf, "%s=%.6f\n", key.c_str(), v);
    out += buf;
  };
  if (accuracy) line("accuracy", *accuracy);
  if (auc) line("auc", *auc);
  if (c_index) line("c_index", *c_index);
  line("loss", loss);
  for (const auto& [k, v] : extra) line(k, v);
  return out;
}

}  // namespace mammil
