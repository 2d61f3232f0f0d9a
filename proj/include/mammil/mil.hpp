#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mammil/layers.hpp"
#include "mammil/wsi_graph.hpp"

namespace mammil {

/// Attention pooling: s_i = wᵀ tanh(Vᵀ h_i), alpha = softmax(s), z = Σ alpha_i h_i.
/// With `gated`, the tanh branch is multiplied by sigmoid(Uᵀ h_i).
struct AttentionPool {
  Tensor v;  // [D × L]
  Tensor w;  // [L × 1]
  Tensor u;  // [D × L], gated variant only

  static AttentionPool init(std::size_t dim, std::size_t hidden, bool gated, Rng& rng);
  bool gated() const { return u.defined(); }
  void append_named(NamedTensors& out, const std::string& prefix) const;
};

struct PoolOutput {
  Tensor z;      // [1 × D]
  Tensor alpha;  // [M × 1]
};

PoolOutput attention_pool(Tape& tape, const Tensor& h, const AttentionPool& pool);

/// -log softmax(logits)[label], log-sum-exp stable.
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::size_t label);

/// Discrete-time hazard negative log likelihood with h_t = sigmoid(logit_t)
/// and S(t) = prod_{tau <= t} (1 - h_tau).
Tensor survival_nll(Tape& tape, const Tensor& hazard_logits, std::size_t time_bin, Event event);

std::vector<real> hazards(std::span<const real> logits);
std::vector<real> survival_curve(std::span<const real> logits);
/// Expected cumulative incidence: sum_t (1 - S(t)).
real risk_score(std::span<const real> logits);

// Metrics -------------------------------------------------------------------

inline constexpr double kDecisionThreshold = 0.5;

/// Binary accuracy: positive iff prob >= 0.5.
double accuracy(std::span<const double> positive_probs, std::span<const std::size_t> labels);
/// Multi-class accuracy by argmax; `probs` is row-major n × C.
double accuracy_argmax(std::span<const double> probs, std::size_t num_classes, std::span<const std::size_t> labels);

/// Mann-Whitney AUC, ties count one half. Throws UndefinedMetric unless both
/// classes are present. Labels are 0/1.
double auc(std::span<const double> scores, std::span<const std::size_t> labels);
/// Macro one-vs-rest AUC over `num_classes`; `probs` is row-major n × C.
double macro_auc(std::span<const double> probs, std::size_t num_classes, std::span<const std::size_t> labels);

/// Harrell's concordance over pairs with time_i < time_j and event_i observed.
double c_index(std::span<const double> risks, std::span<const double> times, std::span<const Event> events);

/// Flat key/value metrics document.
struct MetricsReport {
  double loss = 0;
  std::optional<double> accuracy;
  std::optional<double> auc;
  std::optional<double> c_index;
  std::map<std::string, double> extra;  // per-class breakdown and counts

  /// One "name=value" line per metric, 6 fractional digits, absent metrics omitted.
  std::string to_text() const;
};

}  // namespace mammil
