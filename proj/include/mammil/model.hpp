#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "mammil/blocks.hpp"
#include "mammil/config.hpp"
#include "mammil/mil.hpp"

namespace mammil {

/// Per-bag graph structure. Depends only on the bag and the model's kNN
/// settings, so it can be computed once and reused across epochs.
struct BagStructure {
  WsiGraph graph;
  SpanningForest forest;
};

/// Prediction for one bag. Classification fills `probs`; survival fills
/// `hazards`, `survival` and `risk`.
struct Prediction {
  std::vector<real> logits;
  std::vector<real> probs;
  std::vector<real> hazards;
  std::vector<real> survival;
  real risk = 0;
};

/// linear+ReLU -> TA-Mamba -> GIA (optional) -> TA-Mamba -> attention pool -> task head.
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  /// Every trainable tensor in a fixed order with stable names.
  NamedTensors parameters() const;
  std::size_t parameter_count() const;

  BagStructure prepare(const InstanceBag& bag) const;

  /// Logits [1 × C] (classification) or hazard logits [1 × T] (survival).
  /// Traversal roots, and shuffles for shuffle_rescan, are drawn from `rng`.
  Tensor forward(Tape& tape, const InstanceBag& bag, const BagStructure& structure, Rng& rng) const;
  Tensor forward_bag(Tape& tape, const InstanceBag& bag, Rng& rng) const;

  /// Task loss for the bag's target.
  Tensor loss(Tape& tape, const Tensor& logits, const InstanceBag& bag) const;

  Prediction predict(const InstanceBag& bag, const BagStructure& structure, Rng& rng) const;

  const TaMambaBlock& first_block() const { return ta1_; }
  const TaMambaBlock& second_block() const { return ta2_; }
  const std::optional<GiaBlock>& gia() const { return gia_; }
  const AttentionPool& pool() const { return pool_; }
  const Linear& input_layer() const { return input_; }
  const Linear& head() const { return head_; }

 private:
  ModelConfig config_;
  Linear input_;
  TaMambaBlock ta1_;
  std::optional<GiaBlock> gia_;
  TaMambaBlock ta2_;
  AttentionPool pool_;
  Linear head_;
};

Prediction make_prediction(const ModelConfig& config, std::span<const real> logits);

/// FNV-1a; seeds evaluation-time randomness from a bag id.
std::uint64_t stable_hash(std::string_view text);

}  // namespace mammil
