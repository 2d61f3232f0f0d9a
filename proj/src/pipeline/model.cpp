#include "mammil/model.hpp"

#include <cmath>

#include "mammil/error.hpp"

namespace mammil {

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(config_.seed);
  const std::size_t D = config_.model_dim;
  input_ = Linear::init(config_.input_dim, D, rng);
  ta1_ = TaMambaBlock::init(D, config_.inner_dims(), config_.scanning_strategy, config_.residual, rng);
  if (config_.aggregation == Aggregation::gia) gia_ = GiaBlock::init(D, rng);
  ta2_ = TaMambaBlock::init(D, config_.inner_dims(), config_.scanning_strategy, config_.residual, rng);
  pool_ = AttentionPool::init(D, config_.attention_dim, config_.gated_attention, rng);
  head_ = Linear::init(D, config_.output_dim(), rng);
}

NamedTensors Model::parameters() const {
  NamedTensors out;
  input_.append_named(out, "input");
  ta1_.append_named(out, "ta_mamba1");
  if (gia_) gia_->append_named(out, "gia");
  ta2_.append_named(out, "ta_mamba2");
  pool_.append_named(out, "pool");
  head_.append_named(out, "head");
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

BagStructure Model::prepare(const InstanceBag& bag) const {
  BagStructure s;
  s.graph = build_knn_graph(bag, config_.knn_k, config_.coord_metric);
  s.forest = kruskal_msf(s.graph);
  return s;
}

Tensor Model::forward(Tape& tape, const InstanceBag& bag, const BagStructure& structure, Rng& rng) const {
  if (bag.dim != config_.input_dim) {
    throw DimensionError("bag '" + bag.bag_id + "' has feature dimension " + std::to_string(bag.dim) +
                         ", model expects " + std::to_string(config_.input_dim));
  }
  if (structure.graph.num_nodes != bag.num_instances) {
    throw DimensionError("bag structure does not match bag '" + bag.bag_id + "'");
  }
  const TraversalOrders orders = serialize_all(structure.forest, rng);
  const auto orders1 = branch_orders(ta1_, orders, rng);
  const auto orders2 = branch_orders(ta2_, orders, rng);

  Tensor h = ops::relu(tape, input_(tape, bag.feature_tensor()));
  h = ta_mamba_forward(tape, h, orders1, ta1_);
  if (gia_) h = gia_forward(tape, h, structure.graph, *gia_);
  h = ta_mamba_forward(tape, h, orders2, ta2_);
  const PoolOutput pooled = attention_pool(tape, h, pool_);
  return head_(tape, pooled.z);
}

Tensor Model::forward_bag(Tape& tape, const InstanceBag& bag, Rng& rng) const {
  return forward(tape, bag, prepare(bag), rng);
}

Tensor Model::loss(Tape& tape, const Tensor& logits, const InstanceBag& bag) const {
  if (config_.task == Task::classification) {
    const auto* t = std::get_if<ClassTarget>(&bag.target);
    if (!t) throw ValidationError("bag '" + bag.bag_id + "' has no class label");
    return cross_entropy(tape, logits, t->label);
  }
  const auto* t = std::get_if<SurvivalTarget>(&bag.target);
  if (!t) throw ValidationError("bag '" + bag.bag_id + "' has no survival target");
  return survival_nll(tape, logits, t->time_bin, t->event);
}

Prediction make_prediction(const ModelConfig& config, std::span<const real> logits) {
  Prediction p;
  p.logits.assign(logits.begin(), logits.end());
  if (config.task == Task::classification) {
    real mx = logits[0];
    for (real l : logits) mx = std::max(mx, l);
    real z = 0;
    for (real l : logits) z += std::exp(l - mx);
    for (real l : logits) p.probs.push_back(std::exp(l - mx) / z);
  } else {
    p.hazards = hazards(logits);
    p.survival = survival_curve(logits);
    p.risk = risk_score(logits);
  }
  return p;
}

Prediction Model::predict(const InstanceBag& bag, const BagStructure& structure, Rng& rng) const {
  Tape tape(Tape::Mode::inference);
  const Tensor logits = forward(tape, bag, structure, rng);
  return make_prediction(config_, logits.data());
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace mammil
