#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "mammil/blocks.hpp"
#include "mammil/wsi_graph.hpp"

namespace mammil {

enum class Task { classification, survival };
enum class Aggregation { gia, none };
enum class Monitor { val_loss, val_c_index };

inline constexpr std::size_t kDefaultKnn = 8;
inline constexpr double kDefaultLearningRate = 1e-4;
inline constexpr double kDefaultWeightDecay = 0.05;
inline constexpr std::size_t kDefaultMaxEpochs = 250;
inline constexpr std::size_t kDefaultPatience = 20;

/// Architecture hyperparameters.
///
/// The SSM width inside each TA-Mamba block is expand·model_dim, split over
/// ssm_heads heads of width expand·model_dim / ssm_heads.
struct ModelConfig {
  std::size_t input_dim = 32;
  std::size_t model_dim = 128;
  std::size_t expand = 2;
  std::size_t ssm_heads = 4;
  std::size_t ssm_state = 32;
  std::size_t attention_dim = 64;
  bool gated_attention = false;
  std::size_t knn_k = kDefaultKnn;
  CoordMetric coord_metric = CoordMetric::cosine;
  ScanStrategy scanning_strategy = ScanStrategy::topology_aware;
  Aggregation aggregation = Aggregation::gia;
  bool residual = false;
  Task task = Task::classification;
  std::size_t num_classes = 2;
  std::size_t num_time_bins = 4;
  std::uint64_t seed = 0;

  std::size_t inner_dim() const { return expand * model_dim; }
  ssm::Dims inner_dims() const;
  /// Width of the task head output (classes or time bins).
  std::size_t output_dim() const { return task == Task::classification ? num_classes : num_time_bins; }
  void validate() const;
};

struct TrainConfig {
  double learning_rate = kDefaultLearningRate;
  double weight_decay = kDefaultWeightDecay;
  std::size_t max_epochs = kDefaultMaxEpochs;
  std::size_t early_stop_patience = kDefaultPatience;
  std::optional<Monitor> monitor;  // unset: val_loss for classification, val_c_index for survival
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  Monitor resolved_monitor(Task task) const;
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

const char* task_name(Task t);
Task parse_task(const std::string& name);

}  // namespace mammil
