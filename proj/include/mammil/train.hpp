#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "mammil/config.hpp"
#include "mammil/mil.hpp"
#include "mammil/model.hpp"

namespace mammil {

/// Tracks the best monitored value and the number of epochs since it.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, bool maximize) : patience_(patience), maximize_(maximize) {}

  /// Returns true when `value` strictly improves on the best so far.
  bool update(std::size_t epoch, double value);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }

 private:
  std::size_t patience_;
  bool maximize_;
  bool seen_ = false;
  double best_ = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  MetricsReport val;
  double monitor_value = 0;
  bool improved = false;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_monitor = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// One bag per RAdam step; evaluates the monitor on `val` after every epoch,
/// keeps the best parameters and stops after `early_stop_patience` epochs
/// without improvement. On return the model holds the best parameters.
TrainHistory train(Model& model, const std::vector<InstanceBag>& train_bags, const std::vector<InstanceBag>& val_bags,
                   const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Deterministic evaluation; per-bag randomness is seeded from the bag id.
/// `structures`, when given, must align with `bags`.
MetricsReport evaluate(const Model& model, const std::vector<InstanceBag>& bags,
                       const std::vector<BagStructure>* structures = nullptr);

using ParameterSnapshot = std::vector<std::vector<real>>;
ParameterSnapshot snapshot_parameters(const Model& model);
void restore_parameters(Model& model, const ParameterSnapshot& snapshot);

// Checkpoint layout, little-endian:
//   "MMCK" | u32 version | u32 n | n bytes model-config JSON | u32 count |
//   count × (u32 name_len | name | u32 ndim | ndim × u64 extent | numel × f64)
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace mammil
