#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mammil/config.hpp"
#include "mammil/dataset.hpp"

namespace mammil {

/// Witness-instance MIL benchmark: background Gaussian instances, positive
/// bags carry a few instances shifted along the first `shifted_dims` features.
struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t n_bags = 350;
  Task task = Task::classification;
  std::size_t dim = 32;
  std::size_t min_instances = 50;
  std::size_t max_instances = 200;
  double witness_shift = 3.0;  // in units of the background standard deviation
  std::size_t shifted_dims = 8;
  std::size_t min_witnesses = 1;
  std::size_t max_witnesses = 5;
  double censor_rate = 0.25;
  std::size_t time_bins = 4;
  /// Split sizes; zero means the default 4:1:2 train/val/test proportions.
  std::size_t n_val = 0;
  std::size_t n_test = 0;
};

struct SynthDataset {
  DatasetManifest manifest;  // files named "<id>.mmb"
  std::vector<InstanceBag> bags;  // same order as manifest.bags, targets attached
};

/// Deterministic in-memory generation. Values are rounded to float32 so the
/// in-memory bags equal what a write/read round trip produces.
SynthDataset synth_bags(const SynthOptions& options);

/// Generates and writes bag files plus manifest.json into `out_dir`.
DatasetManifest synth_generate(const SynthOptions& options, const std::filesystem::path& out_dir);

}  // namespace mammil
