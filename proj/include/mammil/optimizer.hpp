#pragma once

#include <cstddef>
#include <vector>

#include "mammil/layers.hpp"

namespace mammil {

struct RAdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled: p <- p·(1 - lr·wd) before the update
};

/// Rectified Adam. While the variance estimate is untrustworthy (rho_t <= 5)
/// the step falls back to bias-corrected momentum.
class RAdam {
 public:
  RAdam(NamedTensors params, RAdamOptions options);

  void step();
  void zero_grad();
  std::size_t steps() const { return step_; }
  const RAdamOptions& options() const { return options_; }

 private:
  NamedTensors params_;
  RAdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t step_ = 0;
};

}  // namespace mammil
