#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mammil/ssm.hpp"

namespace mammil {

enum class GradScope { primitives, blocks, model };
GradScope parse_grad_scope(const std::string& name);

inline constexpr double kPrimitiveGradTolerance = 1e-5;
inline constexpr double kCompositeGradTolerance = 1e-4;

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0;
  double tolerance = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Central-difference checks of every differentiable piece in `scope` on
/// seeded random inputs (64-bit, h = 1e-5).
std::vector<GradCheckResult> run_gradient_suite(GradScope scope, std::uint64_t seed = 7);

/// Median wall time in seconds of an inference-mode scan at each length.
std::vector<double> time_scan(std::span<const std::size_t> lengths, const ssm::Dims& dims, std::size_t repetitions,
                              std::uint64_t seed = 1);

}  // namespace mammil
