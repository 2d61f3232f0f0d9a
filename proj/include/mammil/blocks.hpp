#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mammil/layers.hpp"
#include "mammil/ssm.hpp"
#include "mammil/wsi_graph.hpp"

namespace mammil {

enum class ScanStrategy { topology_aware, unidirectional, bidirectional, shuffle_rescan };

const char* scan_strategy_name(ScanStrategy s);
ScanStrategy parse_scan_strategy(const std::string& name);

/// Number of SSM branches and whether each branch scans in both directions.
std::size_t branch_count(ScanStrategy s);
bool is_bidirectional(ScanStrategy s);

/// Four traversal-ordered Bi-SSM branches fused by averaging, gated by
/// SiLU of a parallel projection, layer-normalized, projected back.
///
/// The ablation strategies reuse the same structure with a different set of
/// branch orders: a single index-order scan (uni- or bidirectional), or four
/// independently shuffled orders.
struct TaMambaBlock {
  ScanStrategy strategy = ScanStrategy::topology_aware;
  bool residual = false;
  Linear proj_x;  // D -> D_inner
  Linear proj_z;  // D -> D_inner
  std::vector<ssm::HeadParams> forward_ssm;   // one per branch
  std::vector<ssm::HeadParams> backward_ssm;  // empty unless bidirectional
  Tensor norm_gamma;  // [D_inner]
  Tensor norm_beta;   // [D_inner]
  real norm_eps = real(1e-5);
  Linear proj_out;  // D_inner -> D

  static TaMambaBlock init(std::size_t dim, const ssm::Dims& inner, ScanStrategy strategy, bool residual, Rng& rng);
  std::size_t dim() const { return proj_x.weight.rows(); }
  std::size_t inner_dim() const { return proj_x.weight.cols(); }
  void append_named(NamedTensors& out, const std::string& prefix) const;
};

/// Row orders fed to each branch of `block`. Topology-aware uses the four
/// traversal orders; shuffle_rescan draws fresh permutations from `rng`.
std::vector<Permutation> branch_orders(const TaMambaBlock& block, const TraversalOrders& orders, Rng& rng);

Tensor ta_mamba_forward(Tape& tape, const Tensor& x, std::span<const Permutation> orders, const TaMambaBlock& block);
Tensor ta_mamba_forward(Tape& tape, const Tensor& x, const TraversalOrders& orders, const TaMambaBlock& block);

inline constexpr real kGiaEpsilon = real(1e-7);

/// x_i' = MLP(x_i + A({ReLU(x_j) + eps : j in N(i)})), A = per-dimension
/// softmax-weighted sum over the first-order neighbours.
struct GiaBlock {
  Linear fc1;  // D -> D, ReLU
  Linear fc2;  // D -> D
  real epsilon = kGiaEpsilon;

  static GiaBlock init(std::size_t dim, Rng& rng);
  void append_named(NamedTensors& out, const std::string& prefix) const;
};

/// out[i][d] = sum_j softmax_j(m[j][d]) * m[j][d] over neighbours of i; zero
/// rows for isolated nodes.
Tensor neighbor_softmax_aggregate(Tape& tape, const Tensor& messages, const WsiGraph& graph);

Tensor gia_forward(Tape& tape, const Tensor& x, const WsiGraph& graph, const GiaBlock& block);

/// Update for a node without neighbours: MLP(x_i).
Tensor gia_isolated_node(Tape& tape, const Tensor& x_row, const GiaBlock& block);

}  // namespace mammil
