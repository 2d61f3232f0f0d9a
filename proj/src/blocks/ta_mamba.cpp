#include <algorithm>
#include <numeric>

#include "mammil/blocks.hpp"
#include "mammil/error.hpp"

namespace mammil {

const char* scan_strategy_name(ScanStrategy s) {
  switch (s) {
    case ScanStrategy::topology_aware: return "topology_aware";
    case ScanStrategy::unidirectional: return "unidirectional";
    case ScanStrategy::bidirectional: return "bidirectional";
    case ScanStrategy::shuffle_rescan: return "shuffle_rescan";
  }
  return "?";
}

ScanStrategy parse_scan_strategy(const std::string& name) {
  for (auto s : {ScanStrategy::topology_aware, ScanStrategy::unidirectional, ScanStrategy::bidirectional,
                 ScanStrategy::shuffle_rescan}) {
    if (name == scan_strategy_name(s)) return s;
  }
  throw ValidationError("unknown scanning strategy '" + name + "'");
}

std::size_t branch_count(ScanStrategy s) {
  switch (s) {
    case ScanStrategy::topology_aware:
    case ScanStrategy::shuffle_rescan: return 4;
    case ScanStrategy::unidirectional:
    case ScanStrategy::bidirectional: return 1;
  }
  return 0;
}

bool is_bidirectional(ScanStrategy s) { return s != ScanStrategy::unidirectional; }

TaMambaBlock TaMambaBlock::init(std::size_t dim, const ssm::Dims& inner, ScanStrategy strategy, bool residual,
                                Rng& rng) {
  TaMambaBlock b;
  b.strategy = strategy;
  b.residual = residual;
  const std::size_t d_inner = inner.width();
  b.proj_x = Linear::init(dim, d_inner, rng);
  b.proj_z = Linear::init(dim, d_inner, rng);
  for (std::size_t i = 0; i < branch_count(strategy); ++i) {
    b.forward_ssm.push_back(ssm::HeadParams::init(inner, rng));
    if (is_bidirectional(strategy)) b.backward_ssm.push_back(ssm::HeadParams::init(inner, rng));
  }
  b.norm_gamma = Tensor::filled({d_inner}, 1, true);
  b.norm_beta = Tensor::zeros({d_inner}, true);
  b.proj_out = Linear::init(d_inner, dim, rng);
  return b;
}

void TaMambaBlock::append_named(NamedTensors& out, const std::string& prefix) const {
  proj_x.append_named(out, prefix + ".proj_x");
  proj_z.append_named(out, prefix + ".proj_z");
  for (std::size_t i = 0; i < forward_ssm.size(); ++i) {
    const std::string branch = prefix + ".branch" + std::to_string(i);
    for (auto& nt : forward_ssm[i].named(branch + ".fwd")) out.push_back(nt);
    if (i < backward_ssm.size())
      for (auto& nt : backward_ssm[i].named(branch + ".bwd")) out.push_back(nt);
  }
  out.emplace_back(prefix + ".norm.gamma", norm_gamma);
  out.emplace_back(prefix + ".norm.beta", norm_beta);
  proj_out.append_named(out, prefix + ".proj_out");
}

std::vector<Permutation> branch_orders(const TaMambaBlock& block, const TraversalOrders& orders, Rng& rng) {
  const std::size_t M = orders[Traversal::index].size();
  switch (block.strategy) {
    case ScanStrategy::topology_aware:
      return {orders.orders.begin(), orders.orders.end()};
    case ScanStrategy::unidirectional:
    case ScanStrategy::bidirectional:
      return {orders[Traversal::index]};
    case ScanStrategy::shuffle_rescan: {
      std::vector<Permutation> out;
      for (std::size_t i = 0; i < branch_count(block.strategy); ++i) {
        Permutation p(M);
        std::iota(p.begin(), p.end(), std::size_t{0});
        std::shuffle(p.begin(), p.end(), rng);
        out.push_back(std::move(p));
      }
      return out;
    }
  }
  return {};
}

Tensor ta_mamba_forward(Tape& tape, const Tensor& x, std::span<const Permutation> orders, const TaMambaBlock& block) {
  if (x.ndim() != 2 || x.cols() != block.dim()) {
    throw DimensionError("ta_mamba_forward: input " + shape_str(x.shape()) + " vs block width " +
                         std::to_string(block.dim()));
  }
  if (orders.size() != block.forward_ssm.size()) {
    throw DimensionError("ta_mamba_forward: " + std::to_string(orders.size()) + " orders for " +
                         std::to_string(block.forward_ssm.size()) + " branches");
  }
  const std::size_t M = x.rows();
  const Tensor x_bar = block.proj_x(tape, x);
  const Tensor z_bar = block.proj_z(tape, x);

  std::vector<Tensor> branch_out;
  branch_out.reserve(orders.size());
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (orders[i].size() != M) {
      throw DimensionError("ta_mamba_forward: order of length " + std::to_string(orders[i].size()) + " for " +
                           std::to_string(M) + " instances");
    }
    const Permutation inverse = invert_permutation(orders[i]);
    Tensor seq = ops::gather_rows(tape, x_bar, orders[i]);
    Tensor y = block.backward_ssm.empty() ? ssm::forward(tape, seq, block.forward_ssm[i])
                                          : ssm::bi_ssm(tape, seq, block.forward_ssm[i], block.backward_ssm[i]);
    branch_out.push_back(ops::gather_rows(tape, y, inverse));
  }
  Tensor fused = ops::mean_of(tape, branch_out);
  Tensor gated = ops::mul(tape, ops::silu(tape, z_bar), fused);
  Tensor normed = ops::layer_norm(tape, gated, block.norm_gamma, block.norm_beta, block.norm_eps);
  Tensor out = block.proj_out(tape, normed);
  if (block.residual) out = ops::add(tape, out, x);
  return out;
}

Tensor ta_mamba_forward(Tape& tape, const Tensor& x, const TraversalOrders& orders, const TaMambaBlock& block) {
  if (block.strategy == ScanStrategy::shuffle_rescan) {
    throw ValidationError("ta_mamba_forward: shuffle_rescan needs explicit branch orders");
  }
  Rng unused;
  const auto branch = branch_orders(block, orders, unused);
  return ta_mamba_forward(tape, x, branch, block);
}

}  // namespace mammil
