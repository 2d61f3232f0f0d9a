#include <algorithm>
#include <cmath>

#include "mammil/blocks.hpp"
#include "mammil/error.hpp"

namespace mammil {

GiaBlock GiaBlock::init(std::size_t dim, Rng& rng) {
  GiaBlock b;
  b.fc1 = Linear::init(dim, dim, rng);
  b.fc2 = Linear::init(dim, dim, rng);
  return b;
}

void GiaBlock::append_named(NamedTensors& out, const std::string& prefix) const {
  fc1.append_named(out, prefix + ".fc1");
  fc2.append_named(out, prefix + ".fc2");
}

Tensor neighbor_softmax_aggregate(Tape& tape, const Tensor& messages, const WsiGraph& graph) {
  if (messages.ndim() != 2 || messages.rows() != graph.num_nodes) {
    throw DimensionError("neighbor_softmax_aggregate: messages " + shape_str(messages.shape()) + " for graph of " +
                         std::to_string(graph.num_nodes) + " nodes");
  }
  const std::size_t M = messages.rows(), D = messages.cols();
  const bool rec = tape.wants({&messages});
  Tensor out = Tensor::zeros({M, D}, rec);
  const auto Mv = messages.data();
  auto O = out.data();
  // Softmax weights per (node, neighbour slot, dim), kept for the adjoint.
  std::vector<std::vector<real>> weights(M);
  for (std::size_t i = 0; i < M; ++i) {
    const auto& nb = graph.adjacency[i];
    if (nb.empty()) continue;
    auto& w = weights[i];
    w.resize(nb.size() * D);
    for (std::size_t d = 0; d < D; ++d) {
      real mx = Mv[nb[0] * D + d];
      for (auto j : nb) mx = std::max(mx, Mv[j * D + d]);
      real z = 0;
      for (std::size_t s = 0; s < nb.size(); ++s) {
        w[s * D + d] = std::exp(Mv[nb[s] * D + d] - mx);
        z += w[s * D + d];
      }
      real acc = 0;
      for (std::size_t s = 0; s < nb.size(); ++s) {
        w[s * D + d] /= z;
        acc += w[s * D + d] * Mv[nb[s] * D + d];
      }
      O[i * D + d] = acc;
    }
  }
  if (rec) {
    auto nm = messages.node();
    auto no = out.node();
    const auto adjacency = graph.adjacency;
    tape.record([nm, no, adjacency, weights = std::move(weights), M, D] {
      auto gm = nm->grad_span();
      const auto G = no->grad_span();
      const auto& Mv = nm->value;
      const auto& O = no->value;
      // d out / d m_j = w_j (1 + m_j - out)
      for (std::size_t i = 0; i < M; ++i) {
        const auto& nb = adjacency[i];
        for (std::size_t s = 0; s < nb.size(); ++s) {
          const std::size_t j = nb[s];
          for (std::size_t d = 0; d < D; ++d) {
            const real w = weights[i][s * D + d];
            gm[j * D + d] += G[i * D + d] * w * (real(1) + Mv[j * D + d] - O[i * D + d]);
          }
        }
      }
    });
  }
  return out;
}

Tensor gia_forward(Tape& tape, const Tensor& x, const WsiGraph& graph, const GiaBlock& block) {
  if (x.ndim() != 2 || x.rows() != graph.num_nodes) {
    throw DimensionError("gia_forward: input " + shape_str(x.shape()) + " for graph of " +
                         std::to_string(graph.num_nodes) + " nodes");
  }
  Tensor messages = ops::add_scalar(tape, ops::relu(tape, x), block.epsilon);
  Tensor updated = ops::add(tape, x, neighbor_softmax_aggregate(tape, messages, graph));
  return block.fc2(tape, ops::relu(tape, block.fc1(tape, updated)));
}

Tensor gia_isolated_node(Tape& tape, const Tensor& x_row, const GiaBlock& block) {
  return block.fc2(tape, ops::relu(tape, block.fc1(tape, x_row)));
}

}  // namespace mammil
