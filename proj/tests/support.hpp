#pragma once

#include <random>
#include <vector>

#include "mammil/blocks.hpp"
#include "mammil/ssm.hpp"
#include "mammil/tensor.hpp"
#include "mammil/wsi_graph.hpp"
#include "oracles.hpp"

namespace testing {

using mammil::real;
using mammil::Rng;
using mammil::Tensor;

inline Tensor random_tensor(mammil::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = false) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<real> v(mammil::shape_numel(shape));
  for (auto& x : v) x = real(dist(rng));
  return Tensor::from(std::move(shape), std::move(v), grad);
}

inline oracle::Mat to_mat(const Tensor& t) {
  oracle::Mat m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.numel(); ++i) m.v[i] = double(t[i]);
  return m;
}

inline oracle::Vec to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline double max_abs_diff(const oracle::Vec& a, const oracle::Vec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : 1e300;
}

inline double max_abs_diff(const Tensor& t, const oracle::Mat& m) { return max_abs_diff(to_vec(t), m.v); }

inline oracle::SsmParams to_oracle(const mammil::ssm::HeadParams& p) {
  return {to_vec(p.a_log), to_mat(p.w_b), to_mat(p.w_c), to_mat(p.w_delta), to_vec(p.delta_bias), p.dims.heads,
          p.dims.head_dim};
}

/// HeadParams with every tensor, including W_Δ, randomized.
inline mammil::ssm::HeadParams random_head_params(const mammil::ssm::Dims& dims, Rng& rng) {
  auto p = mammil::ssm::HeadParams::init(dims, rng);
  p.w_delta = random_tensor(p.w_delta.shape(), rng, -0.5, 0.5, true);
  p.w_b = random_tensor(p.w_b.shape(), rng, -0.8, 0.8, true);
  p.w_c = random_tensor(p.w_c.shape(), rng, -0.8, 0.8, true);
  return p;
}

inline mammil::InstanceBag random_bag(Rng& rng, std::size_t m, std::size_t dim, std::size_t label = 0) {
  mammil::InstanceBag bag;
  bag.bag_id = "test_bag";
  bag.num_instances = m;
  bag.dim = dim;
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> pos(1, 100);
  bag.features.resize(m * dim);
  for (auto& v : bag.features) v = real(normal(rng));
  bag.coords.resize(m * 2);
  for (auto& v : bag.coords) v = real(pos(rng));
  bag.target = mammil::ClassTarget{label};
  return bag;
}

/// Graph with random weights over random distinct pairs.
inline mammil::WsiGraph random_graph(Rng& rng, std::size_t m, double density) {
  std::vector<mammil::Edge> edges;
  std::bernoulli_distribution keep(density);
  std::uniform_real_distribution<double> w(0, 2);
  for (std::size_t u = 0; u < m; ++u)
    for (std::size_t v = u + 1; v < m; ++v)
      if (keep(rng)) edges.push_back({u, v, real(w(rng))});
  return mammil::WsiGraph::from_edges(m, std::move(edges));
}

/// Random tree on m nodes (each node i > 0 attaches to a random earlier node).
inline mammil::WsiGraph random_tree_graph(Rng& rng, std::size_t m) {
  std::vector<mammil::Edge> edges;
  std::uniform_real_distribution<double> w(0, 2);
  for (std::size_t v = 1; v < m; ++v) {
    const std::size_t u = std::uniform_int_distribution<std::size_t>(0, v - 1)(rng);
    edges.push_back({u, v, real(w(rng))});
  }
  return mammil::WsiGraph::from_edges(m, std::move(edges));
}

inline std::vector<oracle::WEdge> to_oracle_edges(const mammil::WsiGraph& g) {
  std::vector<oracle::WEdge> out;
  for (const auto& e : g.edges) out.push_back({e.u, e.v, double(e.weight)});
  return out;
}

}  // namespace testing
