#include "mammil/wsi_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <utility>

#include "mammil/error.hpp"

namespace mammil {

void InstanceBag::validate() {
  if (num_instances == 0) throw ValidationError("bag '" + bag_id + "' has no instances");
  if (dim == 0) throw ValidationError("bag '" + bag_id + "' has zero feature dimension");
  if (features.size() != num_instances * dim) {
    throw DimensionError("bag '" + bag_id + "': feature matrix size does not match M×D");
  }
  if (coords.size() != num_instances * 2) throw DimensionError("bag '" + bag_id + "': coordinate matrix is not M×2");
  for (real v : features)
    if (!std::isfinite(v)) throw ValidationError("bag '" + bag_id + "' has non-finite features");
  for (real v : coords)
    if (!std::isfinite(v)) throw ValidationError("bag '" + bag_id + "' has non-finite coordinates");
  std::set<std::pair<real, real>> seen;
  for (std::size_t i = 0; i < num_instances; ++i) {
    if (!seen.emplace(coords[2 * i], coords[2 * i + 1]).second) {
      warnings.push_back("duplicate coordinate at instance " + std::to_string(i));
    }
  }
}

Tensor InstanceBag::feature_tensor() const { return Tensor::from({num_instances, dim}, features); }

WsiGraph WsiGraph::from_edges(std::size_t num_nodes, std::vector<Edge> edges) {
  WsiGraph g;
  g.num_nodes = num_nodes;
  g.adjacency.assign(num_nodes, {});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto& e : edges) {
    if (e.u == e.v) throw ValidationError("graph: self-loop at node " + std::to_string(e.u));
    if (e.u > e.v) std::swap(e.u, e.v);
    if (e.v >= num_nodes) throw ValidationError("graph: edge endpoint out of range");
    if (!(e.weight >= 0 && e.weight <= 2)) throw ValidationError("graph: edge weight outside [0, 2]");
    if (!seen.emplace(e.u, e.v).second) {
      throw ValidationError("graph: duplicate edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
    }
    g.adjacency[e.u].push_back(e.v);
    g.adjacency[e.v].push_back(e.u);
  }
  for (auto& nb : g.adjacency) std::sort(nb.begin(), nb.end());
  g.edges = std::move(edges);
  return g;
}

double cosine_distance(std::span<const real> u, std::span<const real> v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine_distance: lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += double(u[i]) * double(v[i]);
    nu += double(u[i]) * double(u[i]);
    nv += double(v[i]) * double(v[i]);
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  if (nu < 1e-12 || nv < 1e-12) return 1.0;
  // Rounding can push the ratio marginally outside [-1, 1].
  return std::clamp(1.0 - dot / (nu * nv), 0.0, 2.0);
}

namespace {
double coord_distance(const InstanceBag& bag, std::size_t i, std::size_t j, CoordMetric metric) {
  if (metric == CoordMetric::cosine) return cosine_distance(bag.coord_row(i), bag.coord_row(j));
  const double dx = double(bag.coords[2 * i]) - double(bag.coords[2 * j]);
  const double dy = double(bag.coords[2 * i + 1]) - double(bag.coords[2 * j + 1]);
  return std::sqrt(dx * dx + dy * dy);
}
}  // namespace

WsiGraph build_knn_graph(const InstanceBag& bag, std::size_t k, CoordMetric metric) {
  if (k < 1) throw ValidationError("build_knn_graph: k must be at least 1");
  const std::size_t M = bag.num_instances;
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < M; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < M; ++j)
      if (j != i) cand.emplace_back(coord_distance(bag, i, j, metric), j);
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    for (std::size_t t = 0; t < take; ++t) {
      const std::size_t j = cand[t].second;
      pairs.emplace(std::min(i, j), std::max(i, j));
    }
  }
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [u, v] : pairs) {
    edges.push_back({u, v, real(cosine_distance(bag.feature_row(u), bag.feature_row(v)))});
  }
  return WsiGraph::from_edges(M, std::move(edges));
}

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    std::size_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) x = std::exchange(parent_[x], root);
    return root;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

}  // namespace

real SpanningForest::total_weight() const {
  real total = 0;
  for (const auto& e : tree_edges) total += e.weight;
  return total;
}

std::vector<std::vector<std::size_t>> SpanningForest::trees() const {
  std::vector<std::vector<std::size_t>> out(roots.size());
  for (std::size_t n = 0; n < num_nodes; ++n) out[component[n]].push_back(n);
  return out;
}

void SpanningForest::reroot(std::span<const std::size_t> new_roots) {
  if (new_roots.size() != roots.size()) throw ValidationError("reroot: one root per tree required");
  for (std::size_t t = 0; t < new_roots.size(); ++t) {
    if (new_roots[t] >= num_nodes || component[new_roots[t]] != t) {
      throw ValidationError("reroot: root " + std::to_string(new_roots[t]) + " is not in tree " + std::to_string(t));
    }
  }
  parent.assign(num_nodes, std::nullopt);
  children.assign(num_nodes, {});
  roots.assign(new_roots.begin(), new_roots.end());
  std::deque<std::size_t> queue;
  std::vector<bool> seen(num_nodes, false);
  for (auto r : roots) {
    queue.push_back(r);
    seen[r] = true;
    while (!queue.empty()) {
      const std::size_t n = queue.front();
      queue.pop_front();
      for (auto c : neighbors[n]) {
        if (seen[c]) continue;
        seen[c] = true;
        parent[c] = n;
        children[n].push_back(c);  // ascending because neighbors are
        queue.push_back(c);
      }
    }
  }
}

SpanningForest kruskal_msf(const WsiGraph& graph) {
  const std::size_t M = graph.num_nodes;
  std::vector<Edge> sorted = graph.edges;
  for (auto& e : sorted)
    if (e.u > e.v) std::swap(e.u, e.v);
  std::sort(sorted.begin(), sorted.end(), [](const Edge& a, const Edge& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });

  SpanningForest f;
  f.num_nodes = M;
  f.neighbors.assign(M, {});
  DisjointSet dsu(M);
  for (const auto& e : sorted) {
    if (f.tree_edges.size() + 1 == M) break;
    if (dsu.unite(e.u, e.v)) {
      f.tree_edges.push_back(e);
      f.neighbors[e.u].push_back(e.v);
      f.neighbors[e.v].push_back(e.u);
    }
  }
  for (auto& nb : f.neighbors) std::sort(nb.begin(), nb.end());

  // Trees are numbered by their smallest node; that node is the initial root.
  f.component.assign(M, 0);
  std::vector<std::size_t> tree_of_set(M, M);
  std::vector<std::size_t> roots;
  for (std::size_t n = 0; n < M; ++n) {
    const std::size_t s = dsu.find(n);
    if (tree_of_set[s] == M) {
      tree_of_set[s] = roots.size();
      roots.push_back(n);
    }
    f.component[n] = tree_of_set[s];
  }
  f.roots = roots;
  f.reroot(roots);
  return f;
}

const char* traversal_name(Traversal t) {
  switch (t) {
    case Traversal::index: return "index";
    case Traversal::pre: return "pre";
    case Traversal::post: return "post";
    case Traversal::level: return "level";
  }
  return "?";
}

Permutation traverse_rooted(const SpanningForest& forest, Traversal strategy) {
  const std::size_t M = forest.num_nodes;
  Permutation out;
  out.reserve(M);
  if (strategy == Traversal::index) {
    for (std::size_t i = 0; i < M; ++i) out.push_back(i);
    return out;
  }
  for (auto root : forest.roots) {
    switch (strategy) {
      case Traversal::pre: {
        std::vector<std::size_t> stack{root};
        while (!stack.empty()) {
          const std::size_t n = stack.back();
          stack.pop_back();
          out.push_back(n);
          const auto& ch = forest.children[n];
          for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
        }
        break;
      }
      case Traversal::post: {
        // (node, next child position)
        std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
        while (!stack.empty()) {
          auto& [n, next] = stack.back();
          if (next < forest.children[n].size()) {
            const std::size_t c = forest.children[n][next++];
            stack.emplace_back(c, 0);
          } else {
            out.push_back(n);
            stack.pop_back();
          }
        }
        break;
      }
      case Traversal::level: {
        std::deque<std::size_t> queue{root};
        while (!queue.empty()) {
          const std::size_t n = queue.front();
          queue.pop_front();
          out.push_back(n);
          for (auto c : forest.children[n]) queue.push_back(c);
        }
        break;
      }
      case Traversal::index: break;
    }
  }
  return out;
}

std::vector<std::size_t> sample_roots(const SpanningForest& forest, Rng& rng) {
  const auto trees = forest.trees();
  std::vector<std::size_t> roots;
  roots.reserve(trees.size());
  for (const auto& nodes : trees) {
    std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
    roots.push_back(nodes[pick(rng)]);
  }
  return roots;
}

Permutation traverse(const SpanningForest& forest, Traversal strategy, Rng& rng) {
  if (strategy == Traversal::index) return traverse_rooted(forest, strategy);
  SpanningForest rooted = forest;
  rooted.reroot(sample_roots(forest, rng));
  return traverse_rooted(rooted, strategy);
}

TraversalOrders serialize_all(const SpanningForest& forest, Rng& rng) {
  SpanningForest rooted = forest;
  rooted.reroot(sample_roots(forest, rng));
  TraversalOrders orders;
  for (auto t : kAllTraversals) orders.orders[static_cast<std::size_t>(t)] = traverse_rooted(rooted, t);
  return orders;
}

bool is_permutation_of_range(std::span<const std::size_t> p) {
  std::vector<bool> seen(p.size(), false);
  for (auto v : p) {
    if (v >= p.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Permutation invert_permutation(std::span<const std::size_t> p) {
  if (!is_permutation_of_range(p)) throw ValidationError("invert_permutation: input is not a permutation");
  Permutation q(p.size());
  for (std::size_t t = 0; t < p.size(); ++t) q[p[t]] = t;
  return q;
}

}  // namespace mammil
