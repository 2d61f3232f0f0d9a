#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mammil/tensor.hpp"

namespace mammil {

using Rng = std::mt19937_64;

enum class Event : std::uint8_t { observed, censored };

struct ClassTarget {
  std::size_t label = 0;
};

struct SurvivalTarget {
  std::size_t time_bin = 0;
  Event event = Event::observed;
};

/// One bag: M instances with D features each plus 2-D patch coordinates.
struct InstanceBag {
  std::string bag_id;
  std::size_t num_instances = 0;
  std::size_t dim = 0;
  std::vector<real> features;  // M×D row-major
  std::vector<real> coords;    // M×2 row-major
  std::variant<ClassTarget, SurvivalTarget> target;
  std::vector<std::string> warnings;

  std::span<const real> feature_row(std::size_t i) const { return {&features[i * dim], dim}; }
  std::span<const real> coord_row(std::size_t i) const { return {&coords[i * 2], 2}; }

  /// Checks shape and finiteness; records a warning for duplicate coordinates.
  void validate();
  Tensor feature_tensor() const;
};

struct Edge {
  std::size_t u;  // u < v
  std::size_t v;
  real weight;
};

/// Undirected weighted instance graph; weights are cosine distances in [0, 2].
struct WsiGraph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> adjacency;  // ascending

  /// Builds adjacency from `edges`; rejects self-loops, duplicates and
  /// out-of-range weights.
  static WsiGraph from_edges(std::size_t num_nodes, std::vector<Edge> edges);
};

enum class CoordMetric { cosine, euclidean };

double cosine_distance(std::span<const real> u, std::span<const real> v);

/// kNN over coordinates, symmetrized by union; edges weighted by the cosine
/// distance between feature rows. Ties go to the lower node index.
WsiGraph build_knn_graph(const InstanceBag& bag, std::size_t k, CoordMetric metric = CoordMetric::cosine);

/// Minimum spanning forest with per-tree rooting.
struct SpanningForest {
  std::size_t num_nodes = 0;
  std::vector<Edge> tree_edges;                    // in acceptance order
  std::vector<std::vector<std::size_t>> neighbors;  // undirected tree adjacency, ascending
  std::vector<std::optional<std::size_t>> parent;
  std::vector<std::vector<std::size_t>> children;  // ascending
  std::vector<std::size_t> roots;                  // one per tree, trees ordered by smallest node
  std::vector<std::size_t> component;              // tree index per node

  std::size_t num_trees() const { return roots.size(); }
  real total_weight() const;
  /// Nodes of each tree, ascending.
  std::vector<std::vector<std::size_t>> trees() const;
  /// Re-roots every tree; `new_roots[t]` must belong to tree t.
  void reroot(std::span<const std::size_t> new_roots);
};

/// Kruskal over edges sorted by (weight, u, v) with a path-compressing
/// union-find. Each tree is initially rooted at its smallest node.
SpanningForest kruskal_msf(const WsiGraph& graph);

enum class Traversal : std::uint8_t { index = 0, pre = 1, post = 2, level = 3 };
inline constexpr std::array<Traversal, 4> kAllTraversals = {Traversal::index, Traversal::pre, Traversal::post,
                                                            Traversal::level};
const char* traversal_name(Traversal t);

using Permutation = std::vector<std::size_t>;

/// Serializes the forest under its current rooting. Children are visited in
/// ascending index order; trees are concatenated by smallest node index.
Permutation traverse_rooted(const SpanningForest& forest, Traversal strategy);

/// Draws one uniformly random root per tree (in tree order).
std::vector<std::size_t> sample_roots(const SpanningForest& forest, Rng& rng);

/// Re-roots at random roots then serializes. INDEX consumes no randomness.
Permutation traverse(const SpanningForest& forest, Traversal strategy, Rng& rng);

struct TraversalOrders {
  std::array<Permutation, 4> orders;  // indexed by Traversal
  const Permutation& operator[](Traversal t) const { return orders[static_cast<std::size_t>(t)]; }
};

/// All four orders from a single root draw.
TraversalOrders serialize_all(const SpanningForest& forest, Rng& rng);

Permutation invert_permutation(std::span<const std::size_t> p);
bool is_permutation_of_range(std::span<const std::size_t> p);

}  // namespace mammil
