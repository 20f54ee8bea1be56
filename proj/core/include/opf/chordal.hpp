#pragma once

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <utility>
#include <vector>

#include "opf/network.hpp"

namespace opf {

/// Undirected simple graph over bus ids (parallel branches collapse to one
/// edge, self-loops dropped).
struct Graph {
  std::vector<int> nodes;                  // sorted unique ids
  std::vector<std::pair<int, int>> edges;  // a < b, sorted, deduped
};

Graph network_graph(const Network& net);

/// Tree decomposition of a chordal completion. Cliques hold sorted bus ids.
struct CliqueTree {
  std::vector<std::vector<int>> cliques;
  std::vector<std::pair<int, int>> tree_edges;  // indices into cliques
  std::vector<std::pair<int, int>> fill_edges;  // bus id pairs added
  std::vector<int> elimination_order;           // bus ids
};

struct MinorSet {
  std::vector<std::pair<int, int>> minors2;
  std::vector<std::array<int, 3>> minors3;
};

struct NotChordal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Greedy minimum-degree elimination, ties broken by lowest bus id.
/// Returns the elimination order and the fill edges it introduces.
std::pair<std::vector<int>, std::vector<std::pair<int, int>>> chordal_completion(
    const Graph& g);

/// Maximal cliques from the elimination process plus a maximum-weight
/// spanning tree on clique intersection sizes. Throws NotChordal when the
/// order is not a perfect elimination order of graph + fill.
CliqueTree clique_tree(const Graph& g, const std::vector<int>& elimination_order,
                       const std::vector<std::pair<int, int>>& fill_edges);

/// All unordered pairs and triples inside each clique, globally deduped in
/// deterministic clique order; the number of triples is capped.
MinorSet enumerate_minors(const CliqueTree& tree, int cap = 30000);

void dump_cliques(const CliqueTree& tree, std::ostream& os);

}  // namespace opf
