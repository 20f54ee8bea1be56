#include "opf/chordal.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

namespace opf {

Graph network_graph(const Network& net) {
  Graph g;
  for (const auto& b : net.buses) g.nodes.push_back(b.id);
  std::sort(g.nodes.begin(), g.nodes.end());
  std::set<std::pair<int, int>> edges;
  for (const auto& br : net.branches) {
    if (br.from == br.to) continue;
    edges.emplace(std::min(br.from, br.to), std::max(br.from, br.to));
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

std::pair<std::vector<int>, std::vector<std::pair<int, int>>> chordal_completion(const Graph& g) {
  std::map<int, std::set<int>> adj;
  for (int v : g.nodes) adj[v];
  for (auto& [a, b] : g.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }

  std::vector<int> order;
  std::vector<std::pair<int, int>> fill;
  std::set<int> active(g.nodes.begin(), g.nodes.end());

  while (!active.empty()) {
    int best = -1;
    size_t best_deg = 0;
    for (int v : active) {  // ascending ids, so ties pick the lowest id
      size_t deg = adj[v].size();
      if (best < 0 || deg < best_deg) {
        best = v;
        best_deg = deg;
      }
    }
    order.push_back(best);
    std::vector<int> nbrs(adj[best].begin(), adj[best].end());
    for (size_t i = 0; i < nbrs.size(); ++i) {
      for (size_t j = i + 1; j < nbrs.size(); ++j) {
        int a = nbrs[i], b = nbrs[j];
        if (!adj[a].count(b)) {
          adj[a].insert(b);
          adj[b].insert(a);
          fill.emplace_back(std::min(a, b), std::max(a, b));
        }
      }
    }
    for (int u : nbrs) adj[u].erase(best);
    adj.erase(best);
    active.erase(best);
  }
  return {std::move(order), std::move(fill)};
}

CliqueTree clique_tree(const Graph& g, const std::vector<int>& elimination_order,
                       const std::vector<std::pair<int, int>>& fill_edges) {
  std::map<int, std::set<int>> adj;
  for (int v : g.nodes) adj[v];
  for (auto& [a, b] : g.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  for (auto& [a, b] : fill_edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }

  std::map<int, size_t> pos;
  for (size_t i = 0; i < elimination_order.size(); ++i) pos[elimination_order[i]] = i;

  // perfect elimination order: later neighbors of each vertex form a clique
  std::vector<std::vector<int>> candidates;
  for (int v : elimination_order) {
    std::vector<int> higher;
    for (int u : adj[v]) {
      if (pos.at(u) > pos.at(v)) higher.push_back(u);
    }
    for (size_t i = 0; i < higher.size(); ++i) {
      for (size_t j = i + 1; j < higher.size(); ++j) {
        if (!adj[higher[i]].count(higher[j])) {
          throw NotChordal("graph plus fill is not chordal for the given order");
        }
      }
    }
    higher.push_back(v);
    std::sort(higher.begin(), higher.end());
    candidates.push_back(std::move(higher));
  }

  CliqueTree tree;
  tree.elimination_order = elimination_order;
  tree.fill_edges = fill_edges;

  // keep maximal candidates, first occurrence wins
  for (auto& c : candidates) {
    bool contained = false;
    for (auto& kept : tree.cliques) {
      if (std::includes(kept.begin(), kept.end(), c.begin(), c.end())) {
        contained = true;
        break;
      }
    }
    if (!contained) {
      // earlier non-maximal cliques may be subsets of this one
      std::erase_if(tree.cliques, [&](const std::vector<int>& kept) {
        return std::includes(c.begin(), c.end(), kept.begin(), kept.end());
      });
      tree.cliques.push_back(std::move(c));
    }
  }

  // maximum-weight spanning tree on intersection sizes (Kruskal)
  size_t nc = tree.cliques.size();
  struct CEdge {
    size_t w, i, j;
  };
  std::vector<CEdge> cedges;
  for (size_t i = 0; i < nc; ++i) {
    for (size_t j = i + 1; j < nc; ++j) {
      std::vector<int> inter;
      std::set_intersection(tree.cliques[i].begin(), tree.cliques[i].end(),
                            tree.cliques[j].begin(), tree.cliques[j].end(),
                            std::back_inserter(inter));
      if (!inter.empty()) cedges.push_back({inter.size(), i, j});
    }
  }
  std::sort(cedges.begin(), cedges.end(), [](const CEdge& a, const CEdge& b) {
    if (a.w != b.w) return a.w > b.w;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  std::vector<size_t> parent(nc);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : cedges) {
    size_t a = find(e.i), b = find(e.j);
    if (a != b) {
      parent[a] = b;
      tree.tree_edges.emplace_back(static_cast<int>(e.i), static_cast<int>(e.j));
    }
  }
  return tree;
}

MinorSet enumerate_minors(const CliqueTree& tree, int cap) {
  MinorSet ms;
  std::set<std::pair<int, int>> seen2;
  std::set<std::array<int, 3>> seen3;
  for (const auto& c : tree.cliques) {
    for (size_t i = 0; i < c.size(); ++i) {
      for (size_t j = i + 1; j < c.size(); ++j) {
        std::pair<int, int> p{c[i], c[j]};
        if (seen2.insert(p).second) ms.minors2.push_back(p);
      }
    }
  }
  for (const auto& c : tree.cliques) {
    for (size_t i = 0; i < c.size() && static_cast<int>(ms.minors3.size()) < cap; ++i) {
      for (size_t j = i + 1; j < c.size() && static_cast<int>(ms.minors3.size()) < cap; ++j) {
        for (size_t k = j + 1; k < c.size() && static_cast<int>(ms.minors3.size()) < cap; ++k) {
          std::array<int, 3> t{c[i], c[j], c[k]};
          if (seen3.insert(t).second) ms.minors3.push_back(t);
        }
      }
    }
  }
  return ms;
}

void dump_cliques(const CliqueTree& tree, std::ostream& os) {
  for (size_t i = 0; i < tree.cliques.size(); ++i) {
    os << "clique " << i << ":";
    for (int v : tree.cliques[i]) os << ' ' << v;
    os << '\n';
  }
  for (auto& [a, b] : tree.tree_edges) os << "tree edge " << a << " - " << b << '\n';
}

}  // namespace opf
