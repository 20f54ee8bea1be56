#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "opf/chordal.hpp"
#include "opf/matpower.hpp"

using namespace opf;

namespace {

std::string pglib(const std::string& name) {
  return std::string(OPFBOUND_PGLIB_DIR) + "/" + name;
}

Graph make_graph(int n, std::vector<std::pair<int, int>> edges) {
  Graph g;
  for (int i = 1; i <= n; ++i) g.nodes.push_back(i);
  std::set<std::pair<int, int>> dedup;
  for (auto [a, b] : edges) dedup.emplace(std::min(a, b), std::max(a, b));
  g.edges.assign(dedup.begin(), dedup.end());
  return g;
}

// brute force: chordal iff no induced cycle of length >= 4 (n <= 20)
bool brute_force_chordal(const Graph& g, const std::vector<std::pair<int, int>>& fill) {
  std::set<std::pair<int, int>> adj;
  for (auto [a, b] : g.edges) adj.emplace(std::min(a, b), std::max(a, b));
  for (auto [a, b] : fill) adj.emplace(std::min(a, b), std::max(a, b));
  auto connected = [&](int a, int b) {
    return adj.count({std::min(a, b), std::max(a, b)}) > 0;
  };
  int n = static_cast<int>(g.nodes.size());
  REQUIRE(n <= 20);
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> sub;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) sub.push_back(g.nodes[static_cast<size_t>(i)]);
    }
    if (sub.size() < 4) continue;
    // induced subgraph is a cycle iff every vertex has induced degree 2 and
    // the subgraph is connected
    bool all_deg2 = true;
    for (int v : sub) {
      int deg = 0;
      for (int u : sub) {
        if (u != v && connected(u, v)) ++deg;
      }
      if (deg != 2) {
        all_deg2 = false;
        break;
      }
    }
    if (!all_deg2) continue;
    // connectivity of the induced subgraph
    std::set<int> seen{sub[0]};
    std::vector<int> stack{sub[0]};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int u : sub) {
        if (!seen.count(u) && connected(u, v)) {
          seen.insert(u);
          stack.push_back(u);
        }
      }
    }
    if (seen.size() == sub.size()) return false;  // found an induced cycle >= 4
  }
  return true;
}

bool running_intersection(const CliqueTree& t) {
  std::set<int> all;
  for (const auto& c : t.cliques) all.insert(c.begin(), c.end());
  for (int b : all) {
    std::vector<int> holders;
    for (size_t i = 0; i < t.cliques.size(); ++i) {
      if (std::count(t.cliques[i].begin(), t.cliques[i].end(), b)) {
        holders.push_back(static_cast<int>(i));
      }
    }
    if (holders.size() <= 1) continue;
    // the induced subtree over holders must be connected
    std::set<int> seen{holders[0]};
    bool grew = true;
    while (grew) {
      grew = false;
      for (auto [a, c] : t.tree_edges) {
        bool a_in = std::count(holders.begin(), holders.end(), a) > 0;
        bool c_in = std::count(holders.begin(), holders.end(), c) > 0;
        if (a_in && c_in) {
          if (seen.count(a) && !seen.count(c)) {
            seen.insert(c);
            grew = true;
          } else if (seen.count(c) && !seen.count(a)) {
            seen.insert(a);
            grew = true;
          }
        }
      }
    }
    if (seen.size() != holders.size()) return false;
  }
  return true;
}

bool edges_covered(const Graph& g, const CliqueTree& t) {
  for (auto [a, b] : g.edges) {
    bool found = false;
    for (const auto& c : t.cliques) {
      if (std::count(c.begin(), c.end(), a) && std::count(c.begin(), c.end(), b)) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("path needs no fill") {
  Graph g = make_graph(3, {{1, 2}, {2, 3}});
  auto [order, fill] = chordal_completion(g);
  CHECK(fill.empty());
  CliqueTree t = clique_tree(g, order, fill);
  REQUIRE(t.cliques.size() == 2);
  CHECK(t.cliques[0] == std::vector<int>{1, 2});
  CHECK(t.cliques[1] == std::vector<int>{2, 3});
  CHECK(t.tree_edges.size() == 1);
}

TEST_CASE("four-cycle needs exactly one chord") {
  Graph g = make_graph(4, {{1, 2}, {2, 3}, {3, 4}, {4, 1}});
  auto [order, fill] = chordal_completion(g);
  CHECK(fill.size() == 1);
  CliqueTree t = clique_tree(g, order, fill);
  CHECK(t.cliques.size() == 2);  // two triangles sharing the chord
  CHECK(t.cliques[0].size() == 3);
  CHECK(t.cliques[1].size() == 3);
}

TEST_CASE("complete graph collapses to one clique") {
  Graph g = make_graph(4, {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
  auto [order, fill] = chordal_completion(g);
  CHECK(fill.empty());
  CliqueTree t = clique_tree(g, order, fill);
  REQUIRE(t.cliques.size() == 1);
  CHECK(t.cliques[0].size() == 4);
  CHECK(t.tree_edges.empty());
}

TEST_CASE("minor enumeration") {
  SUBCASE("single triangle") {
    Graph g = make_graph(3, {{1, 2}, {2, 3}, {1, 3}});
    auto [order, fill] = chordal_completion(g);
    MinorSet ms = enumerate_minors(clique_tree(g, order, fill));
    CHECK(ms.minors2.size() == 3);
    CHECK(ms.minors3.size() == 1);
  }
  SUBCASE("two triangles sharing an edge deduplicate the shared pair") {
    Graph g = make_graph(4, {{1, 2}, {2, 3}, {1, 3}, {2, 4}, {3, 4}});
    auto [order, fill] = chordal_completion(g);
    MinorSet ms = enumerate_minors(clique_tree(g, order, fill));
    CHECK(ms.minors2.size() == 5);
    CHECK(ms.minors3.size() == 2);
  }
  SUBCASE("cap truncates triples only") {
    Graph g = make_graph(4, {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
    auto [order, fill] = chordal_completion(g);
    MinorSet ms = enumerate_minors(clique_tree(g, order, fill), 1);
    CHECK(ms.minors2.size() == 6);
    CHECK(ms.minors3.size() == 1);
  }
}

TEST_CASE("not-chordal defense fires on a bad order") {
  Graph g = make_graph(4, {{1, 2}, {2, 3}, {3, 4}, {4, 1}});
  CHECK_THROWS_AS(clique_tree(g, {1, 2, 3, 4}, {}), NotChordal);
}

TEST_CASE("case graphs: chordality, coverage, running intersection") {
  for (const char* name :
       {"pglib_opf_case5_pjm.m", "pglib_opf_case14_ieee.m", "pglib_opf_case30_ieee.m"}) {
    Network net = build_network(read_case(pglib(name)));
    Graph g = network_graph(net);
    auto [order, fill] = chordal_completion(g);
    CliqueTree t = clique_tree(g, order, fill);
    CHECK(running_intersection(t));
    CHECK(edges_covered(g, t));
    if (g.nodes.size() <= 14) CHECK(brute_force_chordal(g, fill));
    MinorSet ms = enumerate_minors(t);
    // every network edge appears among the pair minors
    for (auto [a, b] : g.edges) {
      CHECK(std::count(ms.minors2.begin(), ms.minors2.end(),
                       std::make_pair(std::min(a, b), std::max(a, b))) == 1);
    }
  }
}

TEST_CASE("case14 fill count is a stable regression constant") {
  Network net = build_network(read_case(pglib("pglib_opf_case14_ieee.m")));
  Graph g = network_graph(net);
  auto [order, fill] = chordal_completion(g);
  auto [order2, fill2] = chordal_completion(g);
  CHECK(order == order2);
  CHECK(fill == fill2);
  CHECK(fill.size() == 3);  // pinned from the deterministic heuristic
}

TEST_CASE("random corpus up to 12 vertices verified by brute force") {
  std::mt19937 rng(4242);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<int> nd(4, 12);
    int n = nd(rng);
    std::uniform_real_distribution<double> p(0.0, 1.0);
    std::vector<std::pair<int, int>> edges;
    for (int a = 1; a <= n; ++a) {
      for (int b = a + 1; b <= n; ++b) {
        if (p(rng) < 0.35) edges.emplace_back(a, b);
      }
    }
    for (int a = 1; a < n; ++a) edges.emplace_back(a, a + 1);  // keep it connected
    Graph g = make_graph(n, edges);
    auto [order, fill] = chordal_completion(g);
    CHECK(brute_force_chordal(g, fill));
    CliqueTree t = clique_tree(g, order, fill);
    CHECK(running_intersection(t));
    CHECK(edges_covered(g, t));
  }
}
