#pragma once

// Shared fixtures and independent test oracles. The oracles intentionally
// use different algorithms than the library (Floyd-Warshall vs BFS,
// union-find vs BFS components) so they can catch implementation bugs.

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "graformer/graph.hpp"
#include "graformer/relpos.hpp"
#include "graformer/rng.hpp"

namespace testutil {

// Three-entity example: "SVD" -> s,v,d; "word2vec" -> w;
// "embedding learning" -> e,l; facts comparison(SVD, word2vec),
// used-for(SVD, EL), used-for(word2vec, EL). Incidence node order:
// s v d w e l c u1 u2.
inline graformer::KnowledgeGraph example_kg() {
  graformer::KnowledgeGraph kg;
  int svd = kg.add_vertex("SVD");
  int w2v = kg.add_vertex("word2vec");
  int el = kg.add_vertex("embedding learning");
  kg.add_arc(svd, w2v, "comparison");
  kg.add_arc(svd, el, "used-for");
  kg.add_arc(w2v, el, "used-for");
  return kg;
}

inline graformer::TokenizerFn example_tokenizer() {
  return [](const std::string& name) -> std::vector<std::string> {
    if (name == "SVD") return {"s", "v", "d"};
    if (name == "word2vec") return {"w"};
    if (name == "embedding learning") return {"e", "l"};
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : name) {
      if (c == ' ') {
        if (!cur.empty()) tokens.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
  };
}

inline graformer::IncidenceGraph example_incidence() {
  return graformer::build_incidence_graph(
      graformer::build_token_graph(example_kg(), example_tokenizer()));
}

// ---- oracles ----

// All-pairs directed shortest paths by Floyd-Warshall.
inline std::vector<std::vector<int>> floyd_warshall(size_t n,
                                                    const std::vector<std::pair<int, int>>& edges) {
  const int inf = graformer::kUnreachable;
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, inf));
  for (size_t i = 0; i < n; ++i) dist[i][i] = 0;
  for (const auto& [a, b] : edges) dist[a][b] = 1;
  for (size_t k = 0; k < n; ++k)
    for (size_t i = 0; i < n; ++i) {
      if (dist[i][k] == inf) continue;
      for (size_t j = 0; j < n; ++j) {
        if (dist[k][j] == inf) continue;
        dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);
      }
    }
  return dist;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

inline std::vector<std::vector<int>> union_find_components(const graformer::IncidenceGraph& g) {
  UnionFind uf(g.nodes.size());
  for (const auto& [a, b] : g.edges) uf.unite(a, b);
  for (const auto& s : g.same_p) uf.unite(s.from, s.to);
  std::map<int, std::vector<int>> by_root;
  for (size_t i = 0; i < g.nodes.size(); ++i) by_root[uf.find(static_cast<int>(i))].push_back(static_cast<int>(i));
  std::vector<std::vector<int>> comps;
  for (auto& [root, members] : by_root) comps.push_back(members);
  std::sort(comps.begin(), comps.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return comps;
}

// ---- random inputs ----

inline graformer::KnowledgeGraph random_kg(graformer::Rng& rng, int max_entities = 5,
                                           int max_tokens = 4, int max_arcs = 6) {
  graformer::KnowledgeGraph kg;
  int entities = 1 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(max_entities));
  for (int e = 0; e < entities; ++e) {
    int tokens = 1 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(max_tokens));
    std::string name;
    for (int t = 0; t < tokens; ++t) {
      if (t) name += ' ';
      name += "t" + std::to_string(e) + "_" + std::to_string(t);
    }
    kg.add_vertex(name);
  }
  int arcs = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(max_arcs + 1));
  for (int a = 0; a < arcs; ++a) {
    int s = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(entities));
    int t = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(entities));
    kg.add_arc(s, t, "r" + std::to_string(static_cast<int>(rng.next_u64() % 3)));
  }
  return kg;
}

inline graformer::TokenizerFn whitespace_tokenizer_fn() {
  return [](const std::string& name) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : name) {
      if (c == ' ') {
        if (!cur.empty()) tokens.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
  };
}

// Random directed graph as a bare incidence structure (token nodes only,
// no same clusters) for shortest-path testing.
inline graformer::IncidenceGraph random_digraph(graformer::Rng& rng, int max_nodes = 20,
                                                double min_density = 0.1,
                                                double max_density = 0.5) {
  graformer::IncidenceGraph g;
  int n = 1 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(max_nodes));
  for (int i = 0; i < n; ++i)
    g.nodes.push_back({i, "n" + std::to_string(i), graformer::IncidenceGraph::NodeKind::Token, i});
  double density = min_density + (max_density - min_density) * rng.uniform();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (rng.uniform() < density) g.edges.emplace_back(i, j);
    }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace testutil
