#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "graformer/errors.hpp"
#include "graformer/graph.hpp"
#include "test_util.hpp"

using namespace graformer;

TEST_CASE("token graph of the three-entity example") {
  TokenGraph tg = build_token_graph(testutil::example_kg(), testutil::example_tokenizer());

  REQUIRE(tg.nodes.size() == 6);
  CHECK(tg.nodes[0].token == "s");
  CHECK(tg.nodes[1].token == "v");
  CHECK(tg.nodes[2].token == "d");
  CHECK(tg.nodes[3].token == "w");
  CHECK(tg.nodes[4].token == "e");
  CHECK(tg.nodes[5].token == "l");
  REQUIRE(tg.arcs.size() == 3);

  // same(s) contains (v,+1) and (d,+2)
  const auto& same_s = tg.same.at(0);
  CHECK(same_s.size() == 2);
  CHECK(std::count(same_s.begin(), same_s.end(), std::pair<int, int>{1, 1}) == 1);
  CHECK(std::count(same_s.begin(), same_s.end(), std::pair<int, int>{2, 2}) == 1);

  // single-token entity has an empty cluster
  CHECK(tg.same.count(3) == 0);

  // hyper-arc node sets are exactly the entity clusters
  CHECK(tg.arcs[0].sources == std::vector<int>{0, 1, 2});
  CHECK(tg.arcs[0].targets == std::vector<int>{3});
  CHECK(tg.arcs[1].targets == std::vector<int>{4, 5});
}

TEST_CASE("single entity, zero arcs") {
  KnowledgeGraph kg;
  kg.add_vertex("x");
  TokenGraph tg = build_token_graph(kg, testutil::whitespace_tokenizer_fn());
  CHECK(tg.nodes.size() == 1);
  CHECK(tg.same.empty());
  CHECK(tg.arcs.empty());

  IncidenceGraph g = build_incidence_graph(tg);
  CHECK(g.nodes.size() == 1);
  CHECK(g.edges.empty());
  CHECK(g.same_p.empty());
}

TEST_CASE("empty tokenization names the entity") {
  KnowledgeGraph kg;
  kg.add_vertex("ghost");
  TokenizerFn empty_tok = [](const std::string&) { return std::vector<std::string>{}; };
  CHECK_THROWS_WITH_AS(build_token_graph(kg, empty_tok),
                       doctest::Contains("ghost"), ContractViolation);
}

TEST_CASE("same clusters match a brute-force pair enumeration") {
  Rng rng(7);
  auto tok = testutil::whitespace_tokenizer_fn();
  for (int round = 0; round < 50; ++round) {
    KnowledgeGraph kg = testutil::random_kg(rng);
    TokenGraph tg = build_token_graph(kg, tok);

    // oracle: enumerate (entity, i, j) pairs directly from the tokenizer
    std::map<int, std::vector<std::pair<int, int>>> expected;
    std::map<int, std::vector<int>> entity_nodes;
    for (const auto& node : tg.nodes) entity_nodes[node.origin_entity].push_back(node.id);
    for (int v : kg.vertices) {
      size_t count = tok(kg.vertex_labels.at(v)).size();
      CHECK(entity_nodes.at(v).size() == count);
      for (size_t i = 0; i < count; ++i)
        for (size_t j = 0; j < count; ++j) {
          if (i == j) continue;
          expected[entity_nodes.at(v)[i]].push_back(
              {entity_nodes.at(v)[j], static_cast<int>(j) - static_cast<int>(i)});
        }
    }
    for (auto& [id, pairs] : expected) std::sort(pairs.begin(), pairs.end());
    auto actual = tg.same;
    for (auto& [id, pairs] : actual) std::sort(pairs.begin(), pairs.end());
    CHECK(actual == expected);

    // token node count equals the sum of per-entity token counts
    size_t total = 0;
    for (int v : kg.vertices) total += tok(kg.vertex_labels.at(v)).size();
    CHECK(tg.nodes.size() == total);
  }
}

TEST_CASE("incidence graph of the example matches the expected node and edge sets") {
  IncidenceGraph g = testutil::example_incidence();
  REQUIRE(g.nodes.size() == 9);
  CHECK(g.token_node_count() == 6);
  CHECK(g.fact_node_count() == 3);
  CHECK(g.nodes[6].label == "comparison");
  CHECK(g.nodes[6].kind == IncidenceGraph::NodeKind::Fact);
  CHECK(g.nodes[7].label == "used-for");
  CHECK(g.nodes[8].label == "used-for");

  // s v d w e l = 0..5, c u1 u2 = 6..8
  std::set<std::pair<int, int>> expected{{0, 6}, {1, 6}, {2, 6}, {6, 3}, {0, 7}, {1, 7},
                                         {2, 7}, {7, 4}, {7, 5}, {3, 8}, {8, 4}, {8, 5}};
  CHECK(std::set<std::pair<int, int>>(g.edges.begin(), g.edges.end()) == expected);

  // same_p carried over unchanged: 6 ordered SVD pairs + 2 EL pairs
  CHECK(g.same_p.size() == 8);
}

TEST_CASE("edges of random incidence graphs are bipartite") {
  Rng rng(11);
  auto tok = testutil::whitespace_tokenizer_fn();
  for (int round = 0; round < 50; ++round) {
    IncidenceGraph g =
        build_incidence_graph(build_token_graph(testutil::random_kg(rng), tok));
    for (const auto& [a, b] : g.edges) {
      bool token_to_fact = g.nodes[a].kind == IncidenceGraph::NodeKind::Token &&
                           g.nodes[b].kind == IncidenceGraph::NodeKind::Fact;
      bool fact_to_token = g.nodes[a].kind == IncidenceGraph::NodeKind::Fact &&
                           g.nodes[b].kind == IncidenceGraph::NodeKind::Token;
      CHECK((token_to_fact || fact_to_token));
    }
    for (const auto& s : g.same_p) {
      CHECK(g.nodes[s.from].kind == IncidenceGraph::NodeKind::Token);
      CHECK(g.nodes[s.to].kind == IncidenceGraph::NodeKind::Token);
      CHECK(g.nodes[s.from].origin_entity == g.nodes[s.to].origin_entity);
    }
  }
}

TEST_CASE("same_p is antisymmetric") {
  Rng rng(13);
  auto tok = testutil::whitespace_tokenizer_fn();
  for (int round = 0; round < 30; ++round) {
    IncidenceGraph g =
        build_incidence_graph(build_token_graph(testutil::random_kg(rng), tok));
    std::set<std::tuple<int, int, int>> triples;
    for (const auto& s : g.same_p) triples.insert({s.from, s.to, s.p});
    for (const auto& [from, to, p] : triples)
      CHECK(triples.count({to, from, -p}) == 1);
  }
}

TEST_CASE("connected components") {
  SUBCASE("example graph is one component of nine nodes") {
    auto comps = connected_components(testutil::example_incidence());
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].size() == 9);
  }

  SUBCASE("empty graph") {
    CHECK(connected_components(IncidenceGraph{}).empty());
  }

  SUBCASE("two disjoint single-fact graphs merge to two components") {
    KnowledgeGraph kg;
    int a = kg.add_vertex("a");
    int b = kg.add_vertex("b");
    int c = kg.add_vertex("c");
    int d = kg.add_vertex("d");
    kg.add_arc(a, b, "r1");
    kg.add_arc(c, d, "r2");
    auto g = build_incidence_graph(build_token_graph(kg, testutil::whitespace_tokenizer_fn()));
    auto comps = connected_components(g);
    CHECK(comps.size() == 2);
    CHECK(comps == testutil::union_find_components(g));
  }

  SUBCASE("random graphs agree with a union-find oracle") {
    Rng rng(17);
    auto tok = testutil::whitespace_tokenizer_fn();
    for (int round = 0; round < 50; ++round) {
      auto g = build_incidence_graph(build_token_graph(testutil::random_kg(rng), tok));
      CHECK(connected_components(g) == testutil::union_find_components(g));
    }
  }
}

TEST_CASE("component stats") {
  SUBCASE("single node") {
    KnowledgeGraph kg;
    kg.add_vertex("solo");
    auto g = build_incidence_graph(build_token_graph(kg, testutil::whitespace_tokenizer_fn()));
    auto stats = component_stats(g);
    CHECK(stats.component_count == 1);
    CHECK(stats.avg_size_entities == doctest::Approx(1.0));
    CHECK(stats.largest_diameter == 0);
  }

  SUBCASE("hand-built path of four nodes has diameter three") {
    IncidenceGraph g;
    for (int i = 0; i < 4; ++i)
      g.nodes.push_back({i, "n", i % 2 == 0 ? IncidenceGraph::NodeKind::Token
                                            : IncidenceGraph::NodeKind::Fact,
                         i % 2 == 0 ? i : -1});
    g.edges = {{0, 1}, {1, 2}, {2, 3}};
    CHECK(component_stats(g).largest_diameter == 3);
  }

  SUBCASE("example diameter matches an all-pairs Floyd-Warshall oracle") {
    IncidenceGraph g = testutil::example_incidence();
    std::vector<std::pair<int, int>> undirected = g.edges;
    for (const auto& [a, b] : g.edges) undirected.emplace_back(b, a);
    for (const auto& s : g.same_p) {
      undirected.emplace_back(s.from, s.to);
      undirected.emplace_back(s.to, s.from);
    }
    auto dist = testutil::floyd_warshall(g.nodes.size(), undirected);
    int expected = 0;
    for (const auto& row : dist)
      for (int dv : row)
        if (dv != kUnreachable) expected = std::max(expected, dv);
    CHECK(component_stats(g).largest_diameter == expected);
    CHECK(component_stats(g).avg_size_entities == doctest::Approx(3.0));
  }
}

TEST_CASE("self-loop arcs are legal and connect both directions") {
  KnowledgeGraph kg;
  int a = kg.add_vertex("a");
  kg.add_arc(a, a, "self");
  auto g = build_incidence_graph(build_token_graph(kg, testutil::whitespace_tokenizer_fn()));
  REQUIRE(g.nodes.size() == 2);
  std::set<std::pair<int, int>> expected{{0, 1}, {1, 0}};
  CHECK(std::set<std::pair<int, int>>(g.edges.begin(), g.edges.end()) == expected);
}

TEST_CASE("duplicate entity names stay distinct node sets") {
  KnowledgeGraph kg;
  int a = kg.add_vertex("twin");
  int b = kg.add_vertex("twin");
  kg.add_arc(a, b, "r");
  auto g = build_incidence_graph(build_token_graph(kg, testutil::whitespace_tokenizer_fn()));
  CHECK(g.token_node_count() == 2);
  CHECK(g.nodes[0].origin_entity != g.nodes[1].origin_entity);
}

TEST_CASE("debug dump is deterministic") {
  std::string a = debug_dump(testutil::example_incidence());
  std::string b = debug_dump(testutil::example_incidence());
  CHECK(a == b);
  CHECK(a.find("nodes 9") == 0);
  CHECK(a.find("0 -> 6") != std::string::npos);
}
