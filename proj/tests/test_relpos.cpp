#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "graformer/errors.hpp"
#include "graformer/relpos.hpp"
#include "test_util.hpp"

using namespace graformer;

namespace {

constexpr int I = kUnreachable;

// Relative positions of the example graph with d_max = 3 and clamping
// inactive; node order s v d w e l c u1 u2.
const int kExpectedR[9][9] = {
    {0, 4, 5, 2, 2, 2, 1, 1, 3},
    {-4, 0, 4, 2, 2, 2, 1, 1, 3},
    {-5, -4, 0, 2, 2, 2, 1, 1, 3},
    {-2, -2, -2, 0, 2, 2, -1, I, 1},
    {-2, -2, -2, -2, 0, 4, -3, -1, -1},
    {-2, -2, -2, -2, -4, 0, -3, -1, -1},
    {-1, -1, -1, 1, 3, 3, 0, I, 2},
    {-1, -1, -1, I, 1, 1, I, 0, I},
    {-3, -3, -3, -1, 1, 1, -2, I, 0},
};

// Independent route: Floyd-Warshall distances, clamped, then the case
// rules applied directly.
RelPosMatrix oracle_r_matrix(const IncidenceGraph& g, int d_max, int n_delta, int n_p) {
  auto delta = testutil::floyd_warshall(g.nodes.size(), g.edges);
  std::map<std::pair<int, int>, int> same;
  for (const auto& s : g.same_p) same[{s.from, s.to}] = s.p;

  RelPosMatrix r;
  r.n = g.nodes.size();
  r.d_max = d_max;
  r.n_delta = n_delta;
  r.n_p = n_p;
  r.entries.assign(r.n, std::vector<int>(r.n, I));
  for (size_t i = 0; i < r.n; ++i) {
    for (size_t j = 0; j < r.n; ++j) {
      auto it = same.find({static_cast<int>(i), static_cast<int>(j)});
      if (it != same.end()) {
        int p = std::clamp(it->second, -n_p, n_p);
        r.entries[i][j] = (p > 0 ? d_max : -d_max) + p;
        continue;
      }
      int fwd = delta[i][j] == I ? I : std::min(delta[i][j], n_delta);
      int bwd = delta[j][i] == I ? I : std::min(delta[j][i], n_delta);
      if (fwd == I && bwd == I)
        r.entries[i][j] = I;
      else if (fwd <= bwd)
        r.entries[i][j] = fwd;
      else
        r.entries[i][j] = -bwd;
    }
  }
  return r;
}

}  // namespace

TEST_CASE("shortest paths on the example graph") {
  IncidenceGraph g = testutil::example_incidence();
  auto delta = shortest_path_lengths(g);
  CHECK(delta[0][6] == 1);  // s -> c
  CHECK(delta[6][3] == 1);  // c -> w
  CHECK(delta[6][4] == 3);  // c -> w -> u2 -> e
  CHECK(delta[3][7] == I);  // w cannot reach u1
  CHECK(delta[7][3] == I);
  for (size_t i = 0; i < g.nodes.size(); ++i) CHECK(delta[i][i] == 0);
}

TEST_CASE("singleton graph") {
  IncidenceGraph g;
  g.nodes.push_back({0, "x", IncidenceGraph::NodeKind::Token, 0});
  auto delta = shortest_path_lengths(g);
  REQUIRE(delta.size() == 1);
  CHECK(delta[0][0] == 0);
}

TEST_CASE("BFS distances equal Floyd-Warshall on 200 random digraphs") {
  Rng rng(23);
  for (int round = 0; round < 200; ++round) {
    IncidenceGraph g = testutil::random_digraph(rng);
    CHECK(shortest_path_lengths(g) == testutil::floyd_warshall(g.nodes.size(), g.edges));
  }
}

TEST_CASE("R matrix reproduces all 81 published entries") {
  RelPosMatrix r = build_r_matrix(testutil::example_incidence(), 3, 6, 10);
  REQUIRE(r.n == 9);
  for (size_t i = 0; i < 9; ++i)
    for (size_t j = 0; j < 9; ++j) {
      INFO("entry (", i, ",", j, ")");
      CHECK(r.entries[i][j] == kExpectedR[i][j]);
    }
}

TEST_CASE("diagonal is zero on random graphs") {
  Rng rng(29);
  for (int round = 0; round < 30; ++round) {
    auto g = build_incidence_graph(
        build_token_graph(testutil::random_kg(rng), testutil::whitespace_tokenizer_fn()));
    RelPosMatrix r = build_r_matrix(g, 4, 4, 10);
    for (size_t i = 0; i < r.n; ++i) CHECK(r.entries[i][i] == 0);
  }
}

TEST_CASE("clamped matrices match the oracle and stay in range") {
  Rng rng(31);
  for (int round = 0; round < 60; ++round) {
    IncidenceGraph g = testutil::random_digraph(rng, 12);
    RelPosMatrix r = build_r_matrix(g, 2, 2, 10);
    RelPosMatrix expected = oracle_r_matrix(g, 2, 2, 10);
    CHECK(r.entries == expected.entries);
    for (size_t i = 0; i < r.n; ++i)
      for (size_t j = 0; j < r.n; ++j)
        if (r.entries[i][j] != I) CHECK(std::abs(r.entries[i][j]) <= 2);
  }
}

TEST_CASE("graphs with same clusters match the oracle") {
  Rng rng(37);
  for (int round = 0; round < 60; ++round) {
    auto g = build_incidence_graph(
        build_token_graph(testutil::random_kg(rng), testutil::whitespace_tokenizer_fn()));
    int n_delta = 1 + static_cast<int>(rng.next_u64() % 4);
    int d_max = n_delta + static_cast<int>(rng.next_u64() % 3);
    int n_p = 1 + static_cast<int>(rng.next_u64() % 4);
    RelPosMatrix r = build_r_matrix(g, d_max, n_delta, n_p);
    RelPosMatrix expected = oracle_r_matrix(g, d_max, n_delta, n_p);
    CHECK(r.entries == expected.entries);
  }
}

TEST_CASE("sign rule: positive entries go with the shorter forward path") {
  Rng rng(41);
  for (int round = 0; round < 40; ++round) {
    IncidenceGraph g = testutil::random_digraph(rng, 12);
    auto delta = shortest_path_lengths(g);
    int n_delta = 6;
    RelPosMatrix r = build_r_matrix(g, 6, n_delta, 10);
    for (size_t i = 0; i < r.n; ++i)
      for (size_t j = 0; j < r.n; ++j) {
        int entry = r.entries[i][j];
        if (entry == I) {
          CHECK(delta[i][j] == I);
          CHECK(delta[j][i] == I);
        } else if (entry > 0) {
          CHECK(delta[i][j] <= delta[j][i]);
          CHECK(entry == std::min(delta[i][j], n_delta));
        } else if (entry < 0) {
          CHECK(delta[i][j] > delta[j][i]);
          CHECK(entry == -std::min(delta[j][i], n_delta));
        }
      }
  }
}

TEST_CASE("subject/object signature of a lone fact") {
  KnowledgeGraph kg;
  int s = kg.add_vertex("s");
  int o = kg.add_vertex("o");
  kg.add_arc(s, o, "rel");
  auto g = build_incidence_graph(build_token_graph(kg, testutil::whitespace_tokenizer_fn()));
  // nodes: s=0, o=1, fact=2
  RelPosMatrix r = build_r_matrix(g, 4, 4, 10);
  CHECK(r.entries[0][2] == 1);
  CHECK(r.entries[2][0] == -1);
  CHECK(r.entries[1][2] == -1);
  CHECK(r.entries[2][1] == 1);
  CHECK(r.entries[0][1] == 2);
  CHECK(r.entries[1][0] == -2);
}

TEST_CASE("same-cluster entries never collide with path entries") {
  Rng rng(43);
  for (int round = 0; round < 40; ++round) {
    auto g = build_incidence_graph(
        build_token_graph(testutil::random_kg(rng), testutil::whitespace_tokenizer_fn()));
    int n_delta = 1 + static_cast<int>(rng.next_u64() % 4);
    int d_max = n_delta + static_cast<int>(rng.next_u64() % 3);
    RelPosMatrix r = build_r_matrix(g, d_max, n_delta, 10);
    std::set<std::pair<int, int>> same_pairs;
    for (const auto& sp : g.same_p) same_pairs.insert({sp.from, sp.to});
    for (size_t i = 0; i < r.n; ++i)
      for (size_t j = 0; j < r.n; ++j) {
        int entry = r.entries[i][j];
        if (entry == I) continue;
        if (same_pairs.count({static_cast<int>(i), static_cast<int>(j)})) {
          CHECK(std::abs(entry) > d_max);
          CHECK(std::abs(entry) <= d_max + r.n_p);
        } else {
          CHECK(std::abs(entry) <= n_delta);
        }
      }
  }
}

TEST_CASE("R matrix is permutation equivariant") {
  Rng rng(47);
  for (int round = 0; round < 20; ++round) {
    IncidenceGraph g = testutil::random_digraph(rng, 10);
    size_t n = g.nodes.size();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);

    IncidenceGraph permuted;
    permuted.nodes.resize(n);
    for (size_t i = 0; i < n; ++i) {
      permuted.nodes[perm[i]] = g.nodes[i];
      permuted.nodes[perm[i]].id = perm[i];
    }
    for (const auto& [a, b] : g.edges) permuted.edges.emplace_back(perm[a], perm[b]);
    std::sort(permuted.edges.begin(), permuted.edges.end());

    RelPosMatrix r = build_r_matrix(g, 4, 4, 10);
    RelPosMatrix rp = build_r_matrix(permuted, 4, 4, 10);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        CHECK(rp.entries[perm[i]][perm[j]] == r.entries[i][j]);
  }
}

TEST_CASE("position vocabulary") {
  SUBCASE("bijective over the enumerated domain, infinity last") {
    PositionVocabulary vocab{4, 4, 10};
    CHECK(vocab.size() == 9 + 1 + 20);

    std::vector<int> domain;
    for (int r = -(4 + 10); r <= -(4 + 1); ++r) domain.push_back(r);
    for (int r = -4; r <= 4; ++r) domain.push_back(r);
    for (int r = 4 + 1; r <= 4 + 10; ++r) domain.push_back(r);
    domain.push_back(kUnreachable);
    REQUIRE(static_cast<int>(domain.size()) == vocab.size());

    std::set<int> seen;
    for (int r : domain) {
      int index = vocab.index_of(r);
      CHECK(index >= 0);
      CHECK(index < vocab.size());
      CHECK(seen.insert(index).second);
      CHECK(vocab.value_at(index) == r);
    }
    CHECK(vocab.index_of(kUnreachable) == vocab.size() - 1);
  }

  SUBCASE("index of zero is stable") {
    PositionVocabulary vocab{3, 2, 5};
    CHECK(vocab.index_of(0) == vocab.index_of(0));
    CHECK(vocab.value_at(vocab.index_of(0)) == 0);
  }

  SUBCASE("out-of-domain throws") {
    PositionVocabulary vocab{4, 2, 3};
    CHECK_THROWS_AS(vocab.index_of(3), ContractViolation);   // between n_delta and d_max+1
    CHECK_THROWS_AS(vocab.index_of(8), ContractViolation);   // beyond d_max+n_p
    CHECK_THROWS_AS(vocab.index_of(-20), ContractViolation);
  }
}

TEST_CASE("build_r_matrix validates its thresholds") {
  IncidenceGraph g = testutil::example_incidence();
  CHECK_THROWS_AS(build_r_matrix(g, 3, 0, 10), ContractViolation);
  CHECK_THROWS_AS(build_r_matrix(g, 3, 3, 0), ContractViolation);
  CHECK_THROWS_AS(build_r_matrix(g, 0, 1, 1), ContractViolation);
}

TEST_CASE("CSV dump matches the published layout") {
  RelPosMatrix r = build_r_matrix(testutil::example_incidence(), 3, 6, 10);
  std::string csv = r_matrix_csv(r);
  CHECK(csv.find("0,4,5,2,2,2,1,1,3\n") == 0);
  CHECK(csv.find("-1,-1,-1,inf,1,1,inf,0,inf\n") != std::string::npos);
  size_t lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 9);
}
