#pragma once

#include <limits>
#include <string>
#include <vector>

#include "graformer/graph.hpp"

namespace graformer {

// Sentinel for "no directed path" / the infinity relative-position bucket.
constexpr int kUnreachable = std::numeric_limits<int>::max();

// Signed relative graph positions. Finite path entries lie in
// [-n_delta, n_delta]; same-cluster entries in
// [-(d_max+n_p), -(d_max+1)] u [d_max+1, d_max+n_p]; kUnreachable otherwise.
struct RelPosMatrix {
  size_t n = 0;
  std::vector<std::vector<int>> entries;
  int d_max = 0;
  int n_delta = 0;
  int n_p = 0;

  int at(size_t i, size_t j) const { return entries[i][j]; }
};

// Contiguous index space over the values a RelPosMatrix can contain, used
// to address rows of the learned position-bias tables. Finite values are
// ordered ascending; the infinity bucket is last.
struct PositionVocabulary {
  int d_max = 0;
  int n_delta = 0;
  int n_p = 0;

  int size() const { return 2 * n_delta + 1 + 1 + 2 * n_p; }

  // Maps a relative position to 0..size()-1. Throws ContractViolation for
  // values outside the domain.
  int index_of(int r) const;

  // Inverse of index_of, for dumps.
  int value_at(int index) const;
};

// Directed shortest-path lengths over edges only; same_p triples are not
// traversable. delta[i][i] = 0, kUnreachable where no path exists.
// BFS per source; the graph is unweighted and sparse.
std::vector<std::vector<int>> shortest_path_lengths(const IncidenceGraph& g);

// The relative-position matrix. Case order: same-cluster pairs encode their
// text offset (clamped to +-n_p) outside the path range; mutually
// unreachable pairs get the infinity sentinel; otherwise the shorter
// direction wins with its sign, ties positive. Path lengths are clamped to
// n_delta before the sign rule. Requires d_max >= n_delta >= 1 and n_p >= 1
// so the encoded ranges stay disjoint.
RelPosMatrix build_r_matrix(const IncidenceGraph& g, int d_max, int n_delta, int n_p);

// encode(p) = sgn(p) * d_max + p for p != 0.
int encode_same_offset(int p, int d_max);

// CSV dump, one row per node, infinity rendered as "inf".
std::string r_matrix_csv(const RelPosMatrix& r);

}  // namespace graformer
