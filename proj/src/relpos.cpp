#include "graformer/relpos.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "graformer/errors.hpp"

namespace graformer {

int PositionVocabulary::index_of(int r) const {
  if (r == kUnreachable) return size() - 1;
  if (r >= -(d_max + n_p) && r <= -(d_max + 1)) return r + d_max + n_p;  // 0..n_p-1
  if (r >= -n_delta && r <= n_delta) return n_p + r + n_delta;          // n_p..n_p+2*n_delta
  if (r >= d_max + 1 && r <= d_max + n_p) return n_p + 2 * n_delta + 1 + (r - d_max - 1);
  throw ContractViolation("relative position " + std::to_string(r) +
                          " outside vocabulary domain (d_max=" + std::to_string(d_max) +
                          ", n_delta=" + std::to_string(n_delta) +
                          ", n_p=" + std::to_string(n_p) + ")");
}

int PositionVocabulary::value_at(int index) const {
  require(index >= 0 && index < size(), "position index out of range");
  if (index < n_p) return index - d_max - n_p;
  if (index < n_p + 2 * n_delta + 1) return index - n_p - n_delta;
  if (index < 2 * n_p + 2 * n_delta + 1) return index - n_p - 2 * n_delta - 1 + d_max + 1;
  return kUnreachable;
}

std::vector<std::vector<int>> shortest_path_lengths(const IncidenceGraph& g) {
  size_t n = g.nodes.size();
  std::vector<std::vector<int>> adj(n);
  for (const auto& [a, b] : g.edges) adj[a].push_back(b);

  std::vector<std::vector<int>> delta(n, std::vector<int>(n, kUnreachable));
  std::deque<int> queue;
  for (size_t src = 0; src < n; ++src) {
    auto& dist = delta[src];
    dist[src] = 0;
    queue.assign(1, static_cast<int>(src));
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : adj[u]) {
        if (dist[v] == kUnreachable) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  return delta;
}

int encode_same_offset(int p, int d_max) {
  require(p != 0, "same offset must be nonzero");
  return (p > 0 ? d_max : -d_max) + p;
}

RelPosMatrix build_r_matrix(const IncidenceGraph& g, int d_max, int n_delta, int n_p) {
  require(n_delta >= 1, "n_delta must be >= 1");
  require(n_p >= 1, "n_p must be >= 1");
  require(d_max >= 1, "d_max must be >= 1");
  // d_max >= n_delta keeps same-cluster and path ranges disjoint; the model
  // config enforces it. The matrix itself also supports the clamp-free
  // setting n_delta > d_max used for fixed published examples.

  size_t n = g.nodes.size();
  auto delta = shortest_path_lengths(g);

  // same offsets, clamped to +-n_p
  std::vector<std::vector<std::pair<int, int>>> same(n);
  for (const auto& s : g.same_p) same[s.from].emplace_back(s.to, s.p);

  auto clamp_delta = [n_delta](int d) { return d == kUnreachable ? d : std::min(d, n_delta); };

  RelPosMatrix r;
  r.n = n;
  r.d_max = d_max;
  r.n_delta = n_delta;
  r.n_p = n_p;
  r.entries.assign(n, std::vector<int>(n, kUnreachable));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const auto& cluster = same[i];
      auto it = std::find_if(cluster.begin(), cluster.end(),
                             [j](const auto& e) { return e.first == static_cast<int>(j); });
      if (it != cluster.end()) {
        int p = std::clamp(it->second, -n_p, n_p);
        r.entries[i][j] = encode_same_offset(p, d_max);
        continue;
      }
      int fwd = clamp_delta(delta[i][j]);
      int bwd = clamp_delta(delta[j][i]);
      if (fwd == kUnreachable && bwd == kUnreachable) {
        r.entries[i][j] = kUnreachable;
      } else if (fwd <= bwd) {
        r.entries[i][j] = fwd;
      } else {
        r.entries[i][j] = -bwd;
      }
    }
  }
  return r;
}

std::string r_matrix_csv(const RelPosMatrix& r) {
  std::ostringstream out;
  for (size_t i = 0; i < r.n; ++i) {
    for (size_t j = 0; j < r.n; ++j) {
      if (j) out << ",";
      if (r.entries[i][j] == kUnreachable)
        out << "inf";
      else
        out << r.entries[i][j];
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace graformer
