#include "graformer/graph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "graformer/errors.hpp"

namespace graformer {

int KnowledgeGraph::add_vertex(const std::string& name) {
  int id = static_cast<int>(vertices.size());
  vertices.push_back(id);
  vertex_labels[id] = name;
  return id;
}

int KnowledgeGraph::add_arc(int source, int target, const std::string& relation) {
  int id = static_cast<int>(arcs.size());
  arcs.push_back({id, source, target});
  arc_labels[id] = relation;
  return id;
}

size_t IncidenceGraph::token_node_count() const {
  size_t n = 0;
  for (const auto& node : nodes)
    if (node.kind == NodeKind::Token) ++n;
  return n;
}

size_t IncidenceGraph::fact_node_count() const {
  return nodes.size() - token_node_count();
}

TokenGraph build_token_graph(const KnowledgeGraph& kg, const TokenizerFn& tok) {
  for (const auto& arc : kg.arcs) {
    require(kg.vertex_labels.count(arc.source) > 0 && kg.vertex_labels.count(arc.target) > 0,
            "arc " + std::to_string(arc.id) + " references an unknown vertex");
  }

  TokenGraph tg;
  std::map<int, std::vector<int>> entity_nodes;  // entity id -> its token node ids

  for (int v : kg.vertices) {
    const std::string& name = kg.vertex_labels.at(v);
    std::vector<std::string> tokens = tok(name);
    if (tokens.empty())
      throw ContractViolation("entity '" + name + "' (id " + std::to_string(v) +
                              ") tokenizes to nothing");
    for (size_t i = 0; i < tokens.size(); ++i) {
      int id = static_cast<int>(tg.nodes.size());
      tg.nodes.push_back({id, tokens[i], v, static_cast<int>(i)});
      entity_nodes[v].push_back(id);
    }
  }

  // same clusters: every ordered pair inside one entity, p = pos(b) - pos(a)
  for (const auto& [entity, ids] : entity_nodes) {
    for (size_t i = 0; i < ids.size(); ++i) {
      for (size_t j = 0; j < ids.size(); ++j) {
        if (i == j) continue;
        tg.same[ids[i]].push_back({ids[j], static_cast<int>(j) - static_cast<int>(i)});
      }
    }
  }

  for (const auto& arc : kg.arcs) {
    TokenGraph::HyperArc ha;
    ha.id = arc.id;
    ha.relation = kg.arc_labels.at(arc.id);
    ha.sources = entity_nodes.at(arc.source);
    ha.targets = entity_nodes.at(arc.target);
    tg.arcs.push_back(std::move(ha));
  }
  return tg;
}

IncidenceGraph build_incidence_graph(const TokenGraph& tg) {
  IncidenceGraph g;
  for (const auto& node : tg.nodes)
    g.nodes.push_back({node.id, node.token, IncidenceGraph::NodeKind::Token, node.origin_entity});

  int fact_base = static_cast<int>(tg.nodes.size());
  for (size_t a = 0; a < tg.arcs.size(); ++a) {
    const auto& arc = tg.arcs[a];
    int fact_id = fact_base + static_cast<int>(a);
    g.nodes.push_back({fact_id, arc.relation, IncidenceGraph::NodeKind::Fact, -1});
    for (int s : arc.sources) g.edges.emplace_back(s, fact_id);
    for (int t : arc.targets) g.edges.emplace_back(fact_id, t);
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());

  for (const auto& [from, others] : tg.same)
    for (const auto& [to, p] : others) g.same_p.push_back({from, to, p});
  std::sort(g.same_p.begin(), g.same_p.end(), [](const auto& a, const auto& b) {
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  });
  return g;
}

namespace {

std::vector<std::vector<int>> undirected_adjacency(const IncidenceGraph& g) {
  std::vector<std::vector<int>> adj(g.nodes.size());
  for (const auto& [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (const auto& s : g.same_p) {
    adj[s.from].push_back(s.to);
    adj[s.to].push_back(s.from);
  }
  for (auto& nbrs : adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

}  // namespace

std::vector<std::vector<int>> connected_components(const IncidenceGraph& g) {
  auto adj = undirected_adjacency(g);
  std::vector<bool> seen(g.nodes.size(), false);
  std::vector<std::vector<int>> comps;
  for (size_t start = 0; start < g.nodes.size(); ++start) {
    if (seen[start]) continue;
    std::vector<int> comp;
    std::deque<int> queue{static_cast<int>(start)};
    seen[start] = true;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      comp.push_back(u);
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          queue.push_back(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

ComponentStats component_stats(const IncidenceGraph& g) {
  ComponentStats stats;
  if (g.nodes.empty()) return stats;

  auto adj = undirected_adjacency(g);
  auto comps = connected_components(g);
  stats.component_count = static_cast<int>(comps.size());

  double entity_sum = 0.0, node_sum = 0.0;
  int max_diameter = 0;
  std::vector<int> dist(g.nodes.size());
  for (const auto& comp : comps) {
    node_sum += static_cast<double>(comp.size());
    std::set<int> entities;
    for (int n : comp)
      if (g.nodes[n].origin_entity >= 0) entities.insert(g.nodes[n].origin_entity);
    entity_sum += static_cast<double>(entities.size());

    // eccentricity by BFS from every member; components are small
    for (int src : comp) {
      for (int n : comp) dist[n] = -1;
      dist[src] = 0;
      std::deque<int> queue{src};
      while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        max_diameter = std::max(max_diameter, dist[u]);
        for (int v : adj[u]) {
          if (dist[v] < 0) {
            dist[v] = dist[u] + 1;
            queue.push_back(v);
          }
        }
      }
    }
  }
  stats.avg_size_entities = entity_sum / static_cast<double>(comps.size());
  stats.avg_size_nodes = node_sum / static_cast<double>(comps.size());
  stats.largest_diameter = max_diameter;
  return stats;
}

std::string debug_dump(const IncidenceGraph& g) {
  std::ostringstream out;
  out << "nodes " << g.nodes.size() << "\n";
  for (const auto& n : g.nodes) {
    out << n.id << " ";
    if (n.kind == IncidenceGraph::NodeKind::Token)
      out << "token entity=" << n.origin_entity << " ";
    else
      out << "fact ";
    out << n.label << "\n";
  }
  out << "edges " << g.edges.size() << "\n";
  for (const auto& [a, b] : g.edges) out << a << " -> " << b << "\n";
  out << "same " << g.same_p.size() << "\n";
  for (const auto& s : g.same_p) out << s.from << " " << s.to << " " << s.p << "\n";
  return out.str();
}

}  // namespace graformer
