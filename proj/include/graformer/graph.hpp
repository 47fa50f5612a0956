#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace graformer {

// A knowledge graph: directed, labeled multigraph. Vertices are entities,
// arcs are facts. Parallel arcs and self-loops are legal.
struct KnowledgeGraph {
  struct Arc {
    int id;
    int source;
    int target;
  };

  std::vector<int> vertices;            // entity ids, build order preserved
  std::vector<Arc> arcs;                // fact order preserved
  std::map<int, std::string> vertex_labels;  // entity id -> entity name
  std::map<int, std::string> arc_labels;     // arc id -> relation symbol

  int add_vertex(const std::string& name);
  int add_arc(int source, int target, const std::string& relation);
};

// Splits an entity name into tokens. Must return at least one token for
// every entity fed to build_token_graph.
using TokenizerFn = std::function<std::vector<std::string>(const std::string&)>;

// The token hypergraph: one node per (entity, token position), hyper-arcs
// carrying the whole source/target node sets of their fact, and the `same`
// relation recording signed offsets inside each entity cluster.
struct TokenGraph {
  struct TokenNode {
    int id;
    std::string token;
    int origin_entity;
    int position;  // 0-based position inside the tokenized entity name
  };
  struct HyperArc {
    int id;
    std::string relation;
    std::vector<int> sources;  // token nodes of the subject entity
    std::vector<int> targets;  // token nodes of the object entity
  };

  std::vector<TokenNode> nodes;
  std::vector<HyperArc> arcs;
  // node id -> (other node id, position(other) - position(node))
  std::map<int, std::vector<std::pair<int, int>>> same;
};

// Bipartite incidence graph: hyper-arcs become fact nodes, edges are
// unlabeled and directed, same_p triples carried over from the token graph.
struct IncidenceGraph {
  enum class NodeKind { Token, Fact };
  struct Node {
    int id;
    std::string label;
    NodeKind kind;
    int origin_entity;  // -1 for fact nodes
  };
  struct SameEdge {
    int from;
    int to;
    int p;
  };

  std::vector<Node> nodes;                  // ids are dense: 0..|nodes|-1
  std::vector<std::pair<int, int>> edges;   // directed (from, to), sorted
  std::vector<SameEdge> same_p;             // sorted by (from, to)

  size_t token_node_count() const;
  size_t fact_node_count() const;
};

// Token nodes are numbered entity by entity (in vertex order), then fact
// nodes in arc order, so downstream matrices have a deterministic layout.
// Throws ContractViolation naming the entity if any name tokenizes to
// nothing.
TokenGraph build_token_graph(const KnowledgeGraph& kg, const TokenizerFn& tok);

IncidenceGraph build_incidence_graph(const TokenGraph& tg);

// Connected components of the undirected view (edges and same_p both count).
// Components are sorted by their smallest node id, members ascending.
std::vector<std::vector<int>> connected_components(const IncidenceGraph& g);

struct ComponentStats {
  int component_count = 0;
  double avg_size_entities = 0.0;  // mean distinct origin entities per component
  double avg_size_nodes = 0.0;     // mean node count per component
  int largest_diameter = 0;        // max finite undirected eccentricity, 0 for singletons
};

ComponentStats component_stats(const IncidenceGraph& g);

// Deterministic text dump (node list, edge list, same_p list) for golden
// tests. Byte-identical for equal graphs.
std::string debug_dump(const IncidenceGraph& g);

}  // namespace graformer
