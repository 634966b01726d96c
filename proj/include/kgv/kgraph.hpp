#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgv/triplets.hpp"

namespace kgv {

enum class GraphOrigin { context, generated, verified_subgraph };

struct Entity {
  std::string canonical;
  std::vector<std::string> mentions;  // distinct surfaces, first-seen order
  std::optional<std::size_t> embedding_id;
};

// Undirected labeled edge. `u` is the subject side of the first source triplet.
struct Edge {
  std::string u;
  std::string v;
  std::string relation;          // normalize_relation() key
  std::string relation_surface;  // as first seen
  std::vector<std::size_t> sources;  // ascending indices into KnowledgeGraph::triplets()
  double weight = 0.0;               // 1 - max source confidence
  std::size_t first_sentence = kNoSentence;
};

struct Cycle {
  std::vector<std::string> nodes;  // path u ... v closed by `closing_edge`
  std::size_t closing_edge = 0;
};

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  explicit KnowledgeGraph(GraphOrigin origin) : origin_(origin) {}

  GraphOrigin origin() const { return origin_; }
  const std::vector<Entity>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Triplet>& triplets() const { return triplets_; }
  // Input positions of triplets rejected as self-loops by build_graph().
  const std::vector<std::size_t>& rejected_self_loops() const { return rejected_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return nodes_.empty(); }

  bool contains(std::string_view key) const;
  const Entity* find(std::string_view key) const;
  // Indices of edges incident to `key`, in edge order.
  std::vector<std::size_t> incident_edges(std::string_view key) const;
  std::vector<std::string> neighbors(std::string_view key) const;
  // Keys in insertion order.
  std::vector<std::string> keys() const;
  double total_weight() const;
  std::size_t component_count() const;

  // Line-delimited node records followed by edge records.
  std::string dump() const;

 private:
  friend KnowledgeGraph build_graph(const std::vector<Triplet>&, GraphOrigin);
  friend KnowledgeGraph minimum_spanning_tree(const KnowledgeGraph&);
  friend KnowledgeGraph verified_subgraph(const KnowledgeGraph&, const std::set<std::string>&);

  std::size_t intern(const std::string& key, const std::string& surface);
  void add_edge(Edge e);
  std::size_t index_of(std::string_view key) const;

  GraphOrigin origin_ = GraphOrigin::context;
  std::vector<Entity> nodes_;
  std::unordered_map<std::string, std::size_t> node_index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;  // node index -> edge indices
  std::vector<Triplet> triplets_;
  std::vector<std::size_t> rejected_;
};

// One node per distinct canonical entity, one edge per (endpoint pair,
// relation). Self-loop triplets are skipped and listed in
// rejected_self_loops().
KnowledgeGraph build_graph(const std::vector<Triplet>& triplets,
                           GraphOrigin origin = GraphOrigin::context);

// A fundamental cycle basis: one cycle per edge that closes a loop when edges
// are added in insertion order. Empty iff the graph is a forest. Parallel edges
// yield 2-node cycles.
std::vector<Cycle> find_cycles(const KnowledgeGraph& graph);

// Minimum spanning forest (Kruskal). Ties on weight are broken by lower
// first source sentence, then relation, then the ordered endpoint pair. The
// node set is preserved.
KnowledgeGraph minimum_spanning_tree(const KnowledgeGraph& graph);

// Induced subgraph on `verified`. Throws kgv::Error naming the first key that
// is not a node of `graph`.
KnowledgeGraph verified_subgraph(const KnowledgeGraph& graph, const std::set<std::string>& verified);

}  // namespace kgv
