#include "kgv/kgraph.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <tuple>

#include "json.hpp"
#include "kgv/error.hpp"

namespace kgv {

namespace {

struct DisjointSet {
  explicit DisjointSet(std::size_t n) : parent(n), rank(n, 0) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank[a] < rank[b]) std::swap(a, b);
    parent[b] = a;
    if (rank[a] == rank[b]) ++rank[a];
    return true;
  }
  std::vector<std::size_t> parent;
  std::vector<unsigned> rank;
};

}  // namespace

std::size_t KnowledgeGraph::index_of(std::string_view key) const {
  auto it = node_index_.find(std::string(key));
  return it == node_index_.end() ? nodes_.size() : it->second;
}

bool KnowledgeGraph::contains(std::string_view key) const { return index_of(key) < nodes_.size(); }

const Entity* KnowledgeGraph::find(std::string_view key) const {
  std::size_t i = index_of(key);
  return i < nodes_.size() ? &nodes_[i] : nullptr;
}

std::vector<std::size_t> KnowledgeGraph::incident_edges(std::string_view key) const {
  std::size_t i = index_of(key);
  if (i >= nodes_.size()) return {};
  return adjacency_[i];
}

std::vector<std::string> KnowledgeGraph::neighbors(std::string_view key) const {
  std::vector<std::string> out;
  for (std::size_t e : incident_edges(key)) {
    const Edge& edge = edges_[e];
    const std::string& other = edge.u == key ? edge.v : edge.u;
    if (std::find(out.begin(), out.end(), other) == out.end()) out.push_back(other);
  }
  return out;
}

std::vector<std::string> KnowledgeGraph::keys() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.canonical);
  return out;
}

double KnowledgeGraph::total_weight() const {
  double w = 0.0;
  for (const auto& e : edges_) w += e.weight;
  return w;
}

std::size_t KnowledgeGraph::component_count() const {
  DisjointSet ds(nodes_.size());
  std::size_t components = nodes_.size();
  for (const auto& e : edges_) {
    if (ds.unite(index_of(e.u), index_of(e.v))) --components;
  }
  return components;
}

std::size_t KnowledgeGraph::intern(const std::string& key, const std::string& surface) {
  auto [it, inserted] = node_index_.emplace(key, nodes_.size());
  if (inserted) {
    nodes_.push_back(Entity{key, {}, std::nullopt});
    adjacency_.emplace_back();
  }
  auto& mentions = nodes_[it->second].mentions;
  if (std::find(mentions.begin(), mentions.end(), surface) == mentions.end())
    mentions.push_back(surface);
  return it->second;
}

void KnowledgeGraph::add_edge(Edge e) {
  std::size_t idx = edges_.size();
  adjacency_[index_of(e.u)].push_back(idx);
  adjacency_[index_of(e.v)].push_back(idx);
  edges_.push_back(std::move(e));
}

std::string KnowledgeGraph::dump() const {
  std::string out;
  for (const auto& n : nodes_) {
    nlohmann::ordered_json j;
    j["node"] = n.canonical;
    j["mentions"] = n.mentions;
    out += j.dump();
    out.push_back('\n');
  }
  for (const auto& e : edges_) {
    nlohmann::ordered_json j;
    j["edge"] = {e.u, e.v};
    j["relation"] = e.relation;
    j["weight"] = e.weight;
    j["sources"] = e.sources;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

KnowledgeGraph build_graph(const std::vector<Triplet>& triplets, GraphOrigin origin) {
  KnowledgeGraph g(origin);
  g.triplets_ = triplets;
  // (low node, high node, relation) -> edge index
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> edge_index;

  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const Triplet& t = triplets[i];
    if (t.subject.canonical == t.object.canonical) {
      g.rejected_.push_back(i);
      continue;
    }
    std::size_t s = g.intern(t.subject.canonical, t.subject.surface);
    std::size_t o = g.intern(t.object.canonical, t.object.surface);
    std::string rel = normalize_relation(t.relation);
    auto key = std::make_tuple(std::min(s, o), std::max(s, o), rel);
    auto it = edge_index.find(key);
    if (it == edge_index.end()) {
      Edge e;
      e.u = t.subject.canonical;
      e.v = t.object.canonical;
      e.relation = rel;
      e.relation_surface = t.relation;
      e.sources = {i};
      e.weight = 1.0 - t.confidence;
      e.first_sentence = t.sentence_index;
      edge_index.emplace(key, g.edges_.size());
      g.add_edge(std::move(e));
    } else {
      Edge& e = g.edges_[it->second];
      e.sources.push_back(i);
      e.weight = std::min(e.weight, 1.0 - t.confidence);
      e.first_sentence = std::min(e.first_sentence, t.sentence_index);
    }
  }
  return g;
}

std::vector<Cycle> find_cycles(const KnowledgeGraph& graph) {
  const auto& edges = graph.edges();
  const std::size_t n = graph.node_count();
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) idx.emplace(graph.nodes()[i].canonical, i);

  DisjointSet ds(n);
  std::vector<std::vector<std::size_t>> tree(n);  // forest adjacency (node indices)
  std::vector<Cycle> cycles;

  for (std::size_t ei = 0; ei < edges.size(); ++ei) {
    std::size_t a = idx.at(edges[ei].u);
    std::size_t b = idx.at(edges[ei].v);
    if (ds.unite(a, b)) {
      tree[a].push_back(b);
      tree[b].push_back(a);
      continue;
    }
    // BFS for the tree path a -> b.
    std::vector<std::size_t> prev(n, n);
    std::deque<std::size_t> queue{a};
    prev[a] = a;
    while (!queue.empty() && prev[b] == n) {
      std::size_t x = queue.front();
      queue.pop_front();
      for (std::size_t y : tree[x]) {
        if (prev[y] != n) continue;
        prev[y] = x;
        queue.push_back(y);
      }
    }
    Cycle c;
    c.closing_edge = ei;
    for (std::size_t x = b;; x = prev[x]) {
      c.nodes.push_back(graph.nodes()[x].canonical);
      if (x == a) break;
    }
    std::reverse(c.nodes.begin(), c.nodes.end());
    cycles.push_back(std::move(c));
  }
  return cycles;
}

KnowledgeGraph minimum_spanning_tree(const KnowledgeGraph& graph) {
  const auto& edges = graph.edges();
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rank = [&](std::size_t i) {
    const Edge& e = edges[i];
    const std::string& lo = std::min(e.u, e.v);
    const std::string& hi = std::max(e.u, e.v);
    return std::tie(e.weight, e.first_sentence, e.relation, lo, hi);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rank(a) < rank(b); });

  KnowledgeGraph out(graph.origin());
  out.triplets_ = graph.triplets_;
  out.rejected_ = graph.rejected_;
  out.nodes_ = graph.nodes_;
  out.node_index_ = graph.node_index_;
  out.adjacency_.assign(graph.nodes_.size(), {});

  DisjointSet ds(graph.node_count());
  std::vector<bool> keep(edges.size(), false);
  for (std::size_t i : order) {
    if (ds.unite(graph.index_of(edges[i].u), graph.index_of(edges[i].v))) keep[i] = true;
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (keep[i]) out.add_edge(edges[i]);
  }
  return out;
}

KnowledgeGraph verified_subgraph(const KnowledgeGraph& graph, const std::set<std::string>& verified) {
  for (const auto& key : verified) {
    if (!graph.contains(key)) throw Error("verified entity is not in the graph: " + key);
  }
  KnowledgeGraph out(GraphOrigin::verified_subgraph);
  out.triplets_ = graph.triplets_;
  for (const auto& node : graph.nodes_) {
    if (!verified.count(node.canonical)) continue;
    out.node_index_.emplace(node.canonical, out.nodes_.size());
    out.nodes_.push_back(node);
    out.adjacency_.emplace_back();
  }
  for (const auto& e : graph.edges_) {
    if (verified.count(e.u) && verified.count(e.v)) out.add_edge(e);
  }
  return out;
}

}  // namespace kgv
