#include "kgnn/entity_graph.h"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace kgnn {

EdgeKinds::EdgeKinds(const RelationVocabulary& relations, bool inverse_edges)
    : relations_(relations.relation_count()),
      inverse_(inverse_edges),
      count_(1 + relations_ * (inverse_edges ? 2 : 1)) {}

std::size_t EdgeKinds::Backward(std::size_t relation) const {
  if (!inverse_) throw std::logic_error("inverse edges are disabled");
  return relations_ + relation;
}

std::size_t EdgeKinds::RelationOf(std::size_t kind) const {
  if (kind == 0) return RelationVocabulary::kCoref;
  return kind > relations_ ? kind - relations_ : kind;
}

std::string EdgeKinds::Name(const RelationVocabulary& relations,
                            std::size_t kind) const {
  if (IsCoref(kind)) return "coref";
  std::string name = relations.Name(RelationOf(kind));
  return IsBackward(kind) ? name + "^-1" : name;
}

EntityGraph::EntityGraph(std::vector<EntityNode> nodes, std::vector<Edge> edges,
                         std::size_t num_kinds)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), num_kinds_(num_kinds) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  adjacency_.assign(nodes_.size() * num_kinds_, {});
  for (const Edge& e : edges_) {
    if (e.src == e.dst || e.src >= nodes_.size() || e.dst >= nodes_.size() ||
        e.kind >= num_kinds_) {
      throw std::invalid_argument("invalid edge " + std::to_string(e.src) +
                                  " -> " + std::to_string(e.dst));
    }
    adjacency_[e.dst * num_kinds_ + e.kind].push_back(e.src);
  }
  // Edges are sorted by src, so every neighbour list is already ascending.
}

const std::vector<std::size_t>& EntityGraph::Neighbors(std::size_t node,
                                                       std::size_t kind) const {
  if (node >= nodes_.size()) {
    throw std::out_of_range("unknown node " + std::to_string(node));
  }
  if (kind >= num_kinds_) {
    throw std::out_of_range("unknown edge kind " + std::to_string(kind));
  }
  return adjacency_[node * num_kinds_ + kind];
}

EntityGraph EntityGraph::WithoutEdges() const {
  return EntityGraph(nodes_, {}, num_kinds_);
}

nlohmann::json EntityGraph::ToJson(const RelationVocabulary& relations,
                                   const EdgeKinds& kinds) const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const EntityNode& n : nodes_) {
    nlohmann::json mentions = nlohmann::json::array();
    for (const Mention& m : n.mentions) mentions.push_back({m.start, m.end});
    nodes.push_back({{"id", n.id},
                     {"entity", n.entity_id},
                     {"paragraph", n.paragraph},
                     {"mentions", mentions}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : edges_) {
    const char* dir = kinds.IsCoref(e.kind)     ? "none"
                      : kinds.IsBackward(e.kind) ? "backward"
                                                 : "forward";
    edges.push_back({{"src", e.src},
                     {"dst", e.dst},
                     {"kind", kinds.IsCoref(e.kind)
                                  ? std::string("coref")
                                  : relations.Name(kinds.RelationOf(e.kind))},
                     {"dir", dir}});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

EntityGraph BuildGraph(const std::vector<std::vector<Mention>>& mentions,
                       const KnowledgeStore& store, const GraphConfig& config) {
  const EdgeKinds kinds(store.relations(), config.inverse_edges);

  // Group mentions by (paragraph, entity); order nodes by paragraph, then by
  // the start of their first mention.
  std::map<std::pair<std::size_t, std::string>, std::vector<Mention>> groups;
  for (const auto& para : mentions) {
    for (const Mention& m : para) groups[{m.paragraph, m.entity_id}].push_back(m);
  }
  std::vector<EntityNode> nodes;
  for (auto& [key, ms] : groups) {
    std::sort(ms.begin(), ms.end());
    EntityNode node;
    node.entity_id = key.second;
    node.paragraph = key.first;
    node.mentions = ms;
    nodes.push_back(std::move(node));
  }
  std::sort(nodes.begin(), nodes.end(), [](const EntityNode& a, const EntityNode& b) {
    if (a.paragraph != b.paragraph) return a.paragraph < b.paragraph;
    return a.mentions.front().start < b.mentions.front().start;
  });
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].id = i;

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (i == j) continue;
      const EntityNode& a = nodes[i];
      const EntityNode& b = nodes[j];
      if (a.entity_id == b.entity_id) {
        // Same entity in one paragraph is impossible by construction.
        if (config.coref_edges) edges.push_back({i, j, 0});
        continue;
      }
      if (!config.relation_edges) continue;
      if (a.paragraph == b.paragraph && !config.same_paragraph_relations) continue;
      for (const RelationHit& hit : store.QueryRelations(a.entity_id, b.entity_id)) {
        if (hit.direction != Direction::kForward) continue;  // seen from (j, i)
        edges.push_back({i, j, kinds.Forward(hit.relation)});
        if (config.inverse_edges) edges.push_back({j, i, kinds.Backward(hit.relation)});
      }
    }
  }
  return EntityGraph(std::move(nodes), std::move(edges), kinds.count());
}

}  // namespace kgnn
