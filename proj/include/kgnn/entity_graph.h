#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgnn/knowledge_store.h"

namespace kgnn {

struct GraphConfig {
  // Adds a backward-kind edge tail -> head for every relation edge.
  bool inverse_edges = true;
  // Relation edges between two nodes of the same paragraph.
  bool same_paragraph_relations = true;
  bool coref_edges = true;
  bool relation_edges = true;
};

// Edge kinds are dense integers: 0 is co-reference, 1..R are forward
// relations and R+1..2R their backward counterparts (when enabled).
class EdgeKinds {
 public:
  EdgeKinds(const RelationVocabulary& relations, bool inverse_edges);

  std::size_t count() const { return count_; }
  std::size_t Forward(std::size_t relation) const { return relation; }
  std::size_t Backward(std::size_t relation) const;
  std::size_t RelationOf(std::size_t kind) const;
  bool IsCoref(std::size_t kind) const { return kind == 0; }
  bool IsBackward(std::size_t kind) const { return kind > relations_; }
  // "coref", "lyrics_by", "lyrics_by^-1", ...
  std::string Name(const RelationVocabulary& relations, std::size_t kind) const;

 private:
  std::size_t relations_;
  bool inverse_;
  std::size_t count_;
};

struct EntityNode {
  std::size_t id = 0;
  std::string entity_id;
  std::size_t paragraph = 0;
  std::vector<Mention> mentions;  // sorted by start
};

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::size_t kind = 0;

  auto operator<=>(const Edge&) const = default;
};

class EntityGraph {
 public:
  EntityGraph() = default;
  EntityGraph(std::vector<EntityNode> nodes, std::vector<Edge> edges,
              std::size_t num_kinds);

  const std::vector<EntityNode>& nodes() const { return nodes_; }
  // Canonical order: sorted by (src, dst, kind).
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t num_kinds() const { return num_kinds_; }
  std::size_t size() const { return nodes_.size(); }

  // Message sources j with an edge j -> node of the given kind, ascending.
  const std::vector<std::size_t>& Neighbors(std::size_t node,
                                            std::size_t kind) const;

  // Copy with every edge removed (the no-graph ablation).
  EntityGraph WithoutEdges() const;

  // {"nodes":[{id,entity,paragraph,mentions}], "edges":[{src,dst,kind,dir}]}
  nlohmann::json ToJson(const RelationVocabulary& relations,
                        const EdgeKinds& kinds) const;

 private:
  std::vector<EntityNode> nodes_;
  std::vector<Edge> edges_;
  std::size_t num_kinds_ = 0;
  std::vector<std::vector<std::size_t>> adjacency_;  // [node * kinds + kind]
};

// One node per (entity, paragraph) with at least one mention, ids assigned
// in (paragraph, first mention start) order; coref edges both ways between
// nodes of the same entity; relation edges head -> tail per stored fact.
EntityGraph BuildGraph(const std::vector<std::vector<Mention>>& mentions,
                       const KnowledgeStore& store, const GraphConfig& config);

}  // namespace kgnn
