#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kgnn/text.h"

namespace kgnn {

struct EntityRecord {
  std::string id;
  std::string canonical_name;
  std::vector<std::string> aliases;
};

struct RelationTriple {
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const RelationTriple&) const = default;
};

// Relation names, with the co-reference type reserved at index 0.
class RelationVocabulary {
 public:
  static constexpr std::size_t kCoref = 0;
  static constexpr const char* kCorefName = "equal_to";

  // {director, position_held, record_label, lyrics_by, adapted_from}.
  static RelationVocabulary Default();
  explicit RelationVocabulary(const std::vector<std::string>& relations);

  // Includes the co-reference entry.
  std::size_t size() const { return names_.size(); }
  std::size_t relation_count() const { return names_.size() - 1; }
  const std::string& Name(std::size_t index) const { return names_.at(index); }
  std::optional<std::size_t> Find(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  // Relation names without the co-reference entry.
  std::vector<std::string> RelationNames() const {
    return {names_.begin() + 1, names_.end()};
  }

 private:
  std::vector<std::string> names_;
};

enum class Direction { kForward, kBackward };

// A linked entity mention: tokens [start, end] (inclusive) of a paragraph.
struct Mention {
  std::size_t paragraph = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string entity_id;

  auto operator<=>(const Mention&) const = default;
};

struct RelationHit {
  std::size_t relation;  // index into RelationVocabulary, never kCoref
  Direction direction;

  bool operator==(const RelationHit&) const = default;
};

// Entities, aliases and relational facts. Immutable after construction.
class KnowledgeStore {
 public:
  KnowledgeStore(std::vector<EntityRecord> entities,
                 std::vector<RelationTriple> triples,
                 RelationVocabulary relations);

  // entities: JSON lines {"id","name","aliases":[...]}
  // triples: TSV head<TAB>relation<TAB>tail, '#' comments ignored.
  static KnowledgeStore Load(const std::string& entities_path,
                             const std::string& triples_path,
                             RelationVocabulary relations =
                                 RelationVocabulary::Default());

  // Greedy left-to-right longest alias match, case-insensitive.
  std::vector<Mention> LinkMentions(const TokenizedText& paragraph,
                                    std::size_t paragraph_id) const;

  // Facts (e1, r, e2) as forward hits, then (e2, r, e1) as backward hits.
  std::vector<RelationHit> QueryRelations(const std::string& e1,
                                          const std::string& e2) const;

  bool HasEntity(const std::string& id) const { return index_.count(id) > 0; }
  const EntityRecord& Entity(const std::string& id) const;
  const std::vector<EntityRecord>& entities() const { return entities_; }
  const std::vector<RelationTriple>& triples() const { return triples_; }
  const RelationVocabulary& relations() const { return relations_; }

 private:
  std::size_t IndexOf(const std::string& id) const;

  std::vector<EntityRecord> entities_;
  std::vector<RelationTriple> triples_;
  RelationVocabulary relations_;
  std::map<std::string, std::size_t> index_;
  // Lowercased alias token sequence (joined by '\x1f') -> entity index.
  std::map<std::string, std::size_t> alias_index_;
  std::size_t max_alias_tokens_ = 0;
  // (head index, tail index) -> sorted relation indices.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> facts_;
};

}  // namespace kgnn
