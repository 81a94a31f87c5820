#include "kgnn/knowledge_store.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kgnn {
namespace {

std::string AliasKey(const std::vector<std::string>& tokens, std::size_t begin,
                     std::size_t end) {
  std::string key;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) key.push_back('\x1f');
    key += ToLowerAscii(tokens[i]);
  }
  return key;
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) fields.push_back(field);
  if (!line.empty() && line.back() == '\t') fields.emplace_back();
  return fields;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

RelationVocabulary RelationVocabulary::Default() {
  return RelationVocabulary({"director", "position_held", "record_label",
                             "lyrics_by", "adapted_from"});
}

RelationVocabulary::RelationVocabulary(const std::vector<std::string>& relations) {
  names_.push_back(kCorefName);
  for (const std::string& r : relations) {
    if (std::find(names_.begin(), names_.end(), r) != names_.end()) {
      throw std::invalid_argument("duplicate relation name '" + r + "'");
    }
    names_.push_back(r);
  }
}

std::optional<std::size_t> RelationVocabulary::Find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

KnowledgeStore::KnowledgeStore(std::vector<EntityRecord> entities,
                               std::vector<RelationTriple> triples,
                               RelationVocabulary relations)
    : entities_(std::move(entities)), relations_(std::move(relations)) {
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    EntityRecord& e = entities_[i];
    if (e.id.empty()) throw std::invalid_argument("entity with empty id");
    if (!index_.emplace(e.id, i).second) {
      throw std::invalid_argument("duplicate entity id '" + e.id + "'");
    }
    if (std::find(e.aliases.begin(), e.aliases.end(), e.canonical_name) ==
        e.aliases.end()) {
      e.aliases.insert(e.aliases.begin(), e.canonical_name);
    }
    for (const std::string& alias : e.aliases) {
      const TokenizedText t = Tokenize(alias);
      if (t.tokens.empty()) continue;
      // The first entity to claim an alias keeps it.
      alias_index_.emplace(AliasKey(t.tokens, 0, t.tokens.size()), i);
      max_alias_tokens_ = std::max(max_alias_tokens_, t.tokens.size());
    }
  }
  std::set<RelationTriple> seen;
  for (std::size_t line = 0; line < triples.size(); ++line) {
    const RelationTriple& t = triples[line];
    const auto rel = relations_.Find(t.relation);
    if (!rel || *rel == RelationVocabulary::kCoref) {
      throw std::invalid_argument("triple " + std::to_string(line + 1) +
                                  ": unknown relation '" + t.relation + "'");
    }
    if (!HasEntity(t.head) || !HasEntity(t.tail)) {
      throw std::invalid_argument(
          "triple " + std::to_string(line + 1) + ": unknown entity '" +
          (HasEntity(t.head) ? t.tail : t.head) + "'");
    }
    if (t.head == t.tail) {
      throw std::invalid_argument("triple " + std::to_string(line + 1) +
                                  ": head equals tail ('" + t.head + "')");
    }
    if (!seen.insert(t).second) continue;
    triples_.push_back(t);
    auto& rels = facts_[{IndexOf(t.head), IndexOf(t.tail)}];
    rels.insert(std::lower_bound(rels.begin(), rels.end(), *rel), *rel);
  }
}

KnowledgeStore KnowledgeStore::Load(const std::string& entities_path,
                                    const std::string& triples_path,
                                    RelationVocabulary relations) {
  std::ifstream ein(entities_path);
  if (!ein) throw std::runtime_error("cannot read " + entities_path);
  std::vector<EntityRecord> entities;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ein, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EntityRecord e;
      e.id = j.at("id").get<std::string>();
      e.canonical_name = j.at("name").get<std::string>();
      if (j.contains("aliases")) {
        e.aliases = j.at("aliases").get<std::vector<std::string>>();
      }
      entities.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error(entities_path + ":" + std::to_string(line_no) +
                               ": " + ex.what());
    }
  }

  std::ifstream tin(triples_path);
  if (!tin) throw std::runtime_error("cannot read " + triples_path);
  std::vector<RelationTriple> triples;
  std::vector<std::size_t> line_of;
  line_no = 0;
  while (std::getline(tin, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty() || line[0] == '#') continue;
    const auto fields = SplitTabs(line);
    if (fields.size() != 3) {
      throw std::runtime_error(triples_path + ":" + std::to_string(line_no) +
                               ": expected head<TAB>relation<TAB>tail");
    }
    triples.push_back({fields[0], fields[1], fields[2]});
    line_of.push_back(line_no);
  }
  std::set<std::string> ids;
  for (const EntityRecord& e : entities) ids.insert(e.id);
  for (std::size_t k = 0; k < triples.size(); ++k) {
    const RelationTriple& t = triples[k];
    const std::string where = triples_path + ":" + std::to_string(line_of[k]);
    const auto rel = relations.Find(t.relation);
    if (!rel || *rel == RelationVocabulary::kCoref) {
      throw std::runtime_error(where + ": unknown relation '" + t.relation + "'");
    }
    for (const std::string* id : {&t.head, &t.tail}) {
      if (!ids.count(*id)) {
        throw std::runtime_error(where + ": unknown entity '" + *id + "'");
      }
    }
    if (t.head == t.tail) {
      throw std::runtime_error(where + ": head equals tail ('" + t.head + "')");
    }
  }
  return KnowledgeStore(std::move(entities), std::move(triples),
                        std::move(relations));
}

std::vector<Mention> KnowledgeStore::LinkMentions(const TokenizedText& paragraph,
                                                  std::size_t paragraph_id) const {
  std::vector<Mention> mentions;
  const auto& tokens = paragraph.tokens;
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    const std::size_t longest = std::min(max_alias_tokens_, tokens.size() - i);
    for (std::size_t len = longest; len >= 1; --len) {
      auto it = alias_index_.find(AliasKey(tokens, i, i + len));
      if (it == alias_index_.end()) continue;
      mentions.push_back({paragraph_id, i, i + len - 1, entities_[it->second].id});
      i += len;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return mentions;
}

std::vector<RelationHit> KnowledgeStore::QueryRelations(const std::string& e1,
                                                        const std::string& e2) const {
  const std::size_t a = IndexOf(e1);
  const std::size_t b = IndexOf(e2);
  std::vector<RelationHit> hits;
  if (auto it = facts_.find({a, b}); it != facts_.end()) {
    for (std::size_t r : it->second) hits.push_back({r, Direction::kForward});
  }
  if (auto it = facts_.find({b, a}); it != facts_.end()) {
    for (std::size_t r : it->second) hits.push_back({r, Direction::kBackward});
  }
  return hits;
}

const EntityRecord& KnowledgeStore::Entity(const std::string& id) const {
  return entities_[IndexOf(id)];
}

std::size_t KnowledgeStore::IndexOf(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw std::invalid_argument("unknown entity id '" + id + "'");
  }
  return it->second;
}

}  // namespace kgnn
