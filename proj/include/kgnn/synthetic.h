#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kgnn/corpus.h"
#include "kgnn/knowledge_store.h"

namespace kgnn {

// Two-hop bridge questions over a generated world. The world is a set of
// units; a unit holds two chains (anchor A, bridge B, tails C_r for a few
// relations r of B). Each chain has an anchor paragraph naming A and B, and
// the unit has one bridge paragraph stating the facts of both bridges.
// A question names A and r; its answer is C_r.
struct SyntheticTaskSpec {
  std::size_t num_entities = 1200;
  std::vector<std::string> relations = RelationVocabulary::Default().RelationNames();
  std::size_t relations_per_bridge = 3;
  std::size_t num_questions = 1000;  // training split
  std::size_t dev_questions = 500;
  // Total paragraphs per question, gold included (>= 2). Everything beyond
  // the two gold paragraphs is a distractor.
  std::size_t paragraphs_per_question = 4;
  std::uint64_t seed = 7;

  std::size_t distractor_count() const { return paragraphs_per_question - 2; }
};

struct GoldPath {
  std::string id;
  std::string anchor, bridge, tail, relation;
  std::size_t anchor_paragraph = 0;  // P1
  std::size_t bridge_paragraph = 0;  // P2
};

struct SyntheticCorpus {
  std::vector<EntityRecord> entities;
  std::vector<RelationTriple> triples;
  std::vector<Example> train, dev;
  std::vector<GoldPath> train_paths, dev_paths;
};

// Deterministic given its argument. The world depends only on num_entities,
// relations, relations_per_bridge and seed, so specs that differ in
// question or paragraph counts share entities and facts. Rejects specs
// whose world cannot fill the requested paragraphs.
SyntheticCorpus GenerateCorpus(const SyntheticTaskSpec& spec);

// Writes train.jsonl, dev.jsonl, entities.jsonl and triples.tsv.
void WriteSyntheticCorpus(const std::string& dir, const SyntheticCorpus& corpus);

// Checks that the gold answer is reached from the question through exactly
// coref(B@P1 -> B@P2) then r(B@P2 -> C@P2). Returns an empty string on
// success, otherwise the first violation.
std::string ValidateGoldPath(const Example& example, const GoldPath& path,
                             const KnowledgeStore& store);

// 1 / number of distinct tail entities (entities that are the tail of some
// fact) mentioned in the question's paragraphs.
double ChanceLevel(const Example& example, const KnowledgeStore& store);

}  // namespace kgnn
