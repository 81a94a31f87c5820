#include "kgnn/synthetic.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "kgnn/entity_graph.h"
#include "kgnn/params.h"
#include "kgnn/text.h"

namespace kgnn {
namespace {

const std::vector<std::string> kAnchorNouns = {"album", "film", "novel", "song",
                                               "series", "play", "poem", "opera"};
const std::vector<std::string> kBridgeNouns = {"studio", "company", "group", "ensemble",
                                               "collective", "troupe", "workshop", "guild"};

struct Chain {
  std::size_t anchor = 0, bridge = 0;
  std::vector<std::size_t> relations;  // indices into the relation list
  std::vector<std::size_t> tails;      // aligned with relations
  std::string anchor_noun;
};

struct Unit {
  Chain chains[2];
  Paragraph anchor_paragraph[2];
  Paragraph bridge_paragraph;
};

struct World {
  std::vector<EntityRecord> entities;
  std::vector<RelationTriple> triples;
  std::vector<Unit> units;
};

std::string RelationWords(const std::string& relation) {
  std::string words = relation;
  std::replace(words.begin(), words.end(), '_', ' ');
  return words;
}

Rng SeededRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

// Modulo draw: slightly biased but identical on every standard library,
// unlike the std distributions.
std::size_t Uniform(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
void Shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[Uniform(rng, i)]);
}

std::string Capitalize(std::string s) {
  s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// Pseudo-word name pools: given names end in a vowel, family names in a
// consonant, so the two pools never overlap.
std::vector<std::string> NamePool(Rng& rng, std::size_t count, bool family) {
  static const std::string kOnsets = "bdfgklmnprstvz";
  static const std::string kVowels = "aeiou";
  static const std::string kCodas = "nrlkst";
  std::set<std::string> seen;
  std::vector<std::string> pool;
  while (pool.size() < count) {
    std::string w;
    w += kOnsets[Uniform(rng, kOnsets.size())];
    w += kVowels[Uniform(rng, kVowels.size())];
    w += kOnsets[Uniform(rng, kOnsets.size())];
    w += kVowels[Uniform(rng, kVowels.size())];
    if (family) w += kCodas[Uniform(rng, kCodas.size())];
    if (seen.insert(w).second) pool.push_back(Capitalize(w));
  }
  return pool;
}

std::size_t EntitiesPerUnit(const SyntheticTaskSpec& spec) {
  return 2 * (2 + spec.relations_per_bridge);
}

World BuildWorld(const SyntheticTaskSpec& spec) {
  const std::size_t per_unit = EntitiesPerUnit(spec);
  const std::size_t num_units = spec.num_entities / per_unit;
  if (num_units < 2) {
    throw std::invalid_argument("num_entities = " + std::to_string(spec.num_entities) +
                                " is too small: a world needs at least " +
                                std::to_string(2 * per_unit) + " entities");
  }
  Rng rng = SeededRng(spec.seed, 0, 0);
  const std::size_t pool = 8;
  std::size_t side = pool;
  while (side * side < 2 * spec.num_entities) side += pool;
  const auto given = NamePool(rng, side, false);
  const auto family = NamePool(rng, side, true);

  World world;
  std::set<std::string> used;
  auto new_entity = [&]() {
    std::string name;
    do {
      name = given[Uniform(rng, given.size())] + " " + family[Uniform(rng, family.size())];
    } while (!used.insert(name).second);
    const std::size_t index = world.entities.size();
    world.entities.push_back({"E" + std::to_string(index), name, {}});
    return index;
  };

  const auto& rel = spec.relations;
  for (std::size_t u = 0; u < num_units; ++u) {
    Unit unit;
    std::vector<std::string> bridge_sentences;
    // Both bridges of a unit carry the same relations. Otherwise the
    // question's relation would often single out one bridge's tail, and the
    // answer could be found without following the bridge.
    std::vector<std::size_t> order(rel.size());
    for (std::size_t r = 0; r < rel.size(); ++r) order[r] = r;
    Shuffle(order, rng);
    order.resize(spec.relations_per_bridge);
    std::sort(order.begin(), order.end());
    for (Chain& c : unit.chains) {
      c.anchor = new_entity();
      c.bridge = new_entity();
      c.anchor_noun = kAnchorNouns[Uniform(rng, kAnchorNouns.size())];
      c.relations = order;
      for (std::size_t r : c.relations) {
        c.tails.push_back(new_entity());
        world.triples.push_back({world.entities[c.bridge].id, rel[r],
                                 world.entities[c.tails.back()].id});
      }
    }
    for (int k = 0; k < 2; ++k) {
      const Chain& c = unit.chains[k];
      const std::string& a = world.entities[c.anchor].canonical_name;
      const std::string& b = world.entities[c.bridge].canonical_name;
      Paragraph p{a, {a + " is a " + c.anchor_noun + " .",
                      a + " was created together with " + b + " ."}};
      if (Uniform(rng, 2) == 0) {
        p.sentences.push_back("It first appeared in " + std::to_string(1950 + Uniform(rng, 70)) + " .");
      }
      unit.anchor_paragraph[k] = p;
      bridge_sentences.push_back(b + " is a " + kBridgeNouns[Uniform(rng, kBridgeNouns.size())] + " .");
      for (std::size_t i = 0; i < c.relations.size(); ++i) {
        bridge_sentences.push_back("The " + RelationWords(rel[c.relations[i]]) + " of " + b +
                                   " is " + world.entities[c.tails[i]].canonical_name + " .");
      }
    }
    Shuffle(bridge_sentences, rng);
    unit.bridge_paragraph = {world.entities[unit.chains[0].bridge].canonical_name,
                             bridge_sentences};
    world.units.push_back(std::move(unit));
  }
  return world;
}

bool UnitHasRelation(const Unit& unit, std::size_t r) {
  for (const Chain& c : unit.chains) {
    if (std::find(c.relations.begin(), c.relations.end(), r) != c.relations.end()) return true;
  }
  return false;
}

std::size_t SentenceIndex(const Paragraph& p, const std::string& sentence) {
  for (std::size_t i = 0; i < p.sentences.size(); ++i) {
    if (p.sentences[i] == sentence) return i;
  }
  throw std::logic_error("sentence not found: " + sentence);
}

void MakeQuestions(const SyntheticTaskSpec& spec, const World& world,
                   std::size_t first_unit, std::size_t end_unit, std::size_t count,
                   std::uint64_t stream, const std::string& prefix,
                   std::vector<Example>& examples, std::vector<GoldPath>& paths) {
  const auto& rel = spec.relations;
  for (std::size_t q = 0; q < count; ++q) {
    // The question itself and its distractors draw from separate streams,
    // so changing the paragraph count keeps the questions.
    Rng pick = SeededRng(spec.seed, stream, q);
    Rng fill = SeededRng(spec.seed, stream + 100, q);
    const std::size_t u = first_unit + Uniform(pick, end_unit - first_unit);
    const std::size_t k = Uniform(pick, 2);
    const Unit& unit = world.units[u];
    const Chain& chain = unit.chains[k];
    const std::size_t slot = Uniform(pick, chain.relations.size());
    const std::size_t r = chain.relations[slot];
    const auto& A = world.entities[chain.anchor];
    const auto& B = world.entities[chain.bridge];
    const auto& C = world.entities[chain.tails[slot]];

    std::vector<Paragraph> paragraphs = {unit.anchor_paragraph[k], unit.bridge_paragraph};
    std::vector<Paragraph> extra = {unit.anchor_paragraph[1 - k]};
    std::vector<std::size_t> others;
    for (std::size_t v = 0; v < world.units.size(); ++v) {
      if (v != u) others.push_back(v);
    }
    Shuffle(others, fill);
    std::stable_partition(others.begin(), others.end(), [&](std::size_t v) {
      return UnitHasRelation(world.units[v], r);
    });
    for (std::size_t v : others) {
      if (extra.size() >= spec.distractor_count()) break;
      extra.push_back(world.units[v].bridge_paragraph);
      extra.push_back(world.units[v].anchor_paragraph[0]);
      extra.push_back(world.units[v].anchor_paragraph[1]);
    }
    if (extra.size() < spec.distractor_count()) {
      throw std::invalid_argument("world too small for " +
                                  std::to_string(spec.paragraphs_per_question) +
                                  " paragraphs per question");
    }
    extra.resize(spec.distractor_count());
    paragraphs.insert(paragraphs.end(), extra.begin(), extra.end());

    std::vector<std::size_t> order(paragraphs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Shuffle(order, fill);
    std::vector<Paragraph> shuffled;
    GoldPath path;
    for (std::size_t i = 0; i < order.size(); ++i) {
      shuffled.push_back(paragraphs[order[i]]);
      if (order[i] == 0) path.anchor_paragraph = i;
      if (order[i] == 1) path.bridge_paragraph = i;
    }

    Example e;
    e.id = prefix + std::to_string(q);
    e.type = "bridge";
    e.question = "What is the " + RelationWords(rel[r]) + " of the partner of " +
                 A.canonical_name + " ?";
    e.answer = C.canonical_name;
    e.paragraphs = std::move(shuffled);
    const Paragraph& p1 = unit.anchor_paragraph[k];
    const Paragraph& p2 = unit.bridge_paragraph;
    e.supporting_facts = {
        {p1.title, SentenceIndex(p1, A.canonical_name + " was created together with " +
                                         B.canonical_name + " .")},
        {p2.title, SentenceIndex(p2, "The " + RelationWords(rel[r]) + " of " +
                                         B.canonical_name + " is " + C.canonical_name + " .")}};
    path.id = e.id;
    path.anchor = A.id;
    path.bridge = B.id;
    path.tail = C.id;
    path.relation = rel[r];
    examples.push_back(std::move(e));
    paths.push_back(std::move(path));
  }
}

}  // namespace

SyntheticCorpus GenerateCorpus(const SyntheticTaskSpec& spec) {
  if (spec.paragraphs_per_question < 2) {
    throw std::invalid_argument("paragraphs_per_question must be at least 2");
  }
  if (spec.relations.empty() || spec.relations_per_bridge == 0 ||
      spec.relations_per_bridge > spec.relations.size()) {
    throw std::invalid_argument("relations_per_bridge must be in [1, " +
                                std::to_string(spec.relations.size()) + "]");
  }
  World world = BuildWorld(spec);
  const std::size_t units = world.units.size();
  // A quarter of the units (at least one) is reserved for dev questions.
  const std::size_t dev_units = std::max<std::size_t>(1, units / 4);
  const std::size_t train_units = units - dev_units;

  SyntheticCorpus out;
  MakeQuestions(spec, world, 0, train_units, spec.num_questions, 1, "train-", out.train,
                out.train_paths);
  MakeQuestions(spec, world, train_units, units, spec.dev_questions, 2, "dev-", out.dev,
                out.dev_paths);
  out.entities = std::move(world.entities);
  out.triples = std::move(world.triples);

  KnowledgeStore store(out.entities, out.triples, RelationVocabulary(spec.relations));
  for (const auto* split : {&out.train, &out.dev}) {
    const auto& paths = split == &out.train ? out.train_paths : out.dev_paths;
    for (std::size_t i = 0; i < split->size(); ++i) {
      const std::string problem = ValidateGoldPath((*split)[i], paths[i], store);
      if (!problem.empty()) {
        throw std::logic_error("generated question " + paths[i].id + ": " + problem);
      }
    }
  }
  return out;
}

void WriteSyntheticCorpus(const std::string& dir, const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir);
  WriteCorpus(dir + "/train.jsonl", corpus.train);
  WriteCorpus(dir + "/dev.jsonl", corpus.dev);
  std::ofstream entities(dir + "/entities.jsonl");
  for (const EntityRecord& e : corpus.entities) {
    entities << nlohmann::json{{"id", e.id}, {"name", e.canonical_name}, {"aliases", e.aliases}}
                    .dump()
             << "\n";
  }
  std::ofstream triples(dir + "/triples.tsv");
  triples << "# head\trelation\ttail\n";
  for (const RelationTriple& t : corpus.triples) {
    triples << t.head << "\t" << t.relation << "\t" << t.tail << "\n";
  }
  if (!entities || !triples) throw std::runtime_error("cannot write corpus files to " + dir);
}

std::string ValidateGoldPath(const Example& example, const GoldPath& path,
                             const KnowledgeStore& store) {
  if (path.anchor_paragraph >= example.paragraphs.size() ||
      path.bridge_paragraph >= example.paragraphs.size()) {
    return "gold paragraph index out of range";
  }
  std::vector<std::vector<Mention>> mentions;
  std::vector<TokenizedText> texts;
  for (std::size_t p = 0; p < example.paragraphs.size(); ++p) {
    texts.push_back(TokenizeSentences(example.paragraphs[p].sentences));
    mentions.push_back(store.LinkMentions(texts.back(), p));
  }
  const EntityGraph graph = BuildGraph(mentions, store, GraphConfig{});
  auto node_of = [&](const std::string& entity, std::size_t paragraph) -> long {
    for (const EntityNode& n : graph.nodes()) {
      if (n.entity_id == entity && n.paragraph == paragraph) return static_cast<long>(n.id);
    }
    return -1;
  };
  const long a1 = node_of(path.anchor, path.anchor_paragraph);
  const long b1 = node_of(path.bridge, path.anchor_paragraph);
  const long b2 = node_of(path.bridge, path.bridge_paragraph);
  const long c2 = node_of(path.tail, path.bridge_paragraph);
  if (a1 < 0) return "anchor not linked in its paragraph";
  if (b1 < 0) return "bridge not linked in the anchor paragraph";
  if (b2 < 0) return "bridge not linked in the bridge paragraph";
  if (c2 < 0) return "answer not linked in the bridge paragraph";

  const auto& coref = graph.Neighbors(static_cast<std::size_t>(b2), 0);
  if (std::find(coref.begin(), coref.end(), static_cast<std::size_t>(b1)) == coref.end()) {
    return "missing coref edge between the two bridge mentions";
  }
  const auto r = store.relations().Find(path.relation);
  if (!r) return "unknown relation " + path.relation;
  const auto& incoming = graph.Neighbors(static_cast<std::size_t>(c2), *r);
  if (std::find(incoming.begin(), incoming.end(), static_cast<std::size_t>(b2)) ==
      incoming.end()) {
    return "missing " + path.relation + " edge from bridge to answer";
  }
  // Another entity of the bridge paragraph must hold the same relation, so
  // the relation alone does not give the answer away.
  std::size_t holders = 0;
  for (const EntityNode& n : graph.nodes()) {
    if (n.paragraph != path.bridge_paragraph || n.entity_id == path.bridge) continue;
    for (const RelationTriple& t : store.triples()) {
      if (t.head == n.entity_id && t.relation == path.relation) ++holders;
    }
  }
  if (holders == 0) return "the relation singles out the answer within its paragraph";
  for (const RelationTriple& t : store.triples()) {
    if (t.head == path.anchor || t.tail == path.anchor) {
      return "anchor takes part in a fact, so the bridge hop could be skipped";
    }
  }
  // The answer must be stated nowhere but the bridge paragraph.
  for (const auto& para : mentions) {
    for (const Mention& m : para) {
      if (m.entity_id == path.tail && m.paragraph != path.bridge_paragraph) {
        return "answer mentioned outside the bridge paragraph";
      }
    }
  }
  if (store.Entity(path.tail).canonical_name != example.answer) return "answer text mismatch";
  return "";
}

double ChanceLevel(const Example& example, const KnowledgeStore& store) {
  std::set<std::string> tails;
  for (const RelationTriple& t : store.triples()) tails.insert(t.tail);
  std::set<std::string> seen;
  for (std::size_t p = 0; p < example.paragraphs.size(); ++p) {
    const TokenizedText text = TokenizeSentences(example.paragraphs[p].sentences);
    for (const Mention& m : store.LinkMentions(text, p)) {
      if (tails.count(m.entity_id)) seen.insert(m.entity_id);
    }
  }
  return seen.empty() ? 1.0 : 1.0 / static_cast<double>(seen.size());
}

}  // namespace kgnn
