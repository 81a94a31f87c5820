#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kgnn/corpus.h"
#include "kgnn/encoder.h"
#include "kgnn/entity_graph.h"
#include "kgnn/knowledge_store.h"
#include "kgnn/params.h"
#include "kgnn/prediction.h"
#include "kgnn/reasoner.h"
#include "kgnn/text.h"

namespace kgnn {

struct GoldSpan {
  std::size_t paragraph = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};

// Everything derived from one corpus record that does not depend on
// parameters: tokens, linked mentions, graph, layout and labels.
struct PreparedExample {
  std::string id;
  std::string answer;
  TokenizedText question;
  std::vector<TokenizedText> paragraphs;
  std::vector<std::string> titles;
  EntityGraph graph;
  GraphLayout layout;
  std::vector<SentenceRef> sentences;  // non-empty sentences only
  std::vector<double> sp_labels;       // aligned with `sentences`
  std::set<std::pair<std::size_t, std::size_t>> gold_sp;  // (paragraph, sentence)
  std::optional<GoldSpan> gold;
};

// Supporting facts as (paragraph, sentence), titles resolved to the first
// paragraph carrying them. Facts naming an absent title are dropped.
std::set<std::pair<std::size_t, std::size_t>> SupportingSentences(const Example& example);

// Gold span = first occurrence (case-insensitive) of the answer tokens in a
// supporting paragraph, falling back to any paragraph.
PreparedExample Prepare(const Example& example, const KnowledgeStore& store,
                        const GraphConfig& graph_config);

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t steps = 2;  // T
  bool per_relation_phi = false;
  std::size_t max_span_len = 8;
  double sp_weight = 1.0;  // lambda on the supporting-fact BCE
  std::uint64_t seed = 1;
};

struct ForwardResult {
  SpanLogits logits;
  Tensor sp_logits;  // [num sentences]
  Tensor question_summary;
  std::vector<Tensor> encoded;   // P-bar before reasoning
  std::vector<Tensor> reasoned;  // P-bar after T steps
};

struct Prediction {
  std::string id;
  AnswerSpan answer;
  std::vector<std::pair<std::size_t, std::size_t>> sp;  // (paragraph, sentence)

  nlohmann::json ToJson() const;
  static Prediction FromJson(const nlohmann::json& j);
};

struct LossParts {
  Tensor total;
  double span = 0.0;
  double sp = 0.0;
};

class KgnnModel {
 public:
  KgnnModel(const ModelConfig& config, Vocabulary vocab, std::size_t num_kinds);
  // Layers keep pointers into the model.
  KgnnModel(const KgnnModel&) = delete;
  KgnnModel& operator=(const KgnnModel&) = delete;

  // T defaults to the configured step count.
  ForwardResult Forward(const PreparedExample& example,
                        std::optional<std::size_t> T = std::nullopt) const;

  // -log p_start(gold) - log p_end(gold) + lambda * mean BCE over sentences.
  LossParts Loss(const PreparedExample& example,
                 std::optional<std::size_t> T = std::nullopt) const;

  Prediction Predict(const PreparedExample& example,
                     std::optional<std::size_t> T = std::nullopt) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Reasoner& reasoner() const { return reasoner_; }
  const AnswerHead& head() const { return head_; }

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  ParameterSet params_;
  Rng rng_;
  CharEncoder encoder_;
  SelfAttention question_att_;
  SelfAttention paragraph_att_;
  BiAttention bi_att_;
  Reasoner reasoner_;
  AnswerHead head_;
};

// Joins tokens [start, end] of a paragraph with single spaces.
std::string SpanText(const TokenizedText& paragraph, std::size_t start,
                     std::size_t end);

}  // namespace kgnn
