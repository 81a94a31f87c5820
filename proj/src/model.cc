#include "kgnn/model.h"

#include <map>
#include <stdexcept>

#include "kgnn/ops.h"

namespace kgnn {
namespace {

std::optional<GoldSpan> FindAnswer(const std::vector<std::string>& answer,
                                   const TokenizedText& paragraph,
                                   std::size_t paragraph_id) {
  if (answer.empty() || answer.size() > paragraph.size()) return std::nullopt;
  for (std::size_t s = 0; s + answer.size() <= paragraph.size(); ++s) {
    bool match = true;
    for (std::size_t k = 0; k < answer.size() && match; ++k) {
      match = ToLowerAscii(paragraph.tokens[s + k]) == answer[k];
    }
    if (match) return GoldSpan{paragraph_id, s, s + answer.size() - 1};
  }
  return std::nullopt;
}

Tensor Pick(const Tensor& vec, std::size_t index) {
  return ops::SumAll(ops::GatherRows(ops::Reshape(vec, {vec.size(), 1}), {index}));
}

}  // namespace

std::string SpanText(const TokenizedText& paragraph, std::size_t start,
                     std::size_t end) {
  std::string text;
  for (std::size_t t = start; t <= end && t < paragraph.size(); ++t) {
    if (t > start) text.push_back(' ');
    text += paragraph.tokens[t];
  }
  return text;
}

std::set<std::pair<std::size_t, std::size_t>> SupportingSentences(const Example& example) {
  std::map<std::string, std::size_t> by_title;
  for (std::size_t p = 0; p < example.paragraphs.size(); ++p) {
    by_title.emplace(example.paragraphs[p].title, p);
  }
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [title, idx] : example.supporting_facts) {
    auto it = by_title.find(title);
    if (it != by_title.end()) out.insert({it->second, idx});
  }
  return out;
}

PreparedExample Prepare(const Example& example, const KnowledgeStore& store,
                        const GraphConfig& graph_config) {
  PreparedExample out;
  out.id = example.id;
  out.answer = example.answer;
  out.question = Tokenize(example.question);
  if (out.question.empty_input) {
    throw std::invalid_argument("question " + example.id + " is empty");
  }
  std::vector<std::vector<Mention>> mentions;
  std::vector<std::size_t> lengths;
  for (std::size_t p = 0; p < example.paragraphs.size(); ++p) {
    out.titles.push_back(example.paragraphs[p].title);
    out.paragraphs.push_back(TokenizeSentences(example.paragraphs[p].sentences));
    const TokenizedText& text = out.paragraphs.back();
    mentions.push_back(store.LinkMentions(text, p));
    lengths.push_back(text.size());
    for (std::size_t s = 0; s < text.num_sentences; ++s) {
      SentenceRef ref{p, s, 0, 0, true};
      for (std::size_t t = 0; t < text.size(); ++t) {
        if (text.sentence_of[t] != s) continue;
        if (ref.empty) ref.first = t;
        ref.last = t;
        ref.empty = false;
      }
      out.sentences.push_back(ref);
    }
  }
  out.sentences = NonEmptySentences(out.sentences);
  std::size_t total = 0;
  for (std::size_t n : lengths) total += n;
  if (total == 0) throw std::invalid_argument("question " + example.id + " has no tokens");

  out.graph = BuildGraph(mentions, store, graph_config);
  out.layout = GraphLayout::Build(out.graph, lengths);

  out.gold_sp = SupportingSentences(example);
  for (const SentenceRef& s : out.sentences) {
    out.sp_labels.push_back(out.gold_sp.count({s.paragraph, s.sentence}) ? 1.0 : 0.0);
  }

  std::vector<std::string> answer = Tokenize(example.answer).tokens;
  for (std::string& a : answer) a = ToLowerAscii(a);
  std::set<std::size_t> gold_paragraphs;
  for (const auto& [p, s] : out.gold_sp) gold_paragraphs.insert(p);
  for (std::size_t p : gold_paragraphs) {
    if ((out.gold = FindAnswer(answer, out.paragraphs[p], p))) break;
  }
  for (std::size_t p = 0; p < out.paragraphs.size() && !out.gold; ++p) {
    out.gold = FindAnswer(answer, out.paragraphs[p], p);
  }
  return out;
}

nlohmann::json Prediction::ToJson() const {
  nlohmann::json sp_json = nlohmann::json::array();
  for (const auto& [p, s] : sp) sp_json.push_back({p, s});
  return {{"id", id},
          {"answer", answer.text},
          {"span", {answer.paragraph, answer.start, answer.end}},
          {"sp", sp_json}};
}

Prediction Prediction::FromJson(const nlohmann::json& j) {
  Prediction p;
  p.id = j.at("id").get<std::string>();
  p.answer.text = j.at("answer").get<std::string>();
  if (j.contains("span")) {
    const auto& span = j.at("span");
    p.answer.paragraph = span.at(0).get<std::size_t>();
    p.answer.start = span.at(1).get<std::size_t>();
    p.answer.end = span.at(2).get<std::size_t>();
  }
  for (const auto& pair : j.at("sp")) {
    p.sp.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>());
  }
  return p;
}

KgnnModel::KgnnModel(const ModelConfig& config, Vocabulary vocab,
                     std::size_t num_kinds)
    : config_(config),
      vocab_(std::move(vocab)),
      rng_(config.seed),
      encoder_(params_, "encoder.char", config.encoder, vocab_, rng_),
      question_att_(params_, "encoder.question_self_att", config.encoder.d_model, rng_),
      paragraph_att_(params_, "encoder.paragraph_self_att", config.encoder.d_model, rng_),
      bi_att_(params_, "encoder.bi_att", config.encoder.d_model, rng_),
      reasoner_(params_, "reasoner",
                ReasonerConfig{config.encoder.d_model, num_kinds, config.steps,
                               config.per_relation_phi},
                rng_),
      head_(params_, "predict", config.encoder.d_model, rng_) {}

ForwardResult KgnnModel::Forward(const PreparedExample& example,
                                 std::optional<std::size_t> T) const {
  // Encode each distinct token once and gather rows per text.
  std::map<std::string, std::size_t> slot;
  std::vector<std::string> distinct;
  auto index_of = [&](const TokenizedText& text) {
    std::vector<std::size_t> rows;
    for (const std::string& tok : text.tokens) {
      auto [it, inserted] = slot.emplace(tok, distinct.size());
      if (inserted) distinct.push_back(tok);
      rows.push_back(it->second);
    }
    return rows;
  };
  const auto question_rows = index_of(example.question);
  std::vector<std::vector<std::size_t>> paragraph_rows;
  for (const TokenizedText& p : example.paragraphs) paragraph_rows.push_back(index_of(p));
  Tensor table = encoder_.Encode(distinct);

  ForwardResult out;
  Tensor q = question_att_.Forward(ops::GatherRows(table, question_rows));
  out.question_summary = QuestionSummary(q);
  for (std::size_t i = 0; i < paragraph_rows.size(); ++i) {
    if (paragraph_rows[i].empty()) {
      throw std::invalid_argument("question " + example.id + ": paragraph " +
                                  std::to_string(i) + " has no tokens");
    }
    Tensor p = paragraph_att_.Forward(ops::GatherRows(table, paragraph_rows[i]));
    out.encoded.push_back(bi_att_.Forward(q, p));
  }
  out.reasoned = reasoner_.Forward(out.encoded, example.layout, out.question_summary,
                                   T.value_or(config_.steps));
  out.logits = head_.Logits(out.reasoned);
  if (!example.sentences.empty()) {
    out.sp_logits =
        head_.SupportingLogits(out.reasoned, example.sentences, out.question_summary);
  }
  return out;
}

LossParts KgnnModel::Loss(const PreparedExample& example,
                          std::optional<std::size_t> T) const {
  ForwardResult f = Forward(example, T);
  LossParts parts;
  Tensor total;
  if (example.gold) {
    const GoldSpan& g = *example.gold;
    if (g.paragraph >= example.paragraphs.size() || g.start > g.end ||
        g.end >= example.paragraphs[g.paragraph].size()) {
      throw std::out_of_range("question " + example.id + ": gold span out of range");
    }
    const std::size_t at = example.layout.offsets[g.paragraph];
    Tensor span = ops::Scale(
        ops::Add(Pick(SharedNormLogProbs(f.logits.start), at + g.start),
                 Pick(SharedNormLogProbs(f.logits.end), at + g.end)),
        -1.0);
    parts.span = span.item();
    total = span;
  }
  if (f.sp_logits.defined()) {
    const std::size_t n = example.sp_labels.size();
    Tensor y = Tensor::FromValues({n}, example.sp_labels);
    Tensor not_y = Tensor::FromValues({n}, [&] {
      std::vector<double> v;
      for (double l : example.sp_labels) v.push_back(1.0 - l);
      return v;
    }());
    Tensor ll = ops::Add(ops::Mul(y, ops::LogSigmoid(f.sp_logits)),
                         ops::Mul(not_y, ops::LogSigmoid(ops::Scale(f.sp_logits, -1.0))));
    Tensor bce = ops::Scale(ops::SumAll(ll), -1.0 / static_cast<double>(n));
    parts.sp = bce.item();
    Tensor weighted = ops::Scale(bce, config_.sp_weight);
    total = total.defined() ? ops::Add(total, weighted) : weighted;
  }
  if (!total.defined()) total = Tensor::Scalar(0.0);
  parts.total = total;
  return parts;
}

Prediction KgnnModel::Predict(const PreparedExample& example,
                              std::optional<std::size_t> T) const {
  ForwardResult f = Forward(example, T);
  std::vector<std::size_t> lengths;
  for (const TokenizedText& p : example.paragraphs) lengths.push_back(p.size());
  Prediction pred;
  pred.id = example.id;
  pred.answer = DecodeBestSpan(SharedNormDistribution(f.logits.start),
                               SharedNormDistribution(f.logits.end), lengths,
                               config_.max_span_len);
  pred.answer.text = SpanText(example.paragraphs[pred.answer.paragraph],
                              pred.answer.start, pred.answer.end);
  if (f.sp_logits.defined()) {
    for (std::size_t i = 0; i < example.sentences.size(); ++i) {
      // sigmoid(z) >= 0.5 exactly when z >= 0.
      if (f.sp_logits.at(i) >= 0.0) {
        pred.sp.emplace_back(example.sentences[i].paragraph, example.sentences[i].sentence);
      }
    }
  }
  return pred;
}

}  // namespace kgnn
