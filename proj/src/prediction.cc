#include "kgnn/prediction.h"

#include <iostream>
#include <stdexcept>

#include "kgnn/ops.h"

namespace kgnn {

AnswerHead::AnswerHead(ParameterSet& params, const std::string& prefix,
                       std::size_t d, Rng& rng) {
  // Start and end logits are normalized jointly over all tokens, so a bias
  // on them (or on end_att's output) cancels out.
  start_ = Linear(params, prefix + ".start", d, 1, rng, /*bias=*/false);
  end_att_ = SelfAttention(params, prefix + ".end_att", d, rng, /*out_bias=*/false);
  end_ = Linear(params, prefix + ".end", 2 * d, 1, rng, /*bias=*/false);
  sp_ = Linear(params, prefix + ".sp", 2 * d, 1, rng);
}

SpanLogits AnswerHead::Logits(const std::vector<Tensor>& paragraphs) const {
  SpanLogits out;
  for (const Tensor& p : paragraphs) {
    const std::size_t n = p.dim(0);
    out.start.push_back(ops::Reshape(start_.Forward(p), {n}));
    Tensor context = ops::Concat({p, end_att_.Forward(p)}, 1);
    out.end.push_back(ops::Reshape(end_.Forward(context), {n}));
  }
  return out;
}

Tensor AnswerHead::SupportingLogits(const std::vector<Tensor>& paragraphs,
                                    const std::vector<SentenceRef>& sentences,
                                    const Tensor& question_summary) const {
  if (sentences.empty()) throw std::invalid_argument("no sentences to score");
  const std::size_t d = question_summary.size();
  std::size_t widest = 0;
  for (const SentenceRef& s : sentences) widest = std::max(widest, s.last - s.first + 1);

  // Pad every sentence to the widest by repeating its first row, so one
  // max over axis 1 pools all of them.
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Tensor& p : paragraphs) {
    offsets.push_back(total);
    total += p.dim(0);
  }
  std::vector<std::size_t> rows;
  for (const SentenceRef& s : sentences) {
    if (s.empty || s.paragraph >= paragraphs.size() || s.first > s.last ||
        s.last >= paragraphs[s.paragraph].dim(0)) {
      throw std::out_of_range("sentence " + std::to_string(s.sentence) +
                              " of paragraph " + std::to_string(s.paragraph) +
                              " is out of range");
    }
    for (std::size_t k = 0; k < widest; ++k) {
      const std::size_t t = s.first + k <= s.last ? s.first + k : s.first;
      rows.push_back(offsets[s.paragraph] + t);
    }
  }
  Tensor all = ops::Concat(paragraphs, 0);
  Tensor pooled = ops::Max(
      ops::Reshape(ops::GatherRows(all, rows), {sentences.size(), widest, d}), 1);
  Tensor question = ops::GatherRows(ops::Reshape(question_summary, {1, d}),
                                    std::vector<std::size_t>(sentences.size(), 0));
  Tensor logits = sp_.Forward(ops::Concat({pooled, question}, 1));
  return ops::Reshape(logits, {sentences.size()});
}

Tensor SharedNormLogProbs(const std::vector<Tensor>& logits) {
  std::size_t total = 0;
  for (const Tensor& l : logits) total += l.size();
  if (total == 0) throw std::invalid_argument("shared normalization over zero tokens");
  std::vector<Tensor> flat;
  for (const Tensor& l : logits) {
    if (l.size() > 0) flat.push_back(ops::Reshape(l, {l.size()}));
  }
  Tensor joined = flat.size() == 1 ? flat[0] : ops::Concat(flat, 0);
  return ops::LogSoftmax(joined, 0);
}

std::vector<double> SharedNormDistribution(const std::vector<Tensor>& logits) {
  std::vector<Tensor> flat;
  for (const Tensor& l : logits) {
    if (l.size() > 0) flat.push_back(ops::Reshape(l, {l.size()}));
  }
  if (flat.empty()) throw std::invalid_argument("shared normalization over zero tokens");
  Tensor joined = flat.size() == 1 ? flat[0] : ops::Concat(flat, 0);
  Tensor p = ops::Softmax(joined, 0);
  return {p.values().begin(), p.values().end()};
}

AnswerSpan DecodeBestSpan(const std::vector<double>& p_start,
                          const std::vector<double>& p_end,
                          const std::vector<std::size_t>& lengths,
                          std::size_t max_span_len) {
  if (max_span_len == 0) throw std::invalid_argument("max_span_len must be positive");
  std::size_t total = 0;
  for (std::size_t n : lengths) total += n;
  if (p_start.size() != total || p_end.size() != total) {
    throw std::invalid_argument("decode: distribution length does not match paragraphs");
  }
  if (total == 0) throw std::invalid_argument("decode: no tokens");
  AnswerSpan best;
  bool found = false;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < lengths.size(); ++p) {
    for (std::size_t s = 0; s < lengths[p]; ++s) {
      const std::size_t stop = std::min(lengths[p], s + max_span_len);
      for (std::size_t e = s; e < stop; ++e) {
        const double score = p_start[offset + s] * p_end[offset + e];
        if (!found || score > best.score) {
          best = {p, s, e, "", score};
          found = true;
        }
      }
    }
    offset += lengths[p];
  }
  return best;
}

std::vector<SentenceRef> NonEmptySentences(const std::vector<SentenceRef>& sentences) {
  std::vector<SentenceRef> kept;
  for (const SentenceRef& s : sentences) {
    if (s.empty) {
      std::cerr << "warning: skipping empty sentence " << s.sentence
                << " of paragraph " << s.paragraph << "\n";
      continue;
    }
    kept.push_back(s);
  }
  return kept;
}

}  // namespace kgnn
