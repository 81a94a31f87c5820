#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kgnn/encoder.h"
#include "kgnn/params.h"
#include "kgnn/tensor.h"

namespace kgnn {

struct SpanLogits {
  std::vector<Tensor> start;  // per paragraph, shape [n_i]
  std::vector<Tensor> end;
};

// A sentence addressed by paragraph and the caller's sentence index, with
// its token rows [first, last] inside that paragraph.
struct SentenceRef {
  std::size_t paragraph = 0;
  std::size_t sentence = 0;
  std::size_t first = 0;
  std::size_t last = 0;
  bool empty = false;  // no tokens; first/last are meaningless
};

struct AnswerSpan {
  std::size_t paragraph = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;
  double score = 0.0;  // p_start(s) * p_end(e)
};

class AnswerHead {
 public:
  AnswerHead(ParameterSet& params, const std::string& prefix, std::size_t d,
             Rng& rng);

  // start = linear(P), end = linear([P; self_att(P)]).
  SpanLogits Logits(const std::vector<Tensor>& paragraphs) const;

  // sigmoid(linear([maxpool(sentence rows); Q-bar])) per sentence, as raw
  // logits of shape [num_sentences].
  Tensor SupportingLogits(const std::vector<Tensor>& paragraphs,
                          const std::vector<SentenceRef>& sentences,
                          const Tensor& question_summary) const;

  const Linear& start_proj() const { return start_; }
  const Linear& end_proj() const { return end_; }
  const SelfAttention& end_context() const { return end_att_; }
  const Linear& sp_proj() const { return sp_; }

 private:
  Linear start_;
  Linear end_;
  SelfAttention end_att_;
  Linear sp_;
};

// One log-softmax over the concatenation of all paragraphs' logits,
// shape [total tokens]. Zero total tokens is rejected.
Tensor SharedNormLogProbs(const std::vector<Tensor>& logits);
std::vector<double> SharedNormDistribution(const std::vector<Tensor>& logits);

// argmax of p_start(s) * p_end(e) within one paragraph, s <= e < s + max_len.
// Ties go to the smaller s, then the smaller e. Distributions are flat over
// all paragraphs in order; `lengths` gives each paragraph's token count.
AnswerSpan DecodeBestSpan(const std::vector<double>& p_start,
                          const std::vector<double>& p_end,
                          const std::vector<std::size_t>& lengths,
                          std::size_t max_span_len);

// Drops sentences without tokens, reporting each on stderr.
std::vector<SentenceRef> NonEmptySentences(const std::vector<SentenceRef>& sentences);

}  // namespace kgnn
