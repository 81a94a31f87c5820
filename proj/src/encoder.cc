#include "kgnn/encoder.h"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "kgnn/ops.h"

namespace kgnn {

Linear::Linear(ParameterSet& params, const std::string& name, std::size_t in,
               std::size_t out, Rng& rng, bool bias) {
  weight_ = params.Create(name + ".weight", {in, out}, Init::kGlorotUniform, rng);
  if (bias) bias_ = params.Create(name + ".bias", {out}, Init::kZeros, rng);
}

Tensor Linear::Forward(const Tensor& x) const {
  Tensor y = ops::MatMul(x, weight_);
  return bias_.defined() ? ops::Add(y, bias_) : y;
}

CharEncoder::CharEncoder(ParameterSet& params, const std::string& prefix,
                         const EncoderConfig& config, const Vocabulary& vocab,
                         Rng& rng)
    : config_(config), vocab_(&vocab) {
  if (config_.max_word_len < config_.char_width) {
    config_.max_word_len = config_.char_width;
  }
  word_emb_ = params.Create(prefix + ".word_emb.table",
                            {vocab.word_count(), config.word_dim},
                            Init::kEmbedding, rng);
  char_emb_ = params.Create(prefix + ".char_emb.table",
                            {vocab.char_count() + 2, config.char_dim},
                            Init::kEmbedding, rng);
  conv_ = Linear(params, prefix + ".char_conv", config.char_width * config.char_dim,
                 config.char_filters, rng);
  proj_ = Linear(params, prefix + ".proj", config.word_dim + config.char_filters,
                 config.d_model, rng);
}

Tensor CharEncoder::Encode(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("char_encode: no tokens");
  const std::size_t n = tokens.size();
  const std::size_t len = config_.max_word_len;
  const std::size_t width = config_.char_width;
  const std::size_t windows = len - width + 1;

  std::vector<std::size_t> word_ids(n);
  std::vector<std::size_t> window_chars;
  window_chars.reserve(n * windows * width);
  for (std::size_t i = 0; i < n; ++i) {
    word_ids[i] = vocab_->WordId(tokens[i]);
    const auto chars = vocab_->CharIds(tokens[i], len);
    for (std::size_t p = 0; p < windows; ++p) {
      for (std::size_t w = 0; w < width; ++w) window_chars.push_back(chars[p + w]);
    }
  }
  Tensor words = ops::EmbeddingLookup(word_emb_, word_ids);
  Tensor patches = ops::Reshape(ops::EmbeddingLookup(char_emb_, window_chars),
                                {n * windows, width * config_.char_dim});
  Tensor conv = ops::Reshape(conv_.Forward(patches),
                             {n, windows, config_.char_filters});
  Tensor pooled = ops::Relu(ops::Max(conv, 1));
  return proj_.Forward(ops::Concat({words, pooled}, 1));
}

SelfAttention::SelfAttention(ParameterSet& params, const std::string& prefix,
                             std::size_t d, Rng& rng, bool out_bias) {
  w1_ = params.Create(prefix + ".w1", {d, 1}, Init::kGlorotUniform, rng);
  w2_ = params.Create(prefix + ".w2", {d, 1}, Init::kGlorotUniform, rng);
  w3_ = params.Create(prefix + ".w3", {1, d}, Init::kGlorotUniform, rng);
  out_ = Linear(params, prefix + ".out", 3 * d, d, rng, out_bias);
}

Tensor SelfAttention::Similarity(const Tensor& h) const {
  const std::size_t n = h.dim(0);
  Tensor self_term = ops::MatMul(h, w1_);                      // [n x 1]
  Tensor other_term = ops::Transpose(ops::MatMul(h, w2_));     // [1 x n]
  Tensor cross = ops::MatMul(ops::Mul(h, w3_), ops::Transpose(h));  // [n x n]
  Tensor s = ops::Add(ops::Add(cross, self_term), other_term);
  std::vector<bool> diagonal(n * n, false);
  for (std::size_t i = 0; i < n; ++i) diagonal[i * n + i] = true;
  return ops::MaskedFill(s, diagonal, -std::numeric_limits<double>::infinity());
}

Tensor SelfAttention::RowScores(const Tensor& h) const {
  const std::size_t n = h.dim(0);
  Tensor other_term = ops::Transpose(ops::MatMul(h, w2_));
  Tensor cross = ops::MatMul(ops::Mul(h, w3_), ops::Transpose(h));
  std::vector<bool> diagonal(n * n, false);
  for (std::size_t i = 0; i < n; ++i) diagonal[i * n + i] = true;
  return ops::MaskedFill(ops::Add(cross, other_term), diagonal,
                         -std::numeric_limits<double>::infinity());
}

Tensor SelfAttention::Forward(const Tensor& h) const {
  if (h.rank() != 2 || h.dim(0) == 0) {
    throw std::invalid_argument("self_attention: needs [n x d] with n >= 1, got " +
                                ShapeToString(h.shape()));
  }
  Tensor attended;
  if (h.dim(0) == 1) {
    // Every key is masked: the attended row is defined as zeros.
    attended = Tensor::Zeros(h.shape());
  } else {
    attended = ops::MatMul(ops::Softmax(RowScores(h), 1), h);
  }
  Tensor features = ops::Concat({h, attended, ops::Mul(h, attended)}, 1);
  return ops::Add(h, out_.Forward(features));
}

BiAttention::BiAttention(ParameterSet& params, const std::string& prefix,
                         std::size_t d, Rng& rng) {
  w1_ = params.Create(prefix + ".w1", {d, 1}, Init::kGlorotUniform, rng);
  w2_ = params.Create(prefix + ".w2", {d, 1}, Init::kGlorotUniform, rng);
  w3_ = params.Create(prefix + ".w3", {1, d}, Init::kGlorotUniform, rng);
  out_ = Linear(params, prefix + ".out", 4 * d, d, rng);
}

Tensor BiAttention::Similarity(const Tensor& q, const Tensor& p) const {
  if (q.rank() != 2 || p.rank() != 2 || q.dim(1) != p.dim(1) || q.dim(0) == 0 ||
      p.dim(0) == 0) {
    throw std::invalid_argument("bi_attention: shape mismatch " +
                                ShapeToString(q.shape()) + " vs " +
                                ShapeToString(p.shape()));
  }
  Tensor p_term = ops::MatMul(p, w1_);                          // [n x 1]
  Tensor q_term = ops::Transpose(ops::MatMul(q, w2_));          // [1 x m]
  Tensor cross = ops::MatMul(ops::Mul(p, w3_), ops::Transpose(q));  // [n x m]
  return ops::Add(ops::Add(cross, p_term), q_term);
}

Tensor BiAttention::Forward(const Tensor& q, const Tensor& p) const {
  Tensor s = Similarity(q, p);
  const std::size_t n = p.dim(0);
  Tensor attended = ops::MatMul(ops::Softmax(s, 1), q);  // [n x d]
  Tensor best = ops::Reshape(ops::Max(s, 1), {1, n});
  Tensor context = ops::MatMul(ops::Softmax(best, 1), p);  // [1 x d]
  Tensor features = ops::Concat(
      {p, attended, ops::Mul(p, attended), ops::Mul(p, context)}, 1);
  return ops::Relu(out_.Forward(features));
}

}  // namespace kgnn
