#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kgnn/params.h"
#include "kgnn/tensor.h"
#include "kgnn/text.h"

namespace kgnn {

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t word_dim = 32;
  std::size_t char_dim = 16;
  std::size_t char_filters = 32;
  std::size_t char_width = 5;
  std::size_t max_word_len = 16;
};

// y = x W + b for x of shape [n x in].
class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, std::size_t in,
         std::size_t out, Rng& rng, bool bias = true);

  Tensor Forward(const Tensor& x) const;
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

// Word embedding concatenated with a max-pooled character CNN, projected
// to d_model.
class CharEncoder {
 public:
  CharEncoder(ParameterSet& params, const std::string& prefix,
              const EncoderConfig& config, const Vocabulary& vocab, Rng& rng);

  // [num_tokens x d_model] for the given tokens.
  Tensor Encode(const std::vector<std::string>& tokens) const;
  Tensor Encode(const TokenizedText& text) const { return Encode(text.tokens); }

  const Vocabulary& vocab() const { return *vocab_; }

 private:
  EncoderConfig config_;
  const Vocabulary* vocab_;
  Tensor word_emb_;
  Tensor char_emb_;
  Linear conv_;
  Linear proj_;
};

// Trilinear self-attention with the diagonal masked, followed by a
// residual projection: h + linear([h; a; h * a]).
class SelfAttention {
 public:
  SelfAttention() = default;
  // out_bias=false when every consumer is invariant to a constant shift of
  // the output (a bias there would get an exactly zero gradient).
  SelfAttention(ParameterSet& params, const std::string& prefix, std::size_t d,
                Rng& rng, bool out_bias = true);

  // s_ij = w1.h_i + w2.h_j + w3.(h_i * h_j), j != i.
  Tensor Similarity(const Tensor& h) const;
  Tensor Forward(const Tensor& h) const;

  const Tensor& w1() const { return w1_; }
  const Tensor& w2() const { return w2_; }
  const Tensor& w3() const { return w3_; }
  const Linear& out() const { return out_; }

 private:
  // Similarity without the w1.h_i term. That term is constant along each
  // softmax row, so the attention weights are the same; leaving it out makes
  // w1's (zero) gradient exact instead of rounding noise.
  Tensor RowScores(const Tensor& h) const;

  Tensor w1_, w2_, w3_;
  Linear out_;
};

// Bi-directional attention of paragraph rows over question rows.
class BiAttention {
 public:
  BiAttention(ParameterSet& params, const std::string& prefix, std::size_t d,
              Rng& rng);

  // S [n x m] with S_ij = w1.p_i + w2.q_j + w3.(p_i * q_j).
  Tensor Similarity(const Tensor& q, const Tensor& p) const;
  // relu(linear([p; a; p * a; p * c])) of shape [n x d].
  Tensor Forward(const Tensor& q, const Tensor& p) const;

  const Tensor& w1() const { return w1_; }
  const Tensor& w2() const { return w2_; }
  const Tensor& w3() const { return w3_; }
  const Linear& out() const { return out_; }

 private:
  Tensor w1_, w2_, w3_;
  Linear out_;
};

}  // namespace kgnn
