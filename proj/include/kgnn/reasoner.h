#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "kgnn/encoder.h"
#include "kgnn/entity_graph.h"
#include "kgnn/params.h"
#include "kgnn/tensor.h"

namespace kgnn {

// Index structures derived once per question from its graph and paragraph
// lengths. Paragraph rows are addressed in one concatenated [L x d] matrix.
struct GraphLayout {
  static GraphLayout Build(const EntityGraph& graph,
                           const std::vector<std::size_t>& paragraph_lengths);

  std::size_t num_nodes = 0;
  std::size_t num_kinds = 0;
  std::size_t total_tokens = 0;
  std::vector<std::size_t> offsets;  // first row of every paragraph
  std::vector<std::size_t> lengths;

  // Node init: rows covered by any mention, a [mentions x covered] mean
  // pooling matrix, and per node its mention indices padded to
  // max_mentions by repeating the first one.
  std::vector<std::size_t> covered_rows;
  Tensor mention_pool;
  std::vector<std::size_t> node_mentions;
  std::size_t max_mentions = 0;

  // Per kind: row-normalised adjacency [N x N] with A_ij = 1/|N_k(i)| for
  // j in N_k(i); undefined when the kind has no edges.
  std::vector<Tensor> adjacency;

  // Concatenated row -> node id, or num_nodes for rows without an entity.
  std::vector<std::size_t> scatter_index;
};

// Q-bar: elementwise max over question rows, shape [d].
Tensor QuestionSummary(const Tensor& question);

// Mean over each mention's rows of relu(ffn(P)), then max over the node's
// mentions. `paragraphs` is the concatenated [L x d] matrix.
Tensor InitNodeReprs(const GraphLayout& layout, const Tensor& paragraphs,
                     const Linear& ffn);

// softmax over edge kinds of linear(Q-bar), shape [kinds].
Tensor RelationAttention(const Tensor& question_summary, const Linear& proj);

// v_i^u = sum_k alpha_k / |N_k(i)| * sum_{j in N_k(i)} relu(phi_k(v_j + E_k)).
// `phi` holds one shared network or one per kind.
Tensor Propagate(const GraphLayout& layout, const Tensor& states,
                 const Tensor& alpha, const Tensor& relation_emb,
                 const std::vector<const Linear*>& phi);

// [L x d]: every covered row carries its node's update, other rows zero.
Tensor ScatterToParagraphs(const GraphLayout& layout, const Tensor& updates,
                           std::size_t d);

// r = sigmoid(P Wp + U Wu + b); r * U + (1 - r) * P.
Tensor GatedUpdate(const Tensor& paragraphs, const Tensor& scattered,
                   const Linear& gate_p, const Linear& gate_u);

struct ReasonerConfig {
  std::size_t d = 64;
  std::size_t num_kinds = 1;
  std::size_t steps = 2;  // parameter sets created; max usable T
  bool per_relation_phi = false;
};

// Intermediates of one step, exposed for inspection and tests.
struct StepTrace {
  Tensor nodes;
  Tensor alpha;
  Tensor updates;
  Tensor scattered;
  Tensor gated;
};

class ReasoningStep {
 public:
  ReasoningStep(ParameterSet& params, const std::string& prefix,
                const ReasonerConfig& config, Rng& rng);

  // Paragraph matrices in, same shapes out.
  std::vector<Tensor> Forward(const std::vector<Tensor>& paragraphs,
                              const GraphLayout& layout,
                              const Tensor& question_summary,
                              StepTrace* trace = nullptr) const;

  const Linear& node_ffn() const { return node_ffn_; }
  const Linear& relation_proj() const { return relation_proj_; }
  const Tensor& relation_emb() const { return relation_emb_; }
  std::vector<const Linear*> phi() const;
  const Linear& gate_p() const { return gate_p_; }
  const Linear& gate_u() const { return gate_u_; }
  const SelfAttention& fusion() const { return fusion_; }

 private:
  std::size_t d_;
  Linear node_ffn_;
  Linear relation_proj_;
  Tensor relation_emb_;
  std::vector<Linear> phi_;
  Linear gate_p_;
  Linear gate_u_;
  SelfAttention fusion_;
};

class Reasoner {
 public:
  Reasoner(ParameterSet& params, const std::string& prefix,
           const ReasonerConfig& config, Rng& rng);

  // Applies steps 1..T in order; T = 0 returns the input. T above the
  // configured step count is rejected.
  std::vector<Tensor> Forward(const std::vector<Tensor>& paragraphs,
                              const GraphLayout& layout,
                              const Tensor& question_summary,
                              std::size_t T) const;

  std::size_t max_steps() const { return steps_.size(); }
  const ReasoningStep& step(std::size_t t) const { return *steps_.at(t); }

 private:
  std::vector<std::unique_ptr<ReasoningStep>> steps_;
};

}  // namespace kgnn
