#include "kgnn/reasoner.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "kgnn/ops.h"

namespace kgnn {
namespace {

std::vector<std::size_t> Range(std::size_t begin, std::size_t count) {
  std::vector<std::size_t> rows(count);
  std::iota(rows.begin(), rows.end(), begin);
  return rows;
}

}  // namespace

GraphLayout GraphLayout::Build(const EntityGraph& graph,
                               const std::vector<std::size_t>& paragraph_lengths) {
  GraphLayout layout;
  layout.num_nodes = graph.size();
  layout.num_kinds = graph.num_kinds();
  layout.lengths = paragraph_lengths;
  for (std::size_t len : paragraph_lengths) {
    layout.offsets.push_back(layout.total_tokens);
    layout.total_tokens += len;
  }

  // Mentions in node order, each a run of covered rows.
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // (first covered, count)
  std::vector<std::vector<std::size_t>> mentions_of(graph.size());
  for (const EntityNode& node : graph.nodes()) {
    if (node.paragraph >= paragraph_lengths.size()) {
      throw std::out_of_range("node " + std::to_string(node.id) +
                              " refers to missing paragraph " +
                              std::to_string(node.paragraph));
    }
    for (const Mention& m : node.mentions) {
      if (m.start > m.end || m.end >= paragraph_lengths[node.paragraph]) {
        throw std::out_of_range("mention [" + std::to_string(m.start) + ", " +
                                std::to_string(m.end) + "] outside paragraph " +
                                std::to_string(node.paragraph));
      }
      mentions_of[node.id].push_back(runs.size());
      runs.emplace_back(layout.covered_rows.size(), m.end - m.start + 1);
      for (std::size_t t = m.start; t <= m.end; ++t) {
        layout.covered_rows.push_back(layout.offsets[node.paragraph] + t);
      }
    }
    layout.max_mentions = std::max(layout.max_mentions, node.mentions.size());
  }
  if (!runs.empty()) {
    std::vector<double> pool(runs.size() * layout.covered_rows.size(), 0.0);
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto [first, count] = runs[k];
      for (std::size_t c = 0; c < count; ++c) {
        pool[k * layout.covered_rows.size() + first + c] = 1.0 / count;
      }
    }
    layout.mention_pool = Tensor::FromValues(
        {runs.size(), layout.covered_rows.size()}, std::move(pool));
  }
  for (const auto& ms : mentions_of) {
    for (std::size_t k = 0; k < layout.max_mentions; ++k) {
      layout.node_mentions.push_back(k < ms.size() ? ms[k] : ms.front());
    }
  }

  const std::size_t n = graph.size();
  layout.adjacency.resize(graph.num_kinds());
  for (std::size_t kind = 0; kind < graph.num_kinds(); ++kind) {
    std::vector<double> a(n * n, 0.0);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nb = graph.Neighbors(i, kind);
      for (std::size_t j : nb) a[i * n + j] = 1.0 / nb.size();
      any = any || !nb.empty();
    }
    if (any) layout.adjacency[kind] = Tensor::FromValues({n, n}, std::move(a));
  }

  // Earliest start wins, then the longer mention.
  struct Span {
    std::size_t row, length, node;
  };
  std::vector<Span> spans;
  for (const EntityNode& node : graph.nodes()) {
    for (const Mention& m : node.mentions) {
      spans.push_back({layout.offsets[node.paragraph] + m.start,
                       m.end - m.start + 1, node.id});
    }
  }
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
    if (a.row != b.row) return a.row < b.row;
    if (a.length != b.length) return a.length > b.length;
    return a.node < b.node;
  });
  layout.scatter_index.assign(layout.total_tokens, n);
  for (const Span& s : spans) {
    for (std::size_t r = s.row; r < s.row + s.length; ++r) {
      if (layout.scatter_index[r] == n) layout.scatter_index[r] = s.node;
    }
  }
  return layout;
}

Tensor QuestionSummary(const Tensor& question) {
  if (question.rank() != 2 || question.dim(0) == 0) {
    throw std::invalid_argument("question summary needs [m x d] with m >= 1, got " +
                                ShapeToString(question.shape()));
  }
  return ops::Max(question, 0);
}

Tensor InitNodeReprs(const GraphLayout& layout, const Tensor& paragraphs,
                     const Linear& ffn) {
  const std::size_t d = paragraphs.dim(1);
  if (layout.num_nodes == 0) return Tensor::Zeros({0, d});
  Tensor covered = ops::Relu(ffn.Forward(ops::GatherRows(paragraphs, layout.covered_rows)));
  Tensor mentions = ops::MatMul(layout.mention_pool, covered);
  Tensor padded = ops::Reshape(ops::GatherRows(mentions, layout.node_mentions),
                               {layout.num_nodes, layout.max_mentions, d});
  return ops::Max(padded, 1);
}

Tensor RelationAttention(const Tensor& question_summary, const Linear& proj) {
  const std::size_t d = question_summary.size();
  Tensor logits = proj.Forward(ops::Reshape(question_summary, {1, d}));
  return ops::Reshape(ops::Softmax(logits, 1), {logits.dim(1)});
}

Tensor Propagate(const GraphLayout& layout, const Tensor& states,
                 const Tensor& alpha, const Tensor& relation_emb,
                 const std::vector<const Linear*>& phi) {
  const std::size_t n = layout.num_nodes;
  const std::size_t d = states.dim(1);
  if (phi.empty()) throw std::invalid_argument("propagate: no message network");
  if (alpha.size() != layout.num_kinds || relation_emb.dim(0) != layout.num_kinds) {
    throw std::invalid_argument("propagate: expected " +
                                std::to_string(layout.num_kinds) + " kinds, got alpha " +
                                ShapeToString(alpha.shape()) + " and embeddings " +
                                ShapeToString(relation_emb.shape()));
  }
  Tensor alpha_col = ops::Reshape(alpha, {layout.num_kinds, 1});
  Tensor total;
  for (std::size_t k = 0; k < layout.num_kinds; ++k) {
    if (!layout.adjacency[k].defined()) continue;
    const Linear& net = *phi[phi.size() == 1 ? 0 : k];
    Tensor shifted = ops::Add(states, ops::GatherRows(relation_emb, {k}));
    Tensor messages = ops::MatMul(layout.adjacency[k], ops::Relu(net.Forward(shifted)));
    Tensor term = ops::Mul(messages, ops::GatherRows(alpha_col, {k}));
    total = total.defined() ? ops::Add(total, term) : term;
  }
  return total.defined() ? total : Tensor::Zeros({n, d});
}

Tensor ScatterToParagraphs(const GraphLayout& layout, const Tensor& updates,
                           std::size_t d) {
  if (layout.num_nodes == 0) return Tensor::Zeros({layout.total_tokens, d});
  Tensor padded = ops::Concat({updates, Tensor::Zeros({1, d})}, 0);
  return ops::GatherRows(padded, layout.scatter_index);
}

Tensor GatedUpdate(const Tensor& paragraphs, const Tensor& scattered,
                   const Linear& gate_p, const Linear& gate_u) {
  if (paragraphs.shape() != scattered.shape()) {
    throw std::invalid_argument("gated update: shape mismatch " +
                                ShapeToString(paragraphs.shape()) + " vs " +
                                ShapeToString(scattered.shape()));
  }
  Tensor r = ops::Sigmoid(ops::Add(gate_p.Forward(paragraphs), gate_u.Forward(scattered)));
  return ops::Add(paragraphs, ops::Mul(r, ops::Sub(scattered, paragraphs)));
}

ReasoningStep::ReasoningStep(ParameterSet& params, const std::string& prefix,
                             const ReasonerConfig& config, Rng& rng)
    : d_(config.d) {
  const std::size_t d = config.d;
  node_ffn_ = Linear(params, prefix + ".node_ffn", d, d, rng);
  relation_proj_ = Linear(params, prefix + ".relation_att", d, config.num_kinds, rng);
  relation_emb_ = params.Create(prefix + ".relation_emb.table", {config.num_kinds, d},
                                Init::kEmbedding, rng);
  auto row0 = relation_emb_.mutable_values().subspan(0, d);
  std::fill(row0.begin(), row0.end(), 0.0);  // E_coref starts at zero
  if (config.per_relation_phi) {
    for (std::size_t k = 0; k < config.num_kinds; ++k) {
      phi_.emplace_back(params, prefix + ".phi_" + std::to_string(k), d, d, rng);
    }
  } else {
    phi_.emplace_back(params, prefix + ".phi", d, d, rng);
  }
  gate_p_ = Linear(params, prefix + ".gate_p", d, d, rng);
  gate_u_ = Linear(params, prefix + ".gate_u", d, d, rng, /*bias=*/false);
  fusion_ = SelfAttention(params, prefix + ".fusion", d, rng);
}

std::vector<const Linear*> ReasoningStep::phi() const {
  std::vector<const Linear*> out;
  for (const Linear& l : phi_) out.push_back(&l);
  return out;
}

std::vector<Tensor> ReasoningStep::Forward(const std::vector<Tensor>& paragraphs,
                                           const GraphLayout& layout,
                                           const Tensor& question_summary,
                                           StepTrace* trace) const {
  if (paragraphs.size() != layout.lengths.size()) {
    throw std::invalid_argument("reason step: layout has " +
                                std::to_string(layout.lengths.size()) +
                                " paragraphs, got " + std::to_string(paragraphs.size()));
  }
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    if (paragraphs[i].rank() != 2 || paragraphs[i].dim(0) != layout.lengths[i] ||
        paragraphs[i].dim(1) != d_) {
      throw std::invalid_argument("reason step: paragraph " + std::to_string(i) +
                                  " has shape " + ShapeToString(paragraphs[i].shape()));
    }
  }
  Tensor all = ops::Concat(paragraphs, 0);
  Tensor nodes = InitNodeReprs(layout, all, node_ffn_);
  Tensor alpha = RelationAttention(question_summary, relation_proj_);
  Tensor updates = layout.num_nodes == 0
                       ? Tensor::Zeros({0, d_})
                       : Propagate(layout, nodes, alpha, relation_emb_, phi());
  Tensor scattered = ScatterToParagraphs(layout, updates, d_);
  Tensor gated = GatedUpdate(all, scattered, gate_p_, gate_u_);
  if (trace) *trace = {nodes, alpha, updates, scattered, gated};

  std::vector<Tensor> out;
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    Tensor rows = ops::GatherRows(gated, Range(layout.offsets[i], layout.lengths[i]));
    out.push_back(ops::Add(paragraphs[i], fusion_.Forward(rows)));
  }
  return out;
}

Reasoner::Reasoner(ParameterSet& params, const std::string& prefix,
                   const ReasonerConfig& config, Rng& rng) {
  for (std::size_t t = 1; t <= config.steps; ++t) {
    steps_.push_back(std::make_unique<ReasoningStep>(
        params, prefix + ".step" + std::to_string(t), config, rng));
  }
}

std::vector<Tensor> Reasoner::Forward(const std::vector<Tensor>& paragraphs,
                                      const GraphLayout& layout,
                                      const Tensor& question_summary,
                                      std::size_t T) const {
  if (T > steps_.size()) {
    throw std::invalid_argument("T = " + std::to_string(T) + " exceeds the " +
                                std::to_string(steps_.size()) + " configured steps");
  }
  std::vector<Tensor> current = paragraphs;
  for (std::size_t t = 0; t < T; ++t) {
    current = steps_[t]->Forward(current, layout, question_summary);
  }
  return current;
}

}  // namespace kgnn
