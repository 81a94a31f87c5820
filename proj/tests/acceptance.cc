// Acceptance runner: one PASS/FAIL line per criterion, with measured values
// and wall time against each budget. Exit status is non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "kgnn/corpus.h"
#include "kgnn/ops.h"
#include "kgnn/synthetic.h"
#include "kgnn/training.h"
#include "metric_cases.h"
#include "oracles.h"

namespace kgnn {
namespace {

using Clock = std::chrono::steady_clock;

double Since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

int failures = 0;

void Report(const std::string& id, bool ok, const std::string& detail, double seconds,
            double budget) {
  const bool in_time = seconds < budget;
  const bool pass = ok && in_time;
  if (!pass) ++failures;
  std::printf("[%s] %s: %s (%.1f s, budget %.0f s%s)\n", pass ? "PASS" : "FAIL", id.c_str(),
              detail.c_str(), seconds, budget, in_time ? "" : ", over budget");
  std::fflush(stdout);
}

void Guarded(const std::string& id, double budget, const std::function<void(Clock::time_point)>& f) {
  const auto start = Clock::now();
  try {
    f(start);
  } catch (const std::exception& e) {
    Report(id, false, std::string("threw: ") + e.what(), Since(start), budget);
  }
}

std::string Fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

// Settings shared by the training-based criteria.
ModelConfig SweepModel() {
  ModelConfig m;
  m.encoder.d_model = 32;
  m.encoder.word_dim = 16;
  m.encoder.char_filters = 16;
  m.seed = 1;
  return m;
}

TrainConfig SweepTraining() {
  TrainConfig t;
  t.adam.lr = 3e-3;
  t.batch_size = 16;
  t.epochs = 12;
  t.seed = 1;
  return t;
}

void GradientCheck() {
  Guarded("C1 full-loss gradient check", 60, [](auto start) {
    const GradCheckReport r = CheckFullLossGradients(9);
    Report("C1 full-loss gradient check", r.max_relative_error < 1e-4,
           Fmt("max relative error %.3g over %.0f entries (threshold 1e-4)",
               r.max_relative_error, static_cast<double>(r.entries_checked)) +
               ", worst " + r.worst_name,
           Since(start), 60);
  });
}

void PropagateOracle() {
  Guarded("C2 propagate vs loop oracle", 10, [](auto start) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng() % 10, kinds = 1 + rng() % 3, d = 6;
      const EntityGraph graph = oracle::RandomGraph(n, kinds, 0.25, rng);
      const GraphLayout layout = GraphLayout::Build(graph, {n});
      ParameterSet params;
      std::vector<Linear> nets;
      nets.reserve(kinds);
      for (std::size_t k = 0; k < kinds; ++k) {
        nets.emplace_back(params, "phi" + std::to_string(k), d, d, rng);
        for (double& b : nets.back().bias().impl()->value) b = 0.1 * g(rng);
      }
      std::vector<const Linear*> phi;
      if (trial % 2) {
        for (const Linear& l : nets) phi.push_back(&l);
      } else {
        phi = {&nets[0]};
      }
      std::vector<std::vector<double>> v(n, std::vector<double>(d)), e(kinds, std::vector<double>(d));
      std::vector<double> a(kinds);
      for (auto& row : v) for (double& x : row) x = g(rng);
      for (auto& row : e) for (double& x : row) x = g(rng);
      double z = 0.0;
      for (double& x : a) z += (x = std::exp(g(rng)));
      for (double& x : a) x /= z;
      Tensor states = Tensor::Zeros({n, d}), emb = Tensor::Zeros({kinds, d});
      for (std::size_t i = 0; i < n; ++i) for (std::size_t c = 0; c < d; ++c) states.mutable_values()[i * d + c] = v[i][c];
      for (std::size_t k = 0; k < kinds; ++k) for (std::size_t c = 0; c < d; ++c) emb.mutable_values()[k * d + c] = e[k][c];
      const Tensor got = Propagate(layout, states, Tensor::FromValues({kinds}, a), emb, phi);
      const auto want = oracle::Propagate(graph, v, a, e, phi);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) worst = std::max(worst, std::abs(got.at(i, c) - want[i][c]));
      }
    }
    Report("C2 propagate vs loop oracle", worst <= 1e-10,
           Fmt("100 random graphs (<=10 nodes, <=3 kinds), max abs diff %.3g (tolerance 1e-10)", worst),
           Since(start), 10);
  });
}

void StructuralInvariants() {
  Guarded("C3 structural invariants", 30, [](auto start) {
    SyntheticTaskSpec spec;
    spec.num_questions = 40;
    spec.dev_questions = 20;
    spec.paragraphs_per_question = 10;
    const SyntheticCorpus corpus = GenerateCorpus(spec);
    const RelationVocabulary relations(spec.relations);
    const KnowledgeStore store(corpus.entities, corpus.triples, relations);
    const auto dev = PrepareAll(corpus.dev, store, {});
    ModelConfig mc = SweepModel();
    mc.steps = 2;
    KgnnModel model(mc, BuildVocabulary(PrepareAll(corpus.train, store, {})),
                    EdgeKinds(relations, true).count());

    double alpha_err = 0.0, norm_err = 0.0, isolated_max = 0.0, empty_max = 0.0;
    bool identity = true, symmetric = true, deterministic = true;
    std::size_t isolated_nodes = 0;
    for (std::size_t q = 0; q < dev.size(); ++q) {
      const PreparedExample& ex = dev[q];
      const ForwardResult f = model.Forward(ex);
      for (std::size_t t = 0; t < 2; ++t) {
        const Tensor alpha = RelationAttention(f.question_summary,
                                               model.reasoner().step(t).relation_proj());
        double s = 0.0;
        for (double x : alpha.values()) s += x;
        alpha_err = std::max(alpha_err, std::abs(s - 1.0));
      }
      for (const auto* side : {&f.logits.start, &f.logits.end}) {
        double s = 0.0;
        for (double p : SharedNormDistribution(*side)) s += p;
        norm_err = std::max(norm_err, std::abs(s - 1.0));
      }
      const ForwardResult f0 = model.Forward(ex, 0);
      for (std::size_t i = 0; i < f0.encoded.size(); ++i) {
        const auto a = f0.encoded[i].values(), b = f0.reasoned[i].values();
        identity = identity && std::equal(a.begin(), a.end(), b.begin(), b.end());
      }
      StepTrace trace;
      model.reasoner().step(0).Forward(f.encoded, ex.layout, f.question_summary, &trace);
      for (std::size_t node = 0; node < ex.graph.size(); ++node) {
        bool any = false;
        for (std::size_t k = 0; k < ex.graph.num_kinds(); ++k) any = any || !ex.graph.Neighbors(node, k).empty();
        if (any) continue;
        ++isolated_nodes;
        for (std::size_t c = 0; c < trace.updates.dim(1); ++c) {
          isolated_max = std::max(isolated_max, std::abs(trace.updates.at(node, c)));
        }
      }
      std::vector<std::size_t> lengths;
      for (const auto& p : ex.paragraphs) lengths.push_back(p.size());
      StepTrace empty;
      model.reasoner().step(0).Forward(
          f.encoded, GraphLayout::Build(EntityGraph({}, {}, ex.graph.num_kinds()), lengths),
          f.question_summary, &empty);
      for (double x : empty.scattered.values()) empty_max = std::max(empty_max, std::abs(x));
      const std::set<Edge> edges(ex.graph.edges().begin(), ex.graph.edges().end());
      for (const Edge& e : ex.graph.edges()) {
        if (e.kind == 0) symmetric = symmetric && edges.count({e.dst, e.src, 0});
      }
      const PreparedExample again = Prepare(corpus.dev[q], store, {});
      deterministic = deterministic &&
                      again.graph.ToJson(relations, EdgeKinds(relations, true)) ==
                          ex.graph.ToJson(relations, EdgeKinds(relations, true));
    }
    const bool ok = alpha_err <= 1e-9 && norm_err <= 1e-6 && identity && empty_max == 0.0 &&
                    isolated_max == 0.0 && symmetric && deterministic && isolated_nodes > 0;
    std::ostringstream d;
    d << "alpha sum err " << alpha_err << " (<=1e-9), shared-norm sum err " << norm_err
      << " (<=1e-6), T=0 identity " << (identity ? "yes" : "no") << ", empty-graph |U| max "
      << empty_max << ", isolated-node |update| max " << isolated_max << " over " << isolated_nodes
      << " nodes, coref symmetric " << (symmetric ? "yes" : "no") << ", graph deterministic "
      << (deterministic ? "yes" : "no") << " (" << dev.size() << " questions x 10 paragraphs)";
    Report("C3 structural invariants", ok, d.str(), Since(start), 30);
  });
}

void MetricOracle() {
  Guarded("C4 metric hand cases", 5, [](auto start) {
    const auto cases = cases::HandCases();
    std::size_t wrong = 0;
    std::string first;
    for (const auto& c : cases) {
      if (std::abs(c.actual - c.expected) > 1e-12) {
        if (wrong++ == 0) first = c.name;
      }
    }
    Report("C4 metric hand cases", wrong == 0 && cases.size() >= 20,
           std::to_string(cases.size()) + " cases, " + std::to_string(wrong) + " mismatches" +
               (first.empty() ? "" : " (first: " + first + ")"),
           Since(start), 5);
  });
}

void Overfit() {
  Guarded("C5 overfit 10 questions", 120, [](auto start) {
    SyntheticTaskSpec spec;
    spec.num_questions = 10;
    spec.dev_questions = 0;
    const SyntheticCorpus corpus = GenerateCorpus(spec);
    const RelationVocabulary relations(spec.relations);
    const KnowledgeStore store(corpus.entities, corpus.triples, relations);
    const auto train = PrepareAll(corpus.train, store, {});
    ModelConfig mc = SweepModel();
    KgnnModel model(mc, BuildVocabulary(train), EdgeKinds(relations, true).count());
    AdamConfig ac;
    ac.lr = 1e-2;
    Adam adam(model.params(), ac);
    double loss = 0.0;
    std::size_t step = 0;
    for (; step < 200; ++step) {
      model.params().ZeroGrad();
      loss = 0.0;
      for (const PreparedExample& ex : train) {
        Tape tape;
        TapeScope scope(tape);
        LossParts parts = model.Loss(ex);
        loss += parts.total.item() / train.size();
        Backward(tape, ops::Scale(parts.total, 1.0 / train.size()));
      }
      if (loss < 0.05) break;
      adam.Step();
    }
    Report("C5 overfit 10 questions", loss < 0.05,
           Fmt("mean training loss %.4g at step %.0f (target < 0.05 within 200 steps)", loss,
               static_cast<double>(step)),
           Since(start), 120);
  });
}

void LayerAblation() {
  Guarded("C6 reasoning-step ablation", 1200, [](auto start) {
    SyntheticTaskSpec spec;  // 1000 train, 500 dev, 4 paragraphs
    const SyntheticCorpus corpus = GenerateCorpus(spec);
    const auto rows = LayerSweep(corpus, {2, 1, 0}, SweepModel(), SweepTraining(), nullptr);
    std::cout << LayerSweepTable(rows);
    const LayerSweepRow& t2 = rows[0];
    const LayerSweepRow& t1 = rows[1];
    const LayerSweepRow& t0 = rows[2];
    const bool gap = t2.dev.answer_em >= t1.dev.answer_em + 0.05;
    const bool near_chance = t0.bridge.answer_em <= 2.0 * t0.bridge.chance;
    Report("C6 reasoning-step ablation", gap && near_chance && corpus.dev.size() >= 500,
           Fmt("answer EM T=2 %.3f vs T=1 %.3f (need +0.05); T=0 bridge EM %.3f vs 2x chance %.3f",
               t2.dev.answer_em, t1.dev.answer_em, t0.bridge.answer_em, 2.0 * t0.bridge.chance) +
               ", dev " + std::to_string(corpus.dev.size()),
           Since(start), 1200);
  });
}

void ParagraphRobustness() {
  Guarded("C7 paragraph robustness", 1800, [](auto start) {
    SyntheticTaskSpec spec;
    const auto result = ParagraphSweep(spec, {4, 10, 20, 30}, SweepModel(), SweepTraining(), nullptr);
    std::cout << ParagraphSweepTable(result);
    Report("C7 paragraph robustness",
           result.kgnn_relative_drop < result.ablation_relative_drop,
           Fmt("joint-F1 relative drop 4->30: graph %.3f vs no-graph %.3f (absolute %.3f vs %.3f)",
               result.kgnn_relative_drop, result.ablation_relative_drop, result.kgnn_absolute_drop,
               result.ablation_absolute_drop),
           Since(start), 1800);
  });
}

void HotpotParse() {
  Guarded("C8 HotpotQA file parses", 5, [](auto start) {
    const auto examples = ReadCorpus(std::string(KGNN_TEST_DATA) + "/hotpot_sample.json");
    std::size_t with_support = 0;
    for (const Example& e : examples) with_support += !SupportingSentences(e).empty();
    Report("C8 HotpotQA file parses", !examples.empty() && with_support == examples.size(),
           std::to_string(examples.size()) + " records, all supporting facts resolved",
           Since(start), 5);
  });
}

}  // namespace
}  // namespace kgnn

int main() {
  using namespace kgnn;
  GradientCheck();
  PropagateOracle();
  StructuralInvariants();
  MetricOracle();
  HotpotParse();
  Overfit();
  LayerAblation();
  ParagraphRobustness();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
