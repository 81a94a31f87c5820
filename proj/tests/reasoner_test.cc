#include <cmath>
#include <random>

#include "golden.h"
#include "gtest/gtest.h"
#include "kgnn/ops.h"
#include "kgnn/reasoner.h"
#include "oracles.h"

namespace kgnn {
namespace {

Tensor Random(Shape shape, Rng& rng, bool grad = false) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t = Tensor::Zeros(shape, grad);
  for (double& x : t.mutable_values()) x = g(rng);
  return t;
}

void Set(Tensor t, const std::vector<double>& v) {
  std::copy(v.begin(), v.end(), t.mutable_values().begin());
}

// A Linear with identity weight and zero bias.
Linear Identity(ParameterSet& params, const std::string& name, std::size_t d, Rng& rng) {
  Linear l(params, name, d, d, rng);
  std::vector<double> eye(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
  Set(l.weight(), eye);
  Set(l.bias(), std::vector<double>(d, 0.0));
  return l;
}

EntityNode Node(std::size_t id, std::size_t paragraph, std::vector<std::pair<std::size_t, std::size_t>> spans) {
  EntityNode n{id, "e" + std::to_string(id), paragraph, {}};
  for (auto [s, e] : spans) n.mentions.push_back({paragraph, s, e, n.entity_id});
  return n;
}

TEST(QuestionSummary, ElementwiseMax) {
  const Tensor one = Tensor::FromValues({1, 3}, {1, -2, 3});
  const Tensor summary = QuestionSummary(one);
  EXPECT_EQ(std::vector<double>(summary.values().begin(), summary.values().end()),
            (std::vector<double>{1, -2, 3}));
  const Tensor s = QuestionSummary(Tensor::FromValues({2, 2}, {1, 0, 0, 1}));
  EXPECT_EQ(s.at(0), 1.0);
  EXPECT_EQ(s.at(1), 1.0);
  Rng rng(1);
  const Tensor q = Random({4, 3}, rng);
  const Tensor p = ops::GatherRows(q, {2, 0, 3, 1});
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(QuestionSummary(q).at(k), QuestionSummary(p).at(k));
}

TEST(InitNodeReprs, MeanThenMaxByHand) {
  Rng rng(1);
  ParameterSet params;
  const Linear ffn = Identity(params, "ffn", 2, rng);
  // Two single-token mentions at rows 0 and 1: [1,3] and [2,0].
  const EntityGraph g({Node(0, 0, {{0, 0}, {1, 1}})}, {}, 1);
  const GraphLayout layout = GraphLayout::Build(g, {2});
  const Tensor nodes = InitNodeReprs(layout, Tensor::FromValues({2, 2}, {1, 3, 2, 0}), ffn);
  EXPECT_EQ(nodes.at(0, 0), 2.0);
  EXPECT_EQ(nodes.at(0, 1), 3.0);

  // One two-token mention averages first: [1.5, 1.5].
  const EntityGraph g2({Node(0, 0, {{0, 1}})}, {}, 1);
  const Tensor n2 =
      InitNodeReprs(GraphLayout::Build(g2, {2}), Tensor::FromValues({2, 2}, {1, 3, 2, 0}), ffn);
  EXPECT_EQ(n2.at(0, 0), 1.5);
  EXPECT_EQ(n2.at(0, 1), 1.5);
}

TEST(InitNodeReprs, SingleMentionAndRepeatedRows) {
  Rng rng(2);
  ParameterSet params;
  const Linear ffn(params, "ffn", 3, 3, rng);
  const Tensor p = Tensor::FromValues({3, 3}, {0.5, -1, 2, 0.5, -1, 2, 1, 1, 1});
  const EntityGraph one({Node(0, 0, {{0, 0}})}, {}, 1);
  const EntityGraph two({Node(0, 0, {{0, 0}, {1, 1}})}, {}, 1);
  const Tensor a = InitNodeReprs(GraphLayout::Build(one, {3}), p, ffn);
  const Tensor b = InitNodeReprs(GraphLayout::Build(two, {3}), p, ffn);
  const auto ref = oracle::LinearLoop(ffn, {0.5, -1, 2});
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(a.at(0, k), std::max(0.0, ref[k]), 1e-14);
    EXPECT_EQ(a.at(0, k), b.at(0, k));
  }
}

TEST(RelationAttention, ZeroWeightsGiveUniform) {
  Rng rng(3);
  ParameterSet params;
  const Linear proj(params, "att", 4, 5, rng);
  Set(proj.weight(), std::vector<double>(20, 0.0));
  const Tensor alpha = RelationAttention(Random({4}, rng), proj);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(alpha.at(k), 0.2);

  const Linear single(params, "one", 4, 1, rng);
  EXPECT_EQ(RelationAttention(Random({4}, rng), single).at(0), 1.0);
}

TEST(RelationAttention, SumsToOneAndMatchesGolden) {
  Rng rng(4);
  ParameterSet params;
  const Linear proj(params, "att", 6, 11, rng);
  const Tensor alpha = RelationAttention(Random({6}, rng), proj);
  double total = 0.0;
  for (double a : alpha.values()) total += a;
  EXPECT_NEAR(total, 1.0, 1e-12);
  testing::ExpectGolden("relation_attention", alpha);
}

TEST(Propagate, IsolatedNodeGetsZero) {
  Rng rng(5);
  ParameterSet params;
  const Linear phi(params, "phi", 2, 2, rng);
  const EntityGraph g({Node(0, 0, {{0, 0}}), Node(1, 0, {{1, 1}})}, {}, 2);
  const GraphLayout layout = GraphLayout::Build(g, {2});
  const Tensor u = Propagate(layout, Random({2, 2}, rng), Tensor::FromValues({2}, {0.5, 0.5}),
                             Random({2, 2}, rng), {&phi});
  for (double x : u.values()) EXPECT_EQ(x, 0.0);
}

TEST(Propagate, SingleEdgeByHand) {
  Rng rng(6);
  ParameterSet params;
  const Linear phi = Identity(params, "phi", 2, rng);
  // A -> B with kind 1; alpha puts all weight on kind 1.
  const EntityGraph g({Node(0, 0, {{0, 0}}), Node(1, 0, {{1, 1}})}, {{0, 1, 1}}, 2);
  const GraphLayout layout = GraphLayout::Build(g, {2});
  const Tensor v = Tensor::FromValues({2, 2}, {2, 0, 7, 7});
  const Tensor emb = Tensor::FromValues({2, 2}, {9, 9, 1, 0});
  const Tensor u = Propagate(layout, v, Tensor::FromValues({2}, {0, 1}), emb, {&phi});
  EXPECT_EQ(u.at(1, 0), 3.0);
  EXPECT_EQ(u.at(1, 1), 0.0);
  EXPECT_EQ(u.at(0, 0), 0.0);
  EXPECT_EQ(u.at(0, 1), 0.0);
}

TEST(Propagate, MatchesLoopOracleOnRandomGraphs) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 10, kinds = 1 + rng() % 3, d = 4;
    const EntityGraph g = oracle::RandomGraph(n, kinds, 0.3, rng);
    const GraphLayout layout = GraphLayout::Build(g, {n});
    ParameterSet params;
    std::vector<Linear> nets;
    nets.reserve(kinds);
    for (std::size_t k = 0; k < kinds; ++k) nets.emplace_back(params, "phi" + std::to_string(k), d, d, rng);
    std::vector<const Linear*> phi;
    if (trial % 2 == 0) {
      phi = {&nets[0]};
    } else {
      for (const Linear& l : nets) phi.push_back(&l);
    }
    const Tensor v = Random({n, d}, rng);
    const Tensor emb = Random({kinds, d}, rng);
    const Tensor alpha = ops::Softmax(Random({kinds}, rng), 0);
    const Tensor u = Propagate(layout, v, alpha, emb, phi);
    std::vector<std::vector<double>> vv(n, std::vector<double>(d)), ee(kinds, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) for (std::size_t c = 0; c < d; ++c) vv[i][c] = v.at(i, c);
    for (std::size_t k = 0; k < kinds; ++k) for (std::size_t c = 0; c < d; ++c) ee[k][c] = emb.at(k, c);
    const std::vector<double> aa(alpha.values().begin(), alpha.values().end());
    const auto want = oracle::Propagate(g, vv, aa, ee, phi);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(u.at(i, c), want[i][c], 1e-10);
    }
  }
}

TEST(Propagate, KindCountMismatchRejected) {
  Rng rng(8);
  ParameterSet params;
  const Linear phi(params, "phi", 2, 2, rng);
  const EntityGraph g({Node(0, 0, {{0, 0}})}, {}, 3);
  EXPECT_THROW(Propagate(GraphLayout::Build(g, {1}), Random({1, 2}, rng),
                         Tensor::FromValues({2}, {0.5, 0.5}), Random({2, 2}, rng), {&phi}),
               std::invalid_argument);
}

TEST(Scatter, RowsCarryTheirNodeUpdate) {
  // Paragraph 0 has no mentions; paragraph 1 has node 0 at 2..3 and node 1 at 0..0.
  const EntityGraph g({Node(0, 1, {{2, 3}}), Node(1, 1, {{0, 0}})}, {}, 1);
  const GraphLayout layout = GraphLayout::Build(g, {3, 5});
  const Tensor updates = Tensor::FromValues({2, 2}, {1, 2, 3, 4});
  const Tensor s = ScatterToParagraphs(layout, updates, 2);
  ASSERT_EQ(s.shape(), (Shape{8, 2}));
  const std::vector<double> want = {0, 0, 0, 0, 0, 0,  // paragraph 0
                                    3, 4, 0, 0, 1, 2, 1, 2, 0, 0};
  EXPECT_EQ(std::vector<double>(s.values().begin(), s.values().end()), want);
}

TEST(Scatter, EmptyGraphIsAllZero) {
  const GraphLayout layout = GraphLayout::Build(EntityGraph({}, {}, 1), {4});
  const Tensor s = ScatterToParagraphs(layout, Tensor::Zeros({0, 3}), 3);
  EXPECT_EQ(s.shape(), (Shape{4, 3}));
  for (double x : s.values()) EXPECT_EQ(x, 0.0);
}

TEST(GatedUpdate, EndpointsAndMidpoint) {
  Rng rng(9);
  ParameterSet params;
  Linear gp(params, "gp", 2, 2, rng), gu(params, "gu", 2, 2, rng, false);
  Set(gp.weight(), {0, 0, 0, 0});
  Set(gu.weight(), {0, 0, 0, 0});
  const Tensor p = Tensor::FromValues({1, 2}, {1, 2});
  const Tensor u = Tensor::FromValues({1, 2}, {5, -3});
  Set(gp.bias(), {0, 0});
  Tensor mid = GatedUpdate(p, u, gp, gu);
  EXPECT_DOUBLE_EQ(mid.at(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(mid.at(0, 1), -0.5);
  Set(gp.bias(), {100, 100});
  Tensor hi = GatedUpdate(p, u, gp, gu);
  EXPECT_NEAR(hi.at(0, 0), 5.0, 1e-12);
  EXPECT_NEAR(hi.at(0, 1), -3.0, 1e-12);
  Set(gp.bias(), {-100, -100});
  Tensor lo = GatedUpdate(p, u, gp, gu);
  EXPECT_NEAR(lo.at(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(lo.at(0, 1), 2.0, 1e-12);
}

class StepFixture : public ::testing::Test {
 protected:
  StepFixture() : rng_(21) {
    config_.d = 4;
    config_.num_kinds = 3;
    config_.steps = 2;
    graph_ = EntityGraph({Node(0, 0, {{1, 2}}), Node(1, 0, {{4, 4}}), Node(2, 1, {{0, 0}}),
                          Node(3, 1, {{2, 3}})},
                         {{0, 2, 0}, {2, 0, 0}, {2, 3, 1}, {3, 2, 2}}, 3);
    layout_ = GraphLayout::Build(graph_, {5, 4});
    paragraphs_ = {Random({5, 4}, rng_), Random({4, 4}, rng_)};
    question_ = QuestionSummary(Random({3, 4}, rng_));
  }
  Rng rng_;
  ReasonerConfig config_;
  EntityGraph graph_;
  GraphLayout layout_;
  std::vector<Tensor> paragraphs_;
  Tensor question_;
};

TEST_F(StepFixture, TraceInvariants) {
  ParameterSet params;
  ReasoningStep step(params, "r", config_, rng_);
  StepTrace trace;
  const auto out = step.Forward(paragraphs_, layout_, question_, &trace);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].shape(), (Shape{4, 4}));
  double total = 0.0;
  for (double a : trace.alpha.values()) total += a;
  EXPECT_NEAR(total, 1.0, 1e-9);
  // Node 1 has no incoming edges.
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(trace.updates.at(1, c), 0.0);
  // Rows of paragraph 0 outside mentions carry no update.
  for (std::size_t r : {0, 3}) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(trace.scattered.at(r, c), 0.0);
  }
  std::vector<double> flat;
  for (const Tensor& t : out) flat.insert(flat.end(), t.values().begin(), t.values().end());
  testing::ExpectGolden("reasoning_step", flat, 1e-10);
}

TEST_F(StepFixture, EmptyGraphScattersZeros) {
  ParameterSet params;
  ReasoningStep step(params, "r", config_, rng_);
  const GraphLayout empty = GraphLayout::Build(EntityGraph({}, {}, 3), {5, 4});
  StepTrace trace;
  step.Forward(paragraphs_, empty, question_, &trace);
  for (double x : trace.scattered.values()) EXPECT_EQ(x, 0.0);
  // Nodes without edges: same outcome.
  StepTrace bare;
  step.Forward(paragraphs_, GraphLayout::Build(graph_.WithoutEdges(), {5, 4}), question_, &bare);
  for (double x : bare.scattered.values()) EXPECT_EQ(x, 0.0);
}

TEST_F(StepFixture, ZeroStepsIsIdentityAndTooManyRejected) {
  ParameterSet params;
  Reasoner reasoner(params, "r", config_, rng_);
  const auto out = reasoner.Forward(paragraphs_, layout_, question_, 0);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(out[i].impl(), paragraphs_[i].impl());
  EXPECT_THROW(reasoner.Forward(paragraphs_, layout_, question_, 3), std::invalid_argument);
  EXPECT_EQ(reasoner.Forward(paragraphs_, layout_, question_, 2).size(), 2u);
}

TEST_F(StepFixture, WrongParagraphShapeRejected) {
  ParameterSet params;
  ReasoningStep step(params, "r", config_, rng_);
  EXPECT_THROW(step.Forward({paragraphs_[0]}, layout_, question_), std::invalid_argument);
  EXPECT_THROW(step.Forward({paragraphs_[1], paragraphs_[0]}, layout_, question_),
               std::invalid_argument);
}

TEST_F(StepFixture, RelationParametersReceiveGradient) {
  ParameterSet params;
  ReasoningStep step(params, "r", config_, rng_);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    const auto out = step.Forward(paragraphs_, layout_, question_);
    // A weighted readout so no parameter sits in a symmetric blind spot.
    Tensor weights = Random({4, 4}, rng_);
    loss = ops::SumAll(ops::Mul(out[1], weights));
  }
  Backward(tape, loss);
  for (const std::string name : {"r.relation_att.weight", "r.relation_att.bias", "r.phi.weight",
                                 "r.phi.bias", "r.node_ffn.weight"}) {
    const Tensor t = params.Get(name);
    double norm = 0.0;
    for (double g : t.grad()) norm += g * g;
    EXPECT_GT(norm, 0.0) << name;
  }
  // Embedding rows of kinds that occur in the graph.
  const Tensor emb = params.Get("r.relation_emb.table");
  for (std::size_t k = 0; k < 3; ++k) {
    double norm = 0.0;
    for (std::size_t c = 0; c < 4; ++c) norm += std::abs(emb.grad()[k * 4 + c]);
    EXPECT_GT(norm, 0.0) << "kind " << k;
  }
}

}  // namespace
}  // namespace kgnn
