#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "golden.h"
#include "gtest/gtest.h"
#include "kgnn/corpus.h"
#include "kgnn/ops.h"
#include "kgnn/synthetic.h"
#include "kgnn/training.h"

namespace kgnn {
namespace {

SyntheticTaskSpec SmallSpec(std::size_t paragraphs = 2) {
  SyntheticTaskSpec spec;
  spec.num_entities = 200;
  spec.num_questions = 12;
  spec.dev_questions = 6;
  spec.paragraphs_per_question = paragraphs;
  return spec;
}

KnowledgeStore StoreOf(const SyntheticCorpus& c, const SyntheticTaskSpec& spec) {
  return KnowledgeStore(c.entities, c.triples, RelationVocabulary(spec.relations));
}

ModelConfig TinyModel() {
  ModelConfig m;
  m.encoder.d_model = 8;
  m.encoder.word_dim = 4;
  m.encoder.char_dim = 4;
  m.encoder.char_filters = 4;
  m.encoder.char_width = 3;
  m.encoder.max_word_len = 8;
  m.seed = 5;
  return m;
}

class SmallTask : public ::testing::Test {
 protected:
  SmallTask()
      : spec_(SmallSpec(4)),
        corpus_(GenerateCorpus(spec_)),
        store_(StoreOf(corpus_, spec_)),
        kinds_(EdgeKinds(store_.relations(), true).count()) {
    train_ = PrepareAll(corpus_.train, store_, {});
    dev_ = PrepareAll(corpus_.dev, store_, {});
  }
  SyntheticTaskSpec spec_;
  SyntheticCorpus corpus_;
  KnowledgeStore store_;
  std::size_t kinds_;
  std::vector<PreparedExample> train_, dev_;
};

std::string Dump(const std::vector<Example>& examples) {
  std::string s;
  for (const Example& e : examples) s += ExampleToJson(e).dump() + "\n";
  return s;
}

TEST(Synthetic, SameSeedSameCorpus) {
  const SyntheticCorpus a = GenerateCorpus(SmallSpec(4));
  const SyntheticCorpus b = GenerateCorpus(SmallSpec(4));
  EXPECT_EQ(Dump(a.train), Dump(b.train));
  EXPECT_EQ(Dump(a.dev), Dump(b.dev));
  EXPECT_EQ(a.triples, b.triples);
  SyntheticTaskSpec other = SmallSpec(4);
  other.seed = 8;
  EXPECT_NE(Dump(GenerateCorpus(other).train), Dump(a.train));
}

TEST(Synthetic, GoldPathIsCorefThenRelation) {
  for (std::size_t paragraphs : {2, 4, 10}) {
    const SyntheticTaskSpec spec = SmallSpec(paragraphs);
    const SyntheticCorpus c = GenerateCorpus(spec);
    const KnowledgeStore store = StoreOf(c, spec);
    ASSERT_EQ(c.train.size(), c.train_paths.size());
    for (std::size_t i = 0; i < c.train.size(); ++i) {
      EXPECT_EQ(c.train[i].paragraphs.size(), paragraphs);
      EXPECT_EQ(ValidateGoldPath(c.train[i], c.train_paths[i], store), "") << c.train[i].id;
    }
    for (std::size_t i = 0; i < c.dev.size(); ++i) {
      EXPECT_EQ(ValidateGoldPath(c.dev[i], c.dev_paths[i], store), "") << c.dev[i].id;
    }
  }
}

TEST(Synthetic, ValidatorCatchesBrokenPath) {
  const SyntheticTaskSpec spec = SmallSpec(2);
  const SyntheticCorpus c = GenerateCorpus(spec);
  const KnowledgeStore store = StoreOf(c, spec);
  GoldPath wrong = c.train_paths[0];
  wrong.relation = wrong.relation == "director" ? "lyrics_by" : "director";
  EXPECT_NE(ValidateGoldPath(c.train[0], wrong, store), "");
  Example cut = c.train[0];
  cut.paragraphs.erase(cut.paragraphs.begin() + c.train_paths[0].anchor_paragraph);
  EXPECT_NE(ValidateGoldPath(cut, c.train_paths[0], store), "");
}

TEST(Synthetic, UnsatisfiableSpecRejected) {
  SyntheticTaskSpec spec = SmallSpec(2);
  spec.num_entities = 5;
  EXPECT_THROW(GenerateCorpus(spec), std::invalid_argument);
  spec = SmallSpec(2);
  spec.paragraphs_per_question = 1;
  EXPECT_THROW(GenerateCorpus(spec), std::invalid_argument);
  spec = SmallSpec(400);
  EXPECT_THROW(GenerateCorpus(spec), std::invalid_argument);
}

TEST(Synthetic, ChanceLevelCountsMentionedTails) {
  const SyntheticTaskSpec spec = SmallSpec(2);
  const SyntheticCorpus c = GenerateCorpus(spec);
  const KnowledgeStore store = StoreOf(c, spec);
  // Two gold paragraphs: the bridge paragraph states 3 tails for each of
  // two bridges.
  EXPECT_DOUBLE_EQ(ChanceLevel(c.train[0], store), 1.0 / 6.0);
}

TEST_F(SmallTask, PreparedGoldSpanAndSupport) {
  for (std::size_t i = 0; i < train_.size(); ++i) {
    const PreparedExample& p = train_[i];
    ASSERT_TRUE(p.gold.has_value()) << p.id;
    EXPECT_EQ(p.gold->paragraph, corpus_.train_paths[i].bridge_paragraph);
    EXPECT_EQ(NormalizeAnswer(SpanText(p.paragraphs[p.gold->paragraph], p.gold->start,
                                       p.gold->end)),
              NormalizeAnswer(p.answer));
    EXPECT_EQ(p.gold_sp.size(), 2u);
    double positives = 0.0;
    for (double y : p.sp_labels) positives += y;
    EXPECT_EQ(positives, 2.0);
  }
}

TEST_F(SmallTask, UniformLogitsGiveTwoLogN) {
  KgnnModel model(TinyModel(), BuildVocabulary(train_), kinds_);
  for (const char* name : {"predict.start.weight", "predict.end.weight"}) {
    for (double& x : model.params().Get(name).mutable_values()) x = 0.0;
  }
  const PreparedExample& ex = train_[0];
  std::size_t n = 0;
  for (const auto& p : ex.paragraphs) n += p.size();
  EXPECT_NEAR(model.Loss(ex).span, 2.0 * std::log(static_cast<double>(n)), 1e-12);
}

TEST(Loss, PeakedPredictionIsNearZero) {
  std::vector<double> logits(30, 0.0);
  logits[7] = 20.0;
  const Tensor logp = SharedNormLogProbs({Tensor::FromValues({30}, logits)});
  EXPECT_LT(-2.0 * logp.at(7), 1e-3);
}

TEST_F(SmallTask, LossMatchesGolden) {
  KgnnModel model(TinyModel(), BuildVocabulary(train_), kinds_);
  const LossParts loss = model.Loss(train_[0]);
  EXPECT_NEAR(loss.total.item(), loss.span + loss.sp, 1e-12);
  testing::ExpectGolden("loss_fixture", {loss.span, loss.sp}, 1e-9);
}

TEST_F(SmallTask, GoldSpanOutOfRangeNamesQuestion) {
  KgnnModel model(TinyModel(), BuildVocabulary(train_), kinds_);
  PreparedExample bad = train_[1];
  bad.gold->end = 10000;
  try {
    model.Loss(bad);
    FAIL() << "expected rejection";
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find(bad.id), std::string::npos) << e.what();
  }
}

TEST_F(SmallTask, TrainingIsDeterministic) {
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.adam.lr = 1e-2;
  std::string logs[2];
  for (auto& log : logs) {
    KgnnModel model(TinyModel(), BuildVocabulary(train_), kinds_);
    std::ostringstream out;
    Train(model, train_, &dev_, tc, &out);
    log = out.str();
  }
  EXPECT_FALSE(logs[0].empty());
  EXPECT_EQ(logs[0], logs[1]);
}

TEST_F(SmallTask, LossDecreasesUnderTraining) {
  KgnnModel model(TinyModel(), BuildVocabulary(train_), kinds_);
  const double before = MeanLoss(model, train_);
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 4;
  tc.adam.lr = 1e-2;
  tc.keep_best = false;
  Train(model, train_, nullptr, tc);
  EXPECT_LT(MeanLoss(model, train_), before);
}

TEST_F(SmallTask, NonFiniteLossAborts) {
  KgnnModel model(TinyModel(), BuildVocabulary(train_), kinds_);
  model.params().Get("predict.sp.bias").mutable_values()[0] =
      std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  try {
    Train(model, train_, nullptr, tc);
    FAIL() << "expected abort";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("on question "), std::string::npos) << e.what();
  }
}

TEST_F(SmallTask, CheckpointRoundTrip) {
  KgnnModel model(TinyModel(), BuildVocabulary(train_), kinds_);
  const auto dir = std::filesystem::temp_directory_path() / ("kgnn_ckpt_" + std::to_string(::getpid()));
  SaveCheckpoint(dir.string(), model, {}, store_.relations());
  const LoadedCheckpoint loaded = LoadCheckpoint(dir.string());
  std::filesystem::remove_all(dir);
  EXPECT_EQ(loaded.relations, spec_.relations);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(loaded.model->Predict(dev_[i]).ToJson(), model.Predict(dev_[i]).ToJson());
  }
  EXPECT_EQ(loaded.model->params().ToJson(), model.params().ToJson());
}

TEST_F(SmallTask, ZeroStepModelIgnoresGraph) {
  ModelConfig config = TinyModel();
  KgnnModel model(config, BuildVocabulary(train_), kinds_);
  PreparedExample bare = train_[0];
  bare.graph = bare.graph.WithoutEdges();
  std::vector<std::size_t> lengths;
  for (const auto& p : bare.paragraphs) lengths.push_back(p.size());
  bare.layout = GraphLayout::Build(bare.graph, lengths);
  EXPECT_EQ(model.Loss(train_[0], 0).total.item(), model.Loss(bare, 0).total.item());
  EXPECT_NE(model.Loss(train_[0], 2).total.item(), model.Loss(bare, 2).total.item());
}

TEST(Adam, MinimizesQuadratic) {
  ParameterSet params;
  Rng rng(1);
  Tensor x = params.Create("x.w", {2}, Init::kZeros, rng);
  x.mutable_values()[0] = 3.0;
  x.mutable_values()[1] = -2.0;
  AdamConfig config;
  config.lr = 0.1;
  Adam adam(params, config);
  for (int i = 0; i < 300; ++i) {
    params.ZeroGrad();
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = ops::SumAll(ops::Mul(x, x));
    }
    Backward(tape, loss);
    adam.Step();
  }
  EXPECT_LT(std::abs(x.at(0)) + std::abs(x.at(1)), 0.05);
  EXPECT_EQ(adam.steps(), 300u);
}

TEST(Adam, ClipsGlobalNorm) {
  ParameterSet params;
  Rng rng(1);
  Tensor x = params.Create("x.w", {2}, Init::kZeros, rng);
  x.mutable_grad()[0] = 30.0;
  x.mutable_grad()[1] = 40.0;
  AdamConfig config;
  config.clip_norm = 5.0;
  Adam adam(params, config);
  EXPECT_DOUBLE_EQ(adam.Step(), 50.0);
}

TEST(GradCheck, FullLossOnToyBatch) {
  const GradCheckReport r = CheckFullLossGradients(9);
  EXPECT_GT(r.entries_checked, 100u);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_name << "[" << r.worst_offset << "]";
}

TEST(Corpus, ReadsHotpotDistributionFormat) {
  const auto examples = ReadCorpus(testing::TestData("hotpot_sample.json"));
  ASSERT_GE(examples.size(), 2u);
  for (const Example& e : examples) {
    EXPECT_FALSE(e.id.empty());
    EXPECT_FALSE(e.paragraphs.empty());
    EXPECT_FALSE(e.supporting_facts.empty());
    EXPECT_FALSE(SupportingSentences(e).empty()) << e.id;
  }
  EXPECT_EQ(examples[0].type, "bridge");
}

TEST(Corpus, JsonLinesRoundTrip) {
  const SyntheticCorpus c = GenerateCorpus(SmallSpec(3));
  std::string text = Dump(c.dev);
  const auto parsed = ParseCorpus(text);
  EXPECT_EQ(Dump(parsed), text);
  EXPECT_THROW(ParseCorpus("{\"id\": 1}\n"), std::runtime_error);
}

}  // namespace
}  // namespace kgnn
