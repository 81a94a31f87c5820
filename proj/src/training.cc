#include "kgnn/training.h"

#include <chrono>
#include <map>
#include <set>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include "kgnn/ops.h"

namespace kgnn {
namespace {

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

nlohmann::json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return nlohmann::json::parse(in);
}

void WriteJson(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

Adam::Adam(ParameterSet& params, const AdamConfig& config)
    : params_(params), config_(config) {
  if (!(config.lr > 0.0) || !(config.eps > 0.0) || config.beta1 < 0.0 ||
      config.beta1 >= 1.0 || config.beta2 < 0.0 || config.beta2 >= 1.0) {
    throw std::invalid_argument("invalid Adam hyperparameters");
  }
  for (const Tensor& t : params_.Tensors()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

double Adam::Step() {
  std::vector<Tensor> tensors = params_.Tensors();
  double sq = 0.0;
  for (const Tensor& t : tensors) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double scale =
      config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    Tensor& t = tensors[k];
    if (!t.has_grad()) continue;
    auto value = t.mutable_values();
    auto grad = t.grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] * scale;
      m_[k][i] = config_.beta1 * m_[k][i] + (1.0 - config_.beta1) * g;
      v_[k][i] = config_.beta2 * v_[k][i] + (1.0 - config_.beta2) * g * g;
      value[i] -= config_.lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + config_.eps);
    }
  }
  return norm;
}

nlohmann::json TrainLogEntry::ToJson() const {
  nlohmann::json j = {{"epoch", epoch}, {"steps", steps}, {"train_loss", train_loss}};
  if (dev) j["dev"] = dev->ToJson();
  return j;
}

TrainResult Train(KgnnModel& model, const std::vector<PreparedExample>& train,
                  const std::vector<PreparedExample>* dev, const TrainConfig& config,
                  std::ostream* log) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (config.batch_size == 0 || config.epochs == 0) {
    throw std::invalid_argument("batch_size and epochs must be positive");
  }
  Adam adam(model.params(), config.adam);
  Rng rng(config.seed);
  TrainResult result;
  std::map<std::string, std::vector<double>> best;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    }
    double loss_sum = 0.0;
    std::size_t seen = 0;
    bool budget_hit = false;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      model.params().ZeroGrad();
      for (std::size_t k = b; k < end; ++k) {
        const PreparedExample& ex = train[order[k]];
        Tape tape;
        TapeScope scope(tape);
        LossParts loss = model.Loss(ex);
        const double value = loss.total.item();
        if (!std::isfinite(value)) {
          throw std::runtime_error("non-finite loss at step " + std::to_string(adam.steps()) +
                                   " on question " + ex.id + " (span " +
                                   std::to_string(loss.span) + ", sp " +
                                   std::to_string(loss.sp) + ")");
        }
        Tensor scaled = ops::Scale(loss.total, 1.0 / static_cast<double>(end - b));
        Backward(tape, scaled);
        loss_sum += value;
        ++seen;
      }
      adam.Step();
      if (config.max_steps > 0 && adam.steps() >= config.max_steps) {
        budget_hit = true;
        break;
      }
    }
    TrainLogEntry entry{epoch, adam.steps(), loss_sum / static_cast<double>(seen), std::nullopt};
    if (dev && !dev->empty()) {
      entry.dev = EvaluateModel(model, *dev);
      if (entry.dev->joint_f1 > result.best_dev_joint_f1) {
        result.best_dev_joint_f1 = entry.dev->joint_f1;
        result.best_epoch = epoch;
        if (config.keep_best) best = model.params().Snapshot();
      }
    }
    if (log) *log << entry.ToJson().dump() << std::endl;
    result.log.push_back(std::move(entry));
    if (budget_hit) break;
  }
  result.steps = adam.steps();
  if (config.keep_best && !best.empty()) model.params().Restore(best);
  return result;
}

double MeanLoss(const KgnnModel& model, const std::vector<PreparedExample>& examples) {
  double sum = 0.0;
  for (const PreparedExample& ex : examples) sum += model.Loss(ex).total.item();
  return examples.empty() ? 0.0 : sum / static_cast<double>(examples.size());
}

std::vector<Prediction> PredictAll(const KgnnModel& model,
                                   const std::vector<PreparedExample>& examples) {
  std::vector<Prediction> out;
  out.reserve(examples.size());
  for (const PreparedExample& ex : examples) out.push_back(model.Predict(ex));
  return out;
}

MetricsReport EvaluateModel(const KgnnModel& model,
                            const std::vector<PreparedExample>& examples) {
  std::vector<GoldRecord> gold;
  for (const PreparedExample& ex : examples) gold.push_back(GoldOf(ex));
  return Evaluate(PredictAll(model, examples), gold);
}

std::vector<PreparedExample> PrepareAll(const std::vector<Example>& examples,
                                        const KnowledgeStore& store,
                                        const GraphConfig& graph) {
  std::vector<PreparedExample> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.push_back(Prepare(e, store, graph));
  return out;
}

Vocabulary BuildVocabulary(const std::vector<PreparedExample>& examples,
                           std::size_t max_words) {
  std::vector<const TokenizedText*> texts;
  for (const PreparedExample& ex : examples) {
    texts.push_back(&ex.question);
    for (const TokenizedText& p : ex.paragraphs) texts.push_back(&p);
  }
  return Vocabulary::Build(texts, max_words);
}

nlohmann::json ModelConfigToJson(const ModelConfig& c) {
  return {{"d_model", c.encoder.d_model},
          {"word_dim", c.encoder.word_dim},
          {"char_dim", c.encoder.char_dim},
          {"char_filters", c.encoder.char_filters},
          {"char_width", c.encoder.char_width},
          {"max_word_len", c.encoder.max_word_len},
          {"steps", c.steps},
          {"per_relation_phi", c.per_relation_phi},
          {"max_span_len", c.max_span_len},
          {"sp_weight", c.sp_weight},
          {"seed", c.seed}};
}

ModelConfig ModelConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder.d_model = j.at("d_model");
  c.encoder.word_dim = j.at("word_dim");
  c.encoder.char_dim = j.at("char_dim");
  c.encoder.char_filters = j.at("char_filters");
  c.encoder.char_width = j.at("char_width");
  c.encoder.max_word_len = j.at("max_word_len");
  c.steps = j.at("steps");
  c.per_relation_phi = j.at("per_relation_phi");
  c.max_span_len = j.at("max_span_len");
  c.sp_weight = j.at("sp_weight");
  c.seed = j.at("seed");
  return c;
}

nlohmann::json GraphConfigToJson(const GraphConfig& g) {
  return {{"inverse_edges", g.inverse_edges},
          {"same_paragraph_relations", g.same_paragraph_relations},
          {"coref_edges", g.coref_edges},
          {"relation_edges", g.relation_edges}};
}

GraphConfig GraphConfigFromJson(const nlohmann::json& j) {
  GraphConfig g;
  g.inverse_edges = j.at("inverse_edges");
  g.same_paragraph_relations = j.at("same_paragraph_relations");
  g.coref_edges = j.at("coref_edges");
  g.relation_edges = j.at("relation_edges");
  return g;
}

void SaveCheckpoint(const std::string& dir, const KgnnModel& model,
                    const GraphConfig& graph, const RelationVocabulary& relations) {
  std::filesystem::create_directories(dir);
  model.params().Save(dir + "/model.params.json");
  model.vocab().Save(dir + "/vocab.json");
  const std::vector<std::string> names = relations.RelationNames();
  WriteJson(dir + "/config.json", {{"model", ModelConfigToJson(model.config())},
                                   {"graph", GraphConfigToJson(graph)},
                                   {"relations", names}});
}

LoadedCheckpoint LoadCheckpoint(const std::string& dir) {
  const nlohmann::json config = ReadJson(dir + "/config.json");
  LoadedCheckpoint out;
  out.graph = GraphConfigFromJson(config.at("graph"));
  out.relations = config.at("relations").get<std::vector<std::string>>();
  const RelationVocabulary relations(out.relations);
  const EdgeKinds kinds(relations, out.graph.inverse_edges);
  out.model = std::make_unique<KgnnModel>(ModelConfigFromJson(config.at("model")),
                                          Vocabulary::Load(dir + "/vocab.json"), kinds.count());
  out.model->params().Load(dir + "/model.params.json");
  return out;
}

BridgeScore ScoreBridge(const MetricsReport& report, const std::vector<Example>& examples,
                        const KnowledgeStore& store) {
  std::map<std::string, const Example*> by_id;
  for (const Example& e : examples) by_id[e.id] = &e;
  BridgeScore s;
  for (const QuestionScores& q : report.per_question) {
    auto it = by_id.find(q.id);
    if (it == by_id.end() || it->second->type != "bridge") continue;
    s.answer_em += q.answer.em;
    s.chance += ChanceLevel(*it->second, store);
    ++s.count;
  }
  if (s.count > 0) {
    s.answer_em /= static_cast<double>(s.count);
    s.chance /= static_cast<double>(s.count);
  }
  return s;
}

std::vector<LayerSweepRow> LayerSweep(const SyntheticCorpus& corpus,
                                      const std::vector<std::size_t>& Ts,
                                      const ModelConfig& model_config,
                                      const TrainConfig& train_config, std::ostream* log) {
  const RelationVocabulary relations = [&] {
    std::set<std::string> seen;
    std::vector<std::string> names;
    for (const RelationTriple& t : corpus.triples) {
      if (seen.insert(t.relation).second) names.push_back(t.relation);
    }
    // Keep the canonical order when the corpus uses the default relations.
    const auto def = RelationVocabulary::Default();
    bool subset = true;
    for (const auto& n : names) subset = subset && def.Find(n).has_value();
    return subset ? def : RelationVocabulary(names);
  }();
  const KnowledgeStore store(corpus.entities, corpus.triples, relations);
  const GraphConfig graph;
  const auto train = PrepareAll(corpus.train, store, graph);
  const auto dev = PrepareAll(corpus.dev, store, graph);
  const Vocabulary vocab = BuildVocabulary(train);
  const EdgeKinds kinds(relations, graph.inverse_edges);

  std::vector<LayerSweepRow> rows;
  for (std::size_t T : Ts) {
    const auto start = std::chrono::steady_clock::now();
    ModelConfig mc = model_config;
    mc.steps = T;
    KgnnModel model(mc, vocab, kinds.count());
    Train(model, train, &dev, train_config, log);
    LayerSweepRow row;
    row.T = T;
    row.dev = EvaluateModel(model, dev);
    row.bridge = ScoreBridge(row.dev, corpus.dev, store);
    row.seconds = Seconds(start);
    if (log) {
      *log << "T=" << T << " answer_em=" << row.dev.answer_em
           << " joint_f1=" << row.dev.joint_f1 << " (" << row.seconds << " s)" << std::endl;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ParagraphSweepResult ParagraphSweep(const SyntheticTaskSpec& spec,
                                    const std::vector<std::size_t>& counts,
                                    const ModelConfig& model_config,
                                    const TrainConfig& train_config, std::ostream* log) {
  if (counts.empty()) throw std::invalid_argument("paragraph sweep needs counts");
  const SyntheticCorpus base = GenerateCorpus(spec);
  const RelationVocabulary relations(spec.relations);
  const KnowledgeStore store(base.entities, base.triples, relations);
  GraphConfig full;
  GraphConfig none;
  none.coref_edges = false;
  none.relation_edges = false;
  const EdgeKinds kinds(relations, full.inverse_edges);

  const auto train_full = PrepareAll(base.train, store, full);
  const auto train_none = PrepareAll(base.train, store, none);
  const Vocabulary vocab = BuildVocabulary(train_full);
  const auto dev_full = PrepareAll(base.dev, store, full);
  const auto dev_none = PrepareAll(base.dev, store, none);

  KgnnModel kgnn(model_config, vocab, kinds.count());
  Train(kgnn, train_full, &dev_full, train_config, log);
  KgnnModel ablation(model_config, vocab, kinds.count());
  Train(ablation, train_none, &dev_none, train_config, log);

  ParagraphSweepResult result;
  for (std::size_t count : counts) {
    SyntheticTaskSpec s = spec;
    s.paragraphs_per_question = count;
    s.num_questions = 0;
    const SyntheticCorpus c = GenerateCorpus(s);
    ParagraphSweepRow row;
    row.paragraphs = count;
    row.kgnn = EvaluateModel(kgnn, PrepareAll(c.dev, store, full));
    row.ablation = EvaluateModel(ablation, PrepareAll(c.dev, store, none));
    if (log) {
      *log << "paragraphs=" << count << " kgnn_joint_f1=" << row.kgnn.joint_f1
           << " ablation_joint_f1=" << row.ablation.joint_f1 << std::endl;
    }
    result.rows.push_back(std::move(row));
  }
  const auto& first = result.rows.front();
  const auto& last = result.rows.back();
  auto relative = [](double a, double b) { return a > 0.0 ? (a - b) / a : 0.0; };
  result.kgnn_absolute_drop = first.kgnn.joint_f1 - last.kgnn.joint_f1;
  result.ablation_absolute_drop = first.ablation.joint_f1 - last.ablation.joint_f1;
  result.kgnn_relative_drop = relative(first.kgnn.joint_f1, last.kgnn.joint_f1);
  result.ablation_relative_drop = relative(first.ablation.joint_f1, last.ablation.joint_f1);
  return result;
}

GradCheckReport CheckFullLossGradients(std::uint64_t seed, std::size_t steps, double eps) {
  SyntheticTaskSpec spec;
  spec.num_entities = 40;
  spec.relations_per_bridge = 2;
  spec.num_questions = 2;
  spec.dev_questions = 0;
  spec.paragraphs_per_question = 2;
  spec.seed = seed;
  const SyntheticCorpus corpus = GenerateCorpus(spec);
  const RelationVocabulary relations(spec.relations);
  const KnowledgeStore store(corpus.entities, corpus.triples, relations);
  const GraphConfig graph;
  const auto batch = PrepareAll(corpus.train, store, graph);

  ModelConfig mc;
  mc.encoder = {/*d_model=*/4, /*word_dim=*/3, /*char_dim=*/2, /*char_filters=*/3,
                /*char_width=*/2, /*max_word_len=*/4};
  mc.steps = steps;
  mc.seed = seed;
  KgnnModel model(mc, BuildVocabulary(batch), EdgeKinds(relations, graph.inverse_edges).count());
  // Zero biases and the zero coref embedding put relu inputs exactly on the
  // kink, where one-sided differences disagree with any subgradient. Jitter
  // every entry to check at a generic point instead.
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (Tensor t : model.params().Tensors()) {
    for (double& v : t.mutable_values()) v += jitter(rng);
  }
  auto loss = [&] {
    Tensor total;
    for (const PreparedExample& ex : batch) {
      Tensor l = model.Loss(ex).total;
      total = total.defined() ? ops::Add(total, l) : l;
    }
    return total;
  };
  GradCheckReport report = FiniteDiffCheck(loss, model.params().Tensors(), eps);
  std::size_t k = 0;
  for (const auto& [name, tensor] : model.params().all()) {
    if (k++ == report.worst_param) report.worst_name = name;
  }
  return report;
}

nlohmann::json LayerSweepToJson(const std::vector<LayerSweepRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const LayerSweepRow& r : rows) {
    nlohmann::json j = r.dev.ToJson();
    j["T"] = r.T;
    j["bridge_answer_em"] = r.bridge.answer_em;
    j["bridge_chance"] = r.bridge.chance;
    j["bridge_count"] = r.bridge.count;
    j["seconds"] = r.seconds;
    out.push_back(j);
  }
  return out;
}

nlohmann::json ParagraphSweepResult::ToJson() const {
  nlohmann::json table = nlohmann::json::array();
  for (const ParagraphSweepRow& r : rows) {
    table.push_back({{"paragraphs", r.paragraphs},
                     {"kgnn", r.kgnn.ToJson()},
                     {"ablation", r.ablation.ToJson()}});
  }
  return {{"rows", table},
          {"kgnn_relative_drop", kgnn_relative_drop},
          {"ablation_relative_drop", ablation_relative_drop},
          {"kgnn_absolute_drop", kgnn_absolute_drop},
          {"ablation_absolute_drop", ablation_absolute_drop}};
}

std::string LayerSweepTable(const std::vector<LayerSweepRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::setw(3) << "T" << std::setw(10) << "ans EM" << std::setw(10) << "ans F1"
      << std::setw(10) << "sp F1" << std::setw(10) << "joint EM" << std::setw(10)
      << "joint F1" << std::setw(12) << "bridge EM" << std::setw(10) << "chance" << "\n";
  for (const LayerSweepRow& r : rows) {
    out << std::setw(3) << r.T << std::setw(10) << 100 * r.dev.answer_em << std::setw(10)
        << 100 * r.dev.answer_f1 << std::setw(10) << 100 * r.dev.sp_f1 << std::setw(10)
        << 100 * r.dev.joint_em << std::setw(10) << 100 * r.dev.joint_f1 << std::setw(12)
        << 100 * r.bridge.answer_em << std::setw(10) << 100 * r.bridge.chance << "\n";
  }
  return out.str();
}

std::string ParagraphSweepTable(const ParagraphSweepResult& result) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::setw(11) << "paragraphs" << std::setw(14) << "KGNN jF1" << std::setw(14)
      << "no-graph jF1" << "\n";
  for (const ParagraphSweepRow& r : result.rows) {
    out << std::setw(11) << r.paragraphs << std::setw(14) << 100 * r.kgnn.joint_f1
        << std::setw(14) << 100 * r.ablation.joint_f1 << "\n";
  }
  out << "relative drop: KGNN " << 100 * result.kgnn_relative_drop << "%, no-graph "
      << 100 * result.ablation_relative_drop << "%\n";
  out << "absolute drop: KGNN " << 100 * result.kgnn_absolute_drop << ", no-graph "
      << 100 * result.ablation_absolute_drop << "\n";
  return out.str();
}

}  // namespace kgnn
