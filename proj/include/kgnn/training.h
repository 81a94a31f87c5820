#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgnn/corpus.h"
#include "kgnn/gradcheck.h"
#include "kgnn/knowledge_store.h"
#include "kgnn/metrics.h"
#include "kgnn/model.h"
#include "kgnn/synthetic.h"

namespace kgnn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global L2 norm; <= 0 disables clipping
};

class Adam {
 public:
  Adam(ParameterSet& params, const AdamConfig& config);

  // Clips the accumulated gradients, applies one update, and returns the
  // gradient norm measured before clipping.
  double Step();
  std::size_t steps() const { return t_; }

 private:
  ParameterSet& params_;
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::size_t max_steps = 0;  // 0: no limit beyond epochs
  std::uint64_t seed = 1;     // training order
  bool keep_best = true;      // restore the best dev snapshot at the end
};

struct TrainLogEntry {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double train_loss = 0.0;  // mean over the epoch's examples
  std::optional<MetricsReport> dev;

  nlohmann::json ToJson() const;
};

struct TrainResult {
  std::vector<TrainLogEntry> log;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_dev_joint_f1 = -1.0;
};

// Minibatch Adam over per-example losses, summed gradients divided by the
// batch size. Deterministic in the model seed and config. A non-finite loss
// aborts with the offending question id.
TrainResult Train(KgnnModel& model, const std::vector<PreparedExample>& train,
                  const std::vector<PreparedExample>* dev, const TrainConfig& config,
                  std::ostream* log = nullptr);

// Mean total loss over examples, without recording gradients.
double MeanLoss(const KgnnModel& model, const std::vector<PreparedExample>& examples);

std::vector<Prediction> PredictAll(const KgnnModel& model,
                                   const std::vector<PreparedExample>& examples);
MetricsReport EvaluateModel(const KgnnModel& model,
                            const std::vector<PreparedExample>& examples);

std::vector<PreparedExample> PrepareAll(const std::vector<Example>& examples,
                                        const KnowledgeStore& store,
                                        const GraphConfig& graph);

// Vocabulary over questions and paragraphs of the given examples.
Vocabulary BuildVocabulary(const std::vector<PreparedExample>& examples,
                           std::size_t max_words = 0);

nlohmann::json ModelConfigToJson(const ModelConfig& config);
ModelConfig ModelConfigFromJson(const nlohmann::json& j);

// Checkpoint directory: model.params.json, vocab.json, config.json.
void SaveCheckpoint(const std::string& dir, const KgnnModel& model,
                    const GraphConfig& graph, const RelationVocabulary& relations);
struct LoadedCheckpoint {
  std::unique_ptr<KgnnModel> model;
  GraphConfig graph;
  std::vector<std::string> relations;
};
LoadedCheckpoint LoadCheckpoint(const std::string& dir);

nlohmann::json GraphConfigToJson(const GraphConfig& config);
GraphConfig GraphConfigFromJson(const nlohmann::json& j);

// Answer EM restricted to bridge questions, with their mean chance level.
struct BridgeScore {
  double answer_em = 0.0;
  double chance = 0.0;
  std::size_t count = 0;
};
BridgeScore ScoreBridge(const MetricsReport& report, const std::vector<Example>& examples,
                        const KnowledgeStore& store);

struct LayerSweepRow {
  std::size_t T = 0;
  MetricsReport dev;
  BridgeScore bridge;
  double seconds = 0.0;
};

// Trains one model per T (same seed and budget) and scores it on dev.
std::vector<LayerSweepRow> LayerSweep(const SyntheticCorpus& corpus,
                                      const std::vector<std::size_t>& Ts,
                                      const ModelConfig& model, const TrainConfig& train,
                                      std::ostream* log = nullptr);

struct ParagraphSweepRow {
  std::size_t paragraphs = 0;
  MetricsReport kgnn;
  MetricsReport ablation;  // same architecture, graph edges removed
};

struct ParagraphSweepResult {
  std::vector<ParagraphSweepRow> rows;
  // (F1 at the smallest count - F1 at the largest) / F1 at the smallest.
  double kgnn_relative_drop = 0.0, ablation_relative_drop = 0.0;
  double kgnn_absolute_drop = 0.0, ablation_absolute_drop = 0.0;

  nlohmann::json ToJson() const;
};

// Trains a graph model and an edge-free ablation once on `spec` (its own
// paragraph count), then evaluates both on dev sets regenerated from the
// same world at each count.
ParagraphSweepResult ParagraphSweep(const SyntheticTaskSpec& spec,
                                    const std::vector<std::size_t>& counts,
                                    const ModelConfig& model, const TrainConfig& train,
                                    std::ostream* log = nullptr);

// Finite-difference check of the full loss (encoder, reasoner, prediction)
// summed over a two-question synthetic batch (gold paragraphs only), with
// tiny dimensions. Entries whose gradient is below ~1e-6 sit at the float64
// rounding floor of the central difference (|a-n| ~ 2e-10 at loss ~ 14),
// and relu/max kinks within eps of the point also show up, so the result
// depends on the fixture seed.
GradCheckReport CheckFullLossGradients(std::uint64_t seed, std::size_t steps = 2,
                                       double eps = 1e-5);

nlohmann::json LayerSweepToJson(const std::vector<LayerSweepRow>& rows);
std::string LayerSweepTable(const std::vector<LayerSweepRow>& rows);
std::string ParagraphSweepTable(const ParagraphSweepResult& result);

}  // namespace kgnn
