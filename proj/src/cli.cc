#include "kgnn/cli.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "kgnn/corpus.h"
#include "kgnn/knowledge_store.h"
#include "kgnn/metrics.h"

namespace kgnn {
namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

[[noreturn]] void BadValue(const std::string& field, const std::string& value,
                           const std::string& expected) {
  throw std::invalid_argument(field + ": expected " + expected + ", got '" + value + "'");
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename Int>
Int ParseInt(const std::string& field, const std::string& value) {
  Int out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    BadValue(field, value, "a non-negative integer");
  }
  return out;
}

double ParseDouble(const std::string& field, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) BadValue(field, value, "a number");
  return out;
}

bool ParseBool(const std::string& field, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  BadValue(field, value, "true or false");
}

std::vector<std::string> SplitList(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::map<std::string, Setter>& Fields() {
  static const std::map<std::string, Setter> fields = [] {
    std::map<std::string, Setter> f;
    auto size = [&f](const std::string& name, auto member) {
      f[name] = [name, member](RunConfig& c, const std::string& v) {
        member(c) = ParseInt<std::size_t>(name, v);
      };
    };
    auto u64 = [&f](const std::string& name, auto member) {
      f[name] = [name, member](RunConfig& c, const std::string& v) {
        member(c) = ParseInt<std::uint64_t>(name, v);
      };
    };
    auto real = [&f](const std::string& name, auto member) {
      f[name] = [name, member](RunConfig& c, const std::string& v) {
        member(c) = ParseDouble(name, v);
      };
    };
    auto flag = [&f](const std::string& name, auto member) {
      f[name] = [name, member](RunConfig& c, const std::string& v) {
        member(c) = ParseBool(name, v);
      };
    };
    f["paths.data_dir"] = [](RunConfig& c, const std::string& v) { c.data_dir = v; };
    f["paths.corpus"] = [](RunConfig& c, const std::string& v) { c.corpus = v; };
    f["paths.entities"] = [](RunConfig& c, const std::string& v) { c.entities = v; };
    f["paths.triples"] = [](RunConfig& c, const std::string& v) { c.triples = v; };
    f["paths.checkpoint"] = [](RunConfig& c, const std::string& v) { c.checkpoint = v; };
    f["paths.output_dir"] = [](RunConfig& c, const std::string& v) { c.output_dir = v; };

    size("data.num_entities", [](RunConfig& c) -> auto& { return c.data.num_entities; });
    size("data.relations_per_bridge",
         [](RunConfig& c) -> auto& { return c.data.relations_per_bridge; });
    size("data.num_questions", [](RunConfig& c) -> auto& { return c.data.num_questions; });
    size("data.dev_questions", [](RunConfig& c) -> auto& { return c.data.dev_questions; });
    size("data.paragraphs",
         [](RunConfig& c) -> auto& { return c.data.paragraphs_per_question; });
    u64("data.seed", [](RunConfig& c) -> auto& { return c.data.seed; });
    f["kg.relations"] = [](RunConfig& c, const std::string& v) {
      c.data.relations = SplitList(v);
    };

    size("model.d_model", [](RunConfig& c) -> auto& { return c.model.encoder.d_model; });
    size("model.word_dim", [](RunConfig& c) -> auto& { return c.model.encoder.word_dim; });
    size("model.char_dim", [](RunConfig& c) -> auto& { return c.model.encoder.char_dim; });
    size("model.char_filters",
         [](RunConfig& c) -> auto& { return c.model.encoder.char_filters; });
    size("model.char_width", [](RunConfig& c) -> auto& { return c.model.encoder.char_width; });
    size("model.max_word_len",
         [](RunConfig& c) -> auto& { return c.model.encoder.max_word_len; });
    size("model.steps", [](RunConfig& c) -> auto& { return c.model.steps; });
    flag("model.per_relation_phi", [](RunConfig& c) -> auto& { return c.model.per_relation_phi; });
    size("model.max_span_len", [](RunConfig& c) -> auto& { return c.model.max_span_len; });
    real("model.sp_weight", [](RunConfig& c) -> auto& { return c.model.sp_weight; });
    u64("model.seed", [](RunConfig& c) -> auto& { return c.model.seed; });

    flag("graph.inverse_edges", [](RunConfig& c) -> auto& { return c.graph.inverse_edges; });
    flag("graph.same_paragraph_relations",
         [](RunConfig& c) -> auto& { return c.graph.same_paragraph_relations; });
    flag("graph.coref_edges", [](RunConfig& c) -> auto& { return c.graph.coref_edges; });
    flag("graph.relation_edges", [](RunConfig& c) -> auto& { return c.graph.relation_edges; });

    real("train.lr", [](RunConfig& c) -> auto& { return c.train.adam.lr; });
    real("train.beta1", [](RunConfig& c) -> auto& { return c.train.adam.beta1; });
    real("train.beta2", [](RunConfig& c) -> auto& { return c.train.adam.beta2; });
    real("train.adam_eps", [](RunConfig& c) -> auto& { return c.train.adam.eps; });
    real("train.clip_norm", [](RunConfig& c) -> auto& { return c.train.adam.clip_norm; });
    size("train.batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; });
    size("train.epochs", [](RunConfig& c) -> auto& { return c.train.epochs; });
    size("train.max_steps", [](RunConfig& c) -> auto& { return c.train.max_steps; });
    u64("train.seed", [](RunConfig& c) -> auto& { return c.train.seed; });
    flag("train.keep_best", [](RunConfig& c) -> auto& { return c.train.keep_best; });
    return f;
  }();
  return fields;
}

void Require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw std::invalid_argument(field + ": " + what);
}

void Validate(const RunConfig& c) {
  const EncoderConfig& e = c.model.encoder;
  Require(e.d_model > 0, "model.d_model", "must be positive");
  Require(e.word_dim > 0, "model.word_dim", "must be positive");
  Require(e.char_dim > 0, "model.char_dim", "must be positive");
  Require(e.char_filters > 0, "model.char_filters", "must be positive");
  Require(e.char_width > 0, "model.char_width", "must be positive");
  Require(e.max_word_len >= e.char_width, "model.max_word_len",
          "must be at least model.char_width");
  Require(c.model.max_span_len > 0, "model.max_span_len", "must be positive");
  Require(c.model.sp_weight >= 0.0, "model.sp_weight", "must be non-negative");
  Require(c.train.adam.lr > 0.0, "train.lr", "must be positive");
  Require(c.train.adam.beta1 >= 0.0 && c.train.adam.beta1 < 1.0, "train.beta1",
          "must be in [0, 1)");
  Require(c.train.adam.beta2 >= 0.0 && c.train.adam.beta2 < 1.0, "train.beta2",
          "must be in [0, 1)");
  Require(c.train.adam.eps > 0.0, "train.adam_eps", "must be positive");
  Require(c.train.batch_size > 0, "train.batch_size", "must be positive");
  Require(c.train.epochs > 0, "train.epochs", "must be positive");
  Require(c.data.paragraphs_per_question >= 2, "data.paragraphs", "must be at least 2");
  Require(!c.data.relations.empty(), "kg.relations", "must name at least one relation");
  std::set<std::string> unique(c.data.relations.begin(), c.data.relations.end());
  Require(unique.size() == c.data.relations.size(), "kg.relations", "has duplicates");
  Require(c.data.relations_per_bridge >= 1 &&
              c.data.relations_per_bridge <= c.data.relations.size(),
          "data.relations_per_bridge", "must be between 1 and the number of relations");
}

void Apply(RunConfig& config, const std::string& field, const std::string& value) {
  const auto& fields = Fields();
  auto it = fields.find(field);
  if (it == fields.end()) throw std::invalid_argument(field + ": unknown setting");
  it->second(config, Trim(value));
}

std::string Join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

// --- commands -------------------------------------------------------------

// Flag, then config, then the conventional file inside data_dir.
std::string InData(const RunConfig& c, const std::string& flag, const std::string& configured,
                   const char* file) {
  if (!flag.empty()) return flag;
  if (!configured.empty()) return configured;
  return c.data_dir + "/" + file;
}

KnowledgeStore LoadStore(const RunConfig& c, const std::string& entities,
                         const std::string& triples,
                         const std::vector<std::string>& relations) {
  return KnowledgeStore::Load(InData(c, entities, c.entities, "entities.jsonl"),
                              InData(c, triples, c.triples, "triples.tsv"),
                              RelationVocabulary(relations));
}

// Report files go to output_dir when one is configured and the flag is a bare name.
std::string InOutput(const RunConfig& c, const std::string& flag) {
  if (flag.empty() || c.output_dir.empty()) return flag;
  if (std::filesystem::path(flag).has_parent_path()) return flag;
  std::filesystem::create_directories(c.output_dir);
  return c.output_dir + "/" + flag;
}

void WriteJsonFile(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void Emit(std::ostream& out, const nlohmann::json& j, const std::string& path) {
  if (!path.empty()) WriteJsonFile(path, j);
  out << j.dump(2) << "\n";
}

std::vector<std::size_t> ParseCounts(const std::string& field, const std::string& list) {
  std::vector<std::size_t> out;
  for (const std::string& item : SplitList(list)) out.push_back(ParseInt<std::size_t>(field, item));
  if (out.empty()) throw std::invalid_argument(field + ": empty list");
  return out;
}

}  // namespace

nlohmann::json RunConfig::ToJson() const {
  return {{"paths",
           {{"data_dir", data_dir},
            {"corpus", corpus},
            {"entities", entities},
            {"triples", triples},
            {"checkpoint", checkpoint},
            {"output_dir", output_dir}}},
          {"data",
           {{"num_entities", data.num_entities},
            {"relations_per_bridge", data.relations_per_bridge},
            {"num_questions", data.num_questions},
            {"dev_questions", data.dev_questions},
            {"paragraphs", data.paragraphs_per_question},
            {"seed", data.seed}}},
          {"kg", {{"relations", Join(data.relations)}}},
          {"model", ModelConfigToJson(model)},
          {"graph", GraphConfigToJson(graph)},
          {"train",
           {{"lr", train.adam.lr},
            {"beta1", train.adam.beta1},
            {"beta2", train.adam.beta2},
            {"adam_eps", train.adam.eps},
            {"clip_norm", train.adam.clip_norm},
            {"batch_size", train.batch_size},
            {"epochs", train.epochs},
            {"max_steps", train.max_steps},
            {"seed", train.seed},
            {"keep_best", train.keep_best}}}};
}

RunConfig DefaultRunConfig() {
  RunConfig c;
  c.model.encoder.d_model = 32;
  c.model.encoder.word_dim = 16;
  c.model.encoder.char_filters = 16;
  c.train.adam.lr = 3e-3;
  c.train.epochs = 12;
  return c;
}

void SetSeed(RunConfig& config, std::uint64_t seed) {
  config.data.seed = seed;
  config.model.seed = seed;
  config.train.seed = seed;
}

RunConfig LoadRunConfig(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config = DefaultRunConfig();
  if (!path.empty()) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw std::invalid_argument("config " + path + ": " + e.message() + " (line " +
                                  std::to_string(e.line()) + ")");
    }
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty()) {
        throw std::invalid_argument(section + ": setting outside a section");
      }
      for (const auto& [key, value] : body) {
        Apply(config, section + "." + key, value.data());
      }
    }
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set " + o + ": expected section.key=value");
    }
    Apply(config, Trim(o.substr(0, eq)), o.substr(eq + 1));
  }
  Validate(config);
  return config;
}

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-guided graph reasoning over multi-paragraph questions", "kgnn"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override, e.g. --set model.steps=1")->take_all();
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "seed for data, initialization and batching");

  std::string out_path, corpus_path, train_path, dev_path, entities_path, triples_path,
      checkpoint_path, predictions_path, question_id, list;
  bool per_question = false;
  std::size_t steps = 2;
  double eps = 1e-5;

  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic corpus and knowledge files");
  gen->add_option("--out", out_path, "output directory (default: paths.data_dir)");

  auto* graph = app.add_subcommand("build-graph", "dump the entity graph of one question as JSON");
  graph->add_option("--corpus", corpus_path, "corpus file (default: <data_dir>/dev.jsonl)");
  graph->add_option("--entities", entities_path, "entities JSONL");
  graph->add_option("--triples", triples_path, "triples TSV");
  graph->add_option("--id", question_id, "question id")->required();

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--train", train_path, "training corpus (default: <data_dir>/train.jsonl)");
  train->add_option("--dev", dev_path, "dev corpus (default: <data_dir>/dev.jsonl)");
  train->add_option("--entities", entities_path, "entities JSONL");
  train->add_option("--triples", triples_path, "triples TSV");
  train->add_option("--checkpoint", checkpoint_path, "checkpoint directory");

  auto* eval = app.add_subcommand("eval", "score a checkpoint or a predictions file");
  eval->add_option("--corpus", corpus_path, "gold corpus (default: <data_dir>/dev.jsonl)");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint directory");
  eval->add_option("--predictions", predictions_path, "predictions JSONL instead of a model");
  eval->add_option("--entities", entities_path, "entities JSONL");
  eval->add_option("--triples", triples_path, "triples TSV");
  eval->add_flag("--per-question", per_question, "include per-question scores");
  eval->add_option("--out", out_path, "also write the report here");

  auto* predict = app.add_subcommand("predict", "write predictions as JSON lines");
  predict->add_option("--corpus", corpus_path, "corpus (default: <data_dir>/dev.jsonl)");
  predict->add_option("--checkpoint", checkpoint_path, "checkpoint directory");
  predict->add_option("--entities", entities_path, "entities JSONL");
  predict->add_option("--triples", triples_path, "triples TSV");
  predict->add_option("--out", out_path, "output file (default: stdout)");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full loss");
  gradcheck->add_option("--steps", steps, "reasoning steps")->capture_default_str();
  gradcheck->add_option("--eps", eps, "central difference step")->capture_default_str();

  auto* layers = app.add_subcommand("sweep-layers", "train one model per step count");
  list = "0,1,2";
  layers->add_option("--steps", list, "comma-separated step counts")->capture_default_str();
  layers->add_option("--out", out_path, "also write the JSON here");

  auto* paragraphs = app.add_subcommand("sweep-paragraphs",
                                        "graph model vs edge-free ablation as distractors grow");
  std::string counts = "4,10,20,30";
  paragraphs->add_option("--counts", counts, "comma-separated paragraph counts")
      ->capture_default_str();
  paragraphs->add_option("--out", out_path, "also write the JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    RunConfig config = LoadRunConfig(config_path, overrides);
    if (seed) SetSeed(config, *seed);
    if (checkpoint_path.empty()) checkpoint_path = config.checkpoint;
    out_path = InOutput(config, out_path);

    if (*gen) {
      const std::string dir = out_path.empty() ? config.data_dir : out_path;

      const SyntheticCorpus corpus = GenerateCorpus(config.data);
      WriteSyntheticCorpus(dir, corpus);
      out << nlohmann::json{{"dir", dir},
                            {"train", corpus.train.size()},
                            {"dev", corpus.dev.size()},
                            {"entities", corpus.entities.size()},
                            {"triples", corpus.triples.size()}}
                 .dump(2)
          << "\n";
      return 0;
    }

    if (*graph) {
      const KnowledgeStore store =
          LoadStore(config, entities_path, triples_path, config.data.relations);
      const auto examples = ReadCorpus(InData(config, corpus_path, config.corpus, "dev.jsonl"));
      for (const Example& e : examples) {
        if (e.id != question_id) continue;
        const PreparedExample prepared = Prepare(e, store, config.graph);
        nlohmann::json j = prepared.graph.ToJson(
            store.relations(), EdgeKinds(store.relations(), config.graph.inverse_edges));
        j["id"] = e.id;
        j["titles"] = prepared.titles;
        out << j.dump(2) << "\n";
        return 0;
      }
      throw std::invalid_argument("--id: no question '" + question_id + "' in the corpus");
    }

    if (*train) {
      const KnowledgeStore store =
          LoadStore(config, entities_path, triples_path, config.data.relations);
      const auto train_set =
          PrepareAll(ReadCorpus(InData(config, train_path, "", "train.jsonl")), store, config.graph);
      const std::string dev_file = InData(config, dev_path, config.corpus, "dev.jsonl");
      std::vector<PreparedExample> dev_set;
      if (std::filesystem::exists(dev_file)) {
        dev_set = PrepareAll(ReadCorpus(dev_file), store, config.graph);
      }
      KgnnModel model(config.model, BuildVocabulary(train_set),
                      EdgeKinds(store.relations(), config.graph.inverse_edges).count());
      std::filesystem::create_directories(checkpoint_path);
      std::ofstream log(checkpoint_path + "/train_log.jsonl");
      if (!log) throw std::runtime_error("cannot write " + checkpoint_path + "/train_log.jsonl");
      const TrainResult result =
          Train(model, train_set, dev_set.empty() ? nullptr : &dev_set, config.train, &log);
      SaveCheckpoint(checkpoint_path, model, config.graph, store.relations());
      WriteJsonFile(checkpoint_path + "/run_config.json", config.ToJson());
      nlohmann::json summary = {{"checkpoint", checkpoint_path},
                                {"steps", result.steps},
                                {"best_epoch", result.best_epoch}};
      if (!dev_set.empty()) summary["dev"] = EvaluateModel(model, dev_set).ToJson();
      out << summary.dump(2) << "\n";
      return 0;
    }

    if (*eval || *predict) {
      const auto examples = ReadCorpus(InData(config, corpus_path, config.corpus, "dev.jsonl"));
      std::vector<Prediction> predictions;
      nlohmann::json echoed = config.ToJson();
      if (*eval && !predictions_path.empty()) {
        std::ifstream in(predictions_path);
        if (!in) throw std::runtime_error("cannot read " + predictions_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
          ++line_no;
          if (Trim(line).empty()) continue;
          try {
            predictions.push_back(Prediction::FromJson(nlohmann::json::parse(line)));
          } catch (const std::exception& e) {
            throw std::invalid_argument(predictions_path + ":" + std::to_string(line_no) +
                                        ": " + e.what());
          }
        }
      } else {
        const LoadedCheckpoint ckpt = LoadCheckpoint(checkpoint_path);
        const std::string saved = checkpoint_path + "/run_config.json";
        if (std::filesystem::exists(saved)) {
          std::ifstream in(saved);
          echoed = nlohmann::json::parse(in);
        }
        const KnowledgeStore store =
            LoadStore(config, entities_path, triples_path, ckpt.relations);
        predictions = PredictAll(*ckpt.model, PrepareAll(examples, store, ckpt.graph));
      }
      if (*predict) {
        std::ofstream file;
        if (!out_path.empty()) {
          file.open(out_path);
          if (!file) throw std::runtime_error("cannot write " + out_path);
        }
        std::ostream& sink = out_path.empty() ? out : file;
        for (const Prediction& p : predictions) sink << p.ToJson().dump() << "\n";
        return 0;
      }
      std::vector<GoldRecord> gold;
      for (const Example& e : examples) gold.push_back(GoldOf(e));
      nlohmann::json report = Evaluate(predictions, gold).ToJson(per_question);
      report["config"] = echoed;
      Emit(out, report, out_path);
      return 0;
    }

    if (*gradcheck) {
      const GradCheckReport r = CheckFullLossGradients(seed.value_or(9), steps, eps);
      const bool pass = r.max_relative_error < 1e-4;
      out << nlohmann::json{{"max_relative_error", r.max_relative_error},
                            {"entries", r.entries_checked},
                            {"worst",
                             {{"param", r.worst_name},
                              {"offset", r.worst_offset},
                              {"analytic", r.worst_analytic},
                              {"numeric", r.worst_numeric}}},
                            {"pass", pass}}
                 .dump(2)
          << "\n";
      return pass ? 0 : 1;
    }

    if (*layers) {
      const auto Ts = ParseCounts("--steps", list);
      const SyntheticCorpus corpus = GenerateCorpus(config.data);
      const auto rows = LayerSweep(corpus, Ts, config.model, config.train, &err);
      out << LayerSweepTable(rows);
      Emit(out, LayerSweepToJson(rows), out_path);
      return 0;
    }

    if (*paragraphs) {
      const auto result = ParagraphSweep(config.data, ParseCounts("--counts", counts),
                                         config.model, config.train, &err);
      out << ParagraphSweepTable(result);
      Emit(out, result.ToJson(), out_path);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace kgnn
