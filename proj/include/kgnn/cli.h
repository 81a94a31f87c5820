#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "kgnn/entity_graph.h"
#include "kgnn/model.h"
#include "kgnn/synthetic.h"
#include "kgnn/training.h"

namespace kgnn {

// Everything a command can be configured with. INI layout:
//
//   [paths]  data_dir, corpus, entities, triples, checkpoint, output_dir
//            (empty corpus/entities/triples fall back to files in data_dir)
//   [data]   num_entities, relations_per_bridge, num_questions, dev_questions,
//            paragraphs, seed
//   [kg]     relations (comma separated, co-reference excluded)
//   [model]  d_model, word_dim, char_dim, char_filters, char_width,
//            max_word_len, steps, per_relation_phi, max_span_len, sp_weight,
//            seed
//   [graph]  inverse_edges, same_paragraph_relations, coref_edges,
//            relation_edges
//   [train]  lr, beta1, beta2, adam_eps, clip_norm, batch_size, epochs,
//            max_steps, seed, keep_best
struct RunConfig {
  std::string data_dir = "data";
  std::string corpus;
  std::string entities;
  std::string triples;
  std::string checkpoint = "checkpoint";
  std::string output_dir;
  SyntheticTaskSpec data;
  ModelConfig model;
  GraphConfig graph;
  TrainConfig train;

  // Sorted-key JSON echo of every field.
  nlohmann::json ToJson() const;
};

// Defaults sized for a CPU run of the synthetic task.
RunConfig DefaultRunConfig();

// Reads `path` (empty: defaults only), then applies "section.key=value"
// overrides in order. Unknown sections or keys, malformed values and
// invalid settings throw std::invalid_argument naming the field.
RunConfig LoadRunConfig(const std::string& path,
                        const std::vector<std::string>& overrides = {});

// Points data, model and training randomness at one seed.
void SetSeed(RunConfig& config, std::uint64_t seed);

// Entry point of the command-line tool. Returns the process exit status:
// 0 on success, 2 for usage errors, 1 for anything else.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kgnn
