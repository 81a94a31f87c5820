#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kgnn/model.h"

namespace kgnn {

// Lowercase, drop punctuation, drop the articles a/an/the, collapse
// whitespace.
std::string NormalizeAnswer(std::string_view text);

struct Scores {
  double em = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Multiset token overlap of already-split tokens. Two empty lists score 1.
Scores TokenOverlapScores(const std::vector<std::string>& prediction,
                          const std::vector<std::string>& gold);

// TokenOverlapScores on the normalized answers; EM compares the normalized
// strings.
Scores AnswerScores(std::string_view prediction, std::string_view gold);

using SentenceSet = std::set<std::pair<std::size_t, std::size_t>>;

// Set overlap of (paragraph, sentence) pairs. Two empty sets score 1.
Scores SupportScores(const SentenceSet& prediction, const SentenceSet& gold);

// precision = P_ans * P_sp, recall = R_ans * R_sp, F1 from those;
// EM = EM_ans * EM_sp.
Scores JointScores(const Scores& answer, const Scores& support);

struct QuestionScores {
  std::string id;
  Scores answer;
  Scores support;
  Scores joint;
};

struct GoldRecord {
  std::string id;
  std::string answer;
  SentenceSet support;
};

GoldRecord GoldOf(const PreparedExample& example);
GoldRecord GoldOf(const Example& example);

struct MetricsReport {
  double answer_em = 0.0, answer_f1 = 0.0;
  double sp_em = 0.0, sp_f1 = 0.0;
  double joint_em = 0.0, joint_f1 = 0.0;
  std::vector<QuestionScores> per_question;  // in gold order

  nlohmann::json ToJson(bool include_per_question = false) const;
};

// Every gold id needs exactly one prediction and vice versa; otherwise the
// call is rejected naming the first offending id.
MetricsReport Evaluate(const std::vector<Prediction>& predictions,
                       const std::vector<GoldRecord>& gold);

}  // namespace kgnn
