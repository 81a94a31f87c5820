#include "kgnn/metrics.h"

#include <cctype>
#include <map>
#include <sstream>
#include <stdexcept>

namespace kgnn {
namespace {

std::vector<std::string> Words(std::string_view normalized) {
  std::vector<std::string> words;
  std::istringstream in{std::string(normalized)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

double Harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

std::string NormalizeAnswer(std::string_view text) {
  std::string lowered;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    lowered.push_back(static_cast<char>(std::tolower(u)));
  }
  std::string out;
  for (const std::string& w : Words(lowered)) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

Scores TokenOverlapScores(const std::vector<std::string>& pw,
                          const std::vector<std::string>& gw) {
  Scores s;
  if (pw.empty() && gw.empty()) return {1.0, 1.0, 1.0, 1.0};
  s.em = pw == gw ? 1.0 : 0.0;
  if (pw.empty() || gw.empty()) return s;
  std::map<std::string, int> counts;
  for (const auto& w : gw) ++counts[w];
  std::size_t common = 0;
  for (const auto& w : pw) {
    auto it = counts.find(w);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return s;
  s.precision = static_cast<double>(common) / static_cast<double>(pw.size());
  s.recall = static_cast<double>(common) / static_cast<double>(gw.size());
  s.f1 = Harmonic(s.precision, s.recall);
  return s;
}

Scores AnswerScores(std::string_view prediction, std::string_view gold) {
  const std::string p = NormalizeAnswer(prediction);
  const std::string g = NormalizeAnswer(gold);
  Scores s = TokenOverlapScores(Words(p), Words(g));
  s.em = p == g ? 1.0 : 0.0;
  return s;
}

Scores SupportScores(const SentenceSet& prediction, const SentenceSet& gold) {
  if (prediction.empty() && gold.empty()) return {1.0, 1.0, 1.0, 1.0};
  std::size_t tp = 0;
  for (const auto& x : prediction) tp += gold.count(x);
  const std::size_t fp = prediction.size() - tp;
  const std::size_t fn = gold.size() - tp;
  Scores s;
  s.em = fp + fn == 0 ? 1.0 : 0.0;
  s.precision = prediction.empty() ? 0.0 : static_cast<double>(tp) / prediction.size();
  s.recall = gold.empty() ? 0.0 : static_cast<double>(tp) / gold.size();
  s.f1 = Harmonic(s.precision, s.recall);
  return s;
}

Scores JointScores(const Scores& answer, const Scores& support) {
  Scores j;
  j.precision = answer.precision * support.precision;
  j.recall = answer.recall * support.recall;
  j.f1 = Harmonic(j.precision, j.recall);
  j.em = answer.em * support.em;
  return j;
}

GoldRecord GoldOf(const PreparedExample& example) {
  return {example.id, example.answer, SentenceSet(example.gold_sp.begin(), example.gold_sp.end())};
}

GoldRecord GoldOf(const Example& example) {
  const auto sp = SupportingSentences(example);
  return {example.id, example.answer, SentenceSet(sp.begin(), sp.end())};
}

nlohmann::json MetricsReport::ToJson(bool include_per_question) const {
  nlohmann::json j = {{"answer_em", answer_em}, {"answer_f1", answer_f1},
                      {"sp_em", sp_em},         {"sp_f1", sp_f1},
                      {"joint_em", joint_em},   {"joint_f1", joint_f1},
                      {"count", per_question.size()}};
  if (include_per_question) {
    nlohmann::json rows = nlohmann::json::array();
    for (const QuestionScores& q : per_question) {
      rows.push_back({{"id", q.id},
                      {"answer_em", q.answer.em},
                      {"answer_f1", q.answer.f1},
                      {"sp_em", q.support.em},
                      {"sp_f1", q.support.f1},
                      {"joint_em", q.joint.em},
                      {"joint_f1", q.joint.f1}});
    }
    j["per_question"] = rows;
  }
  return j;
}

MetricsReport Evaluate(const std::vector<Prediction>& predictions,
                       const std::vector<GoldRecord>& gold) {
  std::map<std::string, const Prediction*> by_id;
  for (const Prediction& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) {
      throw std::invalid_argument("duplicate prediction for id '" + p.id + "'");
    }
  }
  std::set<std::string> gold_ids;
  for (const GoldRecord& g : gold) {
    if (!gold_ids.insert(g.id).second) {
      throw std::invalid_argument("duplicate gold id '" + g.id + "'");
    }
    if (!by_id.count(g.id)) throw std::invalid_argument("no prediction for id '" + g.id + "'");
  }
  for (const auto& [id, p] : by_id) {
    if (!gold_ids.count(id)) throw std::invalid_argument("prediction for unknown id '" + id + "'");
  }

  MetricsReport report;
  for (const GoldRecord& g : gold) {
    const Prediction& p = *by_id.at(g.id);
    QuestionScores q;
    q.id = g.id;
    q.answer = AnswerScores(p.answer.text, g.answer);
    q.support = SupportScores(SentenceSet(p.sp.begin(), p.sp.end()), g.support);
    q.joint = JointScores(q.answer, q.support);
    report.answer_em += q.answer.em;
    report.answer_f1 += q.answer.f1;
    report.sp_em += q.support.em;
    report.sp_f1 += q.support.f1;
    report.joint_em += q.joint.em;
    report.joint_f1 += q.joint.f1;
    report.per_question.push_back(std::move(q));
  }
  if (!gold.empty()) {
    const double n = static_cast<double>(gold.size());
    for (double* v : {&report.answer_em, &report.answer_f1, &report.sp_em,
                      &report.sp_f1, &report.joint_em, &report.joint_f1}) {
      *v /= n;
    }
  }
  return report;
}

}  // namespace kgnn
