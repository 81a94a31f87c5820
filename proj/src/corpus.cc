#include "kgnn/corpus.h"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kgnn {

Example ExampleFromJson(const nlohmann::json& j) {
  Example e;
  if (j.contains("_id")) {
    e.id = j.at("_id").get<std::string>();
  } else {
    e.id = j.at("id").get<std::string>();
  }
  e.question = j.at("question").get<std::string>();
  if (j.contains("answer")) e.answer = j.at("answer").get<std::string>();
  if (j.contains("type")) e.type = j.at("type").get<std::string>();
  if (j.contains("paragraphs")) {
    for (const auto& p : j.at("paragraphs")) {
      e.paragraphs.push_back({p.at("title").get<std::string>(),
                              p.at("sentences").get<std::vector<std::string>>()});
    }
  } else if (j.contains("context")) {
    for (const auto& p : j.at("context")) {
      if (!p.is_array() || p.size() != 2) {
        throw std::invalid_argument("context entry must be [title, sentences]");
      }
      e.paragraphs.push_back({p[0].get<std::string>(),
                              p[1].get<std::vector<std::string>>()});
    }
  } else {
    throw std::invalid_argument("example '" + e.id + "' has no paragraphs");
  }
  if (j.contains("supporting_facts")) {
    for (const auto& f : j.at("supporting_facts")) {
      e.supporting_facts.emplace_back(f.at(0).get<std::string>(),
                                      f.at(1).get<std::size_t>());
    }
  }
  return e;
}

nlohmann::json ExampleToJson(const Example& e) {
  nlohmann::json paragraphs = nlohmann::json::array();
  for (const Paragraph& p : e.paragraphs) {
    paragraphs.push_back({{"title", p.title}, {"sentences", p.sentences}});
  }
  nlohmann::json facts = nlohmann::json::array();
  for (const auto& [title, idx] : e.supporting_facts) facts.push_back({title, idx});
  nlohmann::json j = {{"id", e.id},
                      {"question", e.question},
                      {"answer", e.answer},
                      {"paragraphs", paragraphs},
                      {"supporting_facts", facts}};
  if (!e.type.empty()) j["type"] = e.type;
  return j;
}

std::vector<Example> ParseCorpus(const std::string& text, const std::string& source) {
  std::vector<Example> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return out;
  if (text[first] == '[') {
    nlohmann::json array;
    try {
      array = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error(source + ": " + ex.what());
    }
    for (std::size_t i = 0; i < array.size(); ++i) {
      try {
        out.push_back(ExampleFromJson(array[i]));
      } catch (const std::exception& ex) {
        throw std::runtime_error(source + ": record " + std::to_string(i) + ": " +
                                 ex.what());
      }
    }
    return out;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ExampleFromJson(nlohmann::json::parse(line)));
    } catch (const std::exception& ex) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<Example> ReadCorpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseCorpus(buf.str(), path);
}

void WriteCorpus(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const Example& e : examples) out << ExampleToJson(e).dump() << "\n";
}

}  // namespace kgnn
