#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace kgnn {

struct Paragraph {
  std::string title;
  std::vector<std::string> sentences;
};

struct Example {
  std::string id;
  std::string question;
  std::string answer;
  std::string type;  // "bridge", "comparison", or empty
  std::vector<Paragraph> paragraphs;
  std::vector<std::pair<std::string, std::size_t>> supporting_facts;
};

// Accepts both our record layout
//   {"id","question","answer","paragraphs":[{"title","sentences"}],
//    "supporting_facts":[[title, idx]]}
// and HotpotQA's {"_id", "context":[[title, [sentences]]], ...}.
Example ExampleFromJson(const nlohmann::json& j);
nlohmann::json ExampleToJson(const Example& example);

// JSON lines, or a single JSON array (the HotpotQA distribution format).
// Detected from the first non-blank character.
std::vector<Example> ReadCorpus(const std::string& path);
std::vector<Example> ParseCorpus(const std::string& text,
                                 const std::string& source = "<memory>");
void WriteCorpus(const std::string& path, const std::vector<Example>& examples);

}  // namespace kgnn
