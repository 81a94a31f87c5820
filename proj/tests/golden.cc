#include "golden.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gtest/gtest.h"
#include "json.hpp"

namespace kgnn::testing {

void ExpectGolden(const std::string& name, const std::vector<double>& values, double tol) {
  const std::filesystem::path path = std::filesystem::path(KGNN_GOLDEN_DIR) / (name + ".json");
  if (std::getenv("KGNN_UPDATE_GOLDEN") != nullptr || !std::filesystem::exists(path)) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    ASSERT_TRUE(out) << "cannot write " << path;
    nlohmann::json j = values;
    out << j.dump(1) << "\n";
    std::cerr << "[golden] wrote " << path << "\n";
    return;
  }
  std::ifstream in(path);
  const std::vector<double> expected = nlohmann::json::parse(in).get<std::vector<double>>();
  ASSERT_EQ(values.size(), expected.size()) << name;
  for (std::size_t i = 0; i < values.size(); ++i) {
    EXPECT_NEAR(values[i], expected[i], tol) << name << " entry " << i;
  }
}

void ExpectGolden(const std::string& name, const Tensor& t, double tol) {
  ExpectGolden(name, std::vector<double>(t.values().begin(), t.values().end()), tol);
}

std::string TestData(const std::string& file) { return std::string(KGNN_TEST_DATA) + "/" + file; }

}  // namespace kgnn::testing
