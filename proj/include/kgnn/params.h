#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgnn/tensor.h"

namespace kgnn {

using Rng = std::mt19937_64;

enum class Init {
  kZeros,
  kGlorotUniform,  // U(-a, a), a = sqrt(6 / (fan_in + fan_out))
  kEmbedding,      // N(0, 0.1^2)
};

// Named trainable tensors. Names follow "<module>.<layer>.<tensor>" and are
// kept sorted, which fixes iteration order for optimizers and checkpoints.
class ParameterSet {
 public:
  Tensor Create(const std::string& name, Shape shape, Init init, Rng& rng);
  Tensor Get(const std::string& name) const;
  bool Contains(const std::string& name) const { return params_.count(name) > 0; }

  const std::map<std::string, Tensor>& all() const { return params_; }
  std::vector<Tensor> Tensors() const;
  std::size_t NumScalars() const;

  void ZeroGrad();

  // Deep copy of current values (for best-checkpoint snapshots).
  std::map<std::string, std::vector<double>> Snapshot() const;
  void Restore(const std::map<std::string, std::vector<double>>& snapshot);

  // Checkpoint format: {name: {"shape": [...], "values": [...]}}.
  nlohmann::json ToJson() const;
  void LoadJson(const nlohmann::json& j);
  void Save(const std::string& path) const;
  void Load(const std::string& path);

 private:
  std::map<std::string, Tensor> params_;
};

}  // namespace kgnn
