#include "kgnn/params.h"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace kgnn {

Tensor ParameterSet::Create(const std::string& name, Shape shape, Init init,
                            Rng& rng) {
  if (params_.count(name)) {
    throw std::invalid_argument("duplicate parameter " + name);
  }
  Tensor t = Tensor::Zeros(shape, true);
  auto v = t.mutable_values();
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kGlorotUniform: {
      const double fan_in = shape.size() >= 2 ? double(shape[0]) : 1.0;
      const double fan_out = double(shape.back());
      const double a = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-a, a);
      for (double& x : v) x = dist(rng);
      break;
    }
    case Init::kEmbedding: {
      std::normal_distribution<double> dist(0.0, 0.1);
      for (double& x : v) x = dist(rng);
      break;
    }
  }
  params_.emplace(name, t);
  return t;
}

Tensor ParameterSet::Get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter " + name);
  return it->second;
}

std::vector<Tensor> ParameterSet::Tensors() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

std::size_t ParameterSet::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

void ParameterSet::ZeroGrad() {
  for (auto& [name, t] : params_) {
    Tensor copy = t;
    copy.ZeroGrad();
  }
}

std::map<std::string, std::vector<double>> ParameterSet::Snapshot() const {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [name, t] : params_) {
    out[name].assign(t.values().begin(), t.values().end());
  }
  return out;
}

void ParameterSet::Restore(
    const std::map<std::string, std::vector<double>>& snapshot) {
  for (auto& [name, t] : params_) {
    auto it = snapshot.find(name);
    if (it == snapshot.end() || it->second.size() != t.size()) {
      throw std::invalid_argument("snapshot does not match parameter " + name);
    }
    Tensor copy = t;
    std::copy(it->second.begin(), it->second.end(),
              copy.mutable_values().begin());
  }
}

nlohmann::json ParameterSet::ToJson() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, t] : params_) {
    j[name] = {{"shape", t.shape()},
               {"values", std::vector<double>(t.values().begin(),
                                              t.values().end())}};
  }
  return j;
}

void ParameterSet::LoadJson(const nlohmann::json& j) {
  for (auto& [name, t] : params_) {
    if (!j.contains(name)) {
      throw std::runtime_error("checkpoint is missing parameter " + name);
    }
    const auto shape = j.at(name).at("shape").get<Shape>();
    if (shape != t.shape()) {
      throw std::runtime_error("checkpoint parameter " + name + " has shape " +
                               ShapeToString(shape) + ", model expects " +
                               ShapeToString(t.shape()));
    }
    const auto values = j.at(name).at("values").get<std::vector<double>>();
    if (values.size() != t.size()) {
      throw std::runtime_error("checkpoint parameter " + name +
                               " has wrong value count");
    }
    Tensor copy = t;
    std::copy(values.begin(), values.end(), copy.mutable_values().begin());
  }
}

void ParameterSet::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << ToJson().dump() << "\n";
}

void ParameterSet::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  LoadJson(nlohmann::json::parse(in));
}

}  // namespace kgnn
