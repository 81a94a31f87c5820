#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "kgnn/tensor.h"

namespace kgnn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  // Location of the worst entry: index into `params` and flat offset.
  std::size_t worst_param = 0;
  std::size_t worst_offset = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string worst_name;  // filled by callers that know parameter names
};

// Compares reverse-mode gradients of `f` with central differences
//   (f(x + eps) - f(x - eps)) / (2 eps)
// for every entry of every tensor in `params`. The per-entry error is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// `f` must rebuild the loss from the current parameter values each call.
GradCheckReport FiniteDiffCheck(const std::function<Tensor()>& f,
                                std::vector<Tensor> params, double eps);

}  // namespace kgnn
