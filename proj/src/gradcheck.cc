#include "kgnn/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kgnn {
namespace {

double Evaluate(const std::function<Tensor()>& f) {
  const double v = f().item();
  if (!std::isfinite(v)) {
    throw std::domain_error("finite-difference check: objective is not finite");
  }
  return v;
}

}  // namespace

GradCheckReport FiniteDiffCheck(const std::function<Tensor()>& f,
                                std::vector<Tensor> params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  for (Tensor& p : params) {
    p.set_requires_grad(true);
    p.ZeroGrad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    if (!std::isfinite(loss.item())) {
      throw std::domain_error("finite-difference check: objective is not finite");
    }
    // A loss that does not depend on any parameter never reaches the tape;
    // every analytic gradient is then zero.
    if (tape.Produced(loss.impl())) Backward(tape, loss);
  }
  for (Tensor& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), 0.0);
    }
  }

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + eps;
      const double up = Evaluate(f);
      values[k] = saved - eps;
      const double down = Evaluate(f);
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i][k];
      const double err =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++report.entries_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_param = i;
        report.worst_offset = k;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace kgnn
