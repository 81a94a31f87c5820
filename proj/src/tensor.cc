#include "kgnn/tensor.h"

#include <sstream>
#include <stdexcept>

namespace kgnn {

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << " x ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

std::vector<double>& TensorImpl::MutableGrad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->value.assign(NumElements(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::Filled(Shape shape, double v) {
  Tensor t = Zeros(std::move(shape));
  for (double& x : t.mutable_values()) x = v;
  return t;
}

Tensor Tensor::FromValues(Shape shape, std::vector<double> values,
                          bool requires_grad) {
  if (NumElements(shape) != values.size()) {
    throw std::invalid_argument("tensor shape " + ShapeToString(shape) +
                                " does not hold " +
                                std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::Scalar(double v) { return FromValues({1}, {v}); }

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("item() on tensor of shape " +
                                ShapeToString(shape()));
  }
  return impl_->value[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw std::invalid_argument("at(i, j) needs a matrix");
  return impl_->value.at(i * impl_->shape[1] + j);
}

void Tensor::ZeroGrad() {
  if (!impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
}

void Tape::Push(Record record) { records_.push_back(std::move(record)); }

bool Tape::Produced(const TensorImpl* t) const {
  for (const Record& r : records_) {
    if (r.output.get() == t) return true;
  }
  return false;
}

namespace {
thread_local Tape* active_tape = nullptr;
}  // namespace

TapeScope::TapeScope(Tape& tape) : previous_(active_tape) {
  active_tape = &tape;
}

TapeScope::~TapeScope() { active_tape = previous_; }

Tape* ActiveTape() { return active_tape; }

void Backward(Tape& tape, const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument(
        "backward needs a scalar loss, got shape " +
        (loss.defined() ? ShapeToString(loss.shape()) : std::string("<none>")));
  }
  const auto& records = tape.records();
  std::size_t last = records.size();
  for (std::size_t i = records.size(); i-- > 0;) {
    if (records[i].output.get() == loss.impl()) {
      last = i;
      break;
    }
  }
  if (last == records.size()) {
    throw std::invalid_argument("backward: loss was not produced on this tape");
  }
  loss.impl()->MutableGrad()[0] += 1.0;
  for (std::size_t i = last + 1; i-- > 0;) {
    const Tape::Record& r = records[i];
    if (r.output->grad.empty()) continue;  // nothing flowed into this node
    r.backward();
  }
}

}  // namespace kgnn
