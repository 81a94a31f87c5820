#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kgnn {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Storage behind a Tensor handle. Values are row-major float64; grad is
// allocated lazily with the same extent.
struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;

  // Returns the grad buffer, zero-initialising it on first use.
  std::vector<double>& MutableGrad();
};

// Shared handle to a dense tensor. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Filled(Shape shape, double v);
  static Tensor FromValues(Shape shape, std::vector<double> values,
                           bool requires_grad = false);
  static Tensor Scalar(double v);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->value.size(); }

  std::span<const double> values() const { return impl_->value; }
  // Only parameters and freshly built inputs should be written through this.
  std::span<double> mutable_values() { return impl_->value; }

  double item() const;
  double at(std::size_t i) const { return impl_->value.at(i); }
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->MutableGrad(); }
  void ZeroGrad();

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of executed operations. Records are appended as ops run,
// so every record's inputs were produced by earlier records (or are leaves).
class Tape {
 public:
  struct Record {
    const char* op;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    std::function<void()> backward;
  };

  void Push(Record record);
  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool Produced(const TensorImpl* t) const;
  void Clear() { records_.clear(); }

 private:
  std::vector<Record> records_;
};

// Makes `tape` the recording target for ops on this thread while alive.
// Without an active scope ops run in inference mode and record nothing.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* ActiveTape();

// Reverse pass: seeds d(loss)/d(loss) = 1 and runs every record's backward
// rule in reverse order. Gradients accumulate into leaf grad buffers.
void Backward(Tape& tape, const Tensor& loss);

}  // namespace kgnn
