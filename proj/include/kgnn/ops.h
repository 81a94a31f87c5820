#pragma once

#include <cstddef>
#include <vector>

#include "kgnn/tensor.h"

// Differentiable operations. Every op validates shapes, computes its output
// eagerly, and records a backward rule on the active tape when any input
// requires gradients.
namespace kgnn::ops {

// [n x k] * [k x m] -> [n x m].
Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& a);

// Elementwise with numpy-style broadcasting (shapes right-aligned; each
// extent must match or be 1).
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);

Tensor Scale(const Tensor& a, double factor);
Tensor AddScalar(const Tensor& a, double offset);

Tensor Relu(const Tensor& a);
Tensor Sigmoid(const Tensor& a);
Tensor Tanh(const Tensor& a);
Tensor Log(const Tensor& a);
// log(sigmoid(a)), stable for large |a|.
Tensor LogSigmoid(const Tensor& a);

// Entries equal to -infinity are treated as masked. A slice that is
// entirely masked is rejected.
Tensor Softmax(const Tensor& a, std::size_t axis);
Tensor LogSoftmax(const Tensor& a, std::size_t axis);

// Reductions remove `axis` from the shape.
Tensor Sum(const Tensor& a, std::size_t axis);
Tensor Mean(const Tensor& a, std::size_t axis);
// Argmax ties go to the lowest index; the backward pass routes the whole
// gradient to that index.
Tensor Max(const Tensor& a, std::size_t axis);
Tensor SumAll(const Tensor& a);

// Replaces entries where mask is true by `fill`; those entries get zero
// gradient.
Tensor MaskedFill(const Tensor& a, const std::vector<bool>& mask, double fill);

Tensor Concat(const std::vector<Tensor>& parts, std::size_t axis);

// Row gather from a [n x d] matrix. Also serves as embedding lookup.
Tensor GatherRows(const Tensor& table, const std::vector<std::size_t>& rows);
inline Tensor EmbeddingLookup(const Tensor& table,
                              const std::vector<std::size_t>& ids) {
  return GatherRows(table, ids);
}

Tensor Reshape(const Tensor& a, Shape shape);

}  // namespace kgnn::ops
