#include "kgnn/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace kgnn::ops {
namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

[[noreturn]] void ShapeError(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              ShapeToString(a) + " vs " + ShapeToString(b));
}

[[noreturn]] void ShapeError(const char* op, const Shape& a,
                             const std::string& why) {
  throw std::invalid_argument(std::string(op) + ": bad shape " +
                              ShapeToString(a) + " (" + why + ")");
}

bool Tracking(std::initializer_list<const Tensor*> inputs) {
  if (ActiveTape() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor NewOutput(Shape shape, bool track) {
  return Tensor::Zeros(std::move(shape), track);
}

void Record(const char* op, std::vector<ImplPtr> inputs, const Tensor& out,
            std::function<void()> backward) {
  ActiveTape()->Push(
      Tape::Record{op, std::move(inputs), out.shared(), std::move(backward)});
}

// Splits `shape` around `axis` into (outer, length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit SplitAt(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    ShapeError(op, shape, "axis " + std::to_string(axis) + " out of range");
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape DropAxis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

// Flat source offsets of each output element for a broadcast binary op.
struct BroadcastPlan {
  Shape out;
  bool same = false;
  std::vector<std::size_t> ia, ib;
};

BroadcastPlan PlanBroadcast(const char* op, const Shape& a, const Shape& b) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank - a.size(), 1), pb(rank - b.size(), 1);
  pa.insert(pa.end(), a.begin(), a.end());
  pb.insert(pb.end(), b.begin(), b.end());
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out[i] = pb[i];
    } else {
      ShapeError(op, a, b);
    }
  }
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t ra = 1, rb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : ra;
    sb[i] = pb[i] == 1 ? 0 : rb;
    ra *= pa[i];
    rb *= pb[i];
  }
  const std::size_t n = NumElements(plan.out);
  plan.ia.resize(n);
  plan.ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t k = 0; k < n; ++k) {
    plan.ia[k] = oa;
    plan.ib[k] = ob;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < plan.out[d]) break;
      oa -= sa[d] * idx[d];
      ob -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return plan;
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor Binary(const char* op, BinaryKind kind, const Tensor& a,
              const Tensor& b) {
  auto plan = std::make_shared<BroadcastPlan>(
      PlanBroadcast(op, a.shape(), b.shape()));
  const bool track = Tracking({&a, &b});
  Tensor out = NewOutput(plan->out, track);
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.mutable_values();
  const std::size_t n = ov.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double x = av[plan->same ? k : plan->ia[k]];
    const double y = bv[plan->same ? k : plan->ib[k]];
    switch (kind) {
      case BinaryKind::kAdd: ov[k] = x + y; break;
      case BinaryKind::kSub: ov[k] = x - y; break;
      case BinaryKind::kMul: ov[k] = x * y; break;
    }
  }
  if (track) {
    ImplPtr ai = a.shared(), bi = b.shared(), oi = out.shared();
    Record(op, {ai, bi}, out, [ai, bi, oi, plan, kind]() {
      const auto& g = oi->grad;
      const std::size_t n = g.size();
      if (ai->requires_grad) {
        auto& ga = ai->MutableGrad();
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t j = plan->same ? k : plan->ia[k];
          const double scale =
              kind == BinaryKind::kMul
                  ? bi->value[plan->same ? k : plan->ib[k]]
                  : 1.0;
          ga[j] += g[k] * scale;
        }
      }
      if (bi->requires_grad) {
        auto& gb = bi->MutableGrad();
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t j = plan->same ? k : plan->ib[k];
          double scale = 1.0;
          if (kind == BinaryKind::kSub) scale = -1.0;
          if (kind == BinaryKind::kMul) {
            scale = ai->value[plan->same ? k : plan->ia[k]];
          }
          gb[j] += g[k] * scale;
        }
      }
    });
  }
  return out;
}

// Elementwise unary op whose derivative is a function of (input, output).
template <typename Forward, typename Derivative>
Tensor Unary(const char* op, const Tensor& a, Forward f, Derivative df) {
  const bool track = Tracking({&a});
  Tensor out = NewOutput(a.shape(), track);
  const auto av = a.values();
  auto ov = out.mutable_values();
  for (std::size_t k = 0; k < ov.size(); ++k) ov[k] = f(av[k]);
  if (track) {
    ImplPtr ai = a.shared(), oi = out.shared();
    Record(op, {ai}, out, [ai, oi, df]() {
      if (!ai->requires_grad) return;
      auto& ga = ai->MutableGrad();
      const auto& g = oi->grad;
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga[k] += g[k] * df(ai->value[k], oi->value[k]);
      }
    });
  }
  return out;
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

Tensor MatMul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    ShapeError("matmul", a.shape(), b.shape());
  }
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  const bool track = Tracking({&a, &b});
  Tensor out = NewOutput({n, m}, track);
  const double* A = a.values().data();
  const double* B = b.values().data();
  double* C = out.mutable_values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = C + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = A[i * k + p];
      if (x == 0.0) continue;
      const double* brow = B + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += x * brow[j];
    }
  }
  if (track) {
    ImplPtr ai = a.shared(), bi = b.shared(), oi = out.shared();
    Record("matmul", {ai, bi}, out, [ai, bi, oi, n, k, m]() {
      const double* G = oi->grad.data();
      if (ai->requires_grad) {
        double* GA = ai->MutableGrad().data();
        const double* B = bi->value.data();
        // GA += G B^T, accumulated row by row over a transposed copy of B so
        // the inner loop is an axpy.
        std::vector<double> bt(m * k);
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = B[p * m + j];
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = G + i * m;
          double* garow = GA + i * k;
          for (std::size_t j = 0; j < m; ++j) {
            const double g = grow[j];
            if (g == 0.0) continue;
            const double* btrow = bt.data() + j * k;
            for (std::size_t p = 0; p < k; ++p) garow[p] += g * btrow[p];
          }
        }
      }
      if (bi->requires_grad) {
        double* GB = bi->MutableGrad().data();
        const double* A = ai->value.data();
        for (std::size_t i = 0; i < n; ++i) {
          const double* grow = G + i * m;
          for (std::size_t p = 0; p < k; ++p) {
            const double x = A[i * k + p];
            if (x == 0.0) continue;
            double* gbrow = GB + p * m;
            for (std::size_t j = 0; j < m; ++j) gbrow[j] += x * grow[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor Transpose(const Tensor& a) {
  if (a.rank() != 2) ShapeError("transpose", a.shape(), "needs rank 2");
  const std::size_t n = a.dim(0), m = a.dim(1);
  const bool track = Tracking({&a});
  Tensor out = NewOutput({m, n}, track);
  const auto av = a.values();
  auto ov = out.mutable_values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) ov[j * n + i] = av[i * m + j];
  }
  if (track) {
    ImplPtr ai = a.shared(), oi = out.shared();
    Record("transpose", {ai}, out, [ai, oi, n, m]() {
      if (!ai->requires_grad) return;
      auto& ga = ai->MutableGrad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += oi->grad[j * n + i];
      }
    });
  }
  return out;
}

Tensor Add(const Tensor& a, const Tensor& b) {
  return Binary("add", BinaryKind::kAdd, a, b);
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  return Binary("sub", BinaryKind::kSub, a, b);
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  return Binary("mul", BinaryKind::kMul, a, b);
}

Tensor Scale(const Tensor& a, double factor) {
  return Unary(
      "scale", a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor AddScalar(const Tensor& a, double offset) {
  return Unary(
      "add_scalar", a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Tensor Relu(const Tensor& a) {
  return Unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor Sigmoid(const Tensor& a) {
  return Unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Tanh(const Tensor& a) {
  return Unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor Log(const Tensor& a) {
  for (double x : a.values()) {
    if (!(x > 0.0)) throw std::domain_error("log of non-positive value");
  }
  return Unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor LogSigmoid(const Tensor& a) {
  return Unary(
      "log_sigmoid", a,
      [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        // d/dx log sigmoid(x) = sigmoid(-x)
        if (x >= 0.0) {
          const double e = std::exp(-x);
          return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(x));
      });
}

Tensor Softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = SplitAt("softmax", a.shape(), axis);
  const bool track = Tracking({&a});
  Tensor out = NewOutput(a.shape(), track);
  const auto av = a.values();
  auto ov = out.mutable_values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      double mx = kNegInf;
      for (std::size_t l = 0; l < s.length; ++l) {
        mx = std::max(mx, av[base + l * s.inner]);
      }
      if (mx == kNegInf) {
        throw std::invalid_argument("softmax: every entry of a slice is masked");
      }
      double z = 0.0;
      for (std::size_t l = 0; l < s.length; ++l) {
        const double e = std::exp(av[base + l * s.inner] - mx);
        ov[base + l * s.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < s.length; ++l) ov[base + l * s.inner] /= z;
    }
  }
  if (track) {
    ImplPtr ai = a.shared(), oi = out.shared();
    Record("softmax", {ai}, out, [ai, oi, s]() {
      if (!ai->requires_grad) return;
      auto& ga = ai->MutableGrad();
      const auto& y = oi->value;
      const auto& g = oi->grad;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.length * s.inner + in;
          double dot = 0.0;
          for (std::size_t l = 0; l < s.length; ++l) {
            const std::size_t k = base + l * s.inner;
            dot += g[k] * y[k];
          }
          for (std::size_t l = 0; l < s.length; ++l) {
            const std::size_t k = base + l * s.inner;
            ga[k] += y[k] * (g[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor LogSoftmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = SplitAt("log_softmax", a.shape(), axis);
  const bool track = Tracking({&a});
  Tensor out = NewOutput(a.shape(), track);
  const auto av = a.values();
  auto ov = out.mutable_values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      double mx = kNegInf;
      for (std::size_t l = 0; l < s.length; ++l) {
        mx = std::max(mx, av[base + l * s.inner]);
      }
      if (mx == kNegInf) {
        throw std::invalid_argument(
            "log_softmax: every entry of a slice is masked");
      }
      double z = 0.0;
      for (std::size_t l = 0; l < s.length; ++l) {
        z += std::exp(av[base + l * s.inner] - mx);
      }
      const double lse = mx + std::log(z);
      for (std::size_t l = 0; l < s.length; ++l) {
        ov[base + l * s.inner] = av[base + l * s.inner] - lse;
      }
    }
  }
  if (track) {
    ImplPtr ai = a.shared(), oi = out.shared();
    Record("log_softmax", {ai}, out, [ai, oi, s]() {
      if (!ai->requires_grad) return;
      auto& ga = ai->MutableGrad();
      const auto& y = oi->value;
      const auto& g = oi->grad;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.length * s.inner + in;
          double gsum = 0.0;
          for (std::size_t l = 0; l < s.length; ++l) {
            gsum += g[base + l * s.inner];
          }
          for (std::size_t l = 0; l < s.length; ++l) {
            const std::size_t k = base + l * s.inner;
            if (y[k] == kNegInf) continue;
            ga[k] += g[k] - std::exp(y[k]) * gsum;
          }
        }
      }
    });
  }
  return out;
}

Tensor Sum(const Tensor& a, std::size_t axis) {
  const AxisSplit s = SplitAt("sum", a.shape(), axis);
  const bool track = Tracking({&a});
  Tensor out = NewOutput(DropAxis(a.shape(), axis), track);
  const auto av = a.values();
  auto ov = out.mutable_values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.length; ++l) {
      const double* src = av.data() + (o * s.length + l) * s.inner;
      double* dst = ov.data() + o * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) dst[in] += src[in];
    }
  }
  if (track) {
    ImplPtr ai = a.shared(), oi = out.shared();
    Record("sum", {ai}, out, [ai, oi, s]() {
      if (!ai->requires_grad) return;
      auto& ga = ai->MutableGrad();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t l = 0; l < s.length; ++l) {
          double* dst = ga.data() + (o * s.length + l) * s.inner;
          const double* src = oi->grad.data() + o * s.inner;
          for (std::size_t in = 0; in < s.inner; ++in) dst[in] += src[in];
        }
      }
    });
  }
  return out;
}

Tensor Mean(const Tensor& a, std::size_t axis) {
  const AxisSplit s = SplitAt("mean", a.shape(), axis);
  if (s.length == 0) ShapeError("mean", a.shape(), "empty axis");
  return Scale(Sum(a, axis), 1.0 / static_cast<double>(s.length));
}

Tensor Max(const Tensor& a, std::size_t axis) {
  const AxisSplit s = SplitAt("max", a.shape(), axis);
  if (s.length == 0) ShapeError("max", a.shape(), "empty axis");
  const bool track = Tracking({&a});
  Tensor out = NewOutput(DropAxis(a.shape(), axis), track);
  const auto av = a.values();
  auto ov = out.mutable_values();
  auto argmax = std::make_shared<std::vector<std::size_t>>(ov.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      std::size_t best = base;
      for (std::size_t l = 1; l < s.length; ++l) {
        const std::size_t k = base + l * s.inner;
        if (av[k] > av[best]) best = k;
      }
      ov[o * s.inner + in] = av[best];
      (*argmax)[o * s.inner + in] = best;
    }
  }
  if (track) {
    ImplPtr ai = a.shared(), oi = out.shared();
    Record("max", {ai}, out, [ai, oi, argmax]() {
      if (!ai->requires_grad) return;
      auto& ga = ai->MutableGrad();
      for (std::size_t k = 0; k < argmax->size(); ++k) {
        ga[(*argmax)[k]] += oi->grad[k];
      }
    });
  }
  return out;
}

Tensor SumAll(const Tensor& a) {
  return Sum(Reshape(a, {a.size()}), 0);
}

Tensor MaskedFill(const Tensor& a, const std::vector<bool>& mask,
                  double fill) {
  if (mask.size() != a.size()) {
    ShapeError("masked_fill", a.shape(),
               "mask has " + std::to_string(mask.size()) + " entries");
  }
  const bool track = Tracking({&a});
  Tensor out = NewOutput(a.shape(), track);
  const auto av = a.values();
  auto ov = out.mutable_values();
  for (std::size_t k = 0; k < ov.size(); ++k) ov[k] = mask[k] ? fill : av[k];
  if (track) {
    ImplPtr ai = a.shared(), oi = out.shared();
    Record("masked_fill", {ai}, out, [ai, oi, mask]() {
      if (!ai->requires_grad) return;
      auto& ga = ai->MutableGrad();
      for (std::size_t k = 0; k < ga.size(); ++k) {
        if (!mask[k]) ga[k] += oi->grad[k];
      }
    });
  }
  return out;
}

Tensor Concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) ShapeError("concat", first, "axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  bool track = false;
  for (const Tensor& p : parts) {
    const Shape& sh = p.shape();
    if (sh.size() != first.size()) ShapeError("concat", first, sh);
    for (std::size_t i = 0; i < sh.size(); ++i) {
      if (i != axis && sh[i] != first[i]) ShapeError("concat", first, sh);
    }
    out_shape[axis] += sh[axis];
    track = track || Tracking({&p});
  }
  const AxisSplit s = SplitAt("concat", out_shape, axis);
  Tensor out = NewOutput(out_shape, track);
  auto ov = out.mutable_values();
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t len = p.dim(axis) * s.inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy(pv.begin() + o * len, pv.begin() + (o + 1) * len,
                ov.begin() + o * s.length * s.inner + offset);
    }
    offset += len;
  }
  if (track) {
    std::vector<ImplPtr> inputs;
    for (const Tensor& p : parts) inputs.push_back(p.shared());
    ImplPtr oi = out.shared();
    Record("concat", inputs, out, [inputs, oi, offsets, s, axis]() {
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        TensorImpl& in = *inputs[i];
        if (!in.requires_grad) continue;
        auto& g = in.MutableGrad();
        const std::size_t len = in.shape[axis] * s.inner;
        for (std::size_t o = 0; o < s.outer; ++o) {
          const double* src =
              oi->grad.data() + o * s.length * s.inner + offsets[i];
          double* dst = g.data() + o * len;
          for (std::size_t k = 0; k < len; ++k) dst[k] += src[k];
        }
      }
    });
  }
  return out;
}

Tensor GatherRows(const Tensor& table, const std::vector<std::size_t>& rows) {
  if (table.rank() < 1) ShapeError("gather_rows", table.shape(), "rank 0");
  const std::size_t n = table.dim(0);
  const std::size_t width = n == 0 ? 0 : table.size() / n;
  for (std::size_t r : rows) {
    if (r >= n) {
      ShapeError("gather_rows", table.shape(),
                 "row " + std::to_string(r) + " out of range");
    }
  }
  Shape out_shape = table.shape();
  out_shape[0] = rows.size();
  const bool track = Tracking({&table});
  Tensor out = NewOutput(out_shape, track);
  const auto tv = table.values();
  auto ov = out.mutable_values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(tv.begin() + rows[i] * width, tv.begin() + (rows[i] + 1) * width,
              ov.begin() + i * width);
  }
  if (track) {
    ImplPtr ti = table.shared(), oi = out.shared();
    Record("gather_rows", {ti}, out, [ti, oi, rows, width]() {
      if (!ti->requires_grad) return;
      auto& g = ti->MutableGrad();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = oi->grad.data() + i * width;
        double* dst = g.data() + rows[i] * width;
        for (std::size_t k = 0; k < width; ++k) dst[k] += src[k];
      }
    });
  }
  return out;
}

Tensor Reshape(const Tensor& a, Shape shape) {
  if (NumElements(shape) != a.size()) ShapeError("reshape", a.shape(), shape);
  const bool track = Tracking({&a});
  Tensor out = Tensor::FromValues(std::move(shape),
                                  std::vector<double>(a.values().begin(),
                                                      a.values().end()),
                                  track);
  if (track) {
    ImplPtr ai = a.shared(), oi = out.shared();
    Record("reshape", {ai}, out, [ai, oi]() {
      if (!ai->requires_grad) return;
      auto& g = ai->MutableGrad();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += oi->grad[k];
    });
  }
  return out;
}

}  // namespace kgnn::ops
