#include "quip/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "quip/errors.hpp"

namespace quip::ops {

using detail::Node;

namespace {

Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool track = grad_mode_enabled() &&
                     std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->is_leaf = false;
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

bool wants(const Node& out, std::size_t i) { return out.inputs[i]->requires_grad; }

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined operand");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  require_defined(t, op);
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(t.shape()));
  }
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  std::transform(x.values().begin(), x.values().end(), out.begin(), fwd);
  return make_op(x.shape(), std::move(out), {x}, [deriv](Node& o) {
    Node& in = *o.inputs[0];
    auto g = in.grad_buffer();
    for (std::size_t i = 0; i < o.value.size(); ++i) g[i] += o.grad[i] * deriv(in.value[i], o.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& o) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants(o, k)) continue;
      auto g = o.inputs[k]->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& o) {
    if (wants(o, 0)) {
      auto g = o.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (wants(o, 1)) {
      auto g = o.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Node& o) {
    const Node& na = *o.inputs[0];
    const Node& nb = *o.inputs[1];
    if (wants(o, 0)) {
      auto g = o.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * nb.value[i];
    }
    if (wants(o, 1)) {
      auto g = o.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * na.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  require_defined(a, "scale");
  std::vector<double> out(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return make_op(a.shape(), std::move(out), {a}, [factor](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * factor;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return make_op({m, n}, std::move(out), {a, b}, [m, k, n](Node& o) {
    const auto& av = o.inputs[0]->value;
    const auto& bv = o.inputs[1]->value;
    if (wants(o, 0)) {
      auto ga = o.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += o.grad[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (wants(o, 1)) {
      auto gb = o.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * o.grad[i * n + j];
        }
    }
  });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  require_rank(a, 2, "matvec");
  require_rank(x, 1, "matvec");
  const std::size_t m = a.dim(0), k = a.dim(1);
  if (x.dim(0) != k) {
    throw DimensionError("matvec: matrix " + shape_string(a.shape()) + " cannot multiply vector " +
                         shape_string(x.shape()));
  }
  const auto av = a.values();
  const auto xv = x.values();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * xv[p];
    out[i] = acc;
  }
  return make_op({m}, std::move(out), {a, x}, [m, k](Node& o) {
    const auto& av = o.inputs[0]->value;
    const auto& xv = o.inputs[1]->value;
    if (wants(o, 0)) {
      auto ga = o.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        const double gi = o.grad[i];
        if (gi == 0.0) continue;
        for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gi * xv[p];
      }
    }
    if (wants(o, 1)) {
      auto gx = o.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        const double gi = o.grad[i];
        for (std::size_t p = 0; p < k; ++p) gx[p] += gi * av[i * k + p];
      }
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  require_defined(x, "sigmoid");
  return unary(
      x,
      [](double v) {
        // Split by sign so exp never overflows.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  require_defined(x, "tanh");
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  require_defined(x, "leaky_relu");
  if (!(slope > 0.0 && slope < 1.0)) throw ContractError("leaky_relu: slope must lie in (0, 1)");
  return unary(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor softmax(const Tensor& x) {
  require_rank(x, 1, "softmax");
  const auto xv = x.values();
  const double top = *std::max_element(xv.begin(), xv.end());
  std::vector<double> out(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) total += (out[i] = std::exp(xv[i] - top));
  for (double& v : out) v /= total;
  return make_op(x.shape(), std::move(out), {x}, [](Node& o) {
    double dot = 0.0;
    for (std::size_t i = 0; i < o.value.size(); ++i) dot += o.grad[i] * o.value[i];
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < o.value.size(); ++i) g[i] += o.value[i] * (o.grad[i] - dot);
  });
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  const double total = std::accumulate(x.values().begin(), x.values().end(), 0.0);
  return make_op({}, {total}, {x}, [](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (double& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor slice(const Tensor& v, std::size_t offset, std::size_t length) {
  require_rank(v, 1, "slice");
  if (length == 0 || offset + length > v.size()) {
    throw DimensionError("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                         ") outside vector of length " + std::to_string(v.size()));
  }
  std::vector<double> out(v.values().begin() + static_cast<std::ptrdiff_t>(offset),
                          v.values().begin() + static_cast<std::ptrdiff_t>(offset + length));
  return make_op({length}, std::move(out), {v}, [offset](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[offset + i] += o.grad[i];
  });
}

Tensor row(const Tensor& m, std::size_t index) {
  require_rank(m, 2, "row");
  const std::size_t cols = m.dim(1);
  if (index >= m.dim(0)) {
    throw DimensionError("row: index " + std::to_string(index) + " outside matrix " + shape_string(m.shape()));
  }
  const std::size_t offset = index * cols;
  std::vector<double> out(m.values().begin() + static_cast<std::ptrdiff_t>(offset),
                          m.values().begin() + static_cast<std::ptrdiff_t>(offset + cols));
  return make_op({cols}, std::move(out), {m}, [offset](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[offset + i] += o.grad[i];
  });
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  require_rank(rows[0], 1, "stack_rows");
  const std::size_t cols = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * cols);
  for (const Tensor& r : rows) {
    require_rank(r, 1, "stack_rows");
    if (r.size() != cols) {
      throw DimensionError("stack_rows: row of length " + std::to_string(r.size()) + " among rows of length " +
                           std::to_string(cols));
    }
    out.insert(out.end(), r.values().begin(), r.values().end());
  }
  return make_op({rows.size(), cols}, std::move(out), std::vector<Tensor>(rows.begin(), rows.end()), [cols](Node& o) {
    for (std::size_t r = 0; r < o.inputs.size(); ++r) {
      if (!wants(o, r)) continue;
      auto g = o.inputs[r]->grad_buffer();
      for (std::size_t j = 0; j < cols; ++j) g[j] += o.grad[r * cols + j];
    }
  });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat: no parts");
  std::vector<double> out;
  for (const Tensor& p : parts) {
    require_defined(p, "concat");
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  const std::size_t total = out.size();
  return make_op({total}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()), [](Node& o) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < o.inputs.size(); ++k) {
      const std::size_t len = o.inputs[k]->value.size();
      if (wants(o, k)) {
        auto g = o.inputs[k]->grad_buffer();
        for (std::size_t i = 0; i < len; ++i) g[i] += o.grad[offset + i];
      }
      offset += len;
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_op(std::move(shape), std::move(out), {x}, [](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor row_scale(const Tensor& scores, const Tensor& m) {
  require_rank(scores, 1, "row_scale");
  require_rank(m, 2, "row_scale");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  if (scores.size() != rows) {
    throw DimensionError("row_scale: " + std::to_string(scores.size()) + " scores for matrix " +
                         shape_string(m.shape()));
  }
  const auto sv = scores.values();
  const auto mv = m.values();
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = sv[i] * mv[i * cols + j];
  return make_op(m.shape(), std::move(out), {scores, m}, [rows, cols](Node& o) {
    const auto& sv = o.inputs[0]->value;
    const auto& mv = o.inputs[1]->value;
    if (wants(o, 0)) {
      auto gs = o.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += o.grad[i * cols + j] * mv[i * cols + j];
        gs[i] += acc;
      }
    }
    if (wants(o, 1)) {
      auto gm = o.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) gm[i * cols + j] += o.grad[i * cols + j] * sv[i];
    }
  });
}

Tensor conv1d_valid(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  require_rank(input, 2, "conv1d_valid");
  require_rank(kernel, 3, "conv1d_valid");
  require_rank(bias, 1, "conv1d_valid");
  const std::size_t n = input.dim(0), channels = input.dim(1);
  const std::size_t filters = kernel.dim(0), height = kernel.dim(1);
  if (kernel.dim(2) != channels) {
    throw DimensionError("conv1d_valid: kernel " + shape_string(kernel.shape()) + " does not match input " +
                         shape_string(input.shape()));
  }
  if (bias.size() != filters) {
    throw DimensionError("conv1d_valid: bias " + shape_string(bias.shape()) + " for " + std::to_string(filters) +
                         " filters");
  }
  if (height > n) {
    throw DimensionError("conv1d_valid: kernel height " + std::to_string(height) + " exceeds sequence length " +
                         std::to_string(n));
  }
  const std::size_t out_len = n - height + 1;
  const std::size_t window = height * channels;
  const auto xv = input.values();
  const auto kv = kernel.values();
  const auto bv = bias.values();
  std::vector<double> out(out_len * filters);
  for (std::size_t t = 0; t < out_len; ++t) {
    // A window of `height` consecutive rows is contiguous in row-major order.
    const double* x = xv.data() + t * channels;
    for (std::size_t f = 0; f < filters; ++f) {
      const double* w = kv.data() + f * window;
      double acc = bv[f];
      for (std::size_t q = 0; q < window; ++q) acc += w[q] * x[q];
      out[t * filters + f] = acc;
    }
  }
  return make_op({out_len, filters}, std::move(out), {input, kernel, bias},
                 [out_len, filters, window, channels](Node& o) {
                   const auto& xv = o.inputs[0]->value;
                   const auto& kv = o.inputs[1]->value;
                   const bool gx_on = wants(o, 0), gk_on = wants(o, 1), gb_on = wants(o, 2);
                   std::span<double> gx, gk, gb;
                   if (gx_on) gx = o.inputs[0]->grad_buffer();
                   if (gk_on) gk = o.inputs[1]->grad_buffer();
                   if (gb_on) gb = o.inputs[2]->grad_buffer();
                   for (std::size_t t = 0; t < out_len; ++t) {
                     const std::size_t base = t * channels;
                     for (std::size_t f = 0; f < filters; ++f) {
                       const double g = o.grad[t * filters + f];
                       if (gb_on) gb[f] += g;
                       if (g == 0.0) continue;
                       const std::size_t wbase = f * window;
                       if (gk_on)
                         for (std::size_t q = 0; q < window; ++q) gk[wbase + q] += g * xv[base + q];
                       if (gx_on)
                         for (std::size_t q = 0; q < window; ++q) gx[base + q] += g * kv[wbase + q];
                     }
                   }
                 });
}

Tensor gather_mean_rows(const Tensor& table, const std::vector<std::vector<std::size_t>>& groups) {
  require_rank(table, 2, "gather_mean_rows");
  if (groups.empty()) throw ContractError("gather_mean_rows: no groups");
  const std::size_t rows = table.dim(0), cols = table.dim(1);
  const auto tv = table.values();
  std::vector<double> out(groups.size() * cols, 0.0);
  for (std::size_t r = 0; r < groups.size(); ++r) {
    const auto& group = groups[r];
    if (group.empty()) continue;
    double* dst = out.data() + r * cols;
    for (std::size_t idx : group) {
      if (idx >= rows) {
        throw DimensionError("gather_mean_rows: row index " + std::to_string(idx) + " outside table " +
                             shape_string(table.shape()));
      }
      for (std::size_t j = 0; j < cols; ++j) dst[j] += tv[idx * cols + j];
    }
    const double inv = 1.0 / static_cast<double>(group.size());
    for (std::size_t j = 0; j < cols; ++j) dst[j] *= inv;
  }
  return make_op({groups.size(), cols}, std::move(out), {table}, [groups, cols](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < groups.size(); ++r) {
      const auto& group = groups[r];
      if (group.empty()) continue;
      const double inv = 1.0 / static_cast<double>(group.size());
      for (std::size_t idx : group)
        for (std::size_t j = 0; j < cols; ++j) g[idx * cols + j] += o.grad[r * cols + j] * inv;
    }
  });
}

Tensor bce(const Tensor& predictions, std::span<const double> labels) {
  require_defined(predictions, "bce");
  if (predictions.size() != labels.size()) {
    throw ContractError("bce: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ContractError("bce: empty batch");
  const std::size_t count = labels.size();
  const auto pv = predictions.values();
  std::vector<double> clamped(count);
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double p = std::clamp(pv[i], kBceClamp, 1.0 - kBceClamp);
    clamped[i] = p;
    total += labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  const double loss = -total / static_cast<double>(count);
  std::vector<double> y(labels.begin(), labels.end());
  return make_op({}, {loss}, {predictions}, [clamped = std::move(clamped), y = std::move(y)](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    const double inv_n = 1.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double p = clamped[i];
      g[i] += o.grad[0] * inv_n * (-(y[i] / p) + (1.0 - y[i]) / (1.0 - p));
    }
  });
}

}  // namespace quip::ops
