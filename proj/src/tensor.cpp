// Copyright 2026 The dlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dlm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dlm/error.hpp"
#include "kernels.hpp"

namespace dlm {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<float>(n, 0.0f), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<float> values,
                         bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) fail(ErrorKind::kDimension, "zero-sized dimension in shape " + shape_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    fail(ErrorKind::kDimension, "shape " + shape_string(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->data.size(), 0.0f);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

float Tensor::item() const {
  if (numel() != 1) {
    fail(ErrorKind::kContract, "item() on non-scalar tensor " + shape_string(shape()));
  }
  return impl_->data[0];
}

float Tensor::at(std::size_t r, std::size_t c) const {
  if (rank() != 2 || r >= dim(0) || c >= dim(1)) {
    fail(ErrorKind::kDimension, "index out of range for " + shape_string(shape()));
  }
  return impl_->data[r * dim(1) + c];
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

std::optional<std::size_t> Tensor::node_id() const {
  if (impl_->node < 0) return std::nullopt;
  return static_cast<std::size_t>(impl_->node);
}

Tensor Tensor::clone(bool requires_grad) const {
  return from_data(shape(), impl_->data, requires_grad);
}

// ---- Tape -----------------------------------------------------------------

Tensor Tape::emit(Shape shape, std::vector<float> values, std::vector<Tensor> inputs,
                  std::function<void(Node&)> backward) {
  bool needs_grad = false;
  if (record_) {
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  Tensor out = Tensor::from_data(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) {
    out.impl_->node = static_cast<std::int64_t>(nodes_.size());
    out.impl_->tape = this;
    nodes_.push_back(Node{std::move(inputs), out, std::move(backward)});
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorKind::kContract, "backward() needs a scalar loss, got " +
                                   (loss.defined() ? shape_string(loss.shape()) : "undefined"));
  }
  if (!loss.requires_grad()) return;  // nothing reachable
  if (loss.impl()->tape != this || loss.is_leaf()) {
    fail(ErrorKind::kContract, "backward() loss is not on this tape");
  }
  for (auto& node : nodes_) node.output.zero_grad();
  const std::size_t last = *loss.node_id();
  nodes_[last].output.mutable_grad()[0] = 1.0f;
  for (std::size_t i = last + 1; i-- > 0;) {
    Node& node = nodes_[i];
    node.backward(node);
  }
}

// ---- helpers --------------------------------------------------------------

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    fail(ErrorKind::kDimension, std::string(op) + ": expected rank " + std::to_string(rank) +
                                    " tensor, got " + shape_string(t.shape()));
  }
}

void check_finite(const Tensor& t, const char* op) {
  for (float v : t.data()) {
    if (!std::isfinite(v)) fail(ErrorKind::kNumericDomain, std::string(op) + ": non-finite input");
  }
}

// 0 equal shapes, 1 a is scalar, 2 b is scalar.
int broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return 0;
  if (a.numel() == 1) return 1;
  if (b.numel() == 1) return 2;
  fail(ErrorKind::kDimension, std::string(op) + ": incompatible shapes " +
                                  shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

void accumulate(Tensor& target, std::span<const float> delta) {
  if (!target.requires_grad()) return;
  auto g = target.mutable_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

float sigmoid_scalar(float x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

template <typename Fwd, typename Deriv>
Tensor unary(Tape& tape, const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<float> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  return tape.emit(a.shape(), std::move(out), {a}, [deriv](Tape::Node& n) {
    Tensor& in = n.inputs[0];
    if (!in.requires_grad()) return;
    auto gi = in.mutable_grad();
    auto go = n.output.grad();
    auto xin = in.data();
    auto y = n.output.data();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i] * deriv(xin[i], y[i]);
  });
}

}  // namespace

// ---- matmul ---------------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1);
  const bool vec = b.rank() == 1;
  if ((b.rank() != 1 && b.rank() != 2) || b.dim(0) != k) {
    fail(ErrorKind::kDimension, "matmul: shape mismatch " + shape_string(a.shape()) + " x " +
                                    shape_string(b.shape()));
  }
  const std::size_t n = vec ? 1 : b.dim(1);
  std::vector<float> out(m * n, 0.0f);
  const float* A = a.data().data();
  const float* B = b.data().data();
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) out[i] = kernels::dot(A + i * k, B, k);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) kernels::axpy(A[i * k + p], B + p * n, out.data() + i * n, n);
  }
  Shape shape = vec ? Shape{m} : Shape{m, n};
  return tape.emit(std::move(shape), std::move(out), {a, b}, [m, k, n](Tape::Node& node) {
    Tensor& ta = node.inputs[0];
    Tensor& tb = node.inputs[1];
    const float* G = node.output.grad().data();
    const float* A = ta.data().data();
    const float* B = tb.data().data();
    if (ta.requires_grad()) {
      // dA = dC * B^T
      float* dA = ta.mutable_grad().data();
      if (n == 1) {
        for (std::size_t i = 0; i < m; ++i) kernels::axpy(G[i], B, dA + i * k, k);
      } else {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) dA[i * k + p] += kernels::dot(G + i * n, B + p * n, n);
      }
    }
    if (tb.requires_grad()) {
      // dB = A^T * dC
      float* dB = tb.mutable_grad().data();
      if (n == 1) {
        for (std::size_t i = 0; i < m; ++i) kernels::axpy(G[i], A + i * k, dB, k);
      } else {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) kernels::axpy(A[i * k + p], G + i * n, dB + p * n, n);
      }
    }
  });
}

Tensor transpose(Tape& tape, const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<float> out(m * n);
  auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return tape.emit({n, m}, std::move(out), {a}, [m, n](Tape::Node& node) {
    Tensor& in = node.inputs[0];
    if (!in.requires_grad()) return;
    auto gi = in.mutable_grad();
    auto go = node.output.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gi[i * n + j] += go[j * m + i];
  });
}

// ---- pointwise --------------------------------------------------------------

namespace {

// Shared implementation of the binary pointwise ops. `df_da(a, b)` and
// `df_db(a, b)` give the local partial derivatives.
template <typename F, typename DA, typename DB>
Tensor binary(Tape& tape, const Tensor& a, const Tensor& b, const char* name, F f, DA df_da,
              DB df_db) {
  const int mode = broadcast_mode(a, b, name);
  const Shape& shape = mode == 1 ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  auto x = a.data();
  auto y = b.data();
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(x[mode == 1 ? 0 : i], y[mode == 2 ? 0 : i]);
  }
  return tape.emit(shape, std::move(out), {a, b}, [mode, n, df_da, df_db](Tape::Node& node) {
    Tensor& ta = node.inputs[0];
    Tensor& tb = node.inputs[1];
    auto go = node.output.grad();
    auto x = ta.data();
    auto y = tb.data();
    if (ta.requires_grad()) {
      auto ga = ta.mutable_grad();
      if (mode == 1) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += go[i] * df_da(x[0], y[i]);
        ga[0] += static_cast<float>(acc);
      } else {
        for (std::size_t i = 0; i < n; ++i) ga[i] += go[i] * df_da(x[i], y[mode == 2 ? 0 : i]);
      }
    }
    if (tb.requires_grad()) {
      auto gb = tb.mutable_grad();
      if (mode == 2) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += go[i] * df_db(x[i], y[0]);
        gb[0] += static_cast<float>(acc);
      } else {
        for (std::size_t i = 0; i < n; ++i) gb[i] += go[i] * df_db(x[mode == 1 ? 0 : i], y[i]);
      }
    }
  });
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(
      tape, a, b, "add", [](float x, float y) { return x + y; },
      [](float, float) { return 1.0f; }, [](float, float) { return 1.0f; });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(
      tape, a, b, "sub", [](float x, float y) { return x - y; },
      [](float, float) { return 1.0f; }, [](float, float) { return -1.0f; });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(
      tape, a, b, "mul", [](float x, float y) { return x * y; },
      [](float, float y) { return y; }, [](float x, float) { return x; });
}

Tensor scale(Tape& tape, const Tensor& a, float factor) {
  return unary(
      tape, a, [factor](float x) { return factor * x; },
      [factor](float, float) { return factor; });
}

Tensor tanh(Tape& tape, const Tensor& a) {
  return unary(
      tape, a, [](float x) { return std::tanh(x); },
      [](float, float y) { return 1.0f - y * y; });
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  return unary(
      tape, a,
      [](float x) { return sigmoid_scalar(x); },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor log(Tape& tape, const Tensor& a) {
  for (float v : a.data()) {
    if (!(v > 0.0f)) fail(ErrorKind::kNumericDomain, "log: non-positive input");
  }
  return unary(
      tape, a, [](float x) { return std::log(x); }, [](float x, float) { return 1.0f / x; });
}

Tensor elementwise(Tape& tape, Pointwise kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case Pointwise::kAdd: return add(tape, a, b);
    case Pointwise::kMul: return mul(tape, a, b);
    case Pointwise::kTanh: return tanh(tape, a);
    case Pointwise::kSigmoid: return sigmoid(tape, a);
    case Pointwise::kLog: return log(tape, a);
  }
  fail(ErrorKind::kContract, "elementwise: unknown kind");
}

// ---- softmax family ---------------------------------------------------------

Tensor softmax(Tape& tape, const Tensor& x) {
  require_rank(x, 1, "softmax");
  check_finite(x, "softmax");
  auto in = x.data();
  const float mx = *std::max_element(in.begin(), in.end());
  std::vector<float> out(in.size());
  double total = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v = static_cast<float>(v / total);
  return tape.emit(x.shape(), std::move(out), {x}, [](Tape::Node& node) {
    Tensor& t = node.inputs[0];
    if (!t.requires_grad()) return;
    auto y = node.output.data();
    auto go = node.output.grad();
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += static_cast<double>(go[i]) * y[i];
    auto gi = t.mutable_grad();
    for (std::size_t i = 0; i < y.size(); ++i)
      gi[i] += y[i] * static_cast<float>(go[i] - dot);
  });
}

Tensor log_softmax(Tape& tape, const Tensor& x) {
  require_rank(x, 1, "log_softmax");
  check_finite(x, "log_softmax");
  auto in = x.data();
  const float mx = *std::max_element(in.begin(), in.end());
  double total = 0.0;
  for (float v : in) total += std::exp(static_cast<double>(v - mx));
  const double lse = mx + std::log(total);
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<float>(in[i] - lse);
  return tape.emit(x.shape(), std::move(out), {x}, [](Tape::Node& node) {
    Tensor& t = node.inputs[0];
    if (!t.requires_grad()) return;
    auto y = node.output.data();
    auto go = node.output.grad();
    double gsum = 0.0;
    for (float g : go) gsum += g;
    auto gi = t.mutable_grad();
    for (std::size_t i = 0; i < y.size(); ++i)
      gi[i] += go[i] - static_cast<float>(std::exp(static_cast<double>(y[i])) * gsum);
  });
}

// ---- reductions and indexing --------------------------------------------------

Tensor sum(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  return tape.emit({1}, {static_cast<float>(acc)}, {x}, [](Tape::Node& node) {
    Tensor& t = node.inputs[0];
    if (!t.requires_grad()) return;
    const float g = node.output.grad()[0];
    for (auto& v : t.mutable_grad()) v += g;
  });
}

Tensor pick(Tape& tape, const Tensor& x, std::size_t index) {
  require_rank(x, 1, "pick");
  if (index >= x.numel()) {
    fail(ErrorKind::kDimension, "pick: index " + std::to_string(index) + " out of range for " +
                                    shape_string(x.shape()));
  }
  return tape.emit({1}, {x.data()[index]}, {x}, [index](Tape::Node& node) {
    Tensor& t = node.inputs[0];
    if (t.requires_grad()) t.mutable_grad()[index] += node.output.grad()[0];
  });
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t offset, std::size_t length) {
  require_rank(x, 1, "slice");
  if (length == 0 || offset + length > x.numel()) {
    fail(ErrorKind::kDimension, "slice: [" + std::to_string(offset) + ", +" +
                                    std::to_string(length) + ") out of range for " +
                                    shape_string(x.shape()));
  }
  auto in = x.data();
  std::vector<float> out(in.begin() + offset, in.begin() + offset + length);
  return tape.emit({length}, std::move(out), {x}, [offset](Tape::Node& node) {
    Tensor& t = node.inputs[0];
    if (!t.requires_grad()) return;
    auto go = node.output.grad();
    auto gi = t.mutable_grad();
    for (std::size_t i = 0; i < go.size(); ++i) gi[offset + i] += go[i];
  });
}

Tensor concat(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorKind::kDimension, "concat: no inputs");
  std::vector<float> out;
  for (const auto& p : parts) {
    require_rank(p, 1, "concat");
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const std::size_t n = out.size();
  return tape.emit({n}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                   [](Tape::Node& node) {
                     auto go = node.output.grad();
                     std::size_t offset = 0;
                     for (auto& t : node.inputs) {
                       if (t.requires_grad()) accumulate(t, go.subspan(offset, t.numel()));
                       offset += t.numel();
                     }
                   });
}

Tensor row(Tape& tape, const Tensor& m, std::size_t index) {
  require_rank(m, 2, "row");
  const std::size_t cols = m.dim(1);
  if (index >= m.dim(0)) {
    fail(ErrorKind::kDimension, "row: index " + std::to_string(index) + " out of range for " +
                                    shape_string(m.shape()));
  }
  auto in = m.data().subspan(index * cols, cols);
  return tape.emit({cols}, std::vector<float>(in.begin(), in.end()), {m},
                   [index, cols](Tape::Node& node) {
                     Tensor& t = node.inputs[0];
                     if (!t.requires_grad()) return;
                     auto go = node.output.grad();
                     auto gi = t.mutable_grad();
                     for (std::size_t j = 0; j < cols; ++j) gi[index * cols + j] += go[j];
                   });
}

Tensor rows(Tape& tape, const Tensor& m, std::size_t begin, std::size_t count) {
  require_rank(m, 2, "rows");
  const std::size_t cols = m.dim(1);
  if (count == 0 || begin + count > m.dim(0)) {
    fail(ErrorKind::kDimension, "rows: range out of bounds for " + shape_string(m.shape()));
  }
  auto in = m.data().subspan(begin * cols, count * cols);
  return tape.emit({count, cols}, std::vector<float>(in.begin(), in.end()), {m},
                   [begin, cols](Tape::Node& node) {
                     Tensor& t = node.inputs[0];
                     if (!t.requires_grad()) return;
                     auto go = node.output.grad();
                     auto gi = t.mutable_grad();
                     for (std::size_t i = 0; i < go.size(); ++i) gi[begin * cols + i] += go[i];
                   });
}

Tensor subsample_rows(Tape& tape, const Tensor& m, std::size_t factor) {
  require_rank(m, 2, "subsample_rows");
  if (factor == 0) fail(ErrorKind::kConfig, "subsample_rows: zero factor");
  const std::size_t t_in = m.dim(0), cols = m.dim(1);
  const std::size_t t_out = (t_in + factor - 1) / factor;
  std::vector<float> out(t_out * cols);
  auto in = m.data();
  for (std::size_t i = 0; i < t_out; ++i)
    std::copy_n(in.begin() + i * factor * cols, cols, out.begin() + i * cols);
  return tape.emit({t_out, cols}, std::move(out), {m}, [factor, cols, t_out](Tape::Node& node) {
    Tensor& t = node.inputs[0];
    if (!t.requires_grad()) return;
    auto go = node.output.grad();
    auto gi = t.mutable_grad();
    for (std::size_t i = 0; i < t_out; ++i)
      for (std::size_t j = 0; j < cols; ++j) gi[i * factor * cols + j] += go[i * cols + j];
  });
}

Tensor stack_rows(Tape& tape, std::span<const Tensor> vectors) {
  if (vectors.empty()) fail(ErrorKind::kDimension, "stack_rows: no inputs");
  const std::size_t cols = vectors.front().numel();
  std::vector<float> out;
  out.reserve(cols * vectors.size());
  for (const auto& v : vectors) {
    require_rank(v, 1, "stack_rows");
    if (v.numel() != cols) {
      fail(ErrorKind::kDimension, "stack_rows: ragged rows " + shape_string(v.shape()));
    }
    out.insert(out.end(), v.data().begin(), v.data().end());
  }
  return tape.emit({vectors.size(), cols}, std::move(out),
                   std::vector<Tensor>(vectors.begin(), vectors.end()),
                   [cols](Tape::Node& node) {
                     auto go = node.output.grad();
                     for (std::size_t i = 0; i < node.inputs.size(); ++i)
                       accumulate(node.inputs[i], go.subspan(i * cols, cols));
                   });
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  if (a.dim(0) != b.dim(0)) {
    fail(ErrorKind::kDimension, "concat_cols: row mismatch " + shape_string(a.shape()) +
                                    " and " + shape_string(b.shape()));
  }
  const std::size_t r = a.dim(0), ca = a.dim(1), cb = b.dim(1), c = ca + cb;
  std::vector<float> out(r * c);
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(x.begin() + i * ca, ca, out.begin() + i * c);
    std::copy_n(y.begin() + i * cb, cb, out.begin() + i * c + ca);
  }
  return tape.emit({r, c}, std::move(out), {a, b}, [r, ca, cb, c](Tape::Node& node) {
    auto go = node.output.grad();
    Tensor& ta = node.inputs[0];
    Tensor& tb = node.inputs[1];
    if (ta.requires_grad()) {
      auto g = ta.mutable_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < ca; ++j) g[i * ca + j] += go[i * c + j];
    }
    if (tb.requires_grad()) {
      auto g = tb.mutable_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < cb; ++j) g[i * cb + j] += go[i * c + ca + j];
    }
  });
}

Tensor add_to_rows(Tape& tape, const Tensor& m, const Tensor& v) {
  require_rank(m, 2, "add_to_rows");
  require_rank(v, 1, "add_to_rows");
  const std::size_t r = m.dim(0), c = m.dim(1);
  if (v.numel() != c) {
    fail(ErrorKind::kDimension, "add_to_rows: " + shape_string(m.shape()) + " and " +
                                    shape_string(v.shape()));
  }
  std::vector<float> out(m.data().begin(), m.data().end());
  auto vv = v.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += vv[j];
  return tape.emit(m.shape(), std::move(out), {m, v}, [r, c](Tape::Node& node) {
    auto go = node.output.grad();
    Tensor& tm = node.inputs[0];
    Tensor& tv = node.inputs[1];
    if (tm.requires_grad()) accumulate(tm, go);
    if (tv.requires_grad()) {
      auto g = tv.mutable_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += go[i * c + j];
    }
  });
}

Tensor conv1d_same(Tape& tape, const Tensor& signal, const Tensor& filters) {
  require_rank(signal, 1, "conv1d_same");
  require_rank(filters, 2, "conv1d_same");
  const std::size_t len = signal.numel();
  const std::size_t channels = filters.dim(0), width = filters.dim(1);
  if (width % 2 == 0) {
    fail(ErrorKind::kConfig, "conv1d_same: filter width must be odd, got " + std::to_string(width));
  }
  const auto half = static_cast<std::ptrdiff_t>(width / 2);
  const auto T = static_cast<std::ptrdiff_t>(len);
  auto s = signal.data();
  auto f = filters.data();
  std::vector<float> out(len * channels, 0.0f);
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < channels; ++k) {
      float acc = 0.0f;
      for (std::size_t j = 0; j < width; ++j) {
        const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - half;
        if (src >= 0 && src < T) acc += f[k * width + j] * s[src];
      }
      out[t * channels + k] = acc;
    }
  }
  return tape.emit({len, channels}, std::move(out), {signal, filters},
                   [channels, width, half, T](Tape::Node& node) {
                     Tensor& ts = node.inputs[0];
                     Tensor& tf = node.inputs[1];
                     auto go = node.output.grad();
                     auto s = ts.data();
                     auto f = tf.data();
                     const bool gs = ts.requires_grad(), gf = tf.requires_grad();
                     std::span<float> ds = gs ? ts.mutable_grad() : std::span<float>{};
                     std::span<float> df = gf ? tf.mutable_grad() : std::span<float>{};
                     for (std::ptrdiff_t t = 0; t < T; ++t) {
                       for (std::size_t k = 0; k < channels; ++k) {
                         const float g = go[t * channels + k];
                         for (std::size_t j = 0; j < width; ++j) {
                           const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - half;
                           if (src < 0 || src >= T) continue;
                           if (gs) ds[src] += g * f[k * width + j];
                           if (gf) df[k * width + j] += g * s[src];
                         }
                       }
                     }
                   });
}

// ---- fused LSTM cell --------------------------------------------------------------

Tensor lstm_cell(Tape& tape, const Tensor& gates, const Tensor& cell) {
  require_rank(gates, 1, "lstm_cell");
  require_rank(cell, 1, "lstm_cell");
  const std::size_t u = cell.numel();
  if (gates.numel() != 4 * u) {
    fail(ErrorKind::kDimension, "lstm_cell: gates " + shape_string(gates.shape()) +
                                    " do not match cell " + shape_string(cell.shape()));
  }
  auto a = gates.data();
  auto c = cell.data();
  std::vector<float> out(2 * u);
  for (std::size_t j = 0; j < u; ++j) {
    const float i = sigmoid_scalar(a[j]);
    const float f = sigmoid_scalar(a[u + j]);
    const float g = std::tanh(a[2 * u + j]);
    const float o = sigmoid_scalar(a[3 * u + j]);
    const float c_next = f * c[j] + i * g;
    out[j] = o * std::tanh(c_next);
    out[u + j] = c_next;
  }
  return tape.emit({2 * u}, std::move(out), {gates, cell}, [u](Tape::Node& node) {
    Tensor& tg = node.inputs[0];
    Tensor& tc = node.inputs[1];
    auto a = tg.data();
    auto c = tc.data();
    auto y = node.output.data();
    auto go = node.output.grad();
    const bool want_g = tg.requires_grad(), want_c = tc.requires_grad();
    std::span<float> dg = want_g ? tg.mutable_grad() : std::span<float>{};
    std::span<float> dc = want_c ? tc.mutable_grad() : std::span<float>{};
    for (std::size_t j = 0; j < u; ++j) {
      const float i = sigmoid_scalar(a[j]);
      const float f = sigmoid_scalar(a[u + j]);
      const float g = std::tanh(a[2 * u + j]);
      const float o = sigmoid_scalar(a[3 * u + j]);
      const float tc_next = std::tanh(y[u + j]);
      const float dh = go[j];
      const float dcell = go[u + j] + dh * o * (1.0f - tc_next * tc_next);
      if (want_g) {
        dg[j] += dcell * g * i * (1.0f - i);
        dg[u + j] += dcell * c[j] * f * (1.0f - f);
        dg[2 * u + j] += dcell * i * (1.0f - g * g);
        dg[3 * u + j] += dh * tc_next * o * (1.0f - o);
      }
      if (want_c) dc[j] += dcell * f;
    }
  });
}

}  // namespace dlm
