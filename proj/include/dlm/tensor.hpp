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

#ifndef DLM_TENSOR_HPP
#define DLM_TENSOR_HPP

// Define-by-run reverse-mode autodiff over small float tensors.
//
// A Tensor is a shared handle to row-major float storage. Leaves are created
// directly; every other tensor is produced by an op recorded on a Tape. A tape
// is rebuilt for each forward pass and must not be shared between threads.
//
// Only rank-1 and rank-2 tensors are supported by the ops, and broadcasting is
// limited to scalar-vs-tensor. Row-wise bias addition is the explicit
// add_to_rows op.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dlm {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tape;

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // non-empty iff requires_grad
  bool requires_grad = false;
  std::int64_t node = -1;
  const Tape* tape = nullptr;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> values,
                          bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const float> data() const { return impl_->data; }
  std::span<float> mutable_data() { return impl_->data; }
  float item() const;
  float at(std::size_t i) const { return impl_->data.at(i); }
  float at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return impl_->requires_grad; }
  std::span<const float> grad() const { return impl_->grad; }
  std::span<float> mutable_grad() { return impl_->grad; }
  void zero_grad();

  // Producing tape node, or nullopt for leaves.
  std::optional<std::size_t> node_id() const;
  bool is_leaf() const { return impl_->node < 0; }

  // Fresh leaf holding a copy of the values.
  Tensor clone(bool requires_grad = false) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  detail::TensorImpl* impl() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;

  friend class Tape;
};

class Tape {
 public:
  // A non-recording tape evaluates ops without building a graph; its outputs
  // never require gradients. Used for inference.
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Accumulates dLoss/dLeaf into every reachable leaf that requires grad.
  // Intermediate gradients are reset first, so repeated calls are independent
  // apart from leaf accumulation.
  void backward(const Tensor& loss);

  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void(Node&)> backward;
  };

  // Op implementation hook: builds the output tensor and, when recording and
  // some input requires grad, appends a node with the given backward rule.
  Tensor emit(Shape shape, std::vector<float> values, std::vector<Tensor> inputs,
              std::function<void(Node&)> backward);

 private:
  bool record_;
  std::vector<Node> nodes_;
};

// ---- ops ----------------------------------------------------------------

// [m x k] * [k x n] -> [m x n]; [m x k] * [k] -> [m].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);

// Pointwise; operands must have equal shapes or one must hold one element.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, float factor);
Tensor tanh(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor log(Tape& tape, const Tensor& a);

enum class Pointwise { kAdd, kMul, kTanh, kSigmoid, kLog };
// Dispatcher over the pointwise family; `b` is ignored for unary kinds.
Tensor elementwise(Tape& tape, Pointwise kind, const Tensor& a,
                   const Tensor& b = {});

// Rank-1 only. Max-subtracted; non-finite input is a numeric-domain error.
Tensor softmax(Tape& tape, const Tensor& x);
Tensor log_softmax(Tape& tape, const Tensor& x);

// Scalar sum, accumulated in double.
Tensor sum(Tape& tape, const Tensor& x);
// Scalar x[index].
Tensor pick(Tape& tape, const Tensor& x, std::size_t index);

Tensor slice(Tape& tape, const Tensor& x, std::size_t offset, std::size_t length);
Tensor concat(Tape& tape, std::span<const Tensor> parts);

Tensor row(Tape& tape, const Tensor& m, std::size_t index);
Tensor rows(Tape& tape, const Tensor& m, std::size_t begin, std::size_t count);
// Keeps rows 0, factor, 2*factor, ...; output has ceil(T / factor) rows.
Tensor subsample_rows(Tape& tape, const Tensor& m, std::size_t factor);
Tensor stack_rows(Tape& tape, std::span<const Tensor> vectors);
Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);
// m[T x n] + v[n] added to every row.
Tensor add_to_rows(Tape& tape, const Tensor& m, const Tensor& v);

// signal[T], filters[K x w] -> [T x K], zero padded so the length is kept:
// out[t][k] = sum_j filters[k][j] * signal[t + j - w/2]. w must be odd.
Tensor conv1d_same(Tape& tape, const Tensor& signal, const Tensor& filters);

// Fused LSTM nonlinearity. gates [4u] holds pre-activations ordered
// (input, forget, cell, output); cell [u] is the previous cell state.
// Returns [2u] = (h', c') with c' = f*c + i*g and h' = o*tanh(c').
Tensor lstm_cell(Tape& tape, const Tensor& gates, const Tensor& cell);

}  // namespace dlm

#endif  // DLM_TENSOR_HPP
