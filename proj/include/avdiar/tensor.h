// Copyright 2026 The avdiar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense row-major double tensors with tape-based reverse-mode
// differentiation.
//
// Tensors are rank 1 or rank 2. A rank-1 tensor of length n behaves as a
// 1 x n row wherever an op needs a matrix. Values are immutable once an op
// has produced them; only Parameter leaves expose mutable storage, for the
// optimizer.
//
// Gradients are recorded only while a Tape is alive on the current thread
// and at least one input of an op requires a gradient:
//
//   Tape tape;
//   Tensor loss = Sum(Sigmoid(MatMul(x, w)));
//   tape.Backward(loss);        // w.grad() now holds d loss / d w
//
// Without a live tape every op is a plain forward computation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace avdiar {

using Shape = std::vector<std::size_t>;

std::string ShapeToString(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = false;
  // Propagates this node's grad into its parents.
  std::function<void(Node&)> backward;

  std::span<double> GradBuffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor FromData(Shape shape, std::vector<double> data);
  static Tensor Zeros(Shape shape);
  static Tensor Filled(Shape shape, double value);
  static Tensor Scalar(double value);
  static Tensor Identity(std::size_t n);
  // A trainable leaf. Its gradient accumulates across Backward calls until
  // ZeroGrad.
  static Tensor Parameter(Shape shape, std::vector<double> data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  double operator()(std::size_t r, std::size_t c) const {
    return node_->value[r * cols() + c];
  }
  double operator[](std::size_t i) const { return node_->value[i]; }
  // Value of a single-element tensor.
  double item() const;
  std::vector<double> Row(std::size_t r) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }
  // Empty until a Backward reaches this tensor.
  std::span<const double> grad() const { return node_->grad; }

  // Parameter leaves only.
  std::span<double> mutable_data();
  std::span<double> mutable_grad();
  void ZeroGrad();

  // Returns a constant tensor sharing no state with this one.
  Tensor Detach() const;

  const detail::Node* node() const { return node_.get(); }

 private:
  friend Tensor MakeOpResult(const char*, Shape, std::vector<double>,
                             std::span<const Tensor* const>,
                             std::function<void(detail::Node&)>);
  friend class Tape;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Records differentiable ops executed on this thread while alive. Tapes
// nest; the innermost one records.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Runs the recorded ops in exact reverse order starting from `loss`,
  // which must be a single-element tensor recorded on this tape. Every
  // Parameter that participated receives a gradient buffer of its own
  // shape, zero if unreachable.
  void Backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

  static Tape* Current();

 private:
  friend Tensor MakeOpResult(const char*, Shape, std::vector<double>,
                             std::span<const Tensor* const>,
                             std::function<void(detail::Node&)>);
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::vector<std::shared_ptr<detail::Node>> leaves_;
  Tape* previous_;
};

// Builds an op output. `backward` is attached (and the node recorded) only
// when a tape is live and some parent requires a gradient. Throws
// ContractError naming `op` if any value is not finite.
Tensor MakeOpResult(const char* op, Shape shape, std::vector<double> value,
                    std::span<const Tensor* const> parents,
                    std::function<void(detail::Node&)> backward);
inline Tensor MakeOpResult(const char* op, Shape shape, std::vector<double> value,
                           std::initializer_list<const Tensor*> parents,
                           std::function<void(detail::Node&)> backward) {
  return MakeOpResult(op, std::move(shape), std::move(value),
                      std::span<const Tensor* const>(parents.begin(), parents.size()),
                      std::move(backward));
}

// Accumulates `delta` into t's gradient if t takes part in differentiation.
void AccumulateGrad(const Tensor& t, std::span<const double> delta);
// Writable gradient slot of t, or an empty span if t needs none.
std::span<double> GradSlot(const Tensor& t);

struct DropoutKey {
  bool train = false;
  std::uint64_t seed = 0;
  std::uint64_t op_index = 0;
};

// ---- ops -------------------------------------------------------------------

Tensor MatMul(const Tensor& a, const Tensor& b);
// a * b^T
Tensor MatMulNT(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& x);

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
// x[r][c] + bias[c]; bias has x.cols() elements.
Tensor AddRowBias(const Tensor& x, const Tensor& bias);
Tensor Scale(const Tensor& x, double factor);
Tensor AddScalar(const Tensor& x, double offset);

Tensor Sigmoid(const Tensor& x);
Tensor Tanh(const Tensor& x);
Tensor Relu(const Tensor& x);
Tensor Exp(const Tensor& x);
Tensor Log(const Tensor& x);
// Gradient passes only where lo < x < hi.
Tensor Clamp(const Tensor& x, double lo, double hi);

// axis 1 normalizes each row, axis 0 each column. Rank-1 input accepts
// axis 0 only and normalizes the whole vector.
Tensor Softmax(const Tensor& x, int axis);
// Per-row normalization followed by gain and bias (both of length cols).
Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps = 1e-5);

Tensor Concat(const std::vector<Tensor>& parts, int axis);
// Half-open range [begin, end) along `axis`.
Tensor Slice(const Tensor& x, int axis, std::size_t begin, std::size_t end);
// Gathers rows of `table` by index.
Tensor EmbeddingLookup(const Tensor& table, std::span<const std::size_t> ids);
// Flat-index gather into a 1 x k row.
Tensor Gather(const Tensor& x, std::span<const std::size_t> flat_indices);

Tensor Dropout(const Tensor& x, double rate, const DropoutKey& key);

Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);

}  // namespace avdiar
