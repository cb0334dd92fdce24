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

#include "avdiar/tensor.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "avdiar/error.h"
#include "avdiar/kernels.h"

namespace avdiar {

namespace {

thread_local Tape* g_current_tape = nullptr;

std::size_t Product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void CheckShape(const Shape& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("tensors must be rank 1 or 2, got " +
                         ShapeToString(shape));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("zero-sized dimension in " + ShapeToString(shape));
  }
}

[[noreturn]] void ThrowMismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       ShapeToString(a.shape()) + " and " +
                       ShapeToString(b.shape()));
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [0, 1) from the (seed, op, element) counter.
double CounterUniform(std::uint64_t seed, std::uint64_t op, std::uint64_t i) {
  std::uint64_t h = SplitMix64(seed ^ SplitMix64(op ^ SplitMix64(i)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

template <typename F>
Tensor Unary(const char* name, const Tensor& x, F forward,
             std::function<void(std::span<const double> in,
                                std::span<const double> out,
                                std::span<const double> dout,
                                std::span<double> din)>
                 backward) {
  std::vector<double> out(x.size());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  return MakeOpResult(name, x.shape(), std::move(out), {&x},
                      [x, backward](detail::Node& node) {
                        auto din = GradSlot(x);
                        if (din.empty()) return;
                        backward(x.data(), node.value, node.grad, din);
                      });
}

}  // namespace

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::FromData(Shape shape, std::vector<double> data) {
  CheckShape(shape);
  if (Product(shape) != data.size()) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + ShapeToString(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(std::move(node));
}

Tensor Tensor::Zeros(Shape shape) { return Filled(std::move(shape), 0.0); }

Tensor Tensor::Filled(Shape shape, double value) {
  CheckShape(shape);
  std::vector<double> data(Product(shape), value);
  return FromData(std::move(shape), std::move(data));
}

Tensor Tensor::Scalar(double value) { return FromData({1}, {value}); }

Tensor Tensor::Identity(std::size_t n) {
  std::vector<double> data(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
  return FromData({n, n}, std::move(data));
}

Tensor Tensor::Parameter(Shape shape, std::vector<double> data) {
  Tensor t = FromData(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  t.node_->is_leaf = true;
  return t;
}

std::size_t Tensor::rows() const {
  return node_->shape.size() == 1 ? 1 : node_->shape[0];
}

std::size_t Tensor::cols() const { return node_->shape.back(); }

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on tensor of shape " + ShapeToString(shape()));
  }
  return node_->value[0];
}

std::vector<double> Tensor::Row(std::size_t r) const {
  const std::size_t c = cols();
  return {node_->value.begin() + r * c, node_->value.begin() + (r + 1) * c};
}

std::span<double> Tensor::mutable_data() {
  if (!node_->is_leaf) throw ContractError("mutable_data() on a non-leaf tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_->is_leaf) throw ContractError("mutable_grad() on a non-leaf tensor");
  return node_->GradBuffer();
}

void Tensor::ZeroGrad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::Detach() const { return FromData(shape(), node_->value); }

// ---- Tape -------------------------------------------------------------------

Tape::Tape() : previous_(g_current_tape) { g_current_tape = this; }

Tape::~Tape() { g_current_tape = previous_; }

Tape* Tape::Current() { return g_current_tape; }

void Tape::Backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        (loss.defined() ? ShapeToString(loss.shape())
                                        : std::string("<undefined>")));
  }
  auto* loss_node = loss.node_.get();
  std::size_t end = nodes_.size();
  while (end > 0 && nodes_[end - 1].get() != loss_node) --end;
  if (end == 0) {
    throw ContractError("loss was not recorded on this tape");
  }
  loss_node->GradBuffer()[0] += 1.0;
  for (std::size_t i = end; i-- > 0;) {
    detail::Node& node = *nodes_[i];
    if (node.grad.empty()) continue;
    node.backward(node);
  }
  for (auto& leaf : leaves_) leaf->GradBuffer();
  for (auto& node : nodes_) {
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

Tensor MakeOpResult(const char* op, Shape shape, std::vector<double> value,
                    std::span<const Tensor* const> parents,
                    std::function<void(detail::Node&)> backward) {
  for (double v : value) {
    if (!std::isfinite(v)) {
      throw ContractError(std::string(op) + " produced a non-finite value");
    }
  }
  Tensor out = Tensor::FromData(std::move(shape), std::move(value));
  Tape* tape = g_current_tape;
  if (tape == nullptr) return out;
  bool needs_grad = false;
  for (const Tensor* p : parents) needs_grad = needs_grad || p->requires_grad();
  if (!needs_grad) return out;
  out.node_->requires_grad = true;
  out.node_->backward = std::move(backward);
  tape->nodes_.push_back(out.node_);
  for (const Tensor* p : parents) {
    if (!p->node_->is_leaf || !p->node_->requires_grad) continue;
    bool seen = false;
    for (auto& leaf : tape->leaves_) seen = seen || leaf == p->node_;
    if (!seen) tape->leaves_.push_back(p->node_);
  }
  return out;
}

void AccumulateGrad(const Tensor& t, std::span<const double> delta) {
  auto slot = GradSlot(t);
  if (slot.empty()) return;
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += delta[i];
}

std::span<double> GradSlot(const Tensor& t) {
  auto* node = const_cast<detail::Node*>(t.node());
  if (!node->requires_grad) return {};
  return node->GradBuffer();
}

// ---- linear algebra ---------------------------------------------------------

Tensor MatMul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) ThrowMismatch("matmul", a, b);
  std::vector<double> out(m * n, 0.0);
  kernels::Active().gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data());
  return MakeOpResult("matmul", {m, n}, std::move(out), {&a, &b},
                      [a, b, m, n, k](detail::Node& node) {
                        const auto& kt = kernels::Active();
                        if (auto da = GradSlot(a); !da.empty()) {
                          kt.gemm_nt(m, k, n, node.grad.data(), b.data().data(), da.data());
                        }
                        if (auto db = GradSlot(b); !db.empty()) {
                          kt.gemm_tn(k, n, m, a.data().data(), node.grad.data(), db.data());
                        }
                      });
}

Tensor MatMulNT(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) ThrowMismatch("matmul_nt", a, b);
  std::vector<double> out(m * n, 0.0);
  kernels::Active().gemm_nt(m, n, k, a.data().data(), b.data().data(), out.data());
  return MakeOpResult("matmul_nt", {m, n}, std::move(out), {&a, &b},
                      [a, b, m, n, k](detail::Node& node) {
                        const auto& kt = kernels::Active();
                        if (auto da = GradSlot(a); !da.empty()) {
                          kt.gemm_nn(m, k, n, node.grad.data(), b.data().data(), da.data());
                        }
                        if (auto db = GradSlot(b); !db.empty()) {
                          kt.gemm_tn(n, k, m, node.grad.data(), a.data().data(), db.data());
                        }
                      });
}

Tensor Transpose(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  auto in = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  return MakeOpResult("transpose", {c, r}, std::move(out), {&x},
                      [x, r, c](detail::Node& node) {
                        auto dx = GradSlot(x);
                        if (dx.empty()) return;
                        for (std::size_t i = 0; i < r; ++i)
                          for (std::size_t j = 0; j < c; ++j)
                            dx[i * c + j] += node.grad[j * r + i];
                      });
}

// ---- elementwise ------------------------------------------------------------

Tensor Add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) ThrowMismatch("add", a, b);
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return MakeOpResult("add", a.shape(), std::move(out), {&a, &b},
                      [a, b](detail::Node& node) {
                        AccumulateGrad(a, node.grad);
                        AccumulateGrad(b, node.grad);
                      });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) ThrowMismatch("sub", a, b);
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return MakeOpResult("sub", a.shape(), std::move(out), {&a, &b},
                      [a, b](detail::Node& node) {
                        AccumulateGrad(a, node.grad);
                        if (auto db = GradSlot(b); !db.empty()) {
                          for (std::size_t i = 0; i < db.size(); ++i) db[i] -= node.grad[i];
                        }
                      });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) ThrowMismatch("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return MakeOpResult("mul", a.shape(), std::move(out), {&a, &b},
                      [a, b](detail::Node& node) {
                        if (auto da = GradSlot(a); !da.empty()) {
                          for (std::size_t i = 0; i < da.size(); ++i) da[i] += node.grad[i] * b[i];
                        }
                        if (auto db = GradSlot(b); !db.empty()) {
                          for (std::size_t i = 0; i < db.size(); ++i) db[i] += node.grad[i] * a[i];
                        }
                      });
}

Tensor AddRowBias(const Tensor& x, const Tensor& bias) {
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.size() != c) ThrowMismatch("add_row_bias", x, bias);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias[j];
  return MakeOpResult("add_row_bias", x.shape(), std::move(out), {&x, &bias},
                      [x, bias, r, c](detail::Node& node) {
                        AccumulateGrad(x, node.grad);
                        if (auto db = GradSlot(bias); !db.empty()) {
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < c; ++j) db[j] += node.grad[i * c + j];
                        }
                      });
}

Tensor Scale(const Tensor& x, double factor) {
  return Unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](auto, auto, auto dout, auto din) {
        for (std::size_t i = 0; i < din.size(); ++i) din[i] += factor * dout[i];
      });
}

Tensor AddScalar(const Tensor& x, double offset) {
  return Unary(
      "add_scalar", x, [offset](double v) { return v + offset; },
      [](auto, auto, auto dout, auto din) {
        for (std::size_t i = 0; i < din.size(); ++i) din[i] += dout[i];
      });
}

Tensor Sigmoid(const Tensor& x) {
  return Unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](auto, auto out, auto dout, auto din) {
        for (std::size_t i = 0; i < din.size(); ++i)
          din[i] += dout[i] * out[i] * (1.0 - out[i]);
      });
}

Tensor Tanh(const Tensor& x) {
  return Unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](auto, auto out, auto dout, auto din) {
        for (std::size_t i = 0; i < din.size(); ++i)
          din[i] += dout[i] * (1.0 - out[i] * out[i]);
      });
}

Tensor Relu(const Tensor& x) {
  return Unary(
      "relu", x, [](double v) { return v > 0 ? v : 0.0; },
      [](auto in, auto, auto dout, auto din) {
        for (std::size_t i = 0; i < din.size(); ++i)
          if (in[i] > 0) din[i] += dout[i];
      });
}

Tensor Exp(const Tensor& x) {
  return Unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](auto, auto out, auto dout, auto din) {
        for (std::size_t i = 0; i < din.size(); ++i) din[i] += dout[i] * out[i];
      });
}

Tensor Log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0)) throw ContractError("log of non-positive value " + std::to_string(v));
  }
  return Unary(
      "log", x, [](double v) { return std::log(v); },
      [](auto in, auto, auto dout, auto din) {
        for (std::size_t i = 0; i < din.size(); ++i) din[i] += dout[i] / in[i];
      });
}

Tensor Clamp(const Tensor& x, double lo, double hi) {
  return Unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](auto in, auto, auto dout, auto din) {
        for (std::size_t i = 0; i < din.size(); ++i)
          if (in[i] > lo && in[i] < hi) din[i] += dout[i];
      });
}

// ---- normalization ----------------------------------------------------------

Tensor Softmax(const Tensor& x, int axis) {
  const std::size_t r = x.rows(), c = x.cols();
  if (axis != 0 && axis != 1) throw DimensionError("softmax axis must be 0 or 1");
  if (x.rank() == 1 && axis != 0) {
    throw DimensionError("softmax on rank-1 tensor " + ShapeToString(x.shape()) +
                         " takes axis 0");
  }
  // Treat as `groups` independent vectors of `len` elements spaced `stride`.
  const bool along_rows = x.rank() == 1 || axis == 1;
  const std::size_t groups = along_rows ? r : c;
  const std::size_t len = along_rows ? c : r;
  const std::size_t stride = along_rows ? 1 : c;
  auto index = [=](std::size_t g, std::size_t i) {
    return along_rows ? g * c + i : i * c + g;
  };
  std::vector<double> out(x.size());
  auto in = x.data();
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -INFINITY;
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, in[index(g, i)]);
    double total = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      out[index(g, i)] = std::exp(in[index(g, i)] - mx);
      total += out[index(g, i)];
    }
    for (std::size_t i = 0; i < len; ++i) out[index(g, i)] /= total;
  }
  (void)stride;
  return MakeOpResult("softmax", x.shape(), std::move(out), {&x},
                      [x, groups, len, index](detail::Node& node) {
                        auto dx = GradSlot(x);
                        if (dx.empty()) return;
                        for (std::size_t g = 0; g < groups; ++g) {
                          double dot = 0.0;
                          for (std::size_t i = 0; i < len; ++i)
                            dot += node.grad[index(g, i)] * node.value[index(g, i)];
                          for (std::size_t i = 0; i < len; ++i) {
                            const std::size_t k = index(g, i);
                            dx[k] += node.value[k] * (node.grad[k] - dot);
                          }
                        }
                      });
}

Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.size() != c) ThrowMismatch("layer_norm", x, gain);
  if (bias.size() != c) ThrowMismatch("layer_norm", x, bias);
  std::vector<double> xhat(x.size()), inv_std(r), out(x.size());
  auto in = x.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += in[i * c + j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = in[i * c + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = i * c + j;
      xhat[k] = (in[k] - mean) * inv_std[i];
      out[k] = xhat[k] * gain[j] + bias[j];
    }
  }
  return MakeOpResult(
      "layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
      [x, gain, bias, r, c, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](detail::Node& node) {
        const auto& dy = node.grad;
        if (auto dg = GradSlot(gain); !dg.empty()) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) dg[j] += dy[i * c + j] * xhat[i * c + j];
        }
        if (auto db = GradSlot(bias); !db.empty()) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) db[j] += dy[i * c + j];
        }
        auto dx = GradSlot(x);
        if (dx.empty()) return;
        const double n = static_cast<double>(c);
        for (std::size_t i = 0; i < r; ++i) {
          double sum_d = 0.0, sum_dx = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double d = dy[i * c + j] * gain[j];
            sum_d += d;
            sum_dx += d * xhat[i * c + j];
          }
          for (std::size_t j = 0; j < c; ++j) {
            const std::size_t k = i * c + j;
            const double d = dy[k] * gain[j];
            dx[k] += inv_std[i] / n * (n * d - sum_d - xhat[k] * sum_dx);
          }
        }
      });
}

// ---- structural -------------------------------------------------------------

Tensor Concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  if (axis != 0 && axis != 1) throw DimensionError("concat axis must be 0 or 1");
  const std::size_t r0 = parts[0].rows(), c0 = parts[0].cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (axis == 0 && p.cols() != c0) ThrowMismatch("concat", parts[0], p);
    if (axis == 1 && p.rows() != r0) ThrowMismatch("concat", parts[0], p);
    total += axis == 0 ? p.rows() : p.cols();
  }
  const std::size_t r = axis == 0 ? total : r0;
  const std::size_t c = axis == 0 ? c0 : total;
  std::vector<double> out(r * c);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    auto in = p.data();
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) {
        const std::size_t oi = axis == 0 ? offset + i : i;
        const std::size_t oj = axis == 0 ? j : offset + j;
        out[oi * c + oj] = in[i * p.cols() + j];
      }
    offset += axis == 0 ? p.rows() : p.cols();
  }
  std::vector<const Tensor*> parents;
  for (const Tensor& p : parts) parents.push_back(&p);
  return MakeOpResult(
      "concat", {r, c}, std::move(out), parents,
      [parts, offsets, axis, c](detail::Node& node) {
        for (std::size_t n = 0; n < parts.size(); ++n) {
          auto dp = GradSlot(parts[n]);
          if (dp.empty()) continue;
          const Tensor& p = parts[n];
          for (std::size_t i = 0; i < p.rows(); ++i)
            for (std::size_t j = 0; j < p.cols(); ++j) {
              const std::size_t oi = axis == 0 ? offsets[n] + i : i;
              const std::size_t oj = axis == 0 ? j : offsets[n] + j;
              dp[i * p.cols() + j] += node.grad[oi * c + oj];
            }
        }
      });
}

Tensor Slice(const Tensor& x, int axis, std::size_t begin, std::size_t end) {
  if (axis != 0 && axis != 1) throw DimensionError("slice axis must be 0 or 1");
  const std::size_t r = x.rows(), c = x.cols();
  const std::size_t extent = axis == 0 ? r : c;
  if (begin >= end || end > extent) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for shape " + ShapeToString(x.shape()));
  }
  const std::size_t orows = axis == 0 ? end - begin : r;
  const std::size_t ocols = axis == 0 ? c : end - begin;
  std::vector<double> out(orows * ocols);
  auto in = x.data();
  for (std::size_t i = 0; i < orows; ++i)
    for (std::size_t j = 0; j < ocols; ++j) {
      const std::size_t si = axis == 0 ? begin + i : i;
      const std::size_t sj = axis == 0 ? j : begin + j;
      out[i * ocols + j] = in[si * c + sj];
    }
  Shape shape = x.rank() == 1 ? Shape{ocols} : Shape{orows, ocols};
  return MakeOpResult("slice", std::move(shape), std::move(out), {&x},
                      [x, axis, begin, orows, ocols, c](detail::Node& node) {
                        auto dx = GradSlot(x);
                        if (dx.empty()) return;
                        for (std::size_t i = 0; i < orows; ++i)
                          for (std::size_t j = 0; j < ocols; ++j) {
                            const std::size_t si = axis == 0 ? begin + i : i;
                            const std::size_t sj = axis == 0 ? j : begin + j;
                            dx[si * c + sj] += node.grad[i * ocols + j];
                          }
                      });
}

Tensor EmbeddingLookup(const Tensor& table, std::span<const std::size_t> ids) {
  if (ids.empty()) throw DimensionError("embedding lookup with no ids");
  const std::size_t c = table.cols();
  std::vector<double> out(ids.size() * c);
  auto in = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= table.rows()) {
      throw DimensionError("embedding id " + std::to_string(ids[i]) +
                           " out of range for table " + ShapeToString(table.shape()));
    }
    std::copy_n(in.begin() + ids[i] * c, c, out.begin() + i * c);
  }
  std::vector<std::size_t> id_copy(ids.begin(), ids.end());
  return MakeOpResult("embedding_lookup", {ids.size(), c}, std::move(out), {&table},
                      [table, ids = std::move(id_copy), c](detail::Node& node) {
                        auto dt = GradSlot(table);
                        if (dt.empty()) return;
                        for (std::size_t i = 0; i < ids.size(); ++i)
                          for (std::size_t j = 0; j < c; ++j)
                            dt[ids[i] * c + j] += node.grad[i * c + j];
                      });
}

Tensor Gather(const Tensor& x, std::span<const std::size_t> flat_indices) {
  if (flat_indices.empty()) throw DimensionError("gather with no indices");
  std::vector<double> out(flat_indices.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (flat_indices[i] >= x.size()) {
      throw DimensionError("gather index " + std::to_string(flat_indices[i]) +
                           " out of range for shape " + ShapeToString(x.shape()));
    }
    out[i] = x[flat_indices[i]];
  }
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  return MakeOpResult("gather", {1, idx.size()}, std::move(out), {&x},
                      [x, idx](detail::Node& node) {
                        auto dx = GradSlot(x);
                        if (dx.empty()) return;
                        for (std::size_t i = 0; i < idx.size(); ++i) dx[idx[i]] += node.grad[i];
                      });
}

Tensor Dropout(const Tensor& x, double rate, const DropoutKey& key) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ContractError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!key.train || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = CounterUniform(key.seed, key.op_index, i) >= rate ? keep_scale : 0.0;
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  return MakeOpResult("dropout", x.shape(), std::move(out), {&x},
                      [x, mask = std::move(mask)](detail::Node& node) {
                        auto dx = GradSlot(x);
                        if (dx.empty()) return;
                        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += node.grad[i] * mask[i];
                      });
}

// ---- reductions -------------------------------------------------------------

Tensor Sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return MakeOpResult("sum", {1}, {total}, {&x}, [x](detail::Node& node) {
    auto dx = GradSlot(x);
    if (dx.empty()) return;
    for (double& d : dx) d += node.grad[0];
  });
}

Tensor Mean(const Tensor& x) {
  return Scale(Sum(x), 1.0 / static_cast<double>(x.size()));
}

}  // namespace avdiar
