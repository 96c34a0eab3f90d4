#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "xdet/geometry.hpp"  // for real

namespace xdet {

class Rng;

namespace ad {

struct Node {
  std::vector<int> shape;
  std::vector<real> value;
  std::vector<real> grad;  // allocated on demand, same length as value
  bool requires_grad = false;

  std::size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), real(0));
  }
};

}  // namespace ad

std::string shape_str(const std::vector<int>& shape);

// Handle to a value node. Ops executed while a Tape is active record a
// backward closure; outside a tape they are plain numeric evaluation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, real fill, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<real> values,
                     bool requires_grad = false);
  static Tensor scalar(real v, bool requires_grad = false);
  // He-style init for weight matrices/kernels: N(0, scale^2).
  static Tensor randn(std::vector<int> shape, real scale, Rng& rng, bool requires_grad = true);

  bool defined() const { return static_cast<bool>(n_); }
  const std::vector<int>& shape() const { return n_->shape; }
  std::size_t size() const { return n_->value.size(); }
  bool requires_grad() const { return n_->requires_grad; }

  const std::vector<real>& values() const { return n_->value; }
  std::vector<real>& values() { return n_->value; }
  const std::vector<real>& grad() const;
  real item() const;

  // Value copy that never participates in differentiation.
  Tensor detached() const;

  ad::Node* node() const { return n_.get(); }
  std::shared_ptr<ad::Node> node_ptr() const { return n_; }

  // Internal: wrap an existing node. Used by the op implementations.
  static Tensor adopt(std::shared_ptr<ad::Node> n) { return Tensor(std::move(n)); }

 private:
  explicit Tensor(std::shared_ptr<ad::Node> n) : n_(std::move(n)) {}
  std::shared_ptr<ad::Node> n_;
};

// Ordered record of executed differentiable ops. backward() walks it exactly
// once in reverse execution order, then clears it. Confined to one thread.
class Tape {
 public:
  // Rejects non-scalar losses and an empty tape. Gradients accumulate
  // additively into every reachable requires_grad node.
  void backward(const Tensor& scalar_loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  struct Entry {
    std::shared_ptr<ad::Node> out;
    std::function<void()> back;
  };
  std::vector<Entry> entries_;
};

// RAII scope making a tape current for this thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

Tape* current_tape();

// ---- differentiable ops ------------------------------------------------
// Elementwise ops broadcast the second operand over leading dims when its
// shape is a suffix of the first operand's shape (bias adds, row scaling).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real c);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]

// 3x3 kernels, zero padding 1, stride 1 or 2. x: [H,W,Cin],
// w: [3,3,Cin,Cout], bias: [Cout]. Output [Ho,Wo,Cout] with
// Ho = (H + 2 - 3)/stride + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor log_t(const Tensor& x);
Tensor softmax(const Tensor& x);      // last axis
Tensor log_softmax(const Tensor& x);  // last axis

Tensor sum(const Tensor& x);       // -> scalar
Tensor mean_all(const Tensor& x);  // -> scalar

// Mean over all leading dims, keeping the channel axis: [..,C] -> [C].
Tensor global_mean(const Tensor& x);

// Region pooling: mean of the rows of x (viewed as [cells, C]) named by each
// group. x: [H,W,C], groups hold flat cell indices y*W+x. Output [K,C].
Tensor roi_mean(const Tensor& x, const std::vector<std::vector<int>>& groups);

// Stack equally-shaped tensors along a new leading axis.
Tensor stack0(const std::vector<Tensor>& parts);

Tensor reshape(const Tensor& x, std::vector<int> new_shape);

// Constant one-hot vector; not differentiable by construction.
Tensor one_hot(int index, int n);

// Forward identity; backward multiplies the incoming gradient by -beta.
Tensor grad_reverse(const Tensor& x, real beta);

// ---- value-level helpers (no tape participation) ------------------------

std::vector<real> softmax_values(const std::vector<real>& logits);
int argmax_index(const std::vector<real>& v);  // ties -> lowest index

}  // namespace xdet
