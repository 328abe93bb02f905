#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ipn::ad {

// Every quantity is a dense column-major double matrix; vectors are n x 1.
using Tensor = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// A named trainable tensor. Sparse parameters (embedding tables) store one
/// vector per column and only receive gradient for the columns looked up.
struct Parameter {
  std::string name;
  Tensor value;
  bool sparse = false;

  Parameter() = default;
  Parameter(std::string name, Tensor value, bool sparse = false)
      : name(std::move(name)), value(std::move(value)), sparse(sparse) {}
};

/// Gradients gathered by one backward pass, keyed by parameter identity.
class Gradients {
 public:
  struct Entry {
    Tensor dense;                       // empty for sparse parameters
    std::map<Index, Vector> columns;    // sparse parameters only
  };

  bool contains(const Parameter& p) const { return entries_.count(&p) != 0; }
  const Entry* find(const Parameter& p) const;
  /// Dense view of the gradient (zeros where nothing flowed).
  Tensor dense(const Parameter& p) const;
  std::size_t size() const { return entries_.size(); }

  void add_dense(const Parameter& p, const Tensor& g);
  void add_column(const Parameter& p, Index col, const Tensor& g);

 private:
  std::unordered_map<const Parameter*, Entry> entries_;
};

class Tape;

/// Handle to a node on a tape. Valid until the tape is cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of forward operations. Nodes are appended in evaluation
/// order, so reverse insertion order is a valid topological order.
class Tape {
 public:
  /// Receives the node's own value and its upstream gradient.
  using Backward = std::function<void(Tape&, const Tensor& value, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(const Parameter& p);
  /// One column of a (typically sparse) parameter.
  Var column(const Parameter& p, Index col);

  /// Appends an operation node. `needs_grad` should be true iff any input does.
  Var push(Tensor value, bool needs_grad, Backward backward);
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }

  /// Adds `g` into the pending gradient of node `v` during backward.
  void accumulate(Var v, const Tensor& g);

  /// Reverse sweep from a 1x1 loss. Releases all nodes afterwards.
  Gradients backward(Var loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }
  std::size_t capacity() const { return nodes_.capacity(); }

  const Tensor& value_of(std::size_t id) const;

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;  // parameter leaves borrow storage
    bool needs_grad = false;
    Backward backward;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  Gradients* sink_ = nullptr;
};

inline const Tensor& Var::value() const { return tape_->value_of(id_); }

// Elementary operations. Shape errors throw std::invalid_argument.
Var matmul(Var a, Var b);
Var affine(Var W, Var x, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var tanh(Var x);
Var sigmoid(Var x);
Var concat(std::span<const Var> xs);
Var concat(std::initializer_list<Var> xs);
Var slice(Var x, Index offset, Index length);
Var sum(Var x);
Var dot(Var a, Var b);

/// Mean binary cross-entropy of probabilities against 0/1 targets.
/// Predictions are clamped to [1e-12, 1 - 1e-12].
Var bce_loss(Var predicted, const Tensor& target);
/// sigmoid followed by bce_loss, fused: stable for large |logit|.
Var sigmoid_bce(Var logits, const Tensor& target);
/// Mean squared error between tanh(x) and the targets.
Var tanh_mse(Var x, const Tensor& target);

double stable_sigmoid(double x);

namespace testing {
// Negative-control hook: multiplies the backward contribution of one
// operation kind by `factor`. Names: matmul, affine, mul, tanh, sigmoid.
void corrupt_backward(std::string_view op, double factor);
void reset_backward();
}  // namespace testing

}  // namespace ipn::ad
