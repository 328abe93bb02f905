#include "ipn/autodiff.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ipn::ad {

namespace {

enum class OpKind : std::size_t { matmul, affine, mul, tanh, sigmoid, count };

std::array<double, static_cast<std::size_t>(OpKind::count)> g_backward_scale = {1.0, 1.0, 1.0, 1.0,
                                                                                1.0};

double backward_scale(OpKind op) { return g_backward_scale[static_cast<std::size_t>(op)]; }

std::string shape_of(const Tensor& t) {
  std::ostringstream os;
  os << t.rows() << "x" << t.cols();
  return os.str();
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + detail);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), op,
          "shape mismatch " + shape_of(a) + " vs " + shape_of(b));
}

void require_same_tape(const char* op, Var a, Var b) {
  require(a.tape() != nullptr && a.tape() == b.tape(), op, "operands live on different tapes");
}

Tensor scaled(Tensor t, OpKind op) {
  double s = backward_scale(op);
  if (s != 1.0) t *= s;
  return t;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------- Gradients

const Gradients::Entry* Gradients::find(const Parameter& p) const {
  auto it = entries_.find(&p);
  return it == entries_.end() ? nullptr : &it->second;
}

Tensor Gradients::dense(const Parameter& p) const {
  Tensor out = Tensor::Zero(p.value.rows(), p.value.cols());
  if (const Entry* e = find(p)) {
    if (e->dense.size() != 0) out += e->dense;
    for (const auto& [col, g] : e->columns) out.col(col) += g;
  }
  return out;
}

void Gradients::add_dense(const Parameter& p, const Tensor& g) {
  Entry& e = entries_[&p];
  if (e.dense.size() == 0)
    e.dense = g;
  else
    e.dense += g;
}

void Gradients::add_column(const Parameter& p, Index col, const Tensor& g) {
  Entry& e = entries_[&p];
  auto [it, inserted] = e.columns.try_emplace(col, g.col(0));
  if (!inserted) it->second += g.col(0);
}

// --------------------------------------------------------------------- Tape

const Tensor& Tape::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Var Tape::push(Tensor value, bool needs_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), nullptr, needs_grad, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  const Parameter* ptr = &p;
  nodes_.push_back(Node{Tensor(), &p.value, true,
                        [ptr](Tape& t, const Tensor&, const Tensor& g) { t.sink_->add_dense(*ptr, g); }});
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::column(const Parameter& p, Index col) {
  if (col < 0 || col >= p.value.cols())
    throw std::out_of_range(p.name + ": column " + std::to_string(col) + " out of range");
  const Parameter* ptr = &p;
  return push(p.value.col(col), true, [ptr, col](Tape& t, const Tensor&, const Tensor& g) {
    if (ptr->sparse)
      t.sink_->add_column(*ptr, col, g);
    else {
      Tensor full = Tensor::Zero(ptr->value.rows(), ptr->value.cols());
      full.col(col) = g.col(0);
      t.sink_->add_dense(*ptr, full);
    }
  });
}

void Tape::accumulate(Var v, const Tensor& g) {
  Node& n = nodes_[v.id()];
  if (!n.needs_grad) return;
  Tensor& slot = grads_[v.id()];
  if (slot.size() == 0)
    slot = g;
  else
    slot += g;
}

Gradients Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1, got " + shape_of(loss.value()));
  Gradients out;
  sink_ = &out;
  grads_.assign(loss.id() + 1, Tensor());
  grads_[loss.id()] = Tensor::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward || grads_[i].size() == 0) continue;
    n.backward(*this, value_of(i), grads_[i]);
    grads_[i] = Tensor();
  }
  sink_ = nullptr;
  clear();
  return out;
}

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
  param_nodes_.clear();
}

// --------------------------------------------------------------- Operations

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  require(a.cols() == b.rows(), "matmul",
          "inner dimensions disagree " + shape_of(a.value()) + " x " + shape_of(b.value()));
  Tape& t = *a.tape();
  return t.push(a.value() * b.value(), t.needs_grad(a) || t.needs_grad(b),
                [a, b](Tape& t, const Tensor&, const Tensor& g) {
                  if (t.needs_grad(a)) t.accumulate(a, scaled(g * b.value().transpose(), OpKind::matmul));
                  if (t.needs_grad(b)) t.accumulate(b, scaled(a.value().transpose() * g, OpKind::matmul));
                });
}

Var affine(Var W, Var x, Var b) {
  require_same_tape("affine", W, x);
  require_same_tape("affine", W, b);
  require(W.cols() == x.rows(), "affine",
          "W is " + shape_of(W.value()) + " but x is " + shape_of(x.value()));
  require(b.cols() == 1 && b.rows() == W.rows(), "affine",
          "bias is " + shape_of(b.value()) + ", expected " + std::to_string(W.rows()) + "x1");
  Tape& t = *W.tape();
  Tensor out = W.value() * x.value();
  out.colwise() += b.value().col(0);
  return t.push(std::move(out), t.needs_grad(W) || t.needs_grad(x) || t.needs_grad(b),
                [W, x, b](Tape& t, const Tensor&, const Tensor& g) {
                  if (t.needs_grad(W)) t.accumulate(W, scaled(g * x.value().transpose(), OpKind::affine));
                  if (t.needs_grad(x)) t.accumulate(x, scaled(W.value().transpose() * g, OpKind::affine));
                  if (t.needs_grad(b)) t.accumulate(b, scaled(g.rowwise().sum(), OpKind::affine));
                });
}

Var add(Var a, Var b) {
  require_same_tape("add", a, b);
  require_same_shape("add", a.value(), b.value());
  Tape& t = *a.tape();
  return t.push(a.value() + b.value(), t.needs_grad(a) || t.needs_grad(b),
                [a, b](Tape& t, const Tensor&, const Tensor& g) {
                  t.accumulate(a, g);
                  t.accumulate(b, g);
                });
}

Var sub(Var a, Var b) {
  require_same_tape("sub", a, b);
  require_same_shape("sub", a.value(), b.value());
  Tape& t = *a.tape();
  return t.push(a.value() - b.value(), t.needs_grad(a) || t.needs_grad(b),
                [a, b](Tape& t, const Tensor&, const Tensor& g) {
                  t.accumulate(a, g);
                  t.accumulate(b, -g);
                });
}

Var mul(Var a, Var b) {
  require_same_tape("mul", a, b);
  require_same_shape("mul", a.value(), b.value());
  Tape& t = *a.tape();
  return t.push(a.value().cwiseProduct(b.value()), t.needs_grad(a) || t.needs_grad(b),
                [a, b](Tape& t, const Tensor&, const Tensor& g) {
                  if (t.needs_grad(a)) t.accumulate(a, scaled(g.cwiseProduct(b.value()), OpKind::mul));
                  if (t.needs_grad(b)) t.accumulate(b, scaled(g.cwiseProduct(a.value()), OpKind::mul));
                });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  return t.push(a.value() * s, t.needs_grad(a),
                [a, s](Tape& t, const Tensor&, const Tensor& g) { t.accumulate(a, g * s); });
}

Var tanh(Var x) {
  Tape& t = *x.tape();
  Tensor y = x.value().unaryExpr([](double v) { return std::tanh(v); });
  return t.push(std::move(y), t.needs_grad(x), [x](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor d = g.array() * (1.0 - y.array().square());
    t.accumulate(x, scaled(std::move(d), OpKind::tanh));
  });
}

Var sigmoid(Var x) {
  Tape& t = *x.tape();
  Tensor y = x.value().unaryExpr(&stable_sigmoid);
  return t.push(std::move(y), t.needs_grad(x), [x](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor d = g.array() * y.array() * (1.0 - y.array());
    t.accumulate(x, scaled(std::move(d), OpKind::sigmoid));
  });
}

Var concat(std::span<const Var> xs) {
  require(!xs.empty(), "concat", "empty input list");
  Tape& t = *xs.front().tape();
  Index total = 0;
  bool needs = false;
  for (const Var& x : xs) {
    require(x.tape() == &t, "concat", "operands live on different tapes");
    require(x.cols() == 1, "concat", "inputs must be vectors, got " + shape_of(x.value()));
    total += x.rows();
    needs = needs || t.needs_grad(x);
  }
  Tensor out(total, 1);
  Index offset = 0;
  for (const Var& x : xs) {
    out.middleRows(offset, x.rows()) = x.value();
    offset += x.rows();
  }
  std::vector<Var> parts(xs.begin(), xs.end());
  return t.push(std::move(out), needs, [parts = std::move(parts)](Tape& t, const Tensor&, const Tensor& g) {
    Index offset = 0;
    for (const Var& x : parts) {
      if (t.needs_grad(x)) t.accumulate(x, g.middleRows(offset, x.rows()));
      offset += x.rows();
    }
  });
}

Var concat(std::initializer_list<Var> xs) { return concat(std::span<const Var>(xs.begin(), xs.size())); }

Var slice(Var x, Index offset, Index length) {
  require(x.cols() == 1, "slice", "input must be a vector");
  require(offset >= 0 && length > 0 && offset + length <= x.rows(), "slice",
          "range [" + std::to_string(offset) + ", " + std::to_string(offset + length) + ") outside length " +
              std::to_string(x.rows()));
  Tape& t = *x.tape();
  return t.push(x.value().middleRows(offset, length), t.needs_grad(x),
                [x, offset, length](Tape& t, const Tensor&, const Tensor& g) {
                  Tensor full = Tensor::Zero(x.rows(), 1);
                  full.middleRows(offset, length) = g;
                  t.accumulate(x, full);
                });
}

Var sum(Var x) {
  Tape& t = *x.tape();
  Tensor out(1, 1);
  out(0, 0) = x.value().sum();
  return t.push(std::move(out), t.needs_grad(x), [x](Tape& t, const Tensor&, const Tensor& g) {
    t.accumulate(x, Tensor::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var dot(Var a, Var b) {
  require_same_tape("dot", a, b);
  require(a.cols() == 1 && b.cols() == 1 && a.rows() == b.rows(), "dot",
          "expected equal-length vectors, got " + shape_of(a.value()) + " and " + shape_of(b.value()));
  Tape& t = *a.tape();
  Tensor out(1, 1);
  out(0, 0) = a.value().col(0).dot(b.value().col(0));
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                [a, b](Tape& t, const Tensor&, const Tensor& g) {
                  if (t.needs_grad(a)) t.accumulate(a, b.value() * g(0, 0));
                  if (t.needs_grad(b)) t.accumulate(b, a.value() * g(0, 0));
                });
}

Var bce_loss(Var predicted, const Tensor& target) {
  require_same_shape("bce_loss", predicted.value(), target);
  constexpr double kClamp = 1e-12;
  Tape& t = *predicted.tape();
  const double n = static_cast<double>(target.size());
  Tensor p = predicted.value().cwiseMax(kClamp).cwiseMin(1.0 - kClamp);
  double total = 0;
  for (Index i = 0; i < p.size(); ++i)
    total -= target(i) * std::log(p(i)) + (1.0 - target(i)) * std::log(1.0 - p(i));
  Tensor out(1, 1);
  out(0, 0) = total / n;
  return t.push(std::move(out), t.needs_grad(predicted),
                [predicted, target, p = std::move(p), n](Tape& t, const Tensor&, const Tensor& g) {
                  Tensor d = (-(target.array() / p.array()) + (1.0 - target.array()) / (1.0 - p.array())) *
                             (g(0, 0) / n);
                  t.accumulate(predicted, d);
                });
}

Var sigmoid_bce(Var logits, const Tensor& target) {
  require_same_shape("sigmoid_bce", logits.value(), target);
  Tape& t = *logits.tape();
  const Tensor& x = logits.value();
  const double n = static_cast<double>(target.size());
  double total = 0;
  for (Index i = 0; i < x.size(); ++i) total += softplus(x(i)) - target(i) * x(i);
  Tensor out(1, 1);
  out(0, 0) = total / n;
  return t.push(std::move(out), t.needs_grad(logits), [logits, target, n](Tape& t, const Tensor&, const Tensor& g) {
    Tensor d = (logits.value().unaryExpr(&stable_sigmoid) - target) * (g(0, 0) / n);
    t.accumulate(logits, d);
  });
}

Var tanh_mse(Var x, const Tensor& target) {
  require_same_shape("tanh_mse", x.value(), target);
  Tape& t = *x.tape();
  const double n = static_cast<double>(target.size());
  Tensor y = x.value().unaryExpr([](double v) { return std::tanh(v); });
  Tensor out(1, 1);
  out(0, 0) = (y - target).squaredNorm() / n;
  return t.push(std::move(out), t.needs_grad(x), [x, target, y = std::move(y), n](Tape& t, const Tensor&, const Tensor& g) {
    Tensor d = (2.0 * (y - target).array() * (1.0 - y.array().square())) * (g(0, 0) / n);
    t.accumulate(x, d);
  });
}

namespace testing {

void corrupt_backward(std::string_view op, double factor) {
  static constexpr std::array<std::string_view, 5> names = {"matmul", "affine", "mul", "tanh", "sigmoid"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == op) {
      g_backward_scale[i] = factor;
      return;
    }
  }
  throw std::invalid_argument("corrupt_backward: unknown operation '" + std::string(op) + "'");
}

void reset_backward() { g_backward_scale.fill(1.0); }

}  // namespace testing

}  // namespace ipn::ad
