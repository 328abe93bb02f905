#include "ipn/pointer.hpp"

#include <cmath>
#include <stdexcept>

namespace ipn {

using ad::Index;
using ad::Parameter;
using ad::Tensor;
using ad::Var;
using Eigen::VectorXd;

namespace {

// Shared by the value-only and the recorded paths so both produce the same bits.
VectorXd hidden_activation(const VectorXd& key_proj, const VectorXd& query_proj, const Tensor& b) {
  VectorXd a = key_proj + query_proj + b.col(0);
  return a.unaryExpr([](double x) { return std::tanh(x); });
}

void require_dims(const PointerParams& p, Index query, Index key) {
  if (query != p.context_dim() || key != p.context_dim())
    throw std::invalid_argument("attention_score: context dimension " + std::to_string(p.context_dim()) +
                                " expected, got query " + std::to_string(query) + " and key " +
                                std::to_string(key));
}

}  // namespace

PointerParams PointerParams::init(const std::string& name, Index context_dim, Index hidden, Rng& rng) {
  return PointerParams{Parameter(name + ".W", glorot(hidden, 2 * context_dim, rng)),
                       Parameter(name + ".b", Tensor::Zero(hidden, 1)),
                       Parameter(name + ".v", glorot(hidden, 1, rng))};
}

double attention_score(const VectorXd& query, const VectorXd& key, const PointerParams& params) {
  require_dims(params, query.size(), key.size());
  const Index d = params.context_dim();
  VectorXd key_proj = params.W.value.leftCols(d) * key;
  VectorXd query_proj = params.W.value.rightCols(d) * query;
  return params.v.value.col(0).dot(hidden_activation(key_proj, query_proj, params.b.value));
}

Var attention_score(Var query, Var key, const PointerParams& params) {
  require_dims(params, query.rows(), key.rows());
  ad::Tape& tape = *query.tape();
  Var hidden = ad::tanh(ad::affine(tape.param(params.W), ad::concat({key, query}), tape.param(params.b)));
  return ad::dot(tape.param(params.v), hidden);
}

Var score_all(ad::Tape& tape, std::span<const Var> contexts, const PointerParams& params) {
  if (contexts.empty()) throw std::invalid_argument("score_all: no context vectors");
  const Index n = static_cast<Index>(contexts.size());
  const Index d = params.context_dim();
  const Index hdim = params.hidden();
  for (const Var& c : contexts) require_dims(params, c.rows(), c.rows());

  Var W = tape.param(params.W);
  Var b = tape.param(params.b);
  Var v = tape.param(params.v);

  std::vector<VectorXd> key_proj(n), query_proj(n);
  for (Index j = 0; j < n; ++j) {
    const VectorXd ctx = contexts[j].value().col(0);
    key_proj[j] = params.W.value.leftCols(d) * ctx;
    query_proj[j] = params.W.value.rightCols(d) * ctx;
  }
  // hidden activations for pair (i, j) live in column i * n + j
  Tensor z(hdim, n * n);
  Tensor scores(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      VectorXd zij = hidden_activation(key_proj[j], query_proj[i], params.b.value);
      scores(i, j) = params.v.value.col(0).dot(zij);
      z.col(i * n + j) = zij;
    }

  bool needs = tape.needs_grad(W) || tape.needs_grad(b) || tape.needs_grad(v);
  for (const Var& c : contexts) needs = needs || tape.needs_grad(c);
  std::vector<Var> ctx(contexts.begin(), contexts.end());

  return tape.push(std::move(scores), needs,
                   [W, b, v, ctx = std::move(ctx), z = std::move(z), n, d, hdim](ad::Tape& t, const Tensor&,
                                                                                 const Tensor& g) {
                     const Tensor& Wv = W.value();
                     const VectorXd vv = v.value().col(0);
                     Tensor dv = Tensor::Zero(hdim, 1);
                     Tensor db = Tensor::Zero(hdim, 1);
                     Tensor dkey = Tensor::Zero(hdim, n);    // per key token
                     Tensor dquery = Tensor::Zero(hdim, n);  // per query token
                     for (Index i = 0; i < n; ++i)
                       for (Index j = 0; j < n; ++j) {
                         const double gij = g(i, j);
                         if (gij == 0.0) continue;
                         auto zij = z.col(i * n + j);
                         dv.col(0) += gij * zij;
                         VectorXd da = gij * vv.cwiseProduct((1.0 - zij.array().square()).matrix());
                         dkey.col(j) += da;
                         dquery.col(i) += da;
                       }
                     db.col(0) = dkey.rowwise().sum();
                     Tensor C(d, n);
                     for (Index j = 0; j < n; ++j) C.col(j) = ctx[j].value().col(0);
                     if (t.needs_grad(W)) {
                       Tensor dW(hdim, 2 * d);
                       dW.leftCols(d) = dkey * C.transpose();
                       dW.rightCols(d) = dquery * C.transpose();
                       t.accumulate(W, dW);
                     }
                     if (t.needs_grad(b)) t.accumulate(b, db);
                     if (t.needs_grad(v)) t.accumulate(v, dv);
                     Tensor dC = Wv.leftCols(d).transpose() * dkey + Wv.rightCols(d).transpose() * dquery;
                     for (Index j = 0; j < n; ++j)
                       if (t.needs_grad(ctx[j])) t.accumulate(ctx[j], dC.col(j));
                   });
}

Eigen::MatrixXd target_matrix(const Sentence& sentence, Orientation orientation) {
  const Index n = static_cast<Index>(sentence.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const Token& tok = sentence.tokens[i];
    if (!tok.head) throw std::invalid_argument("target_matrix: token " + std::to_string(tok.index) + " has no gold head");
    const int head = *tok.head;
    if (head < 0 || head > n || head == tok.index)
      throw std::invalid_argument("target_matrix: token " + std::to_string(tok.index) + " has invalid head " +
                                  std::to_string(head));
    if (head == 0) continue;
    if (orientation == Orientation::heads)
      t(i, head - 1) = 1.0;
    else
      t(head - 1, i) = 1.0;
  }
  return t;
}

}  // namespace ipn
