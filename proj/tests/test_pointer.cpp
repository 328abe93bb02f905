#include "ipn/pointer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace ipn;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

// Direct evaluation of v . tanh(W [key; query] + b).
double reference_score(const Eigen::VectorXd& q, const Eigen::VectorXd& k, const PointerParams& p) {
  Eigen::VectorXd x(k.size() + q.size());
  x << k, q;
  Eigen::VectorXd a = p.W.value * x + p.b.value;
  double s = 0;
  for (Eigen::Index r = 0; r < a.size(); ++r) s += p.v.value(r) * std::tanh(a(r));
  return s;
}

}  // namespace

TEST_CASE("attention score matches the direct formula") {
  Rng rng(1);
  PointerParams p = PointerParams::init("ptr", 6, 5, rng);
  CHECK(p.W.value.rows() == 5);
  CHECK(p.W.value.cols() == 12);
  CHECK(p.context_dim() == 6);
  CHECK(p.hidden() == 5);
  p.b.value = test::uniform(5, 1, rng);
  p.v.value = test::uniform(5, 1, rng);
  Eigen::VectorXd q = test::uniform(6, 1, rng), k = test::uniform(6, 1, rng);
  CHECK(attention_score(q, k, p) == doctest::Approx(reference_score(q, k, p)).epsilon(1e-13));
  // argument order matters: key comes first in the concatenation
  CHECK(attention_score(q, k, p) != attention_score(k, q, p));
}

TEST_CASE("attention score trivial cases") {
  Rng rng(2);
  PointerParams p = PointerParams::init("ptr", 4, 3, rng);
  Eigen::VectorXd q = test::uniform(4, 1, rng), k = test::uniform(4, 1, rng);
  PointerParams zero_v = p;
  zero_v.v.value.setZero();
  CHECK(attention_score(q, k, zero_v) == 0.0);
  PointerParams zero_w = p;
  zero_w.W.value.setZero();
  zero_w.b.value.setZero();
  CHECK(attention_score(q, k, zero_w) == 0.0);
  CHECK_THROWS_AS(attention_score(Eigen::VectorXd::Zero(3), k, p), std::invalid_argument);
}

TEST_CASE("attention score gradient") {
  Rng rng(3);
  PointerParams p = PointerParams::init("ptr", 4, 3, rng);
  p.b.value = test::uniform(3, 1, rng);
  ad::Parameter q("q", test::uniform(4, 1, rng)), k("k", test::uniform(4, 1, rng));
  auto f = [&](Tape& t) { return attention_score(t.param(q), t.param(k), p); };
  CHECK(test::fd_worst(f, {&p.W, &p.b, &p.v, &q, &k}) < 1e-4);
}

TEST_CASE("score_all equals pairwise attention scores exactly") {
  Rng rng(4);
  PointerParams p = PointerParams::init("ptr", 6, 5, rng);
  p.b.value = test::uniform(5, 1, rng);
  for (int n : {1, 2, 5, 9}) {
    std::vector<Eigen::VectorXd> ctx;
    Tape tape;
    std::vector<Var> vars;
    for (int i = 0; i < n; ++i) {
      ctx.push_back(test::uniform(6, 1, rng));
      vars.push_back(tape.constant(ctx.back()));
    }
    Tensor m = score_all(tape, vars, p).value();
    REQUIRE(m.rows() == n);
    REQUIRE(m.cols() == n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) CHECK(m(i, j) == attention_score(ctx[i], ctx[j], p));
    // pure: re-evaluation is bit-identical
    CHECK(score_all(tape, vars, p).value() == m);
  }
}

TEST_CASE("score_all depends only on its own parameters") {
  Rng rng(5);
  PointerParams a = PointerParams::init("a", 4, 3, rng), b = PointerParams::init("b", 4, 3, rng);
  Tape tape;
  std::vector<Var> vars{tape.constant(test::uniform(4, 1, rng)), tape.constant(test::uniform(4, 1, rng))};
  Tensor before = score_all(tape, vars, a).value();
  b.W.value.setConstant(7.0);
  CHECK(score_all(tape, vars, a).value() == before);
}

TEST_CASE("score_all gradient") {
  Rng rng(6);
  PointerParams p = PointerParams::init("ptr", 3, 4, rng);
  p.b.value = test::uniform(4, 1, rng);
  ad::Parameter c0("c0", test::uniform(3, 1, rng)), c1("c1", test::uniform(3, 1, rng)),
      c2("c2", test::uniform(3, 1, rng));
  Tensor target = Tensor::Zero(3, 3);
  target(0, 2) = target(1, 2) = 1;
  auto f = [&](Tape& t) {
    std::vector<Var> ctx{t.param(c0), t.param(c1), t.param(c2)};
    return ad::sigmoid_bce(score_all(t, ctx, p), target);
  };
  CHECK(test::fd_worst(f, {&p.W, &p.b, &p.v, &c0, &c1, &c2}) < 1e-4);
}

TEST_CASE("target matrices") {
  Sentence s = test::make_sentence({"a", "b"}, {2, 0});
  Tensor h = target_matrix(s, Orientation::heads);
  Tensor d = target_matrix(s, Orientation::dependents);
  Tensor eh(2, 2), ed(2, 2);
  eh << 0, 1, 0, 0;
  ed << 0, 0, 1, 0;
  CHECK(h == eh);
  CHECK(d == ed);
  CHECK_THROWS_AS(target_matrix(test::make_sentence({"a", "b"}), Orientation::heads), std::invalid_argument);
}

TEST_CASE("row sums and diagonal of targets") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    int n = std::uniform_int_distribution<int>(1, 12)(rng);
    std::vector<std::string> forms(n, "w");
    Sentence s = test::make_sentence(forms, test::random_tree(n, rng));
    Tensor h = target_matrix(s, Orientation::heads);
    int zero_rows = 0;
    for (int i = 0; i < n; ++i) {
      double r = h.row(i).sum();
      CHECK((r == 0.0 || r == 1.0));
      zero_rows += r == 0.0;
    }
    CHECK(zero_rows == 1);
    CHECK(h.diagonal().isZero());
    CHECK(target_matrix(s, Orientation::dependents).diagonal().isZero());
  }
}
