#include "ipn/decoder.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace ipn;
using Eigen::MatrixXd;

namespace {

MatrixXd random_matrix(int n, std::mt19937_64& rng, double lo = -3, double hi = 3) {
  return test::uniform(n, n, rng, lo, hi);
}

// Tokens lying on some cycle of the head graph (independent of the library).
std::set<int> cycle_members(const std::vector<int>& head) {
  const int n = static_cast<int>(head.size());
  std::set<int> out;
  for (int i = 1; i <= n; ++i) {
    int u = i;
    for (int steps = 0; steps < n && u != 0; ++steps) {
      u = head[u - 1];
      if (u == i) {
        out.insert(i);
        break;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("merge") {
  MatrixXd zero = MatrixXd::Zero(3, 3);
  MatrixXd m = merge(zero, zero, InferenceMode::p1);
  CHECK(m(0, 1) == 0.5);
  CHECK(std::isnan(m(1, 1)));

  MatrixXd H = MatrixXd::Zero(2, 2), D = MatrixXd::Zero(2, 2);
  H(0, 1) = 2.0;
  CHECK(merge(H, D, InferenceMode::p1)(0, 1) == doctest::Approx(0.7310586).epsilon(1e-7));

  std::mt19937_64 rng(1);
  H = random_matrix(4, rng);
  D = random_matrix(4, rng);
  MatrixXd p2 = merge(H, D, InferenceMode::p2);
  MatrixXd D2 = random_matrix(4, rng);
  MatrixXd p2b = merge(H, D2, InferenceMode::p2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) {
        CHECK(p2(i, j) == p2b(i, j));
        CHECK(merge(H, D, InferenceMode::p3)(i, j) == merge(MatrixXd(MatrixXd::Zero(4, 4)), D, InferenceMode::p3)(i, j));
        CHECK(merge(H, D, InferenceMode::p5)(i, j) == doctest::Approx(1 / (1 + std::exp(-D(j, i)))));
        CHECK(merge(H, D, InferenceMode::p4)(i, j) == doctest::Approx(1 / (1 + std::exp(-H(i, j)))));
        CHECK(merge(H, D, InferenceMode::p1, OutputActivation::tanh)(i, j) ==
              doctest::Approx(std::tanh((H(i, j) + D(j, i)) / 2)));
      }
  // p2/p4 accept an empty dependents matrix, p3/p5 an empty heads matrix
  CHECK(merge(H, MatrixXd(), InferenceMode::p4).rows() == 4);
  CHECK(merge(MatrixXd(), D, InferenceMode::p5).rows() == 4);
  CHECK_THROWS_AS(merge(H, MatrixXd(MatrixXd::Zero(3, 3)), InferenceMode::p1), std::invalid_argument);
}

TEST_CASE("find_top") {
  CHECK(find_top(MatrixXd(MatrixXd::Constant(1, 1, std::nan("")))) == 1);
  MatrixXd m(3, 3);
  m << 0, 0.9, 0.2, 0.08, 0, 0.05, 0.7, 0.1, 0;
  CHECK(find_top(m) == 2);
  MatrixXd same = MatrixXd::Constant(4, 4, 0.3);
  CHECK(find_top(same) == 1);
  // sum aggregation can disagree with max
  MatrixXd s(3, 3);
  s << 0, 0.5, 0.5, 0.6, 0, 0.0, 0.4, 0.4, 0;
  CHECK(find_top(s, RootAggregation::max) == 3);
  CHECK(find_top(s, RootAggregation::sum) == 2);
}

TEST_CASE("greedy_heads") {
  MatrixXd m = MatrixXd::Zero(2, 2);
  auto h = greedy_heads(m, 1);
  CHECK(h == std::vector<int>{0, 1});
  MatrixXd u(3, 3);
  u << 0, 0.2, 0.9, 0.8, 0, 0.1, 0.3, 0.4, 0;
  CHECK(greedy_heads(u, 3) == std::vector<int>{3, 1, 0});
  // ties go to the smallest index
  CHECK(greedy_heads(MatrixXd(MatrixXd::Constant(3, 3, 0.5)), 2) == std::vector<int>{2, 0, 1});
}

TEST_CASE("greedy_heads matches a brute-force row scan on random matrices") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    MatrixXd m = random_matrix(8, rng);
    int top = std::uniform_int_distribution<int>(1, 8)(rng);
    auto h = greedy_heads(m, top);
    for (int i = 0; i < 8; ++i) {
      if (i + 1 == top) {
        CHECK(h[i] == 0);
        continue;
      }
      int best = i == 0 ? 1 : 0;
      for (int j = 0; j < 8; ++j)
        if (j != i && m(i, j) > m(i, best)) best = j;
      CHECK(h[i] == best + 1);
    }
  }
}

TEST_CASE("fix_cycles") {
  SUBCASE("a tree is returned unchanged") {
    MatrixXd m = MatrixXd::Constant(3, 3, 0.5);
    DepTree t = fix_cycles({2, 0, 2}, m, 2);
    CHECK(t.head == std::vector<int>{2, 0, 2});
    CHECK(t.top == 2);
  }
  SUBCASE("two-cycle repaired by reattaching the weakest arc") {
    MatrixXd m = MatrixXd::Zero(3, 3);
    m(0, 1) = 0.8;  // head(1) = 2
    m(1, 0) = 0.6;  // head(2) = 1
    m(1, 2) = 0.1;
    m(0, 2) = 0.05;
    DepTree t = fix_cycles({2, 1, 0}, m, 3);
    CHECK(t.head == std::vector<int>{2, 3, 0});
    CHECK(test::valid_tree(t.head, t.top));
  }
  SUBCASE("precondition violations are rejected") {
    MatrixXd m = MatrixXd::Zero(3, 3);
    CHECK_THROWS_AS(fix_cycles({2, 1, 1}, m, 3), std::invalid_argument);
    CHECK_THROWS_AS(fix_cycles({1, 1, 0}, m, 3), std::invalid_argument);
    CHECK_THROWS_AS(fix_cycles({2, 0}, m, 2), std::invalid_argument);
  }
}

TEST_CASE("decode always yields a tree and only rewires cycle members") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = std::uniform_int_distribution<int>(1, 6)(rng);
    MatrixXd m = merge(random_matrix(n, rng), random_matrix(n, rng), InferenceMode::p1);
    int top = find_top(m);
    auto greedy = greedy_heads(m, top);
    DepTree t = fix_cycles(greedy, m, top);
    REQUIRE(test::valid_tree(t.head, t.top));
    CHECK(t.top == top);
    CHECK(is_well_formed(t));
    std::set<int> cyc = cycle_members(greedy);
    for (int i = 1; i <= n; ++i)
      if (!cyc.count(i)) CHECK(t.head[i - 1] == greedy[i - 1]);
    bool before = false;
    DepTree d = decode(m, RootAggregation::max, &before);
    CHECK(d == t);
    CHECK(before == cyc.empty());
  }
}

TEST_CASE("decoding depends only on score order") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    int n = std::uniform_int_distribution<int>(2, 10)(rng);
    MatrixXd m = random_matrix(n, rng);
    MatrixXd t = m.unaryExpr([](double x) { return x * x * x + x; });
    CHECK(find_top(m) == find_top(t));
    int top = find_top(m);
    CHECK(greedy_heads(m, top) == greedy_heads(t, top));
    CHECK(decode(m) == decode(t));
  }
}

TEST_CASE("tree invariants") {
  CHECK(is_well_formed(DepTree{{0}, 1}));
  CHECK(is_well_formed(DepTree{{2, 0, 2}, 2}));
  CHECK_FALSE(is_well_formed(DepTree{{2, 1, 0}, 3}));  // cycle
  CHECK_FALSE(is_well_formed(DepTree{{0, 0}, 1}));     // two tops
  CHECK_FALSE(is_well_formed(DepTree{{1, 0}, 2}));     // self head
  CHECK_FALSE(is_well_formed(DepTree{{3, 0}, 2}));     // out of range
  CHECK_FALSE(is_well_formed(DepTree{{2, 0}, 1}));     // top field disagrees
  CHECK(is_acyclic(std::vector<int>{2, 0, 2}));
  CHECK_FALSE(is_acyclic(std::vector<int>{2, 1, 0}));
}

TEST_CASE("uas") {
  Sentence g = test::make_sentence({"a", "b", "c", "d", "."}, {2, 0, 2, 3, 2});
  g.tokens[4].pos = ".";
  std::vector<Sentence> gold{g};
  CHECK(uas(gold, std::vector<DepTree>{DepTree{{2, 0, 2, 3, 2}, 2}}).percent() == 100.0);
  UasResult r = uas(gold, std::vector<DepTree>{DepTree{{2, 0, 2, 1, 1}, 2}});
  CHECK(r.total == 4);
  CHECK(r.correct == 3);
  CHECK(r.percent() == 75.0);
  PunctuationPolicy keep;
  keep.exclude = false;
  CHECK(uas(gold, std::vector<DepTree>{DepTree{{2, 0, 2, 1, 1}, 2}}, keep).total == 5);
  // top counts as correct only when gold head is 0
  CHECK(uas(gold, std::vector<DepTree>{DepTree{{0, 1, 2, 3, 2}, 1}}).correct == 2);
  CHECK_THROWS_AS(uas(gold, std::vector<DepTree>{DepTree{{0, 1}, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(uas(gold, std::vector<DepTree>{}), std::invalid_argument);
}

TEST_CASE("inference mode names") {
  for (InferenceMode m : {InferenceMode::p1, InferenceMode::p2, InferenceMode::p3, InferenceMode::p4,
                          InferenceMode::p5})
    CHECK(parse_inference_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_inference_mode("p6"), std::invalid_argument);
}
