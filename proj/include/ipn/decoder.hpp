#pragma once

#include "ipn/autodiff.hpp"
#include "ipn/corpus.hpp"
#include "ipn/pointer.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipn {

/// Parser configurations: p1 averages both nets, p2/p3 use one net of a
/// jointly trained model, p4/p5 are single-task models.
enum class InferenceMode { p1, p2, p3, p4, p5 };
enum class RootAggregation { max, sum };

std::string to_string(InferenceMode mode);
InferenceMode parse_inference_mode(const std::string& s);

inline bool mode_uses_heads(InferenceMode m) {
  return m == InferenceMode::p1 || m == InferenceMode::p2 || m == InferenceMode::p4;
}
inline bool mode_uses_deps(InferenceMode m) {
  return m == InferenceMode::p1 || m == InferenceMode::p3 || m == InferenceMode::p5;
}

/// head[i] is the 1-based head of token i + 1, 0 for the top token.
struct DepTree {
  std::vector<int> head;
  int top = 0;

  std::size_t size() const { return head.size(); }
  bool operator==(const DepTree&) const = default;
};

/// Follows head chains; true iff every token reaches the top.
bool is_acyclic(std::span<const int> heads);
/// Empty when `tree` is a well-formed dependency tree, else the first violation.
std::optional<std::string> tree_violation(const DepTree& tree);
inline bool is_well_formed(const DepTree& tree) { return !tree_violation(tree); }

namespace detail {

template <typename Scalar>
Scalar activate(Scalar x, OutputActivation act) {
  if (act == OutputActivation::tanh) return std::tanh(x);
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

void require_square(const char* what, Eigen::Index rows, Eigen::Index cols);

// First cycle found scanning tokens in ascending order; empty if none.
std::vector<int> first_cycle(std::span<const int> heads);

// descendant[k] is true when token k + 1 reaches `node` through head links,
// ignoring node's own outgoing arc.
std::vector<bool> descendants_of(std::span<const int> heads, int node);

}  // namespace detail

/// Head scores M(i, j) = activated score that token j + 1 heads token i + 1.
/// p1 averages the heads score H(i, j) and the dependents score D(j, i)
/// before activation. The diagonal is set to NaN and never consulted.
/// For p2/p4 `deps` may be empty, for p3/p5 `heads` may be empty.
template <typename DerivedH, typename DerivedD>
Eigen::Matrix<typename DerivedH::Scalar, Eigen::Dynamic, Eigen::Dynamic> merge(
    const Eigen::MatrixBase<DerivedH>& heads, const Eigen::MatrixBase<DerivedD>& deps, InferenceMode mode,
    OutputActivation activation = OutputActivation::sigmoid) {
  using Scalar = typename DerivedH::Scalar;
  const bool use_h = mode_uses_heads(mode), use_d = mode_uses_deps(mode);
  if (use_h) detail::require_square("merge: heads scores", heads.rows(), heads.cols());
  if (use_d) detail::require_square("merge: dependents scores", deps.rows(), deps.cols());
  if (use_h && use_d && heads.rows() != deps.rows())
    throw std::invalid_argument("merge: heads scores are " + std::to_string(heads.rows()) + "x" +
                                std::to_string(heads.rows()) + " but dependents scores are " +
                                std::to_string(deps.rows()) + "x" + std::to_string(deps.rows()));
  const Eigen::Index n = use_h ? heads.rows() : deps.rows();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      Scalar pre;
      if (use_h && use_d)
        pre = (heads(i, j) + deps(j, i)) / Scalar(2);
      else if (use_h)
        pre = heads(i, j);
      else
        pre = deps(j, i);
      m(i, j) = i == j ? std::numeric_limits<Scalar>::quiet_NaN() : detail::activate(pre, activation);
    }
  return m;
}

/// 1-based token whose outgoing head scores are weakest: argmin over i of
/// the max (or sum) of M(i, j), j != i. Ties go to the smallest index.
template <typename Derived>
int find_top(const Eigen::MatrixBase<Derived>& m, RootAggregation aggregation = RootAggregation::max) {
  detail::require_square("find_top", m.rows(), m.cols());
  const Eigen::Index n = m.rows();
  if (n == 0) throw std::invalid_argument("find_top: empty sentence");
  int best = 1;
  typename Derived::Scalar best_score{};
  for (Eigen::Index i = 0; i < n; ++i) {
    typename Derived::Scalar agg{};
    bool first = true;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (aggregation == RootAggregation::sum)
        agg += m(i, j);
      else if (first || m(i, j) > agg)
        agg = m(i, j);
      first = false;
    }
    if (i == 0 || agg < best_score) {
      best = static_cast<int>(i) + 1;
      best_score = agg;
    }
  }
  return best;
}

/// head(top) = 0; every other token takes its highest-scoring head j != i,
/// ties to the smallest j. The result may contain cycles.
template <typename Derived>
std::vector<int> greedy_heads(const Eigen::MatrixBase<Derived>& m, int top) {
  detail::require_square("greedy_heads", m.rows(), m.cols());
  const Eigen::Index n = m.rows();
  if (top < 1 || top > n) throw std::invalid_argument("greedy_heads: top " + std::to_string(top) + " out of range");
  std::vector<int> heads(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i + 1 == top) continue;
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (best < 0 || m(i, j) > m(i, best)) best = j;
    }
    heads[i] = static_cast<int>(best) + 1;
  }
  return heads;
}

/// Repairs cycles one at a time: in the first cycle found, the arc with the
/// lowest score is removed and its dependent is reattached to the best
/// head that is not among its own descendants.
template <typename Derived>
DepTree fix_cycles(std::vector<int> heads, const Eigen::MatrixBase<Derived>& m, int top) {
  detail::require_square("fix_cycles", m.rows(), m.cols());
  const int n = static_cast<int>(m.rows());
  if (static_cast<int>(heads.size()) != n) throw std::invalid_argument("fix_cycles: assignment size differs from scores");
  if (top < 1 || top > n || heads[top - 1] != 0) throw std::invalid_argument("fix_cycles: top must have head 0");
  for (int i = 1; i <= n; ++i)
    if (i != top && (heads[i - 1] < 1 || heads[i - 1] > n || heads[i - 1] == i))
      throw std::invalid_argument("fix_cycles: token " + std::to_string(i) + " has invalid head");

  while (true) {
    std::vector<int> cycle = detail::first_cycle(heads);
    if (cycle.empty()) break;
    int weakest = cycle.front();
    for (int i : cycle) {
      auto s = m(i - 1, heads[i - 1] - 1);
      auto w = m(weakest - 1, heads[weakest - 1] - 1);
      if (s < w || (s == w && i < weakest)) weakest = i;
    }
    std::vector<bool> below = detail::descendants_of(heads, weakest);
    int best = 0;
    for (int j = 1; j <= n; ++j) {
      if (j == weakest || below[j - 1]) continue;
      if (best == 0 || m(weakest - 1, j - 1) > m(weakest - 1, best - 1)) best = j;
    }
    heads[weakest - 1] = best;  // top is never a descendant, so best != 0
  }
  return DepTree{std::move(heads), top};
}

/// find_top, greedy_heads, then fix_cycles on one merged matrix.
template <typename Derived>
DepTree decode(const Eigen::MatrixBase<Derived>& m, RootAggregation aggregation = RootAggregation::max,
               bool* tree_before_repair = nullptr) {
  int top = find_top(m, aggregation);
  std::vector<int> heads = greedy_heads(m, top);
  if (tree_before_repair) *tree_before_repair = is_acyclic(heads);
  return fix_cycles(std::move(heads), m, top);
}

struct UasResult {
  std::size_t correct = 0;
  std::size_t total = 0;

  /// Percentage of scored tokens with the correct head; 100 when nothing is scored.
  double percent() const { return total == 0 ? 100.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total); }
};

UasResult uas(std::span<const Sentence> gold, std::span<const DepTree> predicted, const PunctuationPolicy& punct = {});

}  // namespace ipn
