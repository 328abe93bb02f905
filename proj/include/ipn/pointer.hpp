#pragma once

#include "ipn/autodiff.hpp"
#include "ipn/corpus.hpp"
#include "ipn/encoder.hpp"

#include <span>
#include <string>
#include <vector>

namespace ipn {

enum class Orientation { heads, dependents };
enum class OutputActivation { sigmoid, tanh };

/// Additive pointer attention with independent outputs:
///   score(query, key) = v . tanh(W [key; query] + b)
/// W is hidden x (2 * context), stored as one affine block.
struct PointerParams {
  ad::Parameter W;
  ad::Parameter b;
  ad::Parameter v;

  static PointerParams init(const std::string& name, ad::Index context_dim, ad::Index hidden, Rng& rng);

  ad::Index hidden() const { return b.value.rows(); }
  ad::Index context_dim() const { return W.value.cols() / 2; }
  std::vector<ad::Parameter*> parameters() { return {&W, &b, &v}; }
  std::vector<const ad::Parameter*> parameters() const { return {&W, &b, &v}; }
};

/// Pre-activation scores for one sub-task on one sentence (0-based indices).
/// heads: (i, j) scores "j is the head of i";
/// dependents: (i, j) scores "j is a dependent of i".
struct ScoreMatrix {
  Eigen::MatrixXd values;
  Orientation orientation = Orientation::heads;

  ad::Index size() const { return values.rows(); }
};

/// Value-only score of one (query, key) pair.
double attention_score(const Eigen::VectorXd& query, const Eigen::VectorXd& key, const PointerParams& params);

/// The same score recorded with elementary tape operations.
ad::Var attention_score(ad::Var query, ad::Var key, const PointerParams& params);

/// n x n scores, entry (i, j) = attention_score(contexts[i], contexts[j]).
/// Recorded as a single tape node; entries are bit-identical to the
/// value-only attention_score.
ad::Var score_all(ad::Tape& tape, std::span<const ad::Var> contexts, const PointerParams& params);

/// 0/1 training targets; throws std::invalid_argument when a gold head is missing.
Eigen::MatrixXd target_matrix(const Sentence& sentence, Orientation orientation);

}  // namespace ipn
