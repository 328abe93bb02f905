#pragma once

#include "ipn/decoder.hpp"
#include "ipn/model.hpp"

#include <span>
#include <vector>

namespace ipn {

struct DecodeOptions {
  RootAggregation root = RootAggregation::max;
};

struct ParseResult {
  DepTree tree;
  bool tree_before_repair = true;  // greedy assignment needed no cycle fixing
};

/// encode -> score -> merge -> find_top -> greedy_heads -> fix_cycles.
/// Only the token forms are read; gold heads are ignored.
ParseResult parse(const Sentence& sentence, const Model& model, InferenceMode mode, const DecodeOptions& options = {});

struct Evaluation {
  UasResult uas;
  double tree_before_repair = 1.0;  // fraction of sentences
  std::vector<DepTree> trees;
};

/// Parses head-stripped copies of `gold` and scores them against it.
Evaluation evaluate(const Model& model, std::span<const Sentence> gold, InferenceMode mode,
                    const PunctuationPolicy& punct = {}, const DecodeOptions& options = {});

/// Fraction of sentences whose greedy assignment is already a tree.
double cycle_stats(std::span<const Sentence> corpus, const Model& model, InferenceMode mode,
                   const DecodeOptions& options = {});

/// Copy of the sentence without any head annotation.
Sentence strip_heads(const Sentence& sentence);

}  // namespace ipn
