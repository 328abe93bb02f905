#include "ipn/parser.hpp"

namespace ipn {

ParseResult parse(const Sentence& sentence, const Model& model, InferenceMode mode, const DecodeOptions& options) {
  check_mode(model.config.mode, mode);
  if (sentence.size() == 0) throw std::invalid_argument("parse: empty sentence");
  Eigen::MatrixXd m = merged_scores(model, sentence, mode);
  ParseResult r;
  r.tree = decode(m, options.root, &r.tree_before_repair);
  return r;
}

Sentence strip_heads(const Sentence& sentence) {
  Sentence out = sentence;
  for (Token& t : out.tokens) {
    t.head.reset();
    if (t.columns.size() > 6) t.columns[6] = "_";
  }
  return out;
}

Evaluation evaluate(const Model& model, std::span<const Sentence> gold, InferenceMode mode,
                    const PunctuationPolicy& punct, const DecodeOptions& options) {
  check_mode(model.config.mode, mode);
  Evaluation e;
  std::size_t trees = 0;
  e.trees.reserve(gold.size());
  for (const Sentence& s : gold) {
    ParseResult r = parse(strip_heads(s), model, mode, options);
    trees += r.tree_before_repair ? 1 : 0;
    e.trees.push_back(std::move(r.tree));
  }
  e.uas = uas(gold, e.trees, punct);
  e.tree_before_repair = gold.empty() ? 1.0 : static_cast<double>(trees) / static_cast<double>(gold.size());
  return e;
}

double cycle_stats(std::span<const Sentence> corpus, const Model& model, InferenceMode mode,
                   const DecodeOptions& options) {
  if (corpus.empty()) return 1.0;
  std::size_t trees = 0;
  for (const Sentence& s : corpus) trees += parse(s, model, mode, options).tree_before_repair ? 1 : 0;
  return static_cast<double>(trees) / static_cast<double>(corpus.size());
}

}  // namespace ipn
