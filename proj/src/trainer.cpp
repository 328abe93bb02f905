#include "ipn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numeric>

namespace ipn {

Trainer::Trainer(Model& model, const TrainConfig& config, Rng& rng)
    : model_(model), config_(config), rng_(rng), adam_(config.adam), params_(model.parameters()) {}

ad::Var sentence_loss(ad::Tape& tape, const Model& model, const Sentence& sentence, const std::vector<bool>& dropped) {
  const TrainMode mode = model.config.mode;
  ForwardScores f = forward(tape, model, sentence, trains_heads(mode), trains_deps(mode), dropped);
  const OutputActivation act = model.config.activation;
  std::optional<ad::Var> total;
  if (f.heads) total = pointer_loss(*f.heads, target_matrix(sentence, Orientation::heads), act);
  if (f.deps) {
    ad::Var l = pointer_loss(*f.deps, target_matrix(sentence, Orientation::dependents), act);
    total = total ? ad::add(*total, l) : l;
  }
  return *total;
}

std::optional<double> Trainer::train_sentence(const Sentence& sentence) {
  if (sentence.size() == 0) throw std::invalid_argument("train_sentence: empty sentence");
  std::vector<bool> dropped = dropout_mask(sentence, model_.lexicon.vocab, model_.config.encoder.word_dropout, rng_);
  ad::Var loss = sentence_loss(tape_, model_, sentence, dropped);
  const double value = loss.scalar();
  if (!std::isfinite(value)) {
    tape_.clear();
    return std::nullopt;
  }
  ad::Gradients grads = tape_.backward(loss);
  adam_.step(params_, grads);
  return value;
}

double Trainer::loss(const Sentence& sentence) {
  double value = sentence_loss(tape_, model_, sentence).scalar();
  tape_.clear();
  return value;
}

Lexicon build_lexicon(std::span<const Sentence> train, const PretrainedEmbeddings* pretrained) {
  Lexicon lex;
  lex.vocab = Vocabulary::build(train);
  if (pretrained) lex.pretrained = PretrainedIndex(pretrained->words);
  return lex;
}

TrainResult train(std::span<const Sentence> corpus, std::span<const Sentence> dev, const TrainConfig& config,
                  const PretrainedEmbeddings* pretrained, const std::function<void(const EpochLog&)>& on_epoch) {
  if (corpus.empty()) throw std::invalid_argument("train: empty training corpus");
  if (dev.empty()) throw std::invalid_argument("train: empty development corpus");
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (corpus[i].size() == 0 || !corpus[i].has_heads())
      throw std::invalid_argument("train: sentence " + std::to_string(i + 1) + " lacks gold heads");

  Rng rng(config.seed);
  Model model = Model::create(config.model_config(), build_lexicon(corpus, pretrained), pretrained, rng);
  Trainer trainer(model, config, rng);
  const InferenceMode eval_mode = default_inference_mode(config.mode);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  bool have_best = false;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog entry;
    entry.epoch = epoch;
    double total = 0;
    std::size_t counted = 0;
    for (std::size_t idx : order) {
      std::optional<double> l = trainer.train_sentence(corpus[idx]);
      if (!l) {
        ++entry.skipped;
        std::clog << "warning: epoch " << epoch << ": non-finite loss on training sentence " << idx + 1
                  << ", step skipped\n";
        continue;
      }
      total += *l;
      ++counted;
    }
    entry.mean_loss = counted ? total / static_cast<double>(counted) : std::nan("");
    entry.dev_uas = evaluate(model, dev, eval_mode, config.punct, config.decode).uas.percent();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (!have_best || entry.dev_uas > result.best.dev_uas) {
      result.best = Checkpoint{model, epoch, entry.dev_uas};
      have_best = true;
    }
  }
  return result;
}

void write_log(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch\tmean_loss\tdev_uas\tskipped\n";
  for (const EpochLog& e : log)
    out << e.epoch << '\t' << std::setprecision(10) << e.mean_loss << '\t' << std::setprecision(6) << e.dev_uas
        << '\t' << e.skipped << '\n';
}

}  // namespace ipn
