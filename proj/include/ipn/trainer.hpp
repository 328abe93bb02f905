#pragma once

#include "ipn/adam.hpp"
#include "ipn/model.hpp"
#include "ipn/parser.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace ipn {

struct TrainConfig {
  TrainMode mode = TrainMode::joint;
  int epochs = 10;
  std::uint64_t seed = 1;
  EncoderConfig encoder;  // word_dropout lives here
  ad::Index pointer_hidden = 100;
  OutputActivation activation = OutputActivation::sigmoid;
  ad::AdamConfig adam;
  PunctuationPolicy punct;
  DecodeOptions decode;

  ModelConfig model_config() const { return ModelConfig{encoder, pointer_hidden, activation, mode}; }
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double mean_loss = 0;
  double dev_uas = 0;
  std::size_t skipped = 0;  // sentences with non-finite loss
};

struct Checkpoint {
  Model model;
  int epoch = 0;
  double dev_uas = 0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
};

/// Summed pointer losses of the nets the model's mode trains (heads + deps for joint).
ad::Var sentence_loss(ad::Tape& tape, const Model& model, const Sentence& sentence,
                      const std::vector<bool>& dropped = {});

/// Single-writer training state: one Adam step per sentence.
class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& config, Rng& rng);

  /// One forward/backward/update on one sentence. Returns the summed loss,
  /// or nullopt when the loss was not finite and the step was skipped.
  std::optional<double> train_sentence(const Sentence& sentence);

  /// Summed loss without dropout or update.
  double loss(const Sentence& sentence);

  const ad::Adam& optimizer() const { return adam_; }
  const ad::Tape& tape() const { return tape_; }

 private:
  Model& model_;
  TrainConfig config_;
  Rng& rng_;
  ad::Adam adam_;
  ad::Tape tape_;
  std::vector<ad::Parameter*> params_;
};

/// Builds the lexicon from `train` (and `pretrained`, when given).
Lexicon build_lexicon(std::span<const Sentence> train, const PretrainedEmbeddings* pretrained);

/// Epochs of shuffled single-sentence updates; after each epoch the dev set
/// is parsed in inference mode and the best-dev model is kept.
TrainResult train(std::span<const Sentence> corpus, std::span<const Sentence> dev, const TrainConfig& config,
                  const PretrainedEmbeddings* pretrained = nullptr,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Tab-separated rows: epoch, mean_loss, dev_uas, skipped.
void write_log(std::ostream& out, std::span<const EpochLog> log);

}  // namespace ipn
