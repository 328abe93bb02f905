#pragma once

#include "ipn/autodiff.hpp"
#include "ipn/corpus.hpp"

#include <array>
#include <random>
#include <vector>

namespace ipn {

using Rng = std::mt19937_64;

struct EncoderConfig {
  ad::Index pretrained_dim = 100;
  ad::Index word_dim = 150;
  ad::Index hidden = 200;  // per direction
  int layers = 2;
  double word_dropout = 0.25;

  ad::Index token_dim() const { return pretrained_dim + word_dim; }
  ad::Index context_dim() const { return 2 * hidden; }
};

/// Word lookups shared by the encoder and the serialized model.
struct Lexicon {
  Vocabulary vocab;
  PretrainedIndex pretrained;
};

/// Gate rows are stacked input, forget, output, candidate:
/// W is 4h x (input + h), b is 4h x 1.
struct LstmWeights {
  ad::Parameter W;
  ad::Parameter b;

  ad::Index hidden() const { return b.value.rows() / 4; }
  ad::Index input() const { return W.value.cols() - hidden(); }
};

struct EncoderParams {
  ad::Parameter pretrained;  // pretrained_dim x |pretrained| + 1, column 0 unknown
  ad::Parameter words;       // word_dim x |vocab|, column 0 unknown
  std::vector<std::array<LstmWeights, 2>> layers;  // [level][0 forward, 1 backward]

  /// Glorot-uniform weights, zero biases. When `pretrained` is null the
  /// pretrained map holds only its (zero) unknown vector.
  static EncoderParams init(const EncoderConfig& config, const Lexicon& lexicon,
                            const PretrainedEmbeddings* pretrained, Rng& rng);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
};

/// Glorot-uniform matrix with bound sqrt(6 / (rows + cols)).
ad::Tensor glorot(ad::Index rows, ad::Index cols, Rng& rng);

/// Probability of replacing a word by the unknown vector: alpha / (alpha + freq).
double dropout_prob(std::size_t frequency, double alpha);

/// One draw per token; true marks a token whose lookups are replaced.
std::vector<bool> dropout_mask(const Sentence& sentence, const Vocabulary& vocab, double alpha, Rng& rng);

/// concat(pretrained vector, word vector) per token. Pass a mask from
/// dropout_mask during training; an empty mask means inference.
std::vector<ad::Var> encode_tokens(ad::Tape& tape, const Sentence& sentence, const Lexicon& lexicon,
                                   const EncoderParams& params, const std::vector<bool>& dropped = {});

struct LstmState {
  ad::Var h;
  ad::Var c;
};

LstmState lstm_cell(ad::Var x, ad::Var h_prev, ad::Var c_prev, const LstmWeights& weights);

/// Stacked bidirectional LSTM over the token encodings; returns the top
/// level's forward state concatenated with its backward state per token.
std::vector<ad::Var> bilstm_encode(ad::Tape& tape, std::span<const ad::Var> encodings, const EncoderParams& params);

}  // namespace ipn
