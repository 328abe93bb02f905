#include "ipn/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ipn {

using ad::Index;
using ad::Parameter;
using ad::Tensor;
using ad::Var;

Tensor glorot(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) t(r, c) = dist(rng);
  return t;
}

namespace {

// Each embedding column is initialized as its own dim x 1 matrix.
Tensor glorot_columns(Index dim, Index count, Rng& rng) {
  Tensor t(dim, count);
  for (Index c = 0; c < count; ++c) t.col(c) = glorot(dim, 1, rng);
  return t;
}

LstmWeights make_lstm(const std::string& name, Index input, Index hidden, Rng& rng) {
  return LstmWeights{Parameter(name + ".W", glorot(4 * hidden, input + hidden, rng)),
                     Parameter(name + ".b", Tensor::Zero(4 * hidden, 1))};
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& config, const Lexicon& lexicon,
                                  const PretrainedEmbeddings* pretrained, Rng& rng) {
  if (config.layers < 1) throw std::invalid_argument("encoder: at least one BiLSTM level required");
  if (config.hidden < 1 || config.word_dim < 1 || config.pretrained_dim < 1)
    throw std::invalid_argument("encoder: dimensions must be positive");
  EncoderParams p;
  Tensor pre;
  if (pretrained) {
    if (static_cast<Index>(pretrained->dimension()) != config.pretrained_dim)
      throw std::invalid_argument("encoder: pretrained vectors have dimension " +
                                  std::to_string(pretrained->dimension()) + ", configured " +
                                  std::to_string(config.pretrained_dim));
    if (pretrained->size() != lexicon.pretrained.words().size())
      throw std::invalid_argument("encoder: pretrained index and vectors disagree");
    pre = pretrained->vectors;
    pre.col(0).setZero();
  } else {
    pre = Tensor::Zero(config.pretrained_dim, static_cast<Index>(lexicon.pretrained.columns()));
  }
  p.pretrained = Parameter("embed.pretrained", std::move(pre), true);
  p.words = Parameter("embed.words", glorot_columns(config.word_dim, static_cast<Index>(lexicon.vocab.size()), rng),
                      true);
  Index input = config.token_dim();
  for (int level = 0; level < config.layers; ++level) {
    std::string prefix = "bilstm." + std::to_string(level);
    p.layers.push_back({make_lstm(prefix + ".fwd", input, config.hidden, rng),
                        make_lstm(prefix + ".bwd", input, config.hidden, rng)});
    input = 2 * config.hidden;
  }
  return p;
}

std::vector<Parameter*> EncoderParams::parameters() {
  std::vector<Parameter*> out = {&pretrained, &words};
  for (auto& level : layers)
    for (auto& dir : level) {
      out.push_back(&dir.W);
      out.push_back(&dir.b);
    }
  return out;
}

std::vector<const Parameter*> EncoderParams::parameters() const {
  auto mut = const_cast<EncoderParams*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

double dropout_prob(std::size_t frequency, double alpha) {
  if (frequency == 0) throw std::invalid_argument("dropout_prob: frequency must be at least 1");
  if (alpha < 0) throw std::invalid_argument("dropout_prob: alpha must be non-negative");
  return alpha / (alpha + static_cast<double>(frequency));
}

std::vector<bool> dropout_mask(const Sentence& sentence, const Vocabulary& vocab, double alpha, Rng& rng) {
  std::vector<bool> mask(sentence.size(), false);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    std::size_t id = vocab.id(sentence.tokens[i].form);
    // Unknown words already use the unknown vector; the draw is still taken
    // so the random stream does not depend on vocabulary coverage.
    double u = coin(rng);
    if (id != Vocabulary::kUnknown) mask[i] = u < dropout_prob(vocab.frequency(id), alpha);
  }
  return mask;
}

std::vector<Var> encode_tokens(ad::Tape& tape, const Sentence& sentence, const Lexicon& lexicon,
                               const EncoderParams& params, const std::vector<bool>& dropped) {
  if (!dropped.empty() && dropped.size() != sentence.size())
    throw std::invalid_argument("encode_tokens: dropout mask length differs from sentence length");
  std::vector<Var> out;
  out.reserve(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    const std::string& form = sentence.tokens[i].form;
    const bool drop = !dropped.empty() && dropped[i];
    Index pre = drop ? 0 : static_cast<Index>(lexicon.pretrained.id(form));
    Index word = drop ? 0 : static_cast<Index>(lexicon.vocab.id(form));
    out.push_back(ad::concat({tape.column(params.pretrained, pre), tape.column(params.words, word)}));
  }
  return out;
}

LstmState lstm_cell(Var x, Var h_prev, Var c_prev, const LstmWeights& weights) {
  ad::Tape& tape = *x.tape();
  const Index h = weights.hidden();
  if (x.rows() != weights.input() || h_prev.rows() != h || c_prev.rows() != h)
    throw std::invalid_argument("lstm_cell: expected input " + std::to_string(weights.input()) + " and state " +
                                std::to_string(h) + ", got " + std::to_string(x.rows()) + "/" +
                                std::to_string(h_prev.rows()) + "/" + std::to_string(c_prev.rows()));
  Var z = ad::affine(tape.param(weights.W), ad::concat({x, h_prev}), tape.param(weights.b));
  Var in_gate = ad::sigmoid(ad::slice(z, 0, h));
  Var forget_gate = ad::sigmoid(ad::slice(z, h, h));
  Var out_gate = ad::sigmoid(ad::slice(z, 2 * h, h));
  Var candidate = ad::tanh(ad::slice(z, 3 * h, h));
  Var c = ad::add(ad::mul(forget_gate, c_prev), ad::mul(in_gate, candidate));
  Var hidden = ad::mul(out_gate, ad::tanh(c));
  return {hidden, c};
}

std::vector<Var> bilstm_encode(ad::Tape& tape, std::span<const Var> encodings, const EncoderParams& params) {
  if (encodings.empty()) throw std::invalid_argument("bilstm_encode: empty sentence");
  const std::size_t n = encodings.size();
  std::vector<Var> input(encodings.begin(), encodings.end());
  for (const auto& level : params.layers) {
    const Index h = level[0].hidden();
    std::vector<Var> fwd(n), bwd(n);
    Var zero = tape.constant(Tensor::Zero(h, 1));
    LstmState state{zero, zero};
    for (std::size_t i = 0; i < n; ++i) {
      state = lstm_cell(input[i], state.h, state.c, level[0]);
      fwd[i] = state.h;
    }
    state = {zero, zero};
    for (std::size_t i = n; i-- > 0;) {
      state = lstm_cell(input[i], state.h, state.c, level[1]);
      bwd[i] = state.h;
    }
    for (std::size_t i = 0; i < n; ++i) input[i] = ad::concat({fwd[i], bwd[i]});
  }
  return input;
}

}  // namespace ipn
