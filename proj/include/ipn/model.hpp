#pragma once

#include "ipn/autodiff.hpp"
#include "ipn/corpus.hpp"
#include "ipn/decoder.hpp"
#include "ipn/encoder.hpp"
#include "ipn/pointer.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipn {

/// Which pointer nets a model is trained for.
enum class TrainMode { joint, heads_only, deps_only };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& s);
std::string to_string(OutputActivation act);
OutputActivation parse_activation(const std::string& s);

inline bool trains_heads(TrainMode m) { return m != TrainMode::deps_only; }
inline bool trains_deps(TrainMode m) { return m != TrainMode::heads_only; }

/// Raised when a parser configuration does not fit the model's training mode.
class ModeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws ModeError unless `mode` is valid for a model trained with `trained`.
void check_mode(TrainMode trained, InferenceMode mode);
/// p1 for joint models, p4 for heads-only, p5 for deps-only.
InferenceMode default_inference_mode(TrainMode trained);

struct ModelConfig {
  EncoderConfig encoder;
  ad::Index pointer_hidden = 100;
  OutputActivation activation = OutputActivation::sigmoid;
  TrainMode mode = TrainMode::joint;

  bool operator==(const ModelConfig& o) const;
};

/// All trainable weights plus the lookups needed to apply them. Both pointer
/// nets always exist; single-task models leave the unused one untouched.
struct Model {
  ModelConfig config;
  Lexicon lexicon;
  EncoderParams encoder;
  PointerParams heads;
  PointerParams deps;

  static Model create(const ModelConfig& config, Lexicon lexicon, const PretrainedEmbeddings* pretrained, Rng& rng);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
};

/// Recorded forward pass for one sentence; absent matrices were not requested.
struct ForwardScores {
  std::optional<ad::Var> heads;
  std::optional<ad::Var> deps;
};

ForwardScores forward(ad::Tape& tape, const Model& model, const Sentence& sentence, bool want_heads, bool want_deps,
                      const std::vector<bool>& dropped = {});

/// Inference-mode pre-activation scores for the nets `mode` needs.
struct SentenceScores {
  std::optional<ScoreMatrix> heads;
  std::optional<ScoreMatrix> deps;
};

SentenceScores score_sentence(const Model& model, const Sentence& sentence, InferenceMode mode);

/// Merged activated head scores for one sentence.
Eigen::MatrixXd merged_scores(const Model& model, const Sentence& sentence, InferenceMode mode);

/// Loss of one score matrix against its 0/1 targets under the model's output activation.
ad::Var pointer_loss(ad::Var scores, const Eigen::MatrixXd& target, OutputActivation activation);

/// Raised for unreadable model files; `offset` is the byte position of the failure.
class ModelFormatError : public std::runtime_error {
 public:
  ModelFormatError(std::size_t offset, const std::string& what)
      : std::runtime_error("model file offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Versioned little-endian container of named tensors; see docs/model_format.md.
void save_model(const Model& model, std::ostream& out);
Model load_model(std::istream& in);
void save_model_file(const Model& model, const std::string& path);
Model load_model_file(const std::string& path);

}  // namespace ipn
