#include "ipn/gradcheck.hpp"

#include "ipn/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace ipn {

GradcheckReport check_gradients(const std::function<ad::Var(ad::Tape&)>& loss,
                                std::span<ad::Parameter* const> params, const GradcheckOptions& options) {
  ad::Tape tape;
  ad::Gradients grads = tape.backward(loss(tape));

  auto evaluate = [&] {
    double v = loss(tape).scalar();
    tape.clear();
    return v;
  };

  GradcheckReport report;
  for (ad::Parameter* p : params) {
    const ad::Tensor analytic = grads.dense(*p);
    const ad::Index total = p->value.size();
    const ad::Index probes =
        options.max_entries == 0 ? total : std::min<ad::Index>(total, static_cast<ad::Index>(options.max_entries));
    TensorCheck check{p->name, 0, 0.0, 0.0};
    for (ad::Index k = 0; k < probes; ++k) {
      const ad::Index idx = probes == total ? k : (k * total) / probes;
      double& x = p->value.data()[idx];
      const double saved = x;
      x = saved + options.step;
      const double up = evaluate();
      x = saved - options.step;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2 * options.step);
      const double a = analytic.data()[idx];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.floor});
      check.worst_relative = std::max(check.worst_relative, rel);
      check.worst_absolute = std::max(check.worst_absolute, abs_err);
      ++check.entries;
    }
    report.worst_relative = std::max(report.worst_relative, check.worst_relative);
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.worst_relative < options.tolerance;
  return report;
}

namespace {

Sentence random_sentence(std::size_t length, Rng& rng) {
  static const char* const kWords[] = {"the", "dog", "saw", "a", "cat", "near", "old", "river", "runs", "quickly"};
  std::uniform_int_distribution<std::size_t> word(0, std::size(kWords) - 1);
  Sentence s;
  // random tree: visit tokens in random order, each attaches to an already placed token
  std::vector<int> order(length);
  for (std::size_t i = 0; i < length; ++i) order[i] = static_cast<int>(i) + 1;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> heads(length, 0);
  for (std::size_t k = 1; k < length; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    heads[order[k] - 1] = order[pick(rng)];
  }
  for (std::size_t i = 0; i < length; ++i) {
    Token t;
    t.index = static_cast<int>(i) + 1;
    t.form = kWords[word(rng)];
    t.head = heads[i];
    s.tokens.push_back(std::move(t));
  }
  return s;
}

}  // namespace

GradcheckReport gradcheck_model(const ModelGradcheckOptions& options) {
  if (options.length < 1) throw std::invalid_argument("gradcheck: sentence length must be positive");
  Rng rng(options.seed);
  Sentence sentence = random_sentence(options.length, rng);
  TrainConfig config;
  config.mode = options.mode;
  config.encoder.hidden = options.hidden;
  std::vector<Sentence> corpus{sentence};
  Model model = Model::create(config.model_config(), build_lexicon(corpus, nullptr), nullptr, rng);
  // the pretrained unknown vector starts at zero; give it a random value so its gradient path is exercised
  model.encoder.pretrained.value = glorot(model.encoder.pretrained.value.rows(), 1, rng);

  std::vector<ad::Parameter*> params = model.parameters();
  return check_gradients([&](ad::Tape& tape) { return sentence_loss(tape, model, sentence); }, params,
                         options.check);
}

}  // namespace ipn
