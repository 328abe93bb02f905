#include "ipn/gradcheck.hpp"
#include "ipn/model.hpp"
#include "ipn/parser.hpp"
#include "ipn/toy_grammar.hpp"
#include "ipn/trainer.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace ipn;

namespace {

TrainConfig small_config(TrainMode mode = TrainMode::joint) {
  TrainConfig c;
  c.mode = mode;
  c.encoder.pretrained_dim = 4;
  c.encoder.word_dim = 6;
  c.encoder.hidden = 5;
  c.pointer_hidden = 6;
  return c;
}

Model small_model(const std::vector<Sentence>& corpus, TrainMode mode = TrainMode::joint, std::uint64_t seed = 3) {
  Rng rng(seed);
  return Model::create(small_config(mode).model_config(), build_lexicon(corpus, nullptr), nullptr, rng);
}

std::string saved(const Model& m) {
  std::ostringstream out;
  save_model(m, out);
  return out.str();
}

Model loaded(const std::string& bytes) {
  std::istringstream in(bytes);
  return load_model(in);
}

std::vector<Eigen::MatrixXd> snapshot(const PointerParams& p) { return {p.W.value, p.b.value, p.v.value}; }

}  // namespace

TEST_CASE("table defaults") {
  TrainConfig c;
  CHECK(c.pointer_hidden == 100);
  CHECK(c.encoder.pretrained_dim == 100);
  CHECK(c.encoder.word_dim == 150);
  CHECK(c.encoder.layers == 2);
  CHECK(c.encoder.word_dropout == 0.25);
  CHECK(c.activation == OutputActivation::sigmoid);
  CHECK(c.adam.alpha == 0.001);
  CHECK(c.epochs == 10);
}

TEST_CASE("mode compatibility") {
  CHECK_NOTHROW(check_mode(TrainMode::joint, InferenceMode::p1));
  CHECK_NOTHROW(check_mode(TrainMode::joint, InferenceMode::p2));
  CHECK_NOTHROW(check_mode(TrainMode::joint, InferenceMode::p3));
  CHECK_NOTHROW(check_mode(TrainMode::heads_only, InferenceMode::p4));
  CHECK_NOTHROW(check_mode(TrainMode::deps_only, InferenceMode::p5));
  CHECK_THROWS_AS(check_mode(TrainMode::heads_only, InferenceMode::p3), ModeError);
  CHECK_THROWS_AS(check_mode(TrainMode::joint, InferenceMode::p4), ModeError);
  CHECK_THROWS_AS(check_mode(TrainMode::deps_only, InferenceMode::p1), ModeError);
  CHECK(default_inference_mode(TrainMode::joint) == InferenceMode::p1);
  CHECK(default_inference_mode(TrainMode::heads_only) == InferenceMode::p4);
  CHECK(default_inference_mode(TrainMode::deps_only) == InferenceMode::p5);
  CHECK(parse_train_mode("heads") == TrainMode::heads_only);
  CHECK(parse_train_mode(to_string(TrainMode::deps_only)) == TrainMode::deps_only);
  CHECK_THROWS_AS(parse_train_mode("both"), std::invalid_argument);
}

TEST_CASE("single-token sentence loss") {
  std::vector<Sentence> corpus{test::make_sentence({"hello"}, {0})};
  Model m = small_model(corpus);
  ad::Tape tape;
  double loss = sentence_loss(tape, m, corpus[0]).scalar();
  tape.clear();
  SentenceScores s = score_sentence(m, corpus[0], InferenceMode::p1);
  const double h = s.heads->values(0, 0), d = s.deps->values(0, 0);
  auto bce0 = [](double z) { return -std::log(1 - 1 / (1 + std::exp(-z))); };
  CHECK(loss == doctest::Approx(bce0(h) + bce0(d)).epsilon(1e-12));
}

TEST_CASE("single-task training leaves the other pointer net untouched") {
  auto corpus = toy_treebank(8, 5);
  for (TrainMode mode : {TrainMode::heads_only, TrainMode::deps_only}) {
    Model m = small_model(corpus, mode);
    const PointerParams& frozen = mode == TrainMode::heads_only ? m.deps : m.heads;
    const PointerParams& trained = mode == TrainMode::heads_only ? m.heads : m.deps;
    auto frozen_before = snapshot(frozen), trained_before = snapshot(trained);
    Rng rng(1);
    Trainer t(m, small_config(mode), rng);
    for (const Sentence& s : corpus) REQUIRE(t.train_sentence(s));
    CHECK(snapshot(frozen) == frozen_before);
    CHECK(snapshot(trained) != trained_before);
  }
}

TEST_CASE("repeated steps on one sentence drive the loss down") {
  std::vector<Sentence> corpus{test::make_sentence({"the", "old", "dog", "sleeps", "."}, {3, 3, 4, 0, 4})};
  Model m = small_model(corpus);
  Rng rng(2);
  Trainer t(m, small_config(), rng);
  std::vector<double> losses;
  for (int k = 0; k < 100; ++k) losses.push_back(*t.train_sentence(corpus[0]));
  std::vector<double> window;
  for (int k = 0; k + 10 <= 100; k += 10) {
    double s = 0;
    for (int j = k; j < k + 10; ++j) s += losses[j];
    window.push_back(s / 10);
  }
  for (std::size_t k = 1; k < window.size(); ++k) CHECK(window[k] < window[k - 1]);
  CHECK(t.loss(corpus[0]) < losses.front());
}

TEST_CASE("training steps do not grow the tape") {
  auto corpus = toy_treebank(3, 9);
  Model m = small_model(corpus);
  Rng rng(3);
  Trainer t(m, small_config(), rng);
  t.train_sentence(corpus[0]);
  const std::size_t cap = t.tape().capacity();
  t.train_sentence(corpus[0]);
  t.train_sentence(corpus[0]);
  CHECK(t.tape().capacity() == cap);
  CHECK(t.tape().size() == 0);
}

TEST_CASE("train: one epoch, determinism, best checkpoint") {
  auto corpus = toy_treebank(12, 4);
  TrainConfig c = small_config();
  c.epochs = 1;
  TrainResult one = train(corpus, corpus, c);
  REQUIRE(one.log.size() == 1);
  CHECK(one.best.epoch == 1);
  CHECK(one.best.dev_uas == one.log[0].dev_uas);

  c.epochs = 4;
  TrainResult a = train(corpus, corpus, c), b = train(corpus, corpus, c);
  REQUIRE(a.log.size() == 4);
  CHECK(a.log[0].mean_loss == one.log[0].mean_loss);
  for (std::size_t k = 0; k < a.log.size(); ++k) {
    CHECK(a.log[k].mean_loss == b.log[k].mean_loss);
    CHECK(a.log[k].dev_uas == b.log[k].dev_uas);
  }
  CHECK(saved(a.best.model) == saved(b.best.model));
  double best = 0;
  for (const EpochLog& e : a.log) best = std::max(best, e.dev_uas);
  CHECK(a.best.dev_uas == best);
  // the checkpoint really is the model that scored best
  CHECK(evaluate(a.best.model, corpus, InferenceMode::p1).uas.percent() == a.best.dev_uas);

  c.seed = 99;
  CHECK(saved(train(corpus, corpus, c).best.model) != saved(a.best.model));

  std::ostringstream log;
  write_log(log, a.log);
  const std::string text = log.str();
  CHECK(std::count(text.begin(), text.end(), '\n') >= 4);
}

TEST_CASE("train rejects bad input") {
  auto corpus = toy_treebank(3, 4);
  TrainConfig c = small_config();
  CHECK_THROWS_AS(train(std::vector<Sentence>{}, corpus, c), std::invalid_argument);
  CHECK_THROWS_AS(train(corpus, std::vector<Sentence>{}, c), std::invalid_argument);
  c.epochs = 0;
  CHECK_THROWS_AS(train(corpus, corpus, c), std::invalid_argument);
  c.epochs = 1;
  std::vector<Sentence> unlabeled{test::make_sentence({"a", "b"})};
  CHECK_THROWS_AS(train(unlabeled, corpus, c), std::invalid_argument);
}

TEST_CASE("model serialization round trip") {
  auto corpus = toy_treebank(6, 8);
  Model m = small_model(corpus);
  std::string bytes = saved(m);
  Model back = loaded(bytes);
  CHECK(saved(back) == bytes);
  CHECK(back.config == m.config);
  CHECK(back.lexicon.vocab == m.lexicon.vocab);
  for (const Sentence& s : corpus) {
    Eigen::MatrixXd a = merged_scores(m, s, InferenceMode::p1), b = merged_scores(back, s, InferenceMode::p1);
    CHECK(((a.array() == b.array()) || (a.array().isNaN() && b.array().isNaN())).all());
  }
  auto pa = m.parameters();
  auto pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) {
    CHECK(pa[k]->name == pb[k]->name);
    CHECK(pa[k]->value == pb[k]->value);
    CHECK(pa[k]->sparse == pb[k]->sparse);
  }
}

TEST_CASE("damaged model files are rejected") {
  auto corpus = toy_treebank(4, 8);
  std::string bytes = saved(small_model(corpus));
  SUBCASE("truncated at any length") {
    for (std::size_t len : {std::size_t{0}, std::size_t{4}, std::size_t{10}, bytes.size() / 3, bytes.size() / 2,
                            bytes.size() - 9, bytes.size() - 1})
      CHECK_THROWS_AS(loaded(bytes.substr(0, len)), ModelFormatError);
  }
  SUBCASE("flipped byte") {
    std::string bad = bytes;
    bad[bad.size() / 2] ^= 0x5a;
    CHECK_THROWS_AS(loaded(bad), ModelFormatError);
  }
  SUBCASE("version mismatch") {
    std::string bad = bytes;
    bad[8] = 2;
    try {
      loaded(bad);
      FAIL("expected ModelFormatError");
    } catch (const ModelFormatError& e) {
      CHECK(e.offset() == 8);
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
  SUBCASE("bad magic") { CHECK_THROWS_AS(loaded("NOTAMODEL" + bytes), ModelFormatError); }
}

TEST_CASE("parse produces trees and ignores gold heads") {
  auto corpus = toy_treebank(20, 6);
  Model m = small_model(corpus);
  for (const Sentence& s : corpus) {
    ParseResult a = parse(s, m, InferenceMode::p1), b = parse(strip_heads(s), m, InferenceMode::p1);
    CHECK(a.tree == b.tree);
    CHECK(test::valid_tree(a.tree.head, a.tree.top));
    CHECK(parse(s, m, InferenceMode::p1).tree == a.tree);
  }
  CHECK_FALSE(strip_heads(corpus[0]).has_heads());
  CHECK_THROWS_AS(parse(corpus[0], m, InferenceMode::p4), ModeError);
}

TEST_CASE("parse on random models and random sentences") {
  Rng rng(17);
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f"};
  for (int trial = 0; trial < 20; ++trial) {
    int n = std::uniform_int_distribution<int>(1, 9)(rng);
    std::vector<std::string> forms;
    for (int i = 0; i < n; ++i) forms.push_back(words[std::uniform_int_distribution<std::size_t>(0, 5)(rng)]);
    std::vector<Sentence> corpus{test::make_sentence(forms, test::random_tree(n, rng))};
    Model m = small_model(corpus, TrainMode::joint, 100 + trial);
    for (InferenceMode mode : {InferenceMode::p1, InferenceMode::p2, InferenceMode::p3}) {
      ParseResult r = parse(corpus[0], m, mode);
      CHECK(test::valid_tree(r.tree.head, r.tree.top));
    }
  }
}

TEST_CASE("p2 ignores the dependents net and p3 ignores the heads net") {
  auto corpus = toy_treebank(10, 12);
  Model m = small_model(corpus);
  Model d = m;
  d.deps.W.value *= -3.0;
  d.deps.v.value.setConstant(0.7);
  Model h = m;
  h.heads.W.value *= -3.0;
  h.heads.b.value.setConstant(0.4);
  for (const Sentence& s : corpus) {
    CHECK(parse(s, m, InferenceMode::p2).tree == parse(s, d, InferenceMode::p2).tree);
    CHECK(parse(s, m, InferenceMode::p3).tree == parse(s, h, InferenceMode::p3).tree);
  }
}

TEST_CASE("cycle_stats") {
  auto corpus = toy_treebank(15, 13);
  Model m = small_model(corpus);
  double f = cycle_stats(corpus, m, InferenceMode::p1);
  CHECK(f >= 0.0);
  CHECK(f <= 1.0);
  std::vector<Sentence> singles{test::make_sentence({"a"}, {0}), test::make_sentence({"b"}, {0})};
  CHECK(cycle_stats(singles, m, InferenceMode::p1) == 1.0);
  Evaluation e = evaluate(m, corpus, InferenceMode::p1);
  CHECK(e.tree_before_repair == f);
  CHECK(e.trees.size() == corpus.size());
}

TEST_CASE("whole-model gradient check for single-task modes") {
  for (TrainMode mode : {TrainMode::heads_only, TrainMode::deps_only}) {
    ModelGradcheckOptions o;
    o.mode = mode;
    o.length = 4;
    o.hidden = 6;
    o.check.max_entries = 40;
    GradcheckReport r = gradcheck_model(o);
    CHECK(r.passed);
    CHECK(r.tensors.size() == 16);
  }
}

TEST_CASE("gradient check catches a corrupted backward rule") {
  ModelGradcheckOptions o;
  o.length = 4;
  o.hidden = 6;
  o.check.max_entries = 40;
  ad::testing::corrupt_backward("affine", 1.5);
  GradcheckReport r = gradcheck_model(o);
  ad::testing::reset_backward();
  CHECK_FALSE(r.passed);
}
