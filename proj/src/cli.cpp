#include "ipn/cli.hpp"

#include "ipn/adam.hpp"
#include "ipn/corpus.hpp"
#include "ipn/gradcheck.hpp"
#include "ipn/model.hpp"
#include "ipn/parser.hpp"
#include "ipn/trainer.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>

namespace ipn::cli {

namespace {

class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, std::string category, const std::string& what)
      : std::runtime_error(what), code(code), category(std::move(category)) {}
  ExitCode code;
  std::string category;
};

/// Every value the commands consume; bound to flags and to the config file.
struct RunConfig {
  // train
  std::string train_path, dev_path, pretrained_path, model_path, log_path;
  std::string train_mode = "joint";
  int epochs = 10;
  std::vector<std::uint64_t> seeds{1};
  double word_dropout = 0.25;
  long pretrained_dim = 100;
  long word_dim = 150;
  long hidden = 200;
  int layers = 2;
  long pointer_hidden = 100;
  std::string activation = "sigmoid";
  double adam_alpha = 0.001, adam_beta1 = 0.9, adam_beta2 = 0.999, adam_epsilon = 1e-8;
  double clip_norm = 0.0;
  // shared by train, parse and eval
  std::string root = "max";
  std::vector<std::string> punct_tags;
  bool keep_punct = false;
  // parse
  std::string parse_model, parse_input, parse_output, parse_mode;
  // eval
  std::string gold_path, pred_path, rows_path;
  std::vector<std::string> eval_models;
  std::vector<std::string> eval_modes;
  // gradcheck
  std::size_t gc_length = 5;
  long gc_hidden = 16;
  std::uint64_t gc_seed = 7;
  double gc_step = 1e-5, gc_tolerance = 1e-4;
  std::string gc_mode = "joint";
  std::size_t gc_max_entries = 0;
  std::string gc_corrupt;
};

template <typename F>
auto wrap_parse(const char* category, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw CliError(kUsage, category, e.what());
  }
}

PunctuationPolicy punct_policy(const RunConfig& c) {
  PunctuationPolicy p;
  p.exclude = !c.keep_punct;
  p.extra_tags.insert(c.punct_tags.begin(), c.punct_tags.end());
  return p;
}

DecodeOptions decode_options(const RunConfig& c) {
  DecodeOptions d;
  if (c.root == "max")
    d.root = RootAggregation::max;
  else if (c.root == "sum")
    d.root = RootAggregation::sum;
  else
    throw CliError(kUsage, "usage", "unknown root aggregation '" + c.root + "' (expected max or sum)");
  return d;
}

std::vector<Sentence> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError(kIo, "io", "cannot open '" + path + "'");
  try {
    return read_conll(in);
  } catch (const FormatError& e) {
    throw CliError(kFormat, "format", path + ": " + e.what());
  }
}

Model read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(kIo, "io", "cannot open '" + path + "'");
  try {
    return load_model(in);
  } catch (const ModelFormatError& e) {
    throw CliError(kFormat, "format", path + ": " + e.what());
  }
}

std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw CliError(kIo, "io", "cannot write '" + path + "'");
  return out;
}

std::string seed_model_path(const RunConfig& c, std::uint64_t seed) {
  return c.seeds.size() == 1 ? c.model_path : c.model_path + ".seed" + std::to_string(seed);
}

// ------------------------------------------------------------------ train

int cmd_train(const RunConfig& c, std::ostream& out) {
  TrainConfig config;
  wrap_parse("usage", [&] {
    config.mode = parse_train_mode(c.train_mode);
    config.activation = parse_activation(c.activation);
    return 0;
  });
  if (c.epochs < 1) throw CliError(kUsage, "usage", "--epochs must be at least 1");
  if (c.seeds.empty()) throw CliError(kUsage, "usage", "--seeds must list at least one seed");
  config.epochs = c.epochs;
  config.encoder.word_dropout = c.word_dropout;
  config.encoder.pretrained_dim = c.pretrained_dim;
  config.encoder.word_dim = c.word_dim;
  config.encoder.hidden = c.hidden;
  config.encoder.layers = c.layers;
  config.pointer_hidden = c.pointer_hidden;
  config.adam = ad::AdamConfig{c.adam_alpha, c.adam_beta1, c.adam_beta2, c.adam_epsilon, c.clip_norm};
  config.punct = punct_policy(c);
  config.decode = decode_options(c);

  std::vector<Sentence> train_set = read_corpus(c.train_path);
  std::vector<Sentence> dev_set = read_corpus(c.dev_path);
  if (train_set.empty()) throw CliError(kFormat, "format", "training corpus '" + c.train_path + "' is empty");
  if (dev_set.empty()) throw CliError(kFormat, "format", "development corpus '" + c.dev_path + "' is empty");

  std::optional<PretrainedEmbeddings> pretrained;
  if (!c.pretrained_path.empty()) {
    std::ifstream in(c.pretrained_path);
    if (!in) throw CliError(kIo, "io", "cannot open '" + c.pretrained_path + "'");
    try {
      pretrained = load_pretrained(in);
    } catch (const FormatError& e) {
      throw CliError(kFormat, "format", c.pretrained_path + ": " + e.what());
    }
    config.encoder.pretrained_dim = static_cast<ad::Index>(pretrained->dimension());
  }

  std::optional<std::ofstream> log;
  if (!c.log_path.empty()) {
    log = open_output(c.log_path);
    *log << "seed\tepoch\tmean_loss\tdev_uas\tskipped\n";
  }
  out << "config: mode=" << to_string(config.mode) << " epochs=" << config.epochs
      << " pretrained_dim=" << config.encoder.pretrained_dim << " word_dim=" << config.encoder.word_dim
      << " bilstm_hidden=" << config.encoder.hidden << " bilstm_levels=" << config.encoder.layers
      << " pointer_hidden=" << config.pointer_hidden << " word_dropout=" << config.encoder.word_dropout
      << " activation=" << to_string(config.activation) << " adam=" << config.adam.alpha << "/" << config.adam.beta1
      << "/" << config.adam.beta2 << "\n";

  for (std::uint64_t seed : c.seeds) {
    config.seed = seed;
    const std::string path = seed_model_path(c, seed);
    std::ofstream model_out = open_output(path, std::ios::binary);
    TrainResult r;
    try {
      r = train(train_set, dev_set, config, pretrained ? &*pretrained : nullptr, [&](const EpochLog& e) {
        out << "seed " << seed << " epoch " << e.epoch << " loss " << std::setprecision(6) << e.mean_loss
            << " dev_uas " << std::fixed << std::setprecision(2) << e.dev_uas << std::defaultfloat << "\n";
        if (log)
          *log << seed << '\t' << e.epoch << '\t' << std::setprecision(std::numeric_limits<double>::max_digits10) << e.mean_loss << '\t'
               << std::setprecision(6) << e.dev_uas << '\t' << e.skipped << '\n';
      });
    } catch (const std::invalid_argument& e) {
      throw CliError(kFormat, "format", e.what());
    }
    save_model(r.best.model, model_out);
    out << "seed " << seed << " best epoch " << r.best.epoch << " dev_uas " << std::fixed << std::setprecision(2)
        << r.best.dev_uas << std::defaultfloat << " model " << path << "\n";
  }
  return kOk;
}

// ------------------------------------------------------------------ parse

int cmd_parse(const RunConfig& c, std::ostream& out) {
  Model model = read_model(c.parse_model);
  InferenceMode mode = c.parse_mode.empty() ? default_inference_mode(model.config.mode)
                                            : wrap_parse("usage", [&] { return parse_inference_mode(c.parse_mode); });
  try {
    check_mode(model.config.mode, mode);
  } catch (const ModeError& e) {
    throw CliError(kMode, "mode", e.what());
  }
  const DecodeOptions options = decode_options(c);
  std::vector<Sentence> input = read_corpus(c.parse_input);
  std::vector<Sentence> parsed;
  parsed.reserve(input.size());
  for (const Sentence& s : input) parsed.push_back(s.with_heads(parse(s, model, mode, options).tree.head));
  if (c.parse_output.empty() || c.parse_output == "-") {
    write_conll(out, parsed);
  } else {
    std::ofstream f = open_output(c.parse_output);
    write_conll(f, parsed);
  }
  return kOk;
}

// ------------------------------------------------------------------- eval

DepTree tree_from_heads(const Sentence& s, std::size_t sentence_no) {
  DepTree t;
  for (const Token& tok : s.tokens) {
    if (!tok.head)
      throw CliError(kFormat, "format", "predicted sentence " + std::to_string(sentence_no) + " token " +
                                            std::to_string(tok.index) + " has no head");
    t.head.push_back(*tok.head);
    if (*tok.head == 0) t.top = tok.index;
  }
  return t;
}

void check_alignment(const std::vector<Sentence>& gold, const std::vector<Sentence>& pred) {
  if (gold.size() != pred.size())
    throw CliError(kAlignment, "alignment", std::to_string(gold.size()) + " gold sentences but " +
                                                std::to_string(pred.size()) + " predicted");
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i].size() != pred[i].size())
      throw CliError(kAlignment, "alignment", "sentence " + std::to_string(i + 1) + " has " +
                                                  std::to_string(gold[i].size()) + " gold tokens but " +
                                                  std::to_string(pred[i].size()) + " predicted");
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  const PunctuationPolicy punct = punct_policy(c);
  std::vector<Sentence> gold = read_corpus(c.gold_path);
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (!gold[i].has_heads())
      throw CliError(kFormat, "format", "gold sentence " + std::to_string(i + 1) + " lacks heads");

  std::optional<std::ofstream> rows;
  if (!c.rows_path.empty()) {
    rows = open_output(c.rows_path);
    *rows << "mode\tmodel\tuas\ttree_before_repair\n";
  }

  if (!c.pred_path.empty()) {
    if (!c.eval_models.empty()) throw CliError(kUsage, "usage", "give either --pred or --model, not both");
    std::vector<Sentence> pred = read_corpus(c.pred_path);
    check_alignment(gold, pred);
    std::vector<DepTree> trees;
    for (std::size_t i = 0; i < pred.size(); ++i) trees.push_back(tree_from_heads(pred[i], i + 1));
    UasResult r = uas(gold, trees, punct);
    out << "uas " << std::fixed << std::setprecision(2) << r.percent() << std::defaultfloat << " (" << r.correct << "/"
        << r.total << ")\n";
    if (rows) *rows << "-\t" << c.pred_path << '\t' << std::setprecision(std::numeric_limits<double>::max_digits10) << r.percent() << "\t-\n";
    return kOk;
  }
  if (c.eval_models.empty()) throw CliError(kUsage, "usage", "eval needs --pred or at least one --model");

  const DecodeOptions options = decode_options(c);
  std::vector<Model> models;
  for (const std::string& path : c.eval_models) models.push_back(read_model(path));
  std::vector<InferenceMode> modes;
  for (const std::string& m : c.eval_modes) modes.push_back(wrap_parse("usage", [&] { return parse_inference_mode(m); }));
  if (modes.empty()) modes.push_back(default_inference_mode(models.front().config.mode));

  for (InferenceMode mode : modes)
    for (std::size_t k = 0; k < models.size(); ++k) try {
        check_mode(models[k].config.mode, mode);
      } catch (const ModeError& e) {
        throw CliError(kMode, "mode", c.eval_models[k] + ": " + e.what());
      }

  out << std::left << std::setw(6) << "mode" << std::setw(32) << "model" << std::right << std::setw(10) << "uas"
      << std::setw(20) << "tree_before_repair" << "\n";
  auto print_row = [&](InferenceMode mode, const std::string& name, double score, double trees) {
    out << std::left << std::setw(6) << to_string(mode) << std::setw(32) << name << std::right << std::fixed
        << std::setprecision(2) << std::setw(10) << score << std::setprecision(4) << std::setw(20) << trees
        << std::defaultfloat << "\n";
    if (rows)
      *rows << to_string(mode) << '\t' << name << '\t' << std::setprecision(std::numeric_limits<double>::max_digits10) << score << '\t' << trees << '\n';
  };
  for (InferenceMode mode : modes) {
    double sum_uas = 0, sum_trees = 0;
    for (std::size_t k = 0; k < models.size(); ++k) {
      Evaluation e = evaluate(models[k], gold, mode, punct, options);
      print_row(mode, c.eval_models[k], e.uas.percent(), e.tree_before_repair);
      sum_uas += e.uas.percent();
      sum_trees += e.tree_before_repair;
    }
    if (models.size() > 1) {
      const double n = static_cast<double>(models.size());
      print_row(mode, "mean", sum_uas / n, sum_trees / n);
    }
  }
  return kOk;
}

// -------------------------------------------------------------- gradcheck

int cmd_gradcheck(const RunConfig& c, std::ostream& out) {
  ModelGradcheckOptions o;
  o.length = c.gc_length;
  o.hidden = c.gc_hidden;
  o.seed = c.gc_seed;
  o.mode = wrap_parse("usage", [&] { return parse_train_mode(c.gc_mode); });
  o.check.step = c.gc_step;
  o.check.tolerance = c.gc_tolerance;
  o.check.max_entries = c.gc_max_entries;

  struct Reset {
    ~Reset() { ad::testing::reset_backward(); }
  } reset;
  if (!c.gc_corrupt.empty()) wrap_parse("usage", [&] {
      ad::testing::corrupt_backward(c.gc_corrupt, 1.5);
      return 0;
    });

  GradcheckReport r = gradcheck_model(o);
  out << std::left << std::setw(24) << "tensor" << std::right << std::setw(10) << "entries" << std::setw(16)
      << "worst_rel" << std::setw(16) << "worst_abs" << "\n";
  for (const TensorCheck& t : r.tensors)
    out << std::left << std::setw(24) << t.name << std::right << std::setw(10) << t.entries << std::scientific
        << std::setprecision(3) << std::setw(16) << t.worst_relative << std::setw(16) << t.worst_absolute
        << std::defaultfloat << "\n";
  out << (r.passed ? "PASS" : "FAIL") << " worst relative error " << std::scientific << std::setprecision(3)
      << r.worst_relative << " (tolerance " << o.check.tolerance << ")" << std::defaultfloat << "\n";
  if (!r.passed)
    throw CliError(kCheckFailed, "check", "gradient check failed, worst relative error " +
                                              std::to_string(r.worst_relative));
  return kOk;
}

void add_shared(CLI::App* sub, RunConfig& c, bool with_punct) {
  sub->add_option("--root", c.root, "Top-token aggregation over row scores: max or sum")->capture_default_str();
  if (with_punct) {
    sub->add_option("--punct-tags", c.punct_tags, "Extra POS tags treated as punctuation")->delimiter(',');
    sub->add_flag("--keep-punct", c.keep_punct, "Score punctuation tokens too");
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Dependency parser with a BiLSTM encoder and two independent pointer networks", "ipnparse"};
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "Read options from an INI file; flags on the command line win");
  bool dump = false;
  app.add_flag("--dump-config", dump, "Print the effective configuration as INI and exit")->configurable(false);
  app.require_subcommand(1);
  app.fallthrough();

  CLI::App* tr = app.add_subcommand("train", "Train a model per seed, keeping the best dev epoch");
  tr->add_option("--train", c.train_path, "Training treebank (CoNLL-X/CoNLL-U)")->required();
  tr->add_option("--dev", c.dev_path, "Development treebank used for model selection")->required();
  tr->add_option("--pretrained", c.pretrained_path, "Pretrained embeddings in text format");
  tr->add_option("--model", c.model_path, "Output model file (suffixed .seed<N> when several seeds)")->required();
  tr->add_option("--log", c.log_path, "Tab-separated training log");
  tr->add_option("--mode", c.train_mode, "joint, heads or deps")->capture_default_str();
  tr->add_option("--epochs", c.epochs)->capture_default_str();
  tr->add_option("--seeds", c.seeds, "Comma-separated seed list")->delimiter(',')->capture_default_str();
  tr->add_option("--word-dropout", c.word_dropout, "alpha in alpha / (alpha + frequency)")->capture_default_str();
  tr->add_option("--pretrained-dim", c.pretrained_dim)->capture_default_str();
  tr->add_option("--word-dim", c.word_dim)->capture_default_str();
  tr->add_option("--hidden", c.hidden, "BiLSTM hidden size per direction")->capture_default_str();
  tr->add_option("--layers", c.layers, "BiLSTM levels")->capture_default_str();
  tr->add_option("--pointer-hidden", c.pointer_hidden)->capture_default_str();
  tr->add_option("--activation", c.activation, "Pointer output activation: sigmoid or tanh")->capture_default_str();
  tr->add_option("--adam-alpha", c.adam_alpha)->capture_default_str();
  tr->add_option("--adam-beta1", c.adam_beta1)->capture_default_str();
  tr->add_option("--adam-beta2", c.adam_beta2)->capture_default_str();
  tr->add_option("--adam-epsilon", c.adam_epsilon)->capture_default_str();
  tr->add_option("--clip-norm", c.clip_norm, "Global gradient norm clip, 0 disables")->capture_default_str();
  add_shared(tr, c, true);

  CLI::App* pa = app.add_subcommand("parse", "Write predicted heads in CoNLL format");
  pa->add_option("--model", c.parse_model)->required();
  pa->add_option("--input", c.parse_input)->required();
  pa->add_option("--output", c.parse_output, "Output file, '-' or empty for stdout");
  pa->add_option("--mode", c.parse_mode, "p1..p5; defaults to the model's own configuration");
  add_shared(pa, c, false);

  CLI::App* ev = app.add_subcommand("eval", "Unlabeled attachment score against a gold treebank");
  ev->add_option("--gold", c.gold_path)->required();
  ev->add_option("--pred", c.pred_path, "Predicted treebank to score");
  ev->add_option("--model", c.eval_models, "Model file(s), one per seed")->delimiter(',');
  ev->add_option("--modes", c.eval_modes, "Comma-separated configurations, e.g. p1,p2,p3")->delimiter(',');
  ev->add_option("--rows", c.rows_path, "Tab-separated result rows");
  add_shared(ev, c, true);

  CLI::App* gc = app.add_subcommand("gradcheck", "Whole-model finite-difference gradient check");
  gc->add_option("--length", c.gc_length)->capture_default_str();
  gc->add_option("--hidden", c.gc_hidden)->capture_default_str();
  gc->add_option("--seed", c.gc_seed)->capture_default_str();
  gc->add_option("--step", c.gc_step)->capture_default_str();
  gc->add_option("--tolerance", c.gc_tolerance)->capture_default_str();
  gc->add_option("--mode", c.gc_mode)->capture_default_str();
  gc->add_option("--max-entries", c.gc_max_entries, "Entries probed per tensor, 0 for all")->capture_default_str();
  gc->add_option("--corrupt-backward", c.gc_corrupt, "Negative control: scale one op's backward rule")
      ->group("");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "ipnparse: error: usage: " << e.what() << "\n";
    return kUsage;
  }

  // an INI dump writes empty lists as "", which reads back as one empty element
  for (std::vector<std::string>* v : {&c.punct_tags, &c.eval_models, &c.eval_modes})
    std::erase(*v, std::string());

  if (dump) {
    out << app.config_to_str(true, false);
    return kOk;
  }

  try {
    if (tr->parsed()) return cmd_train(c, out);
    if (pa->parsed()) return cmd_parse(c, out);
    if (ev->parsed()) return cmd_eval(c, out);
    if (gc->parsed()) return cmd_gradcheck(c, out);
  } catch (const CliError& e) {
    err << "ipnparse: error: " << e.category << ": " << e.what() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    err << "ipnparse: error: internal: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}

}  // namespace ipn::cli
