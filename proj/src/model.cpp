#include "ipn/model.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

namespace ipn {

using ad::Index;
using ad::Parameter;
using ad::Tensor;
using ad::Var;

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::joint: return "joint";
    case TrainMode::heads_only: return "heads";
    case TrainMode::deps_only: return "deps";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "joint") return TrainMode::joint;
  if (s == "heads") return TrainMode::heads_only;
  if (s == "deps") return TrainMode::deps_only;
  throw std::invalid_argument("unknown training mode '" + s + "' (expected joint, heads or deps)");
}

std::string to_string(OutputActivation act) { return act == OutputActivation::sigmoid ? "sigmoid" : "tanh"; }

OutputActivation parse_activation(const std::string& s) {
  if (s == "sigmoid") return OutputActivation::sigmoid;
  if (s == "tanh") return OutputActivation::tanh;
  throw std::invalid_argument("unknown output activation '" + s + "' (expected sigmoid or tanh)");
}

void check_mode(TrainMode trained, InferenceMode mode) {
  bool ok = false;
  switch (mode) {
    case InferenceMode::p1:
    case InferenceMode::p2:
    case InferenceMode::p3: ok = trained == TrainMode::joint; break;
    case InferenceMode::p4: ok = trained == TrainMode::heads_only; break;
    case InferenceMode::p5: ok = trained == TrainMode::deps_only; break;
  }
  if (!ok)
    throw ModeError("configuration " + to_string(mode) + " cannot be used with a model trained in '" +
                    to_string(trained) + "' mode (p1-p3 need joint, p4 heads, p5 deps)");
}

InferenceMode default_inference_mode(TrainMode trained) {
  switch (trained) {
    case TrainMode::joint: return InferenceMode::p1;
    case TrainMode::heads_only: return InferenceMode::p4;
    case TrainMode::deps_only: return InferenceMode::p5;
  }
  return InferenceMode::p1;
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  return encoder.pretrained_dim == o.encoder.pretrained_dim && encoder.word_dim == o.encoder.word_dim &&
         encoder.hidden == o.encoder.hidden && encoder.layers == o.encoder.layers &&
         encoder.word_dropout == o.encoder.word_dropout && pointer_hidden == o.pointer_hidden &&
         activation == o.activation && mode == o.mode;
}

// -------------------------------------------------------------------- Model

Model Model::create(const ModelConfig& config, Lexicon lexicon, const PretrainedEmbeddings* pretrained, Rng& rng) {
  Model m;
  m.config = config;
  m.lexicon = std::move(lexicon);
  m.encoder = EncoderParams::init(config.encoder, m.lexicon, pretrained, rng);
  const Index ctx = config.encoder.context_dim();
  m.heads = PointerParams::init("pointer.heads", ctx, config.pointer_hidden, rng);
  m.deps = PointerParams::init("pointer.deps", ctx, config.pointer_hidden, rng);
  return m;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out = encoder.parameters();
  for (Parameter* p : heads.parameters()) out.push_back(p);
  for (Parameter* p : deps.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto mut = const_cast<Model*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

ForwardScores forward(ad::Tape& tape, const Model& model, const Sentence& sentence, bool want_heads, bool want_deps,
                      const std::vector<bool>& dropped) {
  std::vector<Var> tokens = encode_tokens(tape, sentence, model.lexicon, model.encoder, dropped);
  std::vector<Var> contexts = bilstm_encode(tape, tokens, model.encoder);
  ForwardScores out;
  if (want_heads) out.heads = score_all(tape, contexts, model.heads);
  if (want_deps) out.deps = score_all(tape, contexts, model.deps);
  return out;
}

SentenceScores score_sentence(const Model& model, const Sentence& sentence, InferenceMode mode) {
  check_mode(model.config.mode, mode);
  ad::Tape tape;
  ForwardScores f = forward(tape, model, sentence, mode_uses_heads(mode), mode_uses_deps(mode));
  SentenceScores out;
  if (f.heads) out.heads = ScoreMatrix{f.heads->value(), Orientation::heads};
  if (f.deps) out.deps = ScoreMatrix{f.deps->value(), Orientation::dependents};
  return out;
}

Eigen::MatrixXd merged_scores(const Model& model, const Sentence& sentence, InferenceMode mode) {
  SentenceScores s = score_sentence(model, sentence, mode);
  const Eigen::MatrixXd empty;
  return merge(s.heads ? s.heads->values : empty, s.deps ? s.deps->values : empty, mode, model.config.activation);
}

Var pointer_loss(Var scores, const Eigen::MatrixXd& target, OutputActivation activation) {
  return activation == OutputActivation::sigmoid ? ad::sigmoid_bce(scores, target) : ad::tanh_mse(scores, target);
}

// ------------------------------------------------------------ Serialization

namespace {

constexpr char kMagic[8] = {'I', 'P', 'N', 'M', 'O', 'D', 'E', 'L'};

std::uint64_t fnv1a(const std::string& bytes, std::size_t length) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < length; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void raw(const char* data, std::size_t n) { buf_.append(data, n); }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : buf_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw ModelFormatError(pos_, std::string("truncated while reading ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) {
    std::uint32_t n = u32(what);
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

std::map<std::string, std::string> config_entries(const ModelConfig& c) {
  return {{"activation", to_string(c.activation)},
          {"hidden", std::to_string(c.encoder.hidden)},
          {"layers", std::to_string(c.encoder.layers)},
          {"mode", to_string(c.mode)},
          {"pointer_hidden", std::to_string(c.pointer_hidden)},
          {"pretrained_dim", std::to_string(c.encoder.pretrained_dim)},
          {"word_dim", std::to_string(c.encoder.word_dim)},
          {"word_dropout", format_double(c.encoder.word_dropout)}};
}

long long parse_integer(const std::map<std::string, std::string>& m, const std::string& key, std::size_t at) {
  auto it = m.find(key);
  if (it == m.end()) throw ModelFormatError(at, "missing configuration entry '" + key + "'");
  long long v = 0;
  const std::string& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 1)
    throw ModelFormatError(at, "bad value '" + s + "' for '" + key + "'");
  return v;
}

ModelConfig config_from_entries(const std::map<std::string, std::string>& m, std::size_t at) {
  ModelConfig c;
  c.encoder.pretrained_dim = parse_integer(m, "pretrained_dim", at);
  c.encoder.word_dim = parse_integer(m, "word_dim", at);
  c.encoder.hidden = parse_integer(m, "hidden", at);
  c.encoder.layers = static_cast<int>(parse_integer(m, "layers", at));
  c.pointer_hidden = parse_integer(m, "pointer_hidden", at);
  try {
    const std::string& d = m.at("word_dropout");
    auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), c.encoder.word_dropout);
    if (ec != std::errc() || ptr != d.data() + d.size()) throw std::invalid_argument(d);
    c.activation = parse_activation(m.at("activation"));
    c.mode = parse_train_mode(m.at("mode"));
  } catch (const std::exception& e) {
    throw ModelFormatError(at, std::string("bad configuration entry: ") + e.what());
  }
  return c;
}

}  // namespace

void save_model(const Model& model, std::ostream& out) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kModelFormatVersion);

  auto entries = config_entries(model.config);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [k, v] : entries) {
    w.str(k);
    w.str(v);
  }

  const Vocabulary& vocab = model.lexicon.vocab;
  w.u32(static_cast<std::uint32_t>(vocab.size() - 1));
  for (std::size_t id = 1; id < vocab.size(); ++id) {
    w.str(vocab.form(id));
    w.u64(vocab.frequency(id));
  }

  const auto& words = model.lexicon.pretrained.words();
  w.u32(static_cast<std::uint32_t>(words.size()));
  for (const std::string& word : words) w.str(word);

  auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    if (!p->value.allFinite()) throw std::invalid_argument("save_model: parameter '" + p->name + "' is not finite");
    w.str(p->name);
    w.u8(p->sparse ? 1 : 0);
    w.u64(static_cast<std::uint64_t>(p->value.rows()));
    w.u64(static_cast<std::uint64_t>(p->value.cols()));
    for (Index i = 0; i < p->value.size(); ++i) w.f64(p->value.data()[i]);
  }
  w.u64(fnv1a(w.bytes(), w.bytes().size()));
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("save_model: write failed");
}

Model load_model(std::istream& in) {
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  Reader r(bytes);

  r.need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw ModelFormatError(0, "not a model file (bad magic)");
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8("magic");
  const std::size_t version_at = r.offset();
  std::uint32_t version = r.u32("format version");
  if (version != kModelFormatVersion)
    throw ModelFormatError(version_at, "unsupported format version " + std::to_string(version) + ", expected " +
                                           std::to_string(kModelFormatVersion));

  std::map<std::string, std::string> entries;
  const std::size_t config_at = r.offset();
  for (std::uint32_t n = r.u32("configuration count"); n > 0; --n) {
    std::string k = r.str("configuration key");
    entries[k] = r.str("configuration value");
  }
  ModelConfig config = config_from_entries(entries, config_at);

  Lexicon lexicon;
  std::set<std::string> seen;
  for (std::uint32_t n = r.u32("vocabulary size"); n > 0; --n) {
    const std::size_t at = r.offset();
    std::string form = r.str("vocabulary entry");
    std::uint64_t count = r.u64("vocabulary count");
    if (!seen.insert(form).second) throw ModelFormatError(at, "duplicate vocabulary entry '" + form + "'");
    lexicon.vocab.add(std::move(form), count);
  }
  std::vector<std::string> words;
  for (std::uint32_t n = r.u32("pretrained word count"); n > 0; --n) words.push_back(r.str("pretrained word"));
  lexicon.pretrained = PretrainedIndex(std::move(words));

  Rng unused(0);
  Model model;
  try {
    model = Model::create(config, std::move(lexicon), nullptr, unused);
  } catch (const std::invalid_argument& e) {
    throw ModelFormatError(config_at, e.what());
  }
  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : model.parameters()) by_name[p->name] = p;

  std::set<std::string> loaded;
  for (std::uint32_t n = r.u32("tensor count"); n > 0; --n) {
    const std::size_t at = r.offset();
    std::string name = r.str("tensor name");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ModelFormatError(at, "unknown tensor '" + name + "'");
    if (!loaded.insert(name).second) throw ModelFormatError(at, "duplicate tensor '" + name + "'");
    Parameter& p = *it->second;
    bool sparse = r.u8("tensor flags") != 0;
    std::uint64_t rows = r.u64("tensor rows"), cols = r.u64("tensor cols");
    if (sparse != p.sparse || rows != static_cast<std::uint64_t>(p.value.rows()) ||
        cols != static_cast<std::uint64_t>(p.value.cols()))
      throw ModelFormatError(at, "tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                                     std::to_string(cols) + ", expected " + std::to_string(p.value.rows()) + "x" +
                                     std::to_string(p.value.cols()));
    r.need(rows * cols * 8, "tensor values");
    for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = r.f64("tensor values");
  }
  if (loaded.size() != by_name.size()) throw ModelFormatError(r.offset(), "model file is missing tensors");

  const std::size_t checksum_at = r.offset();
  std::uint64_t checksum = r.u64("checksum");
  if (checksum != fnv1a(bytes, checksum_at)) throw ModelFormatError(checksum_at, "checksum mismatch");
  if (r.remaining() != 0) throw ModelFormatError(r.offset(), "trailing bytes after checksum");
  return model;
}

void save_model_file(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  save_model(model, out);
}

Model load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return load_model(in);
}

}  // namespace ipn
