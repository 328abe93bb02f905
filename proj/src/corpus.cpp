#include "ipn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ipn {

namespace {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

constexpr std::size_t kHeadColumn = 6;

}  // namespace

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (static_cast<unsigned char>(c) < 128) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// ----------------------------------------------------------------- Sentence

bool Sentence::has_heads() const {
  return std::all_of(tokens.begin(), tokens.end(), [](const Token& t) { return t.head.has_value(); });
}

Sentence Sentence::with_heads(std::span<const int> heads) const {
  if (heads.size() != tokens.size())
    throw std::invalid_argument("with_heads: " + std::to_string(heads.size()) + " heads for " +
                                std::to_string(tokens.size()) + " tokens");
  Sentence out = *this;
  for (std::size_t i = 0; i < heads.size(); ++i) out.tokens[i].head = heads[i];
  return out;
}

// ------------------------------------------------------------------ Reading

std::vector<Sentence> read_conll(std::istream& in) {
  std::vector<Sentence> out;
  Sentence current;
  std::vector<std::size_t> token_lines;
  std::size_t line_no = 0;

  auto finish = [&] {
    if (current.tokens.empty()) {
      current = Sentence();
      return;
    }
    const int n = static_cast<int>(current.tokens.size());
    for (std::size_t i = 0; i < current.tokens.size(); ++i) {
      const Token& t = current.tokens[i];
      if (!t.head) continue;
      if (*t.head < 0 || *t.head > n)
        throw FormatError(token_lines[i], "head " + std::to_string(*t.head) + " outside [0, " +
                                              std::to_string(n) + "]");
      if (*t.head == t.index) throw FormatError(token_lines[i], "token " + std::to_string(t.index) + " heads itself");
    }
    out.push_back(std::move(current));
    current = Sentence();
    token_lines.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) {
      finish();
      continue;
    }
    if (line.front() == '#') {
      current.comments.push_back(line);
      continue;
    }
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() < kHeadColumn + 1) fields = split_whitespace(line);
    if (fields.size() < kHeadColumn + 1)
      throw FormatError(line_no, "expected at least 7 columns, found " + std::to_string(fields.size()));

    const std::string& id = fields[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;
    auto index = parse_int(id);
    if (!index) throw FormatError(line_no, "non-integer token id '" + id + "'");
    const int expected = static_cast<int>(current.tokens.size()) + 1;
    if (*index != expected)
      throw FormatError(line_no, "token id " + id + " where " + std::to_string(expected) + " was expected");

    Token t;
    t.index = *index;
    t.form = fields[1];
    if (fields[4] != "_")
      t.pos = fields[4];
    else if (fields[3] != "_")
      t.pos = fields[3];
    const std::string& head = fields[kHeadColumn];
    if (head != "_") {
      auto h = parse_int(head);
      if (!h) throw FormatError(line_no, "non-integer head '" + head + "'");
      t.head = *h;
    }
    t.columns = std::move(fields);
    current.tokens.push_back(std::move(t));
    token_lines.push_back(line_no);
  }
  finish();
  return out;
}

std::vector<Sentence> read_conll_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_conll(in);
}

// ------------------------------------------------------------------ Writing

void write_conll(std::ostream& out, std::span<const Sentence> sentences) {
  std::size_t sentence_no = 0;
  for (const Sentence& s : sentences) {
    ++sentence_no;
    for (const Token& t : s.tokens)
      if (!t.head)
        throw std::invalid_argument("write_conll: sentence " + std::to_string(sentence_no) + " token " +
                                    std::to_string(t.index) + " has no head");
    for (const std::string& c : s.comments) out << c << '\n';
    for (const Token& t : s.tokens) {
      std::vector<std::string> cols = t.columns;
      if (cols.size() < kHeadColumn + 1) {
        std::string pos = t.pos.value_or("_");
        cols = {std::to_string(t.index), t.form, "_", pos, pos, "_", "", "_", "_", "_"};
      }
      cols[kHeadColumn] = std::to_string(*t.head);
      for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "\t" : "") << cols[i];
      out << '\n';
    }
    out << '\n';
  }
}

// --------------------------------------------------------------- Vocabulary

// The reserved entry has no lookup key, so no training form can alias it.
Vocabulary::Vocabulary() : forms_{std::string(kUnknownForm)}, counts_{0} {}

void Vocabulary::add(std::string key, std::size_t count) {
  ids_.emplace(key, forms_.size());
  forms_.push_back(std::move(key));
  counts_.push_back(count);
}

Vocabulary Vocabulary::build(std::span<const Sentence> train) {
  Vocabulary v;
  std::size_t tokens = 0;
  for (const Sentence& s : train) {
    for (const Token& t : s.tokens) {
      ++tokens;
      std::string key = lowercase(t.form);
      auto it = v.ids_.find(key);
      if (it == v.ids_.end()) {
        v.add(std::move(key), 1);
      } else {
        ++v.counts_[it->second];
      }
    }
  }
  if (tokens == 0) throw std::invalid_argument("build_vocab: training corpus is empty");
  return v;
}

std::size_t Vocabulary::id(std::string_view form) const {
  auto it = ids_.find(lowercase(form));
  return it == ids_.end() ? kUnknown : it->second;
}

// --------------------------------------------------------------- Pretrained

PretrainedIndex::PretrainedIndex(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t k = 0; k < words_.size(); ++k) ids_[words_[k]] = k + 1;
}

std::size_t PretrainedIndex::id(std::string_view form) const {
  if (auto it = ids_.find(std::string(form)); it != ids_.end()) return it->second;
  if (auto it = ids_.find(lowercase(form)); it != ids_.end()) return it->second;
  return 0;
}

PretrainedEmbeddings load_pretrained(std::istream& in) {
  std::vector<std::string> words;
  std::vector<std::vector<double>> vectors;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  bool first = true;

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    std::vector<std::string> fields = split_whitespace(line);
    if (first) {
      first = false;
      if (fields.size() == 2 && parse_int(fields[0]) && parse_int(fields[1])) continue;
    }
    if (fields.size() < 2) throw FormatError(line_no, "embedding line has no values");
    const std::size_t d = fields.size() - 1;
    if (dim == 0)
      dim = d;
    else if (d != dim)
      throw FormatError(line_no, "dimension " + std::to_string(d) + " differs from " + std::to_string(dim));

    std::vector<double> values(d);
    for (std::size_t k = 0; k < d; ++k) {
      auto v = parse_double(fields[k + 1]);
      if (!v || !std::isfinite(*v)) throw FormatError(line_no, "bad value '" + fields[k + 1] + "'");
      values[k] = *v;
    }
    if (auto it = seen.find(fields[0]); it != seen.end()) {
      std::clog << "warning: embeddings line " << line_no << ": duplicate word '" << fields[0]
                << "', later vector kept\n";
      vectors[it->second] = std::move(values);
      continue;
    }
    seen.emplace(fields[0], words.size());
    words.push_back(fields[0]);
    vectors.push_back(std::move(values));
  }
  if (words.empty()) throw FormatError(line_no, "no embedding vectors found");

  PretrainedEmbeddings out;
  out.words = std::move(words);
  out.vectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(out.words.size() + 1));
  for (std::size_t k = 0; k < vectors.size(); ++k)
    for (std::size_t r = 0; r < dim; ++r) out.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k + 1)) = vectors[k][r];
  return out;
}

PretrainedEmbeddings load_pretrained_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return load_pretrained(in);
}

// -------------------------------------------------------------- Punctuation

bool PunctuationPolicy::is_punctuation(const Token& t) const {
  if (!exclude || !t.pos || t.pos->empty()) return false;
  if (extra_tags.count(*t.pos)) return true;
  return std::all_of(t.pos->begin(), t.pos->end(), [](unsigned char c) { return c < 128 && std::ispunct(c); });
}

}  // namespace ipn
