#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ipn {

/// Error raised while reading a treebank or embedding file; carries the
/// 1-based line number of the offending input line.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Token {
  int index = 0;                   // 1-based position
  std::string form;
  std::optional<std::string> pos;  // only consulted for punctuation exclusion
  std::optional<int> head;         // 0 marks the top token
  std::vector<std::string> columns;  // original fields, rewritten on output
};

struct Sentence {
  std::vector<std::string> comments;  // CoNLL-U "#" lines, kept verbatim
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool has_heads() const;
  /// Copy with the HEAD field of every token replaced by `heads[i]`.
  Sentence with_heads(std::span<const int> heads) const;
};

/// Reads CoNLL-X or CoNLL-U. Multiword ranges ("1-2") and empty nodes
/// ("1.1") are skipped; "_" in the HEAD column means no head is given.
std::vector<Sentence> read_conll(std::istream& in);
std::vector<Sentence> read_conll_file(const std::string& path);

/// Writes every token's head into the HEAD column. Throws
/// std::invalid_argument if a token has no head.
void write_conll(std::ostream& out, std::span<const Sentence> sentences);

// ASCII lowercase; bytes outside ASCII pass through unchanged.
std::string lowercase(std::string_view s);

/// Form -> id map built from the training set. Id 0 is reserved for the
/// unknown word and is what every unseen form maps to.
class Vocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;
  static constexpr std::string_view kUnknownForm = "<unk>";

  Vocabulary();
  static Vocabulary build(std::span<const Sentence> train);

  std::size_t id(std::string_view form) const;
  std::size_t frequency(std::size_t id) const { return counts_.at(id); }
  const std::string& form(std::size_t id) const { return forms_.at(id); }
  std::size_t size() const { return forms_.size(); }

  /// Appends a non-reserved lookup key with its count; used when deserializing.
  void add(std::string key, std::size_t count);

  bool operator==(const Vocabulary& other) const { return forms_ == other.forms_ && counts_ == other.counts_; }

 private:
  std::vector<std::string> forms_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Words of a pretrained embedding file with their vectors stored as the
/// columns of a dim x (words + 1) matrix. Column 0 is the unknown vector
/// (zero-initialized).
struct PretrainedEmbeddings {
  std::vector<std::string> words;  // words[k] owns column k + 1
  Eigen::MatrixXd vectors;

  std::size_t dimension() const { return static_cast<std::size_t>(vectors.rows()); }
  std::size_t size() const { return words.size(); }
};

/// Maps a pretrained word list to column ids. Lookup tries the raw form,
/// then its lowercased key, then falls back to column 0.
class PretrainedIndex {
 public:
  PretrainedIndex() = default;
  explicit PretrainedIndex(std::vector<std::string> words);

  std::size_t id(std::string_view form) const;
  const std::vector<std::string>& words() const { return words_; }
  std::size_t columns() const { return words_.size() + 1; }
  bool operator==(const PretrainedIndex& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Text embeddings, one "word v1 ... vd" per line; an initial "count dim"
/// header is tolerated. A repeated word overrides the earlier vector.
PretrainedEmbeddings load_pretrained(std::istream& in);
PretrainedEmbeddings load_pretrained_file(const std::string& path);

/// Decides which tokens count as punctuation for evaluation.
struct PunctuationPolicy {
  bool exclude = true;
  std::set<std::string> extra_tags;  // user-supplied tags treated as punctuation

  bool is_punctuation(const Token& t) const;
};

}  // namespace ipn
