#include "ipn/toy_grammar.hpp"

#include <random>
#include <set>
#include <string>

namespace ipn {

namespace {

struct Category {
  const char* upos;
  const char* xpos;
  std::vector<const char*> words;
};

const Category kDet{"DET", "DT", {"the", "a", "every", "some"}};
const Category kAdj{"ADJ", "JJ", {"big", "small", "red", "old", "happy", "quiet"}};
const Category kNoun{"NOUN", "NN", {"dog", "cat", "man", "woman", "bird", "child", "farmer", "teacher", "house",
                                    "garden", "river", "tree"}};
const Category kIntransitive{"VERB", "VBZ", {"sleeps", "runs", "arrives", "laughs", "sings"}};
const Category kTransitive{"VERB", "VBZ", {"sees", "likes", "chases", "finds", "feeds"}};
const Category kAdverb{"ADV", "RB", {"quickly", "often", "loudly"}};
const Category kPrep{"ADP", "IN", {"near", "in", "under", "with"}};
const Category kRel{"PRON", "WP", {"who", "that"}};
const Category kPunct{"PUNCT", ".", {"."}};

class Builder {
 public:
  explicit Builder(std::mt19937_64& rng) : rng_(rng) {}

  int word(const Category& c, const char* deprel) {
    std::uniform_int_distribution<std::size_t> pick(0, c.words.size() - 1);
    Token t;
    t.index = static_cast<int>(tokens_.size()) + 1;
    t.form = c.words[pick(rng_)];
    t.pos = c.xpos;
    t.head = 0;
    t.columns = {std::to_string(t.index), t.form, t.form, c.upos, c.xpos, "_", "0", deprel, "_", "_"};
    tokens_.push_back(std::move(t));
    return static_cast<int>(tokens_.size());
  }

  void attach(int dependent, int head) {
    tokens_[dependent - 1].head = head;
    tokens_[dependent - 1].columns[6] = std::to_string(head);
  }

  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  // [det] [adj] noun [prep det noun]; returns the noun
  int noun_phrase(const char* deprel, bool allow_pp) {
    int det = word(kDet, "det");
    int adj = coin(0.35) ? word(kAdj, "amod") : 0;
    int noun = word(kNoun, deprel);
    attach(det, noun);
    if (adj) attach(adj, noun);
    if (allow_pp && coin(0.25)) {
      int prep = word(kPrep, "prep");
      attach(prep, noun);
      int inner = noun_phrase("pobj", false);
      attach(inner, prep);
    }
    return noun;
  }

  Sentence finish() {
    Sentence s;
    s.tokens = std::move(tokens_);
    tokens_.clear();
    return s;
  }

 private:
  std::mt19937_64& rng_;
  std::vector<Token> tokens_;
};

Sentence generate(std::mt19937_64& rng) {
  Builder b(rng);
  std::uniform_int_distribution<int> kind(0, 3);
  const int k = kind(rng);
  int subject = b.noun_phrase("nsubj", true);
  int verb = 0;
  if (k == 0 || k == 2) {
    verb = b.word(kIntransitive, "root");
  } else {
    verb = b.word(kTransitive, "root");
  }
  b.attach(subject, verb);
  int object = 0;
  if (k == 1 || k == 3) {
    object = b.noun_phrase("dobj", k == 1);
    b.attach(object, verb);
  }
  if (b.coin(0.3)) b.attach(b.word(kAdverb, "advmod"), verb);
  if (k == 2 || k == 3) {
    // relative clause on the subject (extraposed past the verb) or on the object
    int rel = b.word(kRel, "nsubj");
    int rc_verb = b.word(kIntransitive, "rcmod");
    b.attach(rel, rc_verb);
    b.attach(rc_verb, k == 2 ? subject : object);
  }
  b.attach(b.word(kPunct, "punct"), verb);
  return b.finish();
}

}  // namespace

std::vector<Sentence> toy_treebank(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Sentence> out;
  std::set<std::string> seen;
  while (out.size() < count) {
    Sentence s = generate(rng);
    if (s.size() < 3 || s.size() > 10) continue;
    std::string key;
    for (const Token& t : s.tokens) key += t.form + ' ';
    if (!seen.insert(key).second) continue;
    out.push_back(std::move(s));
  }
  return out;
}

bool is_non_projective(const Sentence& sentence) {
  const int n = static_cast<int>(sentence.size());
  auto dominates = [&](int head, int node) {
    for (int u = node, steps = 0; u != 0 && steps <= n; ++steps) {
      if (u == head) return true;
      u = sentence.tokens[u - 1].head.value_or(0);
    }
    return false;
  };
  for (const Token& t : sentence.tokens) {
    int h = t.head.value_or(0);
    if (h == 0) continue;
    for (int k = std::min(h, t.index) + 1; k < std::max(h, t.index); ++k)
      if (!dominates(h, k)) return true;
  }
  return false;
}

}  // namespace ipn
