#include "ipn/decoder.hpp"

#include <algorithm>

namespace ipn {

std::string to_string(InferenceMode mode) {
  switch (mode) {
    case InferenceMode::p1: return "p1";
    case InferenceMode::p2: return "p2";
    case InferenceMode::p3: return "p3";
    case InferenceMode::p4: return "p4";
    case InferenceMode::p5: return "p5";
  }
  return "?";
}

InferenceMode parse_inference_mode(const std::string& s) {
  if (s == "p1") return InferenceMode::p1;
  if (s == "p2") return InferenceMode::p2;
  if (s == "p3") return InferenceMode::p3;
  if (s == "p4") return InferenceMode::p4;
  if (s == "p5") return InferenceMode::p5;
  throw std::invalid_argument("unknown parser configuration '" + s + "' (expected p1..p5)");
}

bool is_acyclic(std::span<const int> heads) {
  const int n = static_cast<int>(heads.size());
  for (int start = 1; start <= n; ++start) {
    int u = start;
    int steps = 0;
    while (u != 0) {
      if (u < 1 || u > n || ++steps > n) return false;
      u = heads[u - 1];
    }
  }
  return true;
}

std::optional<std::string> tree_violation(const DepTree& tree) {
  const int n = static_cast<int>(tree.size());
  if (n == 0) return "empty tree";
  int tops = 0;
  for (int i = 1; i <= n; ++i) {
    int h = tree.head[i - 1];
    if (h == i) return "token " + std::to_string(i) + " heads itself";
    if (h < 0 || h > n) return "token " + std::to_string(i) + " has head " + std::to_string(h) + " out of range";
    if (h == 0) {
      ++tops;
      if (i != tree.top) return "token " + std::to_string(i) + " has head 0 but top is " + std::to_string(tree.top);
    }
  }
  if (tops != 1) return std::to_string(tops) + " top tokens";
  if (!is_acyclic(tree.head)) return "head function has a cycle";
  return std::nullopt;
}

namespace detail {

void require_square(const char* what, Eigen::Index rows, Eigen::Index cols) {
  if (rows != cols)
    throw std::invalid_argument(std::string(what) + ": expected a square matrix, got " + std::to_string(rows) + "x" +
                                std::to_string(cols));
}

std::vector<int> first_cycle(std::span<const int> heads) {
  const int n = static_cast<int>(heads.size());
  std::vector<char> state(n + 1, 0);  // 0 unvisited, 1 on current path, 2 finished
  for (int start = 1; start <= n; ++start) {
    if (state[start]) continue;
    std::vector<int> path;
    int u = start;
    while (u != 0 && state[u] == 0) {
      state[u] = 1;
      path.push_back(u);
      u = heads[u - 1];
    }
    if (u != 0 && state[u] == 1) {
      auto it = std::find(path.begin(), path.end(), u);
      return {it, path.end()};
    }
    for (int p : path) state[p] = 2;
  }
  return {};
}

std::vector<bool> descendants_of(std::span<const int> heads, int node) {
  const int n = static_cast<int>(heads.size());
  std::vector<bool> below(n, false);
  for (int start = 1; start <= n; ++start) {
    if (start == node) continue;
    int u = heads[start - 1];
    for (int steps = 0; u != 0 && steps < n; ++steps) {
      if (u == node) {
        below[start - 1] = true;
        break;
      }
      u = heads[u - 1];
    }
  }
  return below;
}

}  // namespace detail

UasResult uas(std::span<const Sentence> gold, std::span<const DepTree> predicted, const PunctuationPolicy& punct) {
  if (gold.size() != predicted.size())
    throw std::invalid_argument("uas: " + std::to_string(gold.size()) + " gold sentences but " +
                                std::to_string(predicted.size()) + " predicted trees");
  UasResult r;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const Sentence& g = gold[s];
    const DepTree& p = predicted[s];
    if (g.size() != p.size())
      throw std::invalid_argument("uas: sentence " + std::to_string(s + 1) + " has " + std::to_string(g.size()) +
                                  " gold tokens but " + std::to_string(p.size()) + " predicted heads");
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Token& t = g.tokens[i];
      if (!t.head)
        throw std::invalid_argument("uas: sentence " + std::to_string(s + 1) + " token " + std::to_string(t.index) +
                                    " has no gold head");
      if (punct.is_punctuation(t)) continue;
      ++r.total;
      if (p.head[i] == *t.head) ++r.correct;
    }
  }
  return r;
}

}  // namespace ipn
