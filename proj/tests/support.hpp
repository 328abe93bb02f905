#pragma once

#include "ipn/autodiff.hpp"
#include "ipn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace test {

using ipn::ad::Parameter;
using ipn::ad::Tape;
using ipn::ad::Tensor;
using ipn::ad::Var;

inline Tensor uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -2, double hi = 2) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(rows, cols);
  for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = u(rng);
  return t;
}

// Central differences against the tape gradient; returns the worst relative error.
inline double fd_worst(const std::function<Var(Tape&)>& f, const std::vector<Parameter*>& params,
                       double step = 1e-5, double floor = 1e-8) {
  Tape tape;
  ipn::ad::Gradients g = tape.backward(f(tape));
  double worst = 0;
  for (Parameter* p : params) {
    Tensor analytic = g.dense(*p);
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& x = p->value.data()[k];
      const double saved = x;
      x = saved + step;
      double up = f(tape).scalar();
      tape.clear();
      x = saved - step;
      double down = f(tape).scalar();
      tape.clear();
      x = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = analytic.data()[k];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor}));
    }
  }
  return worst;
}

inline std::vector<ipn::Sentence> parse_conll(const std::string& text) {
  std::istringstream in(text);
  return ipn::read_conll(in);
}

inline std::string to_conll(const std::vector<ipn::Sentence>& s) {
  std::ostringstream out;
  ipn::write_conll(out, s);
  return out.str();
}

// Sentence with forms and heads; heads are 1-based, 0 for the top.
inline ipn::Sentence make_sentence(const std::vector<std::string>& forms, const std::vector<int>& heads = {}) {
  ipn::Sentence s;
  for (std::size_t i = 0; i < forms.size(); ++i) {
    ipn::Token t;
    t.index = static_cast<int>(i) + 1;
    t.form = forms[i];
    if (!heads.empty()) t.head = heads[i];
    s.tokens.push_back(t);
  }
  return s;
}

// Uniformly random head vector forming a tree over n tokens (random attachment order).
inline std::vector<int> random_tree(int n, std::mt19937_64& rng) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i + 1;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> heads(n, 0);
  for (int k = 1; k < n; ++k) heads[order[k] - 1] = order[std::uniform_int_distribution<int>(0, k - 1)(rng)];
  return heads;
}

// Independent tree check: one top, no self-head, heads in range, every token reaches the top.
inline bool valid_tree(const std::vector<int>& head, int top) {
  const int n = static_cast<int>(head.size());
  int tops = 0;
  for (int i = 1; i <= n; ++i) {
    int h = head[i - 1];
    if (h == 0) {
      ++tops;
      if (i != top) return false;
    } else if (h < 1 || h > n || h == i) {
      return false;
    }
  }
  if (tops != 1) return false;
  for (int i = 1; i <= n; ++i) {
    int u = i;
    for (int steps = 0; steps <= n && u != top; ++steps) u = head[u - 1];
    if (u != top) return false;
  }
  return true;
}

}  // namespace test
