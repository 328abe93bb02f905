#include "ipn/adam.hpp"

#include <cmath>
#include <iostream>

namespace ipn::ad {

namespace {

bool all_finite(const Gradients::Entry& e) {
  if (e.dense.size() != 0 && !e.dense.allFinite()) return false;
  for (const auto& [col, g] : e.columns)
    if (!g.allFinite()) return false;
  return true;
}

double squared_norm(const Gradients::Entry& e) {
  double s = e.dense.size() != 0 ? e.dense.squaredNorm() : 0.0;
  for (const auto& [col, g] : e.columns) s += g.squaredNorm();
  return s;
}

}  // namespace

const Adam::Moments* Adam::moments(const Parameter& p) const {
  auto it = state_.find(&p);
  return it == state_.end() ? nullptr : &it->second;
}

Adam::StepReport Adam::step(std::span<Parameter* const> params, const Gradients& grads) {
  ++steps_;
  StepReport report;

  std::vector<std::pair<Parameter*, const Gradients::Entry*>> live;
  for (Parameter* p : params) {
    const Gradients::Entry* e = grads.find(*p);
    if (!e) continue;
    if (!all_finite(*e)) {
      report.rejected.push_back(p->name);
      std::clog << "warning: adam: non-finite gradient for '" << p->name << "', update skipped\n";
      continue;
    }
    live.emplace_back(p, e);
  }

  double clip = 1.0;
  if (config_.clip_norm > 0) {
    double total = 0;
    for (const auto& [p, e] : live) total += squared_norm(*e);
    double norm = std::sqrt(total);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }

  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  const double b1 = config_.beta1, b2 = config_.beta2, alpha = config_.alpha, eps = config_.epsilon;

  auto update = [&](Eigen::Ref<Tensor> value, Eigen::Ref<Tensor> m, Eigen::Ref<Tensor> v,
                    const Eigen::Ref<const Tensor>& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    value.array() -= alpha * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };

  for (const auto& [p, e] : live) {
    auto [it, fresh] = state_.try_emplace(p);
    Moments& mom = it->second;
    if (fresh) {
      mom.first = Tensor::Zero(p->value.rows(), p->value.cols());
      mom.second = Tensor::Zero(p->value.rows(), p->value.cols());
    }
    if (e->dense.size() != 0) {
      Tensor g = clip == 1.0 ? e->dense : Tensor(e->dense * clip);
      update(p->value, mom.first, mom.second, g);
    }
    for (const auto& [col, gcol] : e->columns) {
      Vector g = clip == 1.0 ? gcol : Vector(gcol * clip);
      update(p->value.col(col), mom.first.col(col), mom.second.col(col), g);
    }
    ++report.updated;
  }
  return report;
}

}  // namespace ipn::ad
