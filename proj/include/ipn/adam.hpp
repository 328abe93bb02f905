#pragma once

#include "ipn/autodiff.hpp"

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ipn::ad {

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 0.0;
};

/// Adam with bias correction. Sparse parameters are updated lazily: only the
/// columns that received gradient have their moments and values touched,
/// with bias correction taken from the global step count.
class Adam {
 public:
  struct Moments {
    Tensor first;
    Tensor second;
  };

  struct StepReport {
    std::vector<std::string> rejected;  // parameters skipped for non-finite gradient
    std::size_t updated = 0;
  };

  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// One update over every listed parameter that has an entry in `grads`.
  StepReport step(std::span<Parameter* const> params, const Gradients& grads);

  long step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const Moments* moments(const Parameter& p) const;

 private:
  AdamConfig config_;
  long steps_ = 0;
  std::unordered_map<const Parameter*, Moments> state_;
};

}  // namespace ipn::ad
