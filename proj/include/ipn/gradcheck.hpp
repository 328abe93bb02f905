#pragma once

#include "ipn/autodiff.hpp"
#include "ipn/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ipn {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Entries probed per tensor, spread evenly; 0 probes every entry.
  std::size_t max_entries = 0;
};

struct TensorCheck {
  std::string name;
  std::size_t entries = 0;
  double worst_relative = 0;
  double worst_absolute = 0;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;
  double worst_relative = 0;
  bool passed = true;
};

/// Compares tape gradients of `loss` with central finite differences for
/// every listed parameter. `loss` must record a fresh 1x1 loss on the tape.
GradcheckReport check_gradients(const std::function<ad::Var(ad::Tape&)>& loss,
                                std::span<ad::Parameter* const> params, const GradcheckOptions& options = {});

struct ModelGradcheckOptions {
  std::size_t length = 5;
  ad::Index hidden = 16;
  std::uint64_t seed = 7;
  TrainMode mode = TrainMode::joint;
  GradcheckOptions check;
};

/// Whole-model check on a random synthetic sentence with a random gold tree.
GradcheckReport gradcheck_model(const ModelGradcheckOptions& options);

}  // namespace ipn
