#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shlb/layers.h"

namespace shlb {

enum class OptimizerKind { kAdam, kLarsAdam };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Upper bound for the layer-wise trust ratio (lars-adam only); lower bound is 0.
  double trust_clip = 10.0;

  bool operator==(const OptimizerSpec&) const = default;
};

// Adam with bias correction. In lars-adam mode each parameter tensor's Adam
// direction u is rescaled by clip(||w|| / ||u||, 0, trust_clip), with ratio 1
// when either norm is zero.
template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(OptimizerSpec spec);

  // Updates every trainable parameter in `params`. Throws NumericError if any
  // gradient is non-finite and InvalidArgument if a trainable parameter has no
  // gradient; in both cases nothing is modified.
  void step(std::span<const NamedParameter<Scalar>> params);

  std::uint64_t step_count() const { return steps_; }
  const OptimizerSpec& spec() const { return spec_; }
  // Trust ratio applied to `path` on the last step (1 for plain Adam).
  double last_trust_ratio(const std::string& path) const;

 private:
  struct Moments {
    std::vector<double> first;
    std::vector<double> second;
    double trust_ratio = 1.0;
  };

  OptimizerSpec spec_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace shlb
