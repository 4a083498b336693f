#include "shlb/optimizer.h"

#include <algorithm>
#include <cmath>

#include "shlb/error.h"

namespace shlb {

template <typename Scalar>
Optimizer<Scalar>::Optimizer(OptimizerSpec spec) : spec_(spec) {
  if (!(spec_.learning_rate >= 0.0) || spec_.beta1 < 0.0 || spec_.beta1 >= 1.0 ||
      spec_.beta2 < 0.0 || spec_.beta2 >= 1.0 || !(spec_.epsilon > 0.0) ||
      spec_.trust_clip < 0.0) {
    throw InvalidArgument("optimizer: invalid hyperparameters");
  }
}

template <typename Scalar>
void Optimizer<Scalar>::step(std::span<const NamedParameter<Scalar>> params) {
  for (const auto& p : params) {
    if (!p.param->trainable) continue;
    if (!p.param->value.has_grad()) {
      throw InvalidArgument("optimizer: no gradient for trainable parameter '" + p.path + "'");
    }
    const auto grad = std::as_const(p.param->value).grad();
    if (!all_finite<Scalar>(grad)) {
      throw NumericError("optimizer: non-finite gradient in '" + p.path + "'; step aborted");
    }
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(spec_.beta1, t);
  const double correction2 = 1.0 - std::pow(spec_.beta2, t);
  std::vector<double> direction;

  for (const auto& p : params) {
    if (!p.param->trainable) continue;
    auto values = p.param->value.values();
    const auto grad = std::as_const(p.param->value).grad();
    Moments& m = moments_[p.path];
    if (m.first.size() != values.size()) {
      m.first.assign(values.size(), 0.0);
      m.second.assign(values.size(), 0.0);
    }
    direction.resize(values.size());
    double weight_sq = 0.0, direction_sq = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      m.first[i] = spec_.beta1 * m.first[i] + (1.0 - spec_.beta1) * g;
      m.second[i] = spec_.beta2 * m.second[i] + (1.0 - spec_.beta2) * g * g;
      const double first_hat = m.first[i] / correction1;
      const double second_hat = m.second[i] / correction2;
      direction[i] = first_hat / (std::sqrt(second_hat) + spec_.epsilon);
      weight_sq += static_cast<double>(values[i]) * values[i];
      direction_sq += direction[i] * direction[i];
    }
    double ratio = 1.0;
    if (spec_.kind == OptimizerKind::kLarsAdam && weight_sq > 0.0 && direction_sq > 0.0) {
      ratio = std::clamp(std::sqrt(weight_sq) / std::sqrt(direction_sq), 0.0, spec_.trust_clip);
    }
    m.trust_ratio = ratio;
    const double scale = spec_.learning_rate * ratio;
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = static_cast<Scalar>(values[i] - scale * direction[i]);
    }
  }
}

template <typename Scalar>
double Optimizer<Scalar>::last_trust_ratio(const std::string& path) const {
  const auto it = moments_.find(path);
  return it == moments_.end() ? 1.0 : it->second.trust_ratio;
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace shlb
