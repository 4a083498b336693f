#pragma once

#include <cstddef>
#include <span>

#include "shlb/tensor.h"

namespace shlb {

// Loss of two embedding sets Z, Z' ([N, D'], row i of each is a positive pair)
// with gradients for both.
template <typename Scalar>
struct PairLoss {
  double value = 0.0;
  Tensor<Scalar> grad_first;
  Tensor<Scalar> grad_second;
};

// Loss of a single tensor with its gradient.
template <typename Scalar>
struct Loss {
  double value = 0.0;
  Tensor<Scalar> grad;
};

struct SimClrConfig {
  double temperature = 0.1;
};

struct VicRegConfig {
  double lambda = 10.0;  // invariance weight
  double mu = 10.0;      // variance weight
  double nu = 5.0;       // covariance weight
  double gamma = 1.0;    // target std
  double epsilon = 1e-4;

  // Throws InvalidArgument: weights >= 0, gamma > 0, epsilon > 0.
  void validate() const;
};

// L = sum_i [l(z_i, z'_i) + l(z'_i, z_i)] with cosine similarity s and
//   l(a_i, b_i) = -log( exp(s(a_i,b_i)/tau) / sum_k exp(s(a_i,b_k)/tau) ),
// the denominator running over every row of the other set, positive included.
// Throws InvalidArgument naming the first zero-norm row.
template <typename Scalar>
PairLoss<Scalar> nt_xent(const Tensor<Scalar>& z, const Tensor<Scalar>& z_prime,
                         double temperature);

// (1/N) sum_i ||z_i - z'_i||^2
template <typename Scalar>
PairLoss<Scalar> vicreg_invariance(const Tensor<Scalar>& z, const Tensor<Scalar>& z_prime);

// (1/D') sum_j max(0, gamma - sqrt(Var(z^j) + eps)), unbiased variance. N >= 2.
template <typename Scalar>
Loss<Scalar> vicreg_variance(const Tensor<Scalar>& z, double gamma, double epsilon);

// (1/D') sum_{i != j} C_ij^2 with C = Zc^T Zc / (N - 1). N >= 2.
template <typename Scalar>
Loss<Scalar> vicreg_covariance(const Tensor<Scalar>& z);

struct VicRegTerms {
  double invariance = 0.0;
  double variance_first = 0.0, variance_second = 0.0;
  double covariance_first = 0.0, covariance_second = 0.0;
};

// lambda d(Z,Z') + mu [v(Z) + v(Z')] + nu [c(Z) + c(Z')]
template <typename Scalar>
PairLoss<Scalar> vicreg_total(const Tensor<Scalar>& z, const Tensor<Scalar>& z_prime,
                              const VicRegConfig& config, VicRegTerms* terms = nullptr);

inline constexpr double kProbabilityClamp = 1e-12;

// Mean of -log(max(p[label], 1e-12)) over softmax rows [N, |Y|]; gradient is
// with respect to the probabilities.
template <typename Scalar>
Loss<Scalar> cross_entropy(const Tensor<Scalar>& probabilities,
                           std::span<const std::size_t> labels);

}  // namespace shlb
