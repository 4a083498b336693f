#include "shlb/losses.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "shlb/error.h"

namespace shlb {
namespace {

template <typename Scalar>
void require_matrix(const Tensor<Scalar>& t, const char* what) {
  if (t.rank() != 2 || t.dim(0) == 0 || t.dim(1) == 0) {
    throw ShapeError("", std::string(what) + " must be a non-empty [N, D] matrix, got " +
                             shape_string(t.shape()));
  }
}

template <typename Scalar>
void require_same(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_matrix(a, "Z");
  if (a.shape() != b.shape()) {
    throw ShapeError("", "embedding batches differ: " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
  }
}

using Matrix = std::vector<double>;

// Row-normalizes a [n, d] matrix; returns norms.
template <typename Scalar>
std::vector<double> unit_rows(const Tensor<Scalar>& z, Matrix& unit, const char* name) {
  const std::size_t n = z.dim(0), d = z.dim(1);
  unit.assign(n * d, 0.0);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += static_cast<double>(z.at(i, j)) * z.at(i, j);
    norms[i] = std::sqrt(sq);
    if (norms[i] == 0.0) {
      throw InvalidArgument(std::string("nt_xent: row ") + std::to_string(i) + " of " + name +
                            " has zero norm");
    }
    for (std::size_t j = 0; j < d; ++j) unit[i * d + j] = z.at(i, j) / norms[i];
  }
  return norms;
}

// Gradient through u = z / ||z||: dz = (du - u (u . du)) / ||z||.
template <typename Scalar>
Tensor<Scalar> through_normalization(const Matrix& unit, const Matrix& grad_unit,
                                     const std::vector<double>& norms, std::size_t d) {
  const std::size_t n = norms.size();
  Tensor<Scalar> out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += unit[i * d + j] * grad_unit[i * d + j];
    for (std::size_t j = 0; j < d; ++j) {
      out.at(i, j) = static_cast<Scalar>((grad_unit[i * d + j] - unit[i * d + j] * dot) / norms[i]);
    }
  }
  return out;
}

}  // namespace

void VicRegConfig::validate() const {
  if (lambda < 0.0 || mu < 0.0 || nu < 0.0) throw InvalidArgument("vicreg weights must be >= 0");
  if (!(gamma > 0.0)) throw InvalidArgument("vicreg gamma must be > 0");
  if (!(epsilon > 0.0)) throw InvalidArgument("vicreg epsilon must be > 0");
}

template <typename Scalar>
PairLoss<Scalar> nt_xent(const Tensor<Scalar>& z, const Tensor<Scalar>& z_prime,
                         double temperature) {
  require_same(z, z_prime);
  if (!(temperature > 0.0)) throw InvalidArgument("nt_xent: temperature must be > 0");
  const std::size_t n = z.dim(0), d = z.dim(1);
  Matrix u, v;
  const auto norms_u = unit_rows(z, u, "Z");
  const auto norms_v = unit_rows(z_prime, v, "Z'");

  // logits[i][k] = s(z_i, z'_k) / tau
  Matrix logits(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += u[i * d + j] * v[k * d + j];
      logits[i * n + k] = s / temperature;
    }
  }
  // Row softmax (l(z_i, .)) and column softmax (l(z'_k, .)).
  Matrix row_p(n * n), col_p(n * n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = -INFINITY;
    for (std::size_t k = 0; k < n; ++k) m = std::max(m, logits[i * n + k]);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) total += std::exp(logits[i * n + k] - m);
    const double lse = m + std::log(total);
    loss += lse - logits[i * n + i];
    for (std::size_t k = 0; k < n; ++k) row_p[i * n + k] = std::exp(logits[i * n + k] - lse);
  }
  for (std::size_t k = 0; k < n; ++k) {
    double m = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, logits[i * n + k]);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += std::exp(logits[i * n + k] - m);
    const double lse = m + std::log(total);
    loss += lse - logits[k * n + k];
    for (std::size_t i = 0; i < n; ++i) col_p[i * n + k] = std::exp(logits[i * n + k] - lse);
  }

  // dL/dS_ik = (P_ik + C_ik - 2 delta_ik) / tau
  Matrix grad_s(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      grad_s[i * n + k] = (row_p[i * n + k] + col_p[i * n + k] - (i == k ? 2.0 : 0.0)) / temperature;
    }
  }
  Matrix grad_u(n * d, 0.0), grad_v(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double g = grad_s[i * n + k];
      for (std::size_t j = 0; j < d; ++j) {
        grad_u[i * d + j] += g * v[k * d + j];
        grad_v[k * d + j] += g * u[i * d + j];
      }
    }
  }
  return {loss, through_normalization<Scalar>(u, grad_u, norms_u, d),
          through_normalization<Scalar>(v, grad_v, norms_v, d)};
}

template <typename Scalar>
PairLoss<Scalar> vicreg_invariance(const Tensor<Scalar>& z, const Tensor<Scalar>& z_prime) {
  require_same(z, z_prime);
  const double n = static_cast<double>(z.dim(0));
  PairLoss<Scalar> out{0.0, Tensor<Scalar>(z.shape()), Tensor<Scalar>(z.shape())};
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double diff = static_cast<double>(z[i]) - z_prime[i];
    out.value += diff * diff;
    out.grad_first[i] = static_cast<Scalar>(2.0 * diff / n);
    out.grad_second[i] = static_cast<Scalar>(-2.0 * diff / n);
  }
  out.value /= n;
  return out;
}

template <typename Scalar>
Loss<Scalar> vicreg_variance(const Tensor<Scalar>& z, double gamma, double epsilon) {
  require_matrix(z, "Z");
  const std::size_t n = z.dim(0), d = z.dim(1);
  if (n < 2) throw InvalidArgument("vicreg variance needs N >= 2, got " + std::to_string(n));
  Loss<Scalar> out{0.0, Tensor<Scalar>(z.shape())};
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += z.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (z.at(i, j) - mean) * (z.at(i, j) - mean);
    var /= static_cast<double>(n - 1);
    const double std_j = std::sqrt(var + epsilon);
    if (gamma - std_j > 0.0) {
      out.value += gamma - std_j;
      for (std::size_t i = 0; i < n; ++i) {
        out.grad.at(i, j) = static_cast<Scalar>(-(z.at(i, j) - mean) /
                                                (std_j * static_cast<double>(n - 1) * d));
      }
    }
  }
  out.value /= static_cast<double>(d);
  return out;
}

template <typename Scalar>
Loss<Scalar> vicreg_covariance(const Tensor<Scalar>& z) {
  require_matrix(z, "Z");
  const std::size_t n = z.dim(0), d = z.dim(1);
  if (n < 2) throw InvalidArgument("vicreg covariance needs N >= 2, got " + std::to_string(n));
  Matrix centered(n * d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += z.at(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered[i * d + j] = z.at(i, j) - mean;
  }
  const double scale = 1.0 / static_cast<double>(n - 1);
  Matrix cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double za = centered[i * d + a];
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += za * centered[i * d + b];
    }
  }
  for (auto& c : cov) c *= scale;
  Loss<Scalar> out{0.0, Tensor<Scalar>(z.shape())};
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      if (a != b) out.value += cov[a * d + b] * cov[a * d + b];
    }
  }
  out.value /= static_cast<double>(d);
  // dL/dZc = 2 Zc G / (N-1), G_ab = 2 C_ab / D off the diagonal; the centering
  // projection leaves it unchanged because Zc has zero column sums.
  Matrix grad(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      double acc = 0.0;
      for (std::size_t b = 0; b < d; ++b) {
        if (a != b) acc += centered[i * d + b] * cov[b * d + a];
      }
      grad[i * d + a] = 4.0 * acc * scale / static_cast<double>(d);
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += grad[i * d + a];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out.grad.at(i, a) = static_cast<Scalar>(grad[i * d + a] - mean);
  }
  return out;
}

template <typename Scalar>
PairLoss<Scalar> vicreg_total(const Tensor<Scalar>& z, const Tensor<Scalar>& z_prime,
                              const VicRegConfig& config, VicRegTerms* terms) {
  config.validate();
  require_same(z, z_prime);
  const auto inv = vicreg_invariance(z, z_prime);
  const auto var1 = vicreg_variance(z, config.gamma, config.epsilon);
  const auto var2 = vicreg_variance(z_prime, config.gamma, config.epsilon);
  const auto cov1 = vicreg_covariance(z);
  const auto cov2 = vicreg_covariance(z_prime);
  PairLoss<Scalar> out{config.lambda * inv.value + config.mu * (var1.value + var2.value) +
                           config.nu * (cov1.value + cov2.value),
                       Tensor<Scalar>(z.shape()), Tensor<Scalar>(z.shape())};
  for (std::size_t i = 0; i < z.size(); ++i) {
    out.grad_first[i] = static_cast<Scalar>(config.lambda * inv.grad_first[i] +
                                            config.mu * var1.grad[i] + config.nu * cov1.grad[i]);
    out.grad_second[i] = static_cast<Scalar>(config.lambda * inv.grad_second[i] +
                                             config.mu * var2.grad[i] + config.nu * cov2.grad[i]);
  }
  if (terms) {
    *terms = {inv.value, var1.value, var2.value, cov1.value, cov2.value};
  }
  return out;
}

template <typename Scalar>
Loss<Scalar> cross_entropy(const Tensor<Scalar>& probabilities,
                           std::span<const std::size_t> labels) {
  require_matrix(probabilities, "probabilities");
  const std::size_t n = probabilities.dim(0), classes = probabilities.dim(1);
  if (labels.size() != n) {
    throw InvalidArgument("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(n) + " rows");
  }
  Loss<Scalar> out{0.0, Tensor<Scalar>(probabilities.shape())};
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= classes) {
      throw InvalidArgument("cross_entropy: label " + std::to_string(labels[i]) +
                            " out of range for " + std::to_string(classes) + " classes");
    }
    const double p = probabilities.at(i, labels[i]);
    if (p > kProbabilityClamp) {
      out.value -= std::log(p);
      out.grad.at(i, labels[i]) = static_cast<Scalar>(-1.0 / (p * static_cast<double>(n)));
    } else {
      out.value -= std::log(kProbabilityClamp);
    }
  }
  out.value /= static_cast<double>(n);
  return out;
}

#define SHLB_INSTANTIATE(T)                                                                    \
  template PairLoss<T> nt_xent(const Tensor<T>&, const Tensor<T>&, double);                   \
  template PairLoss<T> vicreg_invariance(const Tensor<T>&, const Tensor<T>&);                 \
  template Loss<T> vicreg_variance(const Tensor<T>&, double, double);                         \
  template Loss<T> vicreg_covariance(const Tensor<T>&);                                       \
  template PairLoss<T> vicreg_total(const Tensor<T>&, const Tensor<T>&, const VicRegConfig&,  \
                                    VicRegTerms*);                                            \
  template Loss<T> cross_entropy(const Tensor<T>&, std::span<const std::size_t>);

SHLB_INSTANTIATE(float)
SHLB_INSTANTIATE(double)
#undef SHLB_INSTANTIATE

}  // namespace shlb
