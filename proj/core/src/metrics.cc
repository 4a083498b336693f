#include "shlb/metrics.h"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <string>

#include "shlb/error.h"

namespace shlb {

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {}

ConfusionMatrix ConfusionMatrix::from(std::span<const std::size_t> truth,
                                      std::span<const std::size_t> predicted,
                                      std::size_t classes) {
  if (truth.size() != predicted.size()) {
    throw InvalidArgument("confusion matrix: " + std::to_string(truth.size()) + " labels vs " +
                          std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
  return m;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= classes_ || predicted >= classes_) {
    throw InvalidArgument("confusion matrix: label out of range for " + std::to_string(classes_) +
                          " classes");
  }
  counts_[truth * classes_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::column_total(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, predicted);
  return s;
}

std::vector<std::optional<double>> per_class_recall(const ConfusionMatrix& m) {
  std::vector<std::optional<double>> out(m.classes());
  for (std::size_t c = 0; c < m.classes(); ++c) {
    const auto support = m.row_total(c);
    if (support > 0) out[c] = static_cast<double>(m.at(c, c)) / static_cast<double>(support);
  }
  return out;
}

std::vector<std::optional<double>> per_class_f1(const ConfusionMatrix& m) {
  std::vector<std::optional<double>> out(m.classes());
  for (std::size_t c = 0; c < m.classes(); ++c) {
    const auto support = m.row_total(c);
    if (support == 0) continue;
    const auto tp = static_cast<double>(m.at(c, c));
    const auto predicted = m.column_total(c);
    const double recall = tp / static_cast<double>(support);
    const double precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    out[c] = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  }
  return out;
}

double macro_f1(const ConfusionMatrix& m) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : per_class_f1(m)) {
    if (f) {
      sum += *f;
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument("macro_f1: empty confusion matrix");
  return sum / static_cast<double>(n);
}

double t_quantile(double p, double df) {
  boost::math::students_t dist(df);
  return boost::math::quantile(dist, p);
}

ConfidenceInterval t_confidence_interval(std::span<const double> samples, double level) {
  const std::size_t n = samples.size();
  if (n < 2) throw InvalidArgument("confidence interval needs at least 2 samples");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must be in (0, 1)");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double s = std::sqrt(ss / static_cast<double>(n - 1));
  const double t = t_quantile((1.0 + level) / 2.0, static_cast<double>(n - 1));
  return {mean, t * s / std::sqrt(static_cast<double>(n))};
}

}  // namespace shlb
