#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace shlb {

// Rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0);
  // Throws InvalidArgument on length mismatch or out-of-range labels.
  static ConfusionMatrix from(std::span<const std::size_t> truth,
                              std::span<const std::size_t> predicted, std::size_t classes);

  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }
  std::uint64_t total() const;
  std::uint64_t row_total(std::size_t truth) const;
  std::uint64_t column_total(std::size_t predicted) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

// nullopt for classes without ground truth.
std::vector<std::optional<double>> per_class_recall(const ConfusionMatrix& m);
// 2PR/(P+R) with 0/0 -> 0; nullopt for classes without ground truth.
std::vector<std::optional<double>> per_class_f1(const ConfusionMatrix& m);
// Mean F1 over classes with ground truth. Throws InvalidArgument when empty.
double macro_f1(const ConfusionMatrix& m);

struct ConfidenceInterval {
  double mean = 0.0;
  double margin = 0.0;

  bool operator==(const ConfidenceInterval&) const = default;
};

// Two-sided Student-t quantile t_{p, df}.
double t_quantile(double p, double df);
// margin = t_{(1+level)/2, n-1} * s / sqrt(n), s the unbiased sample std.
// Throws InvalidArgument for n < 2 or level outside (0, 1).
ConfidenceInterval t_confidence_interval(std::span<const double> samples, double level = 0.95);

}  // namespace shlb
