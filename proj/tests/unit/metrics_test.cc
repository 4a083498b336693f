#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

#include "shlb/error.h"
#include "shlb/metrics.h"
#include "shlb_test_util.h"

namespace shlb {
namespace {

TEST(MacroF1, PerfectPredictionsAreOne) {
  std::vector<std::size_t> y{0, 1, 2, 2, 1};
  auto m = ConfusionMatrix::from(y, y, 3);
  EXPECT_EQ(macro_f1(m), 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) {
        EXPECT_EQ(m.at(i, j), 0u);
      }
    }
  }
}

TEST(MacroF1, ConstantPredictorHandCase) {
  // F1(A) = 2 * 0.5 * 1 / 1.5 = 2/3, F1(B) = 0
  std::vector<std::size_t> y{0, 0, 1, 1}, p{0, 0, 0, 0};
  EXPECT_NEAR(macro_f1(ConfusionMatrix::from(y, p, 2)), 1.0 / 3.0, 1e-15);
}

TEST(MacroF1, AgreesWithBruteForce) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 2 + i % 9, n = 1 + rng() % 1000;
    std::vector<std::size_t> y(n), p(n);
    for (auto& v : y) v = rng() % k;
    for (auto& v : p) v = rng() % k;
    EXPECT_DOUBLE_EQ(macro_f1(ConfusionMatrix::from(y, p, k)), testing::macro_f1_oracle(y, p, k));
  }
}

TEST(MacroF1, InvariantUnderSamplePermutation) {
  std::mt19937_64 rng(2);
  std::vector<std::size_t> y(300), p(300);
  for (auto& v : y) v = rng() % 5;
  for (auto& v : p) v = rng() % 5;
  const double before = macro_f1(ConfusionMatrix::from(y, p, 5));
  std::vector<std::size_t> idx(300);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> y2, p2;
  for (auto i : idx) {
    y2.push_back(y[i]);
    p2.push_back(p[i]);
  }
  EXPECT_EQ(macro_f1(ConfusionMatrix::from(y2, p2, 5)), before);
}

TEST(MacroF1, AbsentClassesAndErrors) {
  std::vector<std::size_t> y{0, 0}, p{0, 2};
  auto m = ConfusionMatrix::from(y, p, 3);
  auto f1 = per_class_f1(m);
  EXPECT_FALSE(f1[1]);
  EXPECT_FALSE(f1[2]);
  EXPECT_NEAR(macro_f1(m), 2.0 * 0.5 / 1.5, 1e-15);
  auto recall = per_class_recall(m);
  EXPECT_EQ(*recall[0], 0.5);
  EXPECT_THROW(macro_f1(ConfusionMatrix(3)), InvalidArgument);
  std::vector<std::size_t> bad{5};
  std::vector<std::size_t> ok{0};
  EXPECT_THROW(ConfusionMatrix::from(bad, ok, 3), InvalidArgument);
  std::vector<std::size_t> two{0, 1};
  EXPECT_THROW(ConfusionMatrix::from(ok, two, 3), InvalidArgument);
}

TEST(TConfidence, HandValueAndTable) {
  std::vector<double> s(10);
  // ten samples with unit sample std
  for (std::size_t i = 0; i < 10; ++i) s[i] = i < 5 ? -1.0 : 1.0;
  const double scale = std::sqrt(9.0 / 10.0);
  for (auto& v : s) v *= scale;
  auto ci = t_confidence_interval(s);
  EXPECT_NEAR(ci.mean, 0.0, 1e-15);
  EXPECT_NEAR(ci.margin, 0.7153, 1e-4);
  EXPECT_NEAR(ci.margin, testing::kT975[8] / std::sqrt(10.0), 1e-3);
  for (int df = 1; df <= 10; ++df) EXPECT_NEAR(t_quantile(0.975, df), testing::kT975[df - 1], 1e-3);
}

TEST(TConfidence, IdenticalSamplesAndLinearity) {
  std::vector<double> same(7, 0.42);
  EXPECT_EQ(t_confidence_interval(same).margin, 0.0);
  std::vector<double> a{1, 2, 4, 8}, b;
  for (double v : a) b.push_back(3 * v);
  EXPECT_NEAR(t_confidence_interval(b).margin, 3 * t_confidence_interval(a).margin, 1e-12);
  std::vector<double> one{1.0};
  EXPECT_THROW(t_confidence_interval(one), InvalidArgument);
  EXPECT_THROW(t_confidence_interval(a, 1.5), InvalidArgument);
}

}  // namespace
}  // namespace shlb
