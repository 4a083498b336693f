#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "shlb/error.h"
#include "shlb/probing.h"
#include "shlb/training.h"
#include "shlb_test_util.h"

namespace shlb {
namespace {

// subjects x per_subject noise rows; even rows walk (periodic), odd rows sit (stable).
FeatureTable table(std::size_t subjects, std::size_t per_subject, std::size_t dim,
                   std::uint64_t seed) {
  FeatureTable f;
  f.dim = dim;
  f.activity_names = {"walk", "sit"};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (std::size_t s = 0; s < subjects; ++s) {
    for (std::size_t i = 0; i < per_subject; ++i) {
      f.subjects.push_back(static_cast<std::int64_t>(100 + s));
      f.activities.push_back(i % 2);
      f.types.push_back(i % 2 ? ActivityType::kStable : ActivityType::kPeriodic);
      for (std::size_t d = 0; d < dim; ++d) f.values.push_back(n(rng));
    }
  }
  return f;
}

TEST(Probing, FeaturesCoverEverySplitDeterministically) {
  const auto data = testing::small_dataset();
  Model<float> model(fit_spec(testing::tiny_spec(7), data.train), 2);
  const WindowSet* sets[] = {&data.train, &data.validation, &data.test};
  const auto a = extract_features(model, sets);
  EXPECT_EQ(a.size(), data.train.size() + data.validation.size() + data.test.size());
  EXPECT_EQ(a.dim, model.representation_dim());
  EXPECT_EQ(a.values.size(), a.size() * a.dim);
  EXPECT_EQ(a.subjects.front(), data.train.windows.front().subject_id);
  EXPECT_EQ(a.subjects.back(), data.test.windows.back().subject_id);
  EXPECT_EQ(extract_features(model, sets), a);

  WindowSet other = data.test;
  other.activities.push_back("extra");
  const WindowSet* bad[] = {&data.train, &other};
  EXPECT_THROW(extract_features(model, bad), InvalidArgument);
}

TEST(Probing, FoldsPartitionAndSpreadSubjects) {
  std::vector<std::int64_t> subjects;
  for (int s = 0; s < 7; ++s) {
    for (int i = 0; i < 13 + s; ++i) subjects.push_back(s);
  }
  const auto fold = subject_folds(subjects, 5, 3);
  ASSERT_EQ(fold.size(), subjects.size());
  std::vector<std::size_t> sizes(5, 0);
  for (auto f : fold) {
    ASSERT_LT(f, 5u);
    ++sizes[f];
  }
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  EXPECT_LE(*hi - *lo, 1u);
  for (int s = 0; s < 7; ++s) {
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      if (subjects[i] == s) seen.insert(fold[i]);
    }
    EXPECT_EQ(seen.size(), 5u) << "subject " << s;
  }
  EXPECT_EQ(subject_folds(subjects, 5, 3), fold);
  EXPECT_NE(subject_folds(subjects, 5, 4), fold);
  EXPECT_THROW(subject_folds(subjects, 1, 3), InvalidArgument);
}

TEST(Probing, OneHotSubjectsAreSeparable) {
  auto f = table(8, 30, 8, 1);
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (std::size_t d = 0; d < 8; ++d) f.values[i * 8 + d] = d == std::size_t(f.subjects[i] - 100);
  }
  const auto r = probe_subject_heterogeneity(f, {}, 2);
  ASSERT_EQ(r.entries.size(), 5u);
  ASSERT_TRUE(r.mean);
  EXPECT_GE(*r.mean, 0.99);
}

TEST(Probing, NoiseFeaturesSitAtChance) {
  const auto f = table(10, 60, 16, 4);
  const auto r = probe_subject_heterogeneity(f, {}, 5);
  ASSERT_TRUE(r.mean && r.ci_margin);
  EXPECT_LE(std::abs(*r.mean - 0.1), *r.ci_margin) << *r.mean << " +- " << *r.ci_margin;
  double sum = 0;
  for (const auto& e : r.entries) sum += *e.macro_f1;
  EXPECT_DOUBLE_EQ(*r.mean, sum / 5);
  EXPECT_THROW(probe_subject_heterogeneity(table(1, 10, 4, 1), {}, 1), InvalidArgument);
}

TEST(Probing, TaxonomyCombinationCounts) {
  EXPECT_EQ(activity_type_combinations(Taxonomy::mobiact()).size(), 40u);
  EXPECT_EQ(activity_type_combinations(Taxonomy::ucihar()).size(), 9u);
  const auto combos = activity_type_combinations(Taxonomy::ucihar());
  for (const auto& c : combos) EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(std::set<std::vector<std::string>>(combos.begin(), combos.end()).size(), 9u);
  EXPECT_TRUE(activity_type_combinations(Taxonomy{}).empty());
}

TEST(Probing, HeldOutActivitiesNeverTrainTheProbe) {
  const auto data = testing::small_dataset();
  Model<float> model(fit_spec(testing::tiny_spec(7), data.train), 2);
  const WindowSet* sets[] = {&data.train, &data.validation, &data.test};
  const auto f = extract_features(model, sets);
  const auto plan = activity_type_plan(f);
  ASSERT_EQ(plan.size(), 3u * 2 * 2);  // synthetic: 3 periodic, 2 stable, 2 transition
  for (const auto& run : plan) {
    ASSERT_EQ(run.held_out.size(), 3u);
    std::set<ActivityType> types;
    for (auto a : run.held_out) {
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.activities[i] == a) {
          types.insert(f.types[i]);
          break;
        }
      }
    }
    EXPECT_EQ(types.size(), 3u);
    const std::set<std::size_t> held(run.held_out.begin(), run.held_out.end());
    for (auto i : run.train) ASSERT_FALSE(held.count(f.activities[i]));
    for (auto i : run.test) ASSERT_TRUE(held.count(f.activities[i]));
    EXPECT_EQ(run.train.size() + run.test.size(), f.size());
  }
  const auto before = f;
  const auto r = probe_activity_type(f, {}, 3);
  EXPECT_EQ(f, before);
  EXPECT_EQ(r.entries.size(), 12u);
  for (const auto& e : r.entries) {
    EXPECT_TRUE(e.macro_f1);
    EXPECT_TRUE(e.note.empty()) << e.note;
  }
  ASSERT_TRUE(r.mean && r.ci_margin);

  auto results = probe_results_table();
  append_probe_results(results, r, "vicreg");
  EXPECT_EQ(results.rows.size(), 12u);
  EXPECT_EQ(results.rows[0][0], "activity-type");
  EXPECT_EQ(std::count(results.rows[0][2].begin(), results.rows[0][2].end(), '+'), 2);
  auto summary = probe_summary_table();
  append_probe_summary(summary, r, "vicreg");
  EXPECT_EQ(*parse_double(summary.rows[0][2]), *r.mean);
}

TEST(Probing, OneActivityPerGroupIsReportedNotScored) {
  FeatureTable f = table(3, 10, 4, 6);
  for (auto& a : f.activities) a = 0;
  for (auto& t : f.types) t = ActivityType::kPeriodic;
  f.activities[3] = 1;
  f.types[3] = ActivityType::kStable;
  const auto before = f;
  const auto r = probe_activity_type(f, {}, 1);
  EXPECT_EQ(f, before);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].label, "walk+sit");
  EXPECT_FALSE(r.entries[0].macro_f1);
  EXPECT_NE(r.entries[0].note.find("error"), std::string::npos);
  EXPECT_FALSE(r.mean);
  EXPECT_FALSE(r.ci_margin);
  auto summary = probe_summary_table();
  append_probe_summary(summary, r, "supervised");
  EXPECT_EQ(summary.rows[0][2], "");
  std::stringstream ss;
  write_csv(ss, summary);
  EXPECT_EQ(read_csv(ss), summary);
}

TEST(Probing, ProbeLearnsALinearRule) {
  FeatureTable f = table(2, 200, 2, 9);
  std::vector<std::size_t> rows, labels, test;
  for (std::size_t i = 0; i < f.size(); ++i) {
    (i < 300 ? rows : test).push_back(i);
    if (i < 300) labels.push_back(f.values[i * 2] > 0);
  }
  ProbeConfig c;
  c.learning_rate = 1e-2;
  c.epochs = 100;
  const auto pred = train_probe(f, rows, labels, 2, test, c, 1);
  std::size_t right = 0;
  for (std::size_t j = 0; j < test.size(); ++j) right += pred[j] == (f.values[test[j] * 2] > 0);
  EXPECT_GE(right, 95u);
  EXPECT_THROW(train_probe(f, {}, {}, 2, test, c, 1), InvalidArgument);
}

}  // namespace
}  // namespace shlb