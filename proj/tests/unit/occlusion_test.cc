#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <set>

#include "shlb/error.h"
#include "shlb/occlusion.h"
#include "shlb/training.h"
#include "shlb_test_util.h"

namespace shlb {
namespace {

WindowSet noise_windows(std::size_t n, std::size_t t, std::size_t s, std::uint64_t seed) {
  WindowSet w;
  w.window_length = t;
  w.channels = s;
  for (std::size_t c = 0; c < s; ++c) w.channel_names.push_back("ch" + std::to_string(c));
  w.activities = {"a", "b"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(5.0, 9.0);
  for (std::size_t i = 0; i < n; ++i) {
    TimeWindow tw;
    tw.activity = i % 2;
    tw.subject_id = 1;
    tw.values.resize(t * s);
    for (auto& v : tw.values) v = u(rng);
    w.windows.push_back(std::move(tw));
  }
  return w;
}

PipelineConfig small_pipeline(std::size_t epochs) {
  PipelineConfig pc;
  pc.model.conv_channels = {8, 16};
  pc.model.transformer_layers = 1;
  pc.model.attention_heads = 2;
  pc.model.projection_hidden = 16;
  pc.model.projection_out = 8;
  pc.supervised.routine = Routine::kSupervised;
  pc.supervised.epochs = epochs;
  pc.supervised.batch_size = 16;
  return pc;
}

PreparedDataset synthetic(std::vector<std::size_t> informative = {}) {
  SynthSpec spec;
  spec.informative_channels = std::move(informative);
  auto synth = synthesize(spec);
  return prepare_dataset(synth.recordings, 50, 0.5, synth.taxonomy, 0);
}

TEST(Occlude, OtherChannelsUntouchedAndNoiseIsStandardNormal) {
  const auto in = noise_windows(1000, 50, 6, 1);
  std::mt19937_64 rng(2);
  const std::vector<std::size_t> masked{2, 5};
  const auto out = occlude(in, masked, rng);
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (std::size_t w = 0; w < in.size(); ++w) {
    for (std::size_t i = 0; i < in.windows[w].values.size(); ++i) {
      const double v = out.windows[w].values[i];
      if (i % 6 == 2 || i % 6 == 5) {
        sum += v;
        sq += v * v;
        ++n;
      } else {
        ASSERT_EQ(v, in.windows[w].values[i]);
      }
    }
  }
  ASSERT_GE(n, 100000u);
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.02);
  EXPECT_EQ(out.labels(), in.labels());
}

TEST(Occlude, AllChannelsMaskedForgetsTheInput) {
  const auto a = noise_windows(20, 10, 6, 1);
  const auto b = noise_windows(20, 10, 6, 99);
  const std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
  std::mt19937_64 ra(4), rb(4);
  const auto oa = occlude(a, all, ra);
  const auto ob = occlude(b, all, rb);
  for (std::size_t w = 0; w < a.size(); ++w) EXPECT_EQ(oa.windows[w].values, ob.windows[w].values);
}

TEST(Occlude, MaskedChannelContentCannotReachThePrediction) {
  auto a = noise_windows(30, 8, 6, 1);
  auto b = a;
  std::mt19937_64 g(8);
  std::normal_distribution<double> n(0.0, 3.0);
  for (auto& w : b.windows) {
    for (std::size_t i = 3; i < w.values.size(); i += 6) w.values[i] = n(g);
  }
  Model<float> model(testing::tiny_spec(2), 3);
  const std::vector<std::size_t> masked{3};
  std::mt19937_64 ra(5), rb(5);
  const auto oa = occlude(a, masked, ra);
  const auto ob = occlude(b, masked, rb);
  EXPECT_EQ(predict(model, oa), predict(model, ob));
  const auto fa = model.forward(oa.batch<float>(std::vector<std::size_t>{0, 1, 2}), Head::kClassifier);
  const auto fb = model.forward(ob.batch<float>(std::vector<std::size_t>{0, 1, 2}), Head::kClassifier);
  EXPECT_EQ(std::vector<float>(fa.values().begin(), fa.values().end()),
            std::vector<float>(fb.values().begin(), fb.values().end()));
}

TEST(Occlude, Errors) {
  const auto w = noise_windows(3, 4, 6, 1);
  std::mt19937_64 rng(1);
  EXPECT_THROW(occlude(w, std::vector<std::size_t>{}, rng), InvalidArgument);
  EXPECT_THROW(occlude(w, std::vector<std::size_t>{6}, rng), InvalidArgument);
  EXPECT_THROW(occlude(w, std::vector<std::size_t>{0}, rng, NoiseSpec{0.0, 0.0}), InvalidArgument);
  EXPECT_THROW(occlude_random(w, 0, rng), InvalidArgument);
  EXPECT_THROW(occlude_random(w, 6, rng), InvalidArgument);
  EXPECT_NO_THROW(occlude_random(w, 5, rng));
}

TEST(Occlude, RandomMasksExactlyKChannelsPerWindow) {
  const auto in = noise_windows(600, 5, 6, 1);
  std::mt19937_64 rng(3);
  const auto out = occlude_random(in, 2, rng);
  std::set<std::set<std::size_t>> seen;
  for (std::size_t w = 0; w < in.size(); ++w) {
    std::set<std::size_t> changed;
    for (std::size_t i = 0; i < in.windows[w].values.size(); ++i) {
      if (out.windows[w].values[i] != in.windows[w].values[i]) changed.insert(i % 6);
    }
    for (std::size_t c = 0; c < 6; ++c) {
      if (!changed.count(c)) continue;
      for (std::size_t i = c; i < in.windows[w].values.size(); i += 6) {
        ASSERT_NE(out.windows[w].values[i], in.windows[w].values[i]);
      }
    }
    ASSERT_EQ(changed.size(), 2u);
    seen.insert(changed);
  }
  EXPECT_EQ(seen.size(), 15u);  // every pair of 6 channels shows up
  std::mt19937_64 again(3);
  EXPECT_EQ(occlude_random(in, 2, again).windows[17].values, out.windows[17].values);
}

TEST(Occlude, DefaultChannelGroups) {
  const auto g = default_channel_groups({"acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z"});
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.at("accelerometer"), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(g.at("gyroscope"), (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(default_channel_groups({"acc_x", "mag_x"}).count("gyroscope"), 0u);
}

// Trained on clean synthetic data once for the whole suite.
class Occlusion : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = std::make_unique<PreparedDataset>(synthetic());
    trained_ = std::make_unique<TrainedModel>(
        train_framework(Framework::kSupervised, *data_, small_pipeline(10), 1));
    RandomOcclusionSpec spec;
    spec.seeds = 10;
    result_ = std::make_unique<RandomOcclusionResult>(
        run_random_test_occlusion(trained_->model, Framework::kSupervised, data_->test, spec));
  }
  static void TearDownTestSuite() {
    result_.reset();
    trained_.reset();
    data_.reset();
  }
  static std::unique_ptr<PreparedDataset> data_;
  static std::unique_ptr<TrainedModel> trained_;
  static std::unique_ptr<RandomOcclusionResult> result_;
};
std::unique_ptr<PreparedDataset> Occlusion::data_;
std::unique_ptr<TrainedModel> Occlusion::trained_;
std::unique_ptr<RandomOcclusionResult> Occlusion::result_;

TEST_F(Occlusion, KZeroIsTheCleanEvaluation) {
  const auto clean = evaluate(trained_->model, data_->test);
  EXPECT_EQ(result_->clean_macro_f1, clean.macro_f1);
  ASSERT_EQ(result_->drops.k_values.front(), 0u);
  for (std::size_t a = 0; a < clean.recall.size(); ++a) {
    const auto r = result_->drops.recall(a, 0);
    ASSERT_EQ(r.has_value(), clean.recall[a].has_value());
    if (r) {
      EXPECT_EQ(*r, 100.0 * *clean.recall[a]);
    }
  }
}

TEST_F(Occlusion, DropsReconstructFromRecallTable) {
  std::vector<RandomOcclusionResult> rs{*result_};
  const auto recalls = recall_table(rs);
  const auto drops = drop_table(rs);
  auto recall_at = [&](const std::string& activity, std::size_t k) {
    for (const auto& row : recalls.rows) {
      if (row[1] == activity && row[2] == std::to_string(k)) return std::stod(row[3]);
    }
    ADD_FAILURE() << activity << " k=" << k;
    return 0.0;
  };
  ASSERT_FALSE(drops.rows.empty());
  for (const auto& row : drops.rows) {
    EXPECT_EQ(row[0], "supervised");
    EXPECT_EQ(std::stod(row[2]), recall_at(row[1], 0) - recall_at(row[1], 1));
    EXPECT_EQ(std::stod(row[3]), recall_at(row[1], 1) - recall_at(row[1], 2));
  }
  for (std::size_t a = 0; a < result_->drops.activities.size(); ++a) {
    const auto d = result_->drops.drop(a, 1);
    if (d) {
      EXPECT_EQ(*d, *result_->drops.recall(a, 1) - *result_->drops.recall(a, 2));
    }
  }
}

TEST_F(Occlusion, ConfidenceIntervalsAndSummaryRows) {
  ASSERT_EQ(result_->ci.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    ASSERT_EQ(result_->macro_f1[i].size(), 10u);
    const auto ci = t_confidence_interval(result_->macro_f1[i]);
    EXPECT_EQ(result_->ci[i].mean, ci.mean);
    EXPECT_EQ(result_->ci[i].margin, ci.margin);
  }
  auto table = occlusion_summary_table();
  append_summary(table, *result_);
  EXPECT_EQ(table.rows.size(), 1 + 5 * 10u);
  EXPECT_EQ(table.rows.front()[2], "0");
  std::vector<RandomOcclusionResult> rs{*result_};
  EXPECT_EQ(occlusion_ci_table(rs).rows.size(), 6u);
}

TEST_F(Occlusion, MoreMaskingHurtsMore) {
  EXPECT_GT(result_->clean_macro_f1, 0.9);
  EXPECT_LT(result_->ci.back().mean, result_->ci.front().mean);
}

TEST_F(Occlusion, AllChannelsMaskedIsChance) {
  const std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
  std::mt19937_64 rng(3);
  const auto e = evaluate(trained_->model, occlude(data_->test, all, rng));
  const double chance = testing::permutation_chance(data_->test.labels(), e.predictions, 7);
  EXPECT_NEAR(e.macro_f1, chance, 0.10);
}

TEST_F(Occlusion, OneChannelLeftStaysUnderTheSingleChannelCeiling) {
  double ceiling = 0;
  for (std::size_t c = 0; c < 6; ++c) {
    const auto only = testing::keep_channel(*data_, c);
    auto m = train_framework(Framework::kSupervised, only, small_pipeline(10), 1);
    ceiling += evaluate(m.model, only.test).macro_f1 / 6;
  }
  EXPECT_LE(result_->ci.back().mean, ceiling + 0.2) << "ceiling " << ceiling;
}

TEST_F(Occlusion, RandomOcclusionErrors) {
  RandomOcclusionSpec spec;
  spec.k_values = {6};
  EXPECT_THROW(run_random_test_occlusion(trained_->model, Framework::kSupervised, data_->test, spec),
               InvalidArgument);
  spec.k_values = {0};
  EXPECT_THROW(run_random_test_occlusion(trained_->model, Framework::kSupervised, data_->test, spec),
               InvalidArgument);
  spec.k_values = {1};
  spec.seeds = 0;
  EXPECT_THROW(run_random_test_occlusion(trained_->model, Framework::kSupervised, data_->test, spec),
               InvalidArgument);
}

TEST_F(Occlusion, DeviceTargetNoneIsThePlainRun) {
  const auto groups = default_channel_groups(data_->train.channel_names);
  const auto r = run_device_occlusion(*data_, Framework::kSupervised, std::nullopt, groups,
                                      small_pipeline(10), 1);
  EXPECT_EQ(r.target, "none");
  EXPECT_EQ(r.macro_f1, r.baseline_macro_f1);
  EXPECT_EQ(r.macro_f1, evaluate(trained_->model, data_->test).macro_f1);
  const auto reused = run_device_occlusion(*data_, Framework::kSupervised, std::nullopt, groups,
                                           small_pipeline(10), 1, {}, r.baseline_macro_f1);
  EXPECT_EQ(reused.macro_f1, r.macro_f1);
  EXPECT_THROW(run_device_occlusion(*data_, Framework::kSupervised, std::string("magnetometer"),
                                    groups, small_pipeline(1), 1),
               InvalidArgument);
}

TEST(DeviceOcclusion, AccelerometerOnlySignalIsLostWithTheAccelerometer) {
  const auto data = synthetic({0, 1, 2});
  const auto groups = default_channel_groups(data.train.channel_names);
  const auto acc = run_device_occlusion(data, Framework::kSupervised, std::string("accelerometer"),
                                        groups, small_pipeline(10), 1);
  const double chance = 1.0 / 7;
  EXPECT_GT(acc.baseline_macro_f1, 0.8);
  EXPECT_LE(acc.macro_f1, chance + 0.15);
  // the clean model does not depend on the target, so its score carries over
  const auto gyro = run_device_occlusion(data, Framework::kSupervised, std::string("gyroscope"),
                                         groups, small_pipeline(10), 1, {}, acc.baseline_macro_f1);
  EXPECT_GT(gyro.macro_f1, 0.8);
  EXPECT_EQ(gyro.baseline_macro_f1, acc.baseline_macro_f1);
  auto table = occlusion_summary_table();
  append_summary(table, acc, 1);
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0][2], "none");
  EXPECT_EQ(table.rows[1][2], "accelerometer");
}

}  // namespace
}  // namespace shlb