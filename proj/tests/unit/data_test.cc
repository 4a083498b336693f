#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "shlb/data.h"
#include "shlb/error.h"
#include "shlb_test_util.h"

namespace shlb {
namespace {

const char* kHeader = "subject_id,recording_id,activity,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z\n";

std::vector<Recording> ingest(const std::string& body) {
  std::stringstream ss(std::string(kHeader) + body);
  return ingest_csv(ss, "in.csv");
}

Recording ramp(std::int64_t subject, std::size_t length, const std::string& activity = "walk") {
  Recording r;
  r.subject_id = subject;
  r.recording_id = "r" + std::to_string(subject);
  r.activity = activity;
  r.channel_names = {"a", "b"};
  r.channels.assign(2, std::vector<double>(length));
  for (std::size_t i = 0; i < length; ++i) {
    r.channels[0][i] = static_cast<double>(i);
    r.channels[1][i] = -static_cast<double>(i);
  }
  return r;
}

TEST(Ingest, ContiguousRowsFormOneRecording) {
  auto recs = ingest("1,r,walk,1,2,3,4,5,6\n1,r,walk,7,8,9,10,11,12\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].length(), 2u);
  EXPECT_EQ(recs[0].channels[3][1], 10.0);
  EXPECT_EQ(recs[0].channel_names, kDefaultChannels);
}

TEST(Ingest, SubjectsSplitRecordings) {
  auto recs = ingest("1,r,walk,1,2,3,4,5,6\n2,r,walk,1,2,3,4,5,6\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].subject_id, 1);
  EXPECT_EQ(recs[1].subject_id, 2);
}

TEST(Ingest, ErrorsCarryTheLine) {
  try {
    ingest("1,r,walk,1,2,3,4,5,6\n1,r,walk,1,2,3,4,5\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    ingest("1,r,walk,1,2,3,4,5,6\n1,r,walk,1,2,x,4,5,6\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::stringstream missing("subject_id,recording_id,activity,acc_x\n1,r,walk,1\n");
  EXPECT_THROW(ingest_csv(missing, "m.csv"), ParseError);
}

TEST(Ingest, WriteThenReadIsIdentity) {
  auto dir = testing::scratch_dir("ingest_rt");
  SynthSpec spec;
  spec.subjects = 2;
  spec.recording_length = 20;
  auto synth = synthesize(spec);
  write_recordings_csv(dir / "d.csv", synth.recordings);
  auto back = ingest_csv(dir / "d.csv");
  ASSERT_EQ(back.size(), synth.recordings.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].channels, synth.recordings[i].channels);
    EXPECT_EQ(back[i].activity, synth.recordings[i].activity);
  }
}

TEST(Windowing, HandExample) {
  Taxonomy tax{{"walk", ActivityType::kPeriodic}};
  auto ws = make_windows({ramp(1, 100)}, 50, 0.5, tax);
  ASSERT_EQ(ws.size(), 3u);
  // offsets 0, 25, 50: first sample of channel a equals the offset
  EXPECT_EQ(ws.windows[0].values[0], 0.0);
  EXPECT_EQ(ws.windows[1].values[0], 25.0);
  EXPECT_EQ(ws.windows[2].values[0], 50.0);
  EXPECT_EQ(ws.windows[2].values[49 * 2 + 1], -99.0);
  EXPECT_EQ(ws.windows[1].activity_type, ActivityType::kPeriodic);
}

TEST(Windowing, NoOverlapTiles) {
  Taxonomy tax{{"walk", ActivityType::kPeriodic}};
  auto ws = make_windows({ramp(1, 100)}, 50, 0.0, tax);
  ASSERT_EQ(ws.size(), 2u);
  EXPECT_EQ(ws.windows[1].values[0], 50.0);
}

TEST(Windowing, ShortRecordingIsSkipped) {
  Taxonomy tax{{"walk", ActivityType::kPeriodic}};
  WindowingReport report;
  auto ws = make_windows({ramp(1, 49)}, 50, 0.5, tax, &report);
  EXPECT_EQ(ws.size(), 0u);
  EXPECT_EQ(report.skipped_recordings, 1u);
}

TEST(Windowing, CountFormula) {
  std::mt19937_64 rng(1);
  Taxonomy tax{{"walk", ActivityType::kPeriodic}};
  for (int i = 0; i < 200; ++i) {
    const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 400)(rng);
    const std::size_t t = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
    const double ov = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
    const auto stride = static_cast<long long>(std::max(1.0, std::round(t * (1 - ov))));
    const long long expected =
        len < t ? 0 : (static_cast<long long>(len) - static_cast<long long>(t)) / stride + 1;
    EXPECT_EQ(static_cast<long long>(window_count(len, t, ov)), expected);
    EXPECT_EQ(static_cast<long long>(make_windows({ramp(1, len)}, t, ov, tax).size()), expected);
  }
}

TEST(Windowing, UncoveredActivityThrows) {
  Taxonomy tax{{"walk", ActivityType::kPeriodic}};
  EXPECT_THROW(make_windows({ramp(1, 60, "jump")}, 50, 0.5, tax), InvalidArgument);
  EXPECT_THROW(window_stride(50, 1.0), InvalidArgument);
}

std::vector<std::int64_t> ids(std::int64_t n) {
  std::vector<std::int64_t> v;
  for (std::int64_t i = 1; i <= n; ++i) v.push_back(i);
  return v;
}

TEST(Splits, HandSizes) {
  auto s30 = split_subjects(ids(30), 1);
  EXPECT_EQ(s30.test.size(), 6u);
  EXPECT_EQ(s30.validation.size(), 5u);
  EXPECT_EQ(s30.train.size(), 19u);
  auto s5 = split_subjects(ids(5), 1);
  EXPECT_EQ(s5.test.size(), 1u);
  EXPECT_EQ(s5.validation.size(), 1u);
  EXPECT_EQ(s5.train.size(), 3u);
  EXPECT_THROW(split_subjects(ids(2), 1), InvalidArgument);
}

TEST(Splits, DisjointCoveringAndSeeded) {
  for (std::int64_t n = 3; n < 40; ++n) {
    auto a = split_subjects(ids(n), 7), b = split_subjects(ids(n), 7);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    std::set<std::int64_t> all;
    for (auto* part : {&a.train, &a.validation, &a.test}) {
      for (auto s : *part) EXPECT_TRUE(all.insert(s).second) << "subject in two splits";
    }
    EXPECT_EQ(all.size(), static_cast<std::size_t>(n));
  }
  // duplicates collapse to unique subjects
  auto d = split_subjects({1, 1, 2, 2, 3, 3}, 0);
  EXPECT_EQ(d.train.size() + d.validation.size() + d.test.size(), 3u);
}

TEST(Normalization, TrainStatisticsAndFloor) {
  auto data = testing::small_dataset();
  const std::size_t s = data.train.channels;
  std::vector<double> mean(s), sq(s);
  double n = 0;
  for (const auto& w : data.train.windows) {
    for (std::size_t i = 0; i < w.values.size(); ++i) mean[i % s] += w.values[i];
    n += data.train.window_length;
  }
  for (auto& m : mean) m /= n;
  for (const auto& w : data.train.windows) {
    for (std::size_t i = 0; i < w.values.size(); ++i) sq[i % s] += std::pow(w.values[i] - mean[i % s], 2);
  }
  for (std::size_t c = 0; c < s; ++c) {
    EXPECT_LT(std::abs(mean[c]), 1e-6);
    EXPECT_NEAR(std::sqrt(sq[c] / n), 1.0, 1e-4);
  }

  Taxonomy tax{{"walk", ActivityType::kPeriodic}};
  Recording r = ramp(1, 60);
  std::fill(r.channels[1].begin(), r.channels[1].end(), 5.0);
  auto ws = make_windows({r}, 50, 0.5, tax);
  auto stats = compute_norm_stats(ws);
  EXPECT_EQ(stats.floored_channels, (std::vector<std::size_t>{1}));
  apply_norm(ws, stats);
  for (const auto& w : ws.windows) {
    for (std::size_t t = 0; t < 50; ++t) EXPECT_EQ(w.values[t * 2 + 1], 0.0);
  }
}

TEST(Normalization, TestUsesTrainStatistics) {
  SynthSpec spec;
  spec.subjects = 6;
  spec.recording_length = 120;
  spec.recordings_per_class = 1;
  auto synth = synthesize(spec);
  auto data = prepare_dataset(synth.recordings, 50, 0.5, synth.taxonomy, 3);
  auto raw = make_windows(synth.recordings, 50, 0.5, synth.taxonomy).with_subjects(data.split.test);
  apply_norm(raw, data.stats);
  ASSERT_EQ(raw.size(), data.test.size());
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_EQ(raw.windows[i].values, data.test.windows[i].values);
}

TEST(Normalization, SecondPassIsNearIdentity) {
  auto data = testing::small_dataset();
  WindowSet again = data.train;
  apply_norm(again, compute_norm_stats(again));
  for (std::size_t i = 0; i < again.size(); ++i) {
    for (std::size_t j = 0; j < again.windows[i].values.size(); ++j) {
      EXPECT_NEAR(again.windows[i].values[j], data.train.windows[i].values[j], 1e-6);
    }
  }
  EXPECT_THROW(compute_norm_stats(WindowSet{}), InvalidArgument);
}

TEST(Prepared, NoSubjectInTwoSplits) {
  auto data = testing::small_dataset(8);
  for (auto s : data.train.subjects()) {
    EXPECT_FALSE(data.validation.subjects().contains(s));
    EXPECT_FALSE(data.test.subjects().contains(s));
  }
  for (auto s : data.validation.subjects()) EXPECT_FALSE(data.test.subjects().contains(s));
}

TEST(Synthetic, SeededAndLabeledByTaxonomy) {
  SynthSpec spec;
  auto a = synthesize(spec), b = synthesize(spec);
  ASSERT_EQ(a.recordings.size(), b.recordings.size());
  for (std::size_t i = 0; i < a.recordings.size(); ++i) {
    EXPECT_EQ(a.recordings[i].channels, b.recordings[i].channels);
  }
  EXPECT_EQ(a.taxonomy.entries().size(), 7u);
  for (const auto& r : a.recordings) {
    const ActivityType t = a.taxonomy.at(r.activity);
    EXPECT_EQ(r.activity.rfind(std::string(to_string(t)), 0), 0u) << r.activity;
  }
  spec.seed = 8;
  EXPECT_NE(synthesize(spec).recordings[0].channels, a.recordings[0].channels);
}

TEST(Synthetic, StableVariesLessThanPeriodic) {
  auto synth = synthesize(SynthSpec{});
  double periodic = 0, stable = 0;
  std::size_t np = 0, ns = 0;
  for (const auto& r : synth.recordings) {
    for (const auto& ch : r.channels) {
      double m = 0, v = 0;
      for (double x : ch) m += x;
      m /= ch.size();
      for (double x : ch) v += (x - m) * (x - m);
      v /= ch.size();
      if (synth.taxonomy.at(r.activity) == ActivityType::kPeriodic) {
        periodic += v;
        ++np;
      } else if (synth.taxonomy.at(r.activity) == ActivityType::kStable) {
        stable += v;
        ++ns;
      }
    }
  }
  EXPECT_LT(stable / ns, periodic / np);
}

TEST(Taxonomy, BuiltInsAndFileRoundTrip) {
  auto m = Taxonomy::mobiact();
  auto u = Taxonomy::ucihar();
  EXPECT_EQ(m.entries().size(), 11u);
  EXPECT_EQ(u.entries().size(), 6u);
  auto dir = testing::scratch_dir("taxonomy");
  m.write(dir / "t.csv");
  EXPECT_EQ(Taxonomy::read(dir / "t.csv"), m);
  EXPECT_THROW(parse_activity_type("dynamic"), InvalidArgument);
}

}  // namespace
}  // namespace shlb
