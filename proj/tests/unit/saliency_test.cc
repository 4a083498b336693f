#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "shlb/error.h"
#include "shlb/saliency.h"
#include "shlb/training.h"
#include "shlb_test_util.h"

namespace shlb {
namespace {

using testing::random_tensor;

std::vector<double> column(const Tensor<double>& t, std::size_t c) {
  std::vector<double> out;
  for (std::size_t i = 0; i < t.dim(0); ++i) out.push_back(t.at(i, c));
  return out;
}

TEST(GradCam, ZeroGradientGivesZeroMap) {
  const std::vector<double> a{1, -2, 3, 4, 5, -6};
  const std::vector<double> g(6, 0.0);
  EXPECT_EQ(gradcam_map(a, g, 3, 2), (std::vector<double>{0, 0, 0}));
}

TEST(GradCam, OneChannelUnitWeightIsReluOfTheInput) {
  const std::vector<double> a{0.5, -1.0, 2.0, -0.1, 0.0};
  const std::vector<double> g(5, 1.0);
  EXPECT_EQ(gradcam_map(a, g, 5, 1), (std::vector<double>{0.5, 0, 2.0, 0, 0}));
}

TEST(GradCam, HandMixture) {
  // alpha = (mean(1, 3), mean(-1, -1)) = (2, -1)
  const std::vector<double> a{1, 1, 0, 3};
  const std::vector<double> g{1, -1, 3, -1};
  EXPECT_EQ(gradcam_map(a, g, 2, 2), (std::vector<double>{1, 0}));
  EXPECT_THROW(gradcam_map(a, g, 3, 2), ShapeError);
}

TEST(GradCam, ToyNetworkReproducesReluOfTheInput) {
  ModelSpec spec;
  spec.window_length = 7;
  spec.channels = 1;
  spec.conv_channels = {1};
  spec.conv_relu = false;
  spec.positional_encoding = false;
  spec.transformer_layers = 0;
  spec.projection_hidden = 2;
  spec.projection_out = 2;
  spec.num_classes = 2;
  Model<double> model(spec, 1);
  auto& w = model.parameter("encoder.0.weight").value;
  w.fill(0);
  w[1] = 1;  // centre tap passes the input through
  model.parameter("encoder.0.bias").value.fill(0);
  model.parameter("classifier.0.weight").value.fill(1);
  model.parameter("classifier.0.bias").value.fill(0);
  const auto x = Tensor<double>::from({7, 1}, {0.3, -1.0, 2.0, 0.0, -0.5, 1.5, 0.7});
  const auto map = grad_cam(model, x, 1);
  ASSERT_EQ(map.size(), 7u);
  for (std::size_t t = 0; t < 7; ++t) EXPECT_NEAR(map[t], std::max(x[t], 0.0), 1e-15);
  EXPECT_THROW(grad_cam(model, x, 2), InvalidArgument);
}

TEST(GradCam, ResampleIsLinear) {
  const std::vector<double> m{0, 2, 4};
  EXPECT_EQ(resample(m, 3), m);
  EXPECT_EQ(resample(m, 5), (std::vector<double>{0, 1, 2, 3, 4}));
}

TEST(GuidedGradCam, MapsAreNonNegativeAndZeroWhereEitherFactorIs) {
  Model<double> model(testing::tiny_spec(), 4);
  std::mt19937_64 rng(2);
  std::size_t cam_zeros = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_tensor({8, 6}, rng);
    for (std::size_t cls = 0; cls < 3; ++cls) {
      const auto cam = grad_cam(model, x, cls);
      const auto guided = guided_backward(model, cls, x);
      const auto attr = guided_gradcam(model, x, cls);
      ASSERT_EQ(attr.values.shape(), (Shape{8, 6}));
      for (std::size_t t = 0; t < 8; ++t) {
        ASSERT_GE(cam[t], 0.0);
        if (cam[t] == 0.0) ++cam_zeros;
        for (std::size_t s = 0; s < 6; ++s) {
          ASSERT_TRUE(std::isfinite(attr.values.at(t, s)));
          if (cam[t] == 0.0 || guided.at(t, s) == 0.0) {
            ASSERT_EQ(attr.values.at(t, s), 0.0);
          }
          ASSERT_EQ(attr.values.at(t, s), guided.at(t, s) * cam[t]);
        }
      }
    }
  }
  EXPECT_GT(cam_zeros, 0u);
}

TEST(GuidedGradCam, ReluFreePathIsGradientTimesCam) {
  ModelSpec spec = testing::tiny_spec();
  spec.conv_relu = false;
  Model<double> model(spec, 6);
  std::mt19937_64 rng(3);
  const auto x = random_tensor({8, 6}, rng);
  const auto cam = grad_cam(model, x, 2);
  model.forward(x.reshaped({1, 8, 6}), Head::kClassifier);
  Tensor<double> seed({1, 3});
  seed[2] = 1;
  const auto plain = model.backward_from_logits(seed, {GradientRule::kStandard, false});
  const auto attr = guided_gradcam(model, x, 2);
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t s = 0; s < 6; ++s) EXPECT_EQ(attr.values.at(t, s), plain[t * 6 + s] * cam[t]);
  }
}

TEST(GuidedGradCam, PermutingChannelsPermutesTheMap) {
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};  // channel i moves to perm[i]
  Model<double> a(testing::tiny_spec(), 8);
  Model<double> b(testing::tiny_spec(), 8);
  auto& wa = a.parameter("encoder.0.weight").value;  // [k, in, out]
  auto& wb = b.parameter("encoder.0.weight").value;
  const std::size_t k = wa.dim(0), out = wa.dim(2);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t o = 0; o < out; ++o) wb.at(j, perm[i], o) = wa.at(j, i, o);
    }
  }
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_tensor({8, 6}, rng);
    Tensor<double> xp({8, 6});
    for (std::size_t t = 0; t < 8; ++t) {
      for (std::size_t i = 0; i < 6; ++i) xp.at(t, perm[i]) = x.at(t, i);
    }
    const auto ma = guided_gradcam(a, x, 1);
    const auto mb = guided_gradcam(b, xp, 1);
    for (std::size_t i = 0; i < 6; ++i) {
      const auto ca = column(ma.values, i), cb = column(mb.values, perm[i]);
      for (std::size_t t = 0; t < 8; ++t) EXPECT_NEAR(cb[t], ca[t], 1e-12 * (1 + std::abs(ca[t])));
    }
  }
}

TEST(ChannelDistribution, HandCases) {
  Tensor<double> one_hot({4, 6});
  one_hot.at(0, 3) = -2;
  one_hot.at(2, 3) = 5;
  auto d = channel_distribution(one_hot);
  EXPECT_FALSE(d.uniform_fallback);
  EXPECT_EQ(d.weights, (std::vector<double>{0, 0, 0, 1, 0, 0}));

  auto zero = channel_distribution(Tensor<double>({4, 6}));
  EXPECT_TRUE(zero.uniform_fallback);
  for (double w : zero.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 6);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    auto r = channel_distribution(random_tensor({10, 6}, rng));
    EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-9);
    for (double w : r.weights) EXPECT_GE(w, 0.0);
  }
}

TEST(Entropy, HandCasesAndBounds) {
  EXPECT_NEAR(attribution_entropy(std::vector<double>(6, 1.0 / 6)), 2.585, 1e-3);
  EXPECT_DOUBLE_EQ(attribution_entropy(std::vector<double>(6, 1.0 / 6)), std::log2(6.0));
  EXPECT_EQ(attribution_entropy(std::vector<double>{0, 0, 1, 0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(attribution_entropy(std::vector<double>{0.5, 0.5, 0, 0, 0, 0}), 1.0);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto d = channel_distribution(random_tensor({5, 6}, rng));
    const double h = attribution_entropy(d.weights);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log2(6.0) + 1e-12);
  }
}

class GlobalMaps : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new PreparedDataset(testing::small_dataset());
    model_ = new Model<double>(fit_spec(testing::tiny_spec(7), data_->train), 3);
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 16;
    train_supervised(*model_, data_->train, nullptr, c);
  }
  static void TearDownTestSuite() {
    delete model_;
    delete data_;
  }
  static PreparedDataset* data_;
  static Model<double>* model_;
};
PreparedDataset* GlobalMaps::data_ = nullptr;
Model<double>* GlobalMaps::model_ = nullptr;

TEST_F(GlobalMaps, MeanOfPerWindowDistributionsOverCorrectWindows) {
  const auto& test = data_->test;
  const auto g = global_attributions(*model_, test, "supervised");
  EXPECT_EQ(g.framework, "supervised");
  EXPECT_EQ(g.channel_names, test.channel_names);
  ASSERT_FALSE(g.activities.empty());

  const auto pred = predict(*model_, test);
  const std::size_t k = test.activities.size();
  std::vector<std::vector<double>> sums(k, std::vector<double>(6, 0.0));
  std::vector<double> ent(k, 0.0);
  std::vector<std::size_t> counts(k, 0), present(k, 0);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& w = test.windows[i];
    ++present[w.activity];
    if (pred[i] != w.activity) continue;
    const auto x = Tensor<double>({test.window_length, 6}, w.values);
    const auto d = channel_distribution(guided_gradcam(*model_, x, w.activity).values);
    for (std::size_t c = 0; c < 6; ++c) sums[w.activity][c] += d.weights[c];
    ent[w.activity] += attribution_entropy(d.weights);
    ++counts[w.activity];
  }
  std::size_t listed = 0;
  for (std::size_t a = 0; a < k; ++a) {
    if (counts[a] == 0) continue;
    ASSERT_LT(listed, g.activities.size());
    const auto& row = g.activities[listed++];
    EXPECT_EQ(row.activity, a);
    EXPECT_EQ(row.windows, counts[a]);
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(row.distribution[c], sums[a][c] / counts[a], 1e-12);
    EXPECT_NEAR(row.entropy_bits, ent[a] / counts[a], 1e-12);
    EXPECT_NEAR(std::accumulate(row.distribution.begin(), row.distribution.end(), 0.0), 1.0, 1e-9);
    EXPECT_GE(row.entropy_bits, 0.0);
    EXPECT_LE(row.entropy_bits, std::log2(6.0));
  }
  EXPECT_EQ(listed, g.activities.size());
  std::size_t omitted = 0;
  for (std::size_t a = 0; a < k; ++a) omitted += counts[a] == 0 && present[a] > 0;
  EXPECT_EQ(g.omitted_activities.size(), omitted);
}

TEST_F(GlobalMaps, UntrainedModelOmitsActivitiesItNeverGetsRight) {
  Model<double> fresh(fit_spec(testing::tiny_spec(7), data_->train), 1);
  for (auto& p : fresh.parameters(Component::kClassifier)) p.param->value.fill(0);
  fresh.parameter("classifier.0.bias").value[4] = 1;  // always predicts class 4
  const auto g = global_attributions(fresh, data_->test, "x");
  ASSERT_LE(g.activities.size(), 1u);
  if (!g.activities.empty()) {
    EXPECT_EQ(g.activities[0].activity, 4u);
  }
  EXPECT_GE(g.omitted_activities.size(), 5u);
  for (const auto& name : g.omitted_activities) EXPECT_NE(name, data_->test.activities[4]);
}

TEST_F(GlobalMaps, TablesRoundTripThroughCsv) {
  std::vector<GlobalAttribution> gs{global_attributions(*model_, data_->test, "simclr")};
  const auto heat = global_heatmap_table(gs);
  EXPECT_EQ(heat.header, (std::vector<std::string>{"framework", "activity", "channel", "weight"}));
  EXPECT_EQ(heat.rows.size(), gs[0].activities.size() * 6);
  std::stringstream ss;
  write_csv(ss, heat);
  EXPECT_EQ(read_csv(ss), heat);
  for (std::size_t r = 0; r < heat.rows.size(); ++r) {
    const auto& a = gs[0].activities[r / 6];
    EXPECT_EQ(*parse_double(heat.rows[r][3]), a.distribution[r % 6]);
  }
  const auto ent = entropy_table(gs);
  ASSERT_EQ(ent.rows.size(), gs[0].activities.size());
  EXPECT_EQ(*parse_double(ent.rows[0][2]), gs[0].activities[0].entropy_bits);

  const auto local = guided_gradcam(*model_, Tensor<double>({50, 6}, data_->test.windows[0].values), 0);
  const auto lt = local_attribution_table(local, data_->test.channel_names);
  ASSERT_EQ(lt.rows.size(), 300u);
  EXPECT_EQ(lt.rows[7][0], "1");
  EXPECT_EQ(lt.rows[7][1], data_->test.channel_names[1]);
  EXPECT_EQ(*parse_double(lt.rows[7][2]), local.values.at(1, 1));

  const auto dir = testing::scratch_dir("saliency_svg");
  write_heatmap_svg(dir / "h.svg", gs[0]);
  std::ifstream in(dir / "h.svg");
  const std::string svg{std::istreambuf_iterator<char>(in), {}};
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

}  // namespace
}  // namespace shlb