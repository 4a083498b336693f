#include "shlb/occlusion.h"

#include <algorithm>
#include <numeric>

#include "shlb/error.h"
#include "shlb/random.h"

namespace shlb {
namespace {

void check_noise(const NoiseSpec& noise) {
  if (!(noise.stddev > 0.0)) throw InvalidArgument("occlusion noise stddev must be > 0");
}

void fill_channel(TimeWindow& w, std::size_t s, std::size_t channel,
                  std::normal_distribution<double>& dist, std::mt19937_64& rng) {
  for (std::size_t i = channel; i < w.values.size(); i += s) w.values[i] = dist(rng);
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : "";
}

}  // namespace

ChannelGroups default_channel_groups(const std::vector<std::string>& channel_names) {
  ChannelGroups groups;
  for (std::size_t i = 0; i < channel_names.size(); ++i) {
    const auto& name = channel_names[i];
    if (name.rfind("acc", 0) == 0) groups["accelerometer"].push_back(i);
    if (name.rfind("gyro", 0) == 0) groups["gyroscope"].push_back(i);
  }
  return groups;
}

WindowSet occlude(const WindowSet& windows, std::span<const std::size_t> channels,
                  std::mt19937_64& rng, const NoiseSpec& noise) {
  check_noise(noise);
  if (channels.empty()) throw InvalidArgument("occlude: empty channel set");
  for (auto c : channels) {
    if (c >= windows.channels) {
      throw InvalidArgument("occlude: channel " + std::to_string(c) + " out of range");
    }
  }
  WindowSet out = windows;
  std::normal_distribution<double> dist(noise.mean, noise.stddev);
  for (auto& w : out.windows) {
    for (auto c : channels) fill_channel(w, out.channels, c, dist, rng);
  }
  return out;
}

WindowSet occlude_random(const WindowSet& windows, std::size_t k, std::mt19937_64& rng,
                         const NoiseSpec& noise) {
  check_noise(noise);
  const std::size_t s = windows.channels;
  if (k == 0 || k >= s) {
    throw InvalidArgument("random occlusion needs 1 <= k < " + std::to_string(s) + ", got " +
                          std::to_string(k));
  }
  WindowSet out = windows;
  std::normal_distribution<double> dist(noise.mean, noise.stddev);
  std::vector<std::size_t> pool(s);
  for (auto& w : out.windows) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, s - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t i = 0; i < k; ++i) fill_channel(w, s, pool[i], dist, rng);
  }
  return out;
}

DeviceOcclusionResult run_device_occlusion(const PreparedDataset& data, Framework framework,
                                           const std::optional<std::string>& target,
                                           const ChannelGroups& groups,
                                           const PipelineConfig& config, std::uint64_t seed,
                                           const NoiseSpec& noise,
                                           std::optional<double> baseline_macro_f1) {
  const std::vector<std::size_t>* channels = nullptr;
  if (target) {
    const auto it = groups.find(*target);
    if (it == groups.end()) throw InvalidArgument("unknown device '" + *target + "'");
    channels = &it->second;
  }
  DeviceOcclusionResult result;
  result.framework = framework;
  result.target = target ? *target : "none";
  if (baseline_macro_f1) {
    result.baseline_macro_f1 = *baseline_macro_f1;
  } else {
    auto clean = train_framework(framework, data, config, seed);
    result.baseline_macro_f1 = evaluate(clean.model, data.test).macro_f1;
  }
  if (!channels) {
    result.macro_f1 = result.baseline_macro_f1;
    return result;
  }
  PreparedDataset masked = data;
  std::mt19937_64 rng_train(derive_seed(seed, {0x0cc1, 0}));
  std::mt19937_64 rng_val(derive_seed(seed, {0x0cc1, 1}));
  std::mt19937_64 rng_test(derive_seed(seed, {0x0cc1, 2}));
  masked.train = occlude(data.train, *channels, rng_train, noise);
  if (!data.validation.empty()) masked.validation = occlude(data.validation, *channels, rng_val, noise);
  masked.test = occlude(data.test, *channels, rng_test, noise);
  auto trained = train_framework(framework, masked, config, seed);
  result.macro_f1 = evaluate(trained.model, masked.test).macro_f1;
  return result;
}

std::optional<double> DropTable::recall(std::size_t activity, std::size_t k) const {
  const auto it = std::find(k_values.begin(), k_values.end(), k);
  if (it == k_values.end()) return std::nullopt;
  return recall_pct[static_cast<std::size_t>(it - k_values.begin())].at(activity);
}

std::optional<double> DropTable::drop(std::size_t activity, std::size_t k) const {
  const auto a = recall(activity, k);
  const auto b = recall(activity, k + 1);
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

RandomOcclusionResult run_random_test_occlusion(Model<float>& model, Framework framework,
                                                const WindowSet& test,
                                                const RandomOcclusionSpec& spec) {
  if (spec.seeds == 0) throw InvalidArgument("random occlusion needs at least one seed");
  for (auto k : spec.k_values) {
    if (k == 0 || k >= test.channels) {
      throw InvalidArgument("random occlusion needs 1 <= k < " + std::to_string(test.channels) +
                            ", got " + std::to_string(k));
    }
  }
  check_noise(spec.noise);
  const std::size_t classes = model.spec().num_classes;

  RandomOcclusionResult result;
  result.framework = framework;
  result.k_values = spec.k_values;
  const Evaluation clean = evaluate(model, test);
  result.clean_macro_f1 = clean.macro_f1;

  DropTable& drops = result.drops;
  drops.activities = test.activities;
  drops.k_values.push_back(0);
  auto to_pct = [classes](const std::vector<std::vector<std::optional<double>>>& per_seed) {
    std::vector<std::optional<double>> out(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      if (!per_seed.front()[c]) continue;
      double sum = 0.0;
      for (const auto& r : per_seed) sum += *r[c];
      out[c] = 100.0 * sum / static_cast<double>(per_seed.size());
    }
    return out;
  };
  drops.recall_pct.push_back(to_pct({clean.recall}));

  for (auto k : spec.k_values) {
    std::vector<double> f1;
    std::vector<std::vector<std::optional<double>>> recalls;
    for (std::size_t s = 0; s < spec.seeds; ++s) {
      std::mt19937_64 rng(derive_seed(spec.seed, {k, s}));
      const auto masked = occlude_random(test, k, rng, spec.noise);
      auto e = evaluate(model, masked);
      f1.push_back(e.macro_f1);
      recalls.push_back(std::move(e.recall));
    }
    if (f1.size() >= 2) {
      result.ci.push_back(t_confidence_interval(f1));
    } else {
      result.ci.push_back({f1.front(), 0.0});
    }
    result.macro_f1.push_back(std::move(f1));
    drops.k_values.push_back(k);
    drops.recall_pct.push_back(to_pct(recalls));
  }
  return result;
}

CsvTable occlusion_summary_table() {
  CsvTable t;
  t.header = {"framework", "mode", "setting", "seed", "macro_f1"};
  return t;
}

void append_summary(CsvTable& table, const RandomOcclusionResult& result) {
  const std::string fw(to_string(result.framework));
  table.add_row({fw, "random", "0", "", format_double(result.clean_macro_f1)});
  for (std::size_t i = 0; i < result.k_values.size(); ++i) {
    for (std::size_t s = 0; s < result.macro_f1[i].size(); ++s) {
      table.add_row({fw, "random", std::to_string(result.k_values[i]), std::to_string(s),
                     format_double(result.macro_f1[i][s])});
    }
  }
}

void append_summary(CsvTable& table, const DeviceOcclusionResult& result, std::uint64_t seed) {
  const std::string fw(to_string(result.framework));
  if (result.target != "none") {
    table.add_row({fw, "device", "none", std::to_string(seed),
                   format_double(result.baseline_macro_f1)});
  }
  table.add_row({fw, "device", result.target, std::to_string(seed),
                 format_double(result.macro_f1)});
}

CsvTable drop_table(std::span<const RandomOcclusionResult> results) {
  CsvTable t;
  t.header = {"framework", "activity", "delta_0_1", "delta_1_2"};
  for (const auto& r : results) {
    for (std::size_t a = 0; a < r.drops.activities.size(); ++a) {
      if (!r.drops.recall(a, 0)) continue;
      t.add_row({std::string(to_string(r.framework)), r.drops.activities[a],
                 optional_cell(r.drops.drop(a, 0)), optional_cell(r.drops.drop(a, 1))});
    }
  }
  return t;
}

CsvTable recall_table(std::span<const RandomOcclusionResult> results) {
  CsvTable t;
  t.header = {"framework", "activity", "k", "recall_pct"};
  for (const auto& r : results) {
    for (std::size_t ki = 0; ki < r.drops.k_values.size(); ++ki) {
      for (std::size_t a = 0; a < r.drops.activities.size(); ++a) {
        const auto& v = r.drops.recall_pct[ki][a];
        if (!v) continue;
        t.add_row({std::string(to_string(r.framework)), r.drops.activities[a],
                   std::to_string(r.drops.k_values[ki]), format_double(*v)});
      }
    }
  }
  return t;
}

CsvTable occlusion_ci_table(std::span<const RandomOcclusionResult> results) {
  CsvTable t;
  t.header = {"framework", "k", "mean", "ci_margin"};
  for (const auto& r : results) {
    const std::string fw(to_string(r.framework));
    t.add_row({fw, "0", format_double(r.clean_macro_f1), "0"});
    for (std::size_t i = 0; i < r.k_values.size(); ++i) {
      t.add_row({fw, std::to_string(r.k_values[i]), format_double(r.ci[i].mean),
                 format_double(r.ci[i].margin)});
    }
  }
  return t;
}

}  // namespace shlb
