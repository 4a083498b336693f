#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shlb/csv.h"
#include "shlb/data.h"
#include "shlb/metrics.h"
#include "shlb/training.h"

namespace shlb {

// device name -> channel indices
using ChannelGroups = std::map<std::string, std::vector<std::size_t>>;

// "accelerometer" collects channels named acc*, "gyroscope" gyro*. Groups
// without channels are left out.
ChannelGroups default_channel_groups(const std::vector<std::string>& channel_names);

struct NoiseSpec {
  double mean = 0.0;
  double stddev = 1.0;
};

// Replaces every listed channel of every window with fresh i.i.d. noise; the
// rng stream consumed does not depend on the window values. Throws
// InvalidArgument on an empty or out-of-range channel list, or stddev <= 0.
WindowSet occlude(const WindowSet& windows, std::span<const std::size_t> channels,
                  std::mt19937_64& rng, const NoiseSpec& noise = {});

// Each window independently gets k distinct uniformly chosen channels
// occluded. Throws InvalidArgument unless 1 <= k < S.
WindowSet occlude_random(const WindowSet& windows, std::size_t k, std::mt19937_64& rng,
                         const NoiseSpec& noise = {});

struct DeviceOcclusionResult {
  Framework framework = Framework::kSupervised;
  std::string target;  // "none" or a device name
  double baseline_macro_f1 = 0.0;
  double macro_f1 = 0.0;
};

// Occludes `target`'s channels in train, validation and test, trains the
// framework from scratch and reports test macro-F1 next to a clean run. An
// empty target reports the clean run for both. Throws InvalidArgument when
// the device is not in `groups`.
DeviceOcclusionResult run_device_occlusion(const PreparedDataset& data, Framework framework,
                                           const std::optional<std::string>& target,
                                           const ChannelGroups& groups,
                                           const PipelineConfig& config, std::uint64_t seed,
                                           const NoiseSpec& noise = {},
                                           std::optional<double> baseline_macro_f1 = std::nullopt);

struct RandomOcclusionSpec {
  std::vector<std::size_t> k_values{1, 2, 3, 4, 5};
  std::size_t seeds = 10;
  std::uint64_t seed = 0;
  NoiseSpec noise;
};

// Per-activity recall (percent, averaged over seeds) at each k; drops are
// differences of stored entries.
struct DropTable {
  std::vector<std::string> activities;
  std::vector<std::size_t> k_values;  // starts with 0
  // recall_pct[k index][activity]; nullopt for activities absent from the test set
  std::vector<std::vector<std::optional<double>>> recall_pct;

  std::optional<double> recall(std::size_t activity, std::size_t k) const;
  // recall(k) - recall(k + 1)
  std::optional<double> drop(std::size_t activity, std::size_t k) const;
};

struct RandomOcclusionResult {
  Framework framework = Framework::kSupervised;
  double clean_macro_f1 = 0.0;
  std::vector<std::size_t> k_values;
  std::vector<std::vector<double>> macro_f1;  // [k index][seed]
  std::vector<ConfidenceInterval> ci;         // per k; margin 0 with one seed
  DropTable drops;
};

// Test-time occlusion against an already trained model. Throws
// InvalidArgument for k == 0 or k >= S in the list, or no seeds.
RandomOcclusionResult run_random_test_occlusion(Model<float>& model, Framework framework,
                                                const WindowSet& test,
                                                const RandomOcclusionSpec& spec);

// framework,mode,setting,seed,macro_f1
CsvTable occlusion_summary_table();
void append_summary(CsvTable& table, const RandomOcclusionResult& result);
void append_summary(CsvTable& table, const DeviceOcclusionResult& result, std::uint64_t seed);
// framework,activity,delta_0_1,delta_1_2
CsvTable drop_table(std::span<const RandomOcclusionResult> results);
// framework,activity,k,recall_pct
CsvTable recall_table(std::span<const RandomOcclusionResult> results);
// framework,k,mean,ci_margin
CsvTable occlusion_ci_table(std::span<const RandomOcclusionResult> results);

}  // namespace shlb
