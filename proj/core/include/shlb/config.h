#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shlb/augment.h"
#include "shlb/data.h"
#include "shlb/model.h"
#include "shlb/probing.h"
#include "shlb/training.h"

namespace shlb {

struct DataConfig {
  std::string source = "synth";  // synth | csv
  std::string csv;               // canonical CSV for source=csv
  // Built-in name (mobiact, ucihar) or a CSV path. Empty: the profile's
  // default, or the generator's own taxonomy for synthetic data.
  std::string taxonomy;
  std::vector<std::string> channels = kDefaultChannels;
  double sample_rate = 50.0;
  std::size_t window_length = 50;
  double overlap = 0.5;
  SynthSpec synth;
};

struct OcclusionConfig {
  std::vector<std::size_t> k_values{1, 2, 3, 4, 5};
  std::size_t seeds = 10;
  std::vector<std::string> devices{"accelerometer", "gyroscope"};
  double noise_mean = 0.0;
  double noise_std = 1.0;
};

struct SaliencyConfig {
  std::size_t local_windows = 3;
  bool svg = true;
};

struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 0;
  std::string out = "out";
  std::vector<std::string> frameworks{"supervised", "simclr", "vicreg"};
  DataConfig data;
  ModelSpec model;
  // SSL view augmentation lives in simclr.augmentation / vicreg.augmentation.
  TrainConfig supervised, simclr, vicreg, finetune;
  OcclusionConfig occlusion;
  SaliencyConfig saliency;
  ProbeConfig probe;

  // mobiact | ucihar | desk. Throws ConfigError otherwise.
  static RunConfig for_profile(std::string_view name);

  nlohmann::json to_json() const;
  // The document's "profile" (or `profile`, which wins) picks the defaults;
  // every other key overrides one of them. Unknown keys, wrong types and
  // invalid values throw ConfigError naming the key path.
  static RunConfig from_json(const nlohmann::json& doc,
                             const std::optional<std::string>& profile = std::nullopt);
  static RunConfig load(const std::filesystem::path& path,
                        const std::optional<std::string>& profile = std::nullopt);

  PipelineConfig pipeline() const;
  // Throws ConfigError.
  void validate() const;
};

// Hex FNV-1a 64 of the canonical (sorted-key, compact) JSON dump.
std::string config_fingerprint(const nlohmann::json& config);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& doc);

}  // namespace shlb
