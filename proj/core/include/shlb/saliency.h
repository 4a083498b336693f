#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "shlb/csv.h"
#include "shlb/data.h"
#include "shlb/model.h"
#include "shlb/tensor.h"

namespace shlb {

// ReLU(sum_c alpha_c A[., c]) with alpha_c the time-mean of G[., c].
// activation and gradient are [T, C] row-major.
std::vector<double> gradcam_map(std::span<const double> activation,
                                std::span<const double> gradient, std::size_t length,
                                std::size_t channels);

// Linear resampling of a map to `length` points (identity when sizes match).
std::vector<double> resample(std::span<const double> map, std::size_t length);

// Grad-CAM over the last conv block's output for the pre-softmax score of
// `class_index`. window: [T, S]. Returns T non-negative values.
template <typename Scalar>
std::vector<double> grad_cam(Model<Scalar>& model, const Tensor<Scalar>& window,
                             std::size_t class_index);

struct AttributionMap {
  Tensor<double> values;  // [T, S]
  std::size_t class_index = 0;
  std::size_t predicted = 0;
};

// Guided backprop map times the Grad-CAM map broadcast over channels.
template <typename Scalar>
AttributionMap guided_gradcam(Model<Scalar>& model, const Tensor<Scalar>& window,
                              std::size_t class_index);

struct ChannelDistribution {
  std::vector<double> weights;  // sums to 1
  bool uniform_fallback = false;
};

// w_s = sum_t |attr[t, s]|, l1-normalized; an all-zero map gives the uniform
// distribution.
ChannelDistribution channel_distribution(const Tensor<double>& attribution);

// Shannon entropy in bits, 0 log 0 = 0.
double attribution_entropy(std::span<const double> distribution);

struct ActivityAttribution {
  std::size_t activity = 0;
  std::string name;
  std::vector<double> distribution;  // mean of per-window distributions
  double entropy_bits = 0.0;         // mean of per-window entropies
  std::size_t windows = 0;
};

struct GlobalAttribution {
  std::string framework;
  std::vector<std::string> channel_names;
  std::vector<ActivityAttribution> activities;
  std::size_t uniform_fallbacks = 0;
  std::vector<std::string> omitted_activities;  // no correctly classified window
};

// Correctly classified windows only, attributed to their (true) class.
template <typename Scalar>
GlobalAttribution global_attributions(Model<Scalar>& model, const WindowSet& windows,
                                      const std::string& framework);

// t,channel,value
CsvTable local_attribution_table(const AttributionMap& map,
                                 const std::vector<std::string>& channel_names);
// framework,activity,channel,weight
CsvTable global_heatmap_table(std::span<const GlobalAttribution> results);
// framework,activity,H_bits
CsvTable entropy_table(std::span<const GlobalAttribution> results);

// Activities x channels heatmap, darker red for larger weight.
void write_heatmap_svg(const std::filesystem::path& path, const GlobalAttribution& result);

}  // namespace shlb
