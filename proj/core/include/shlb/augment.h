#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "shlb/tensor.h"

namespace shlb {

enum class Transform { kJitter, kScale, kRotation, kPermutation };

std::string_view to_string(Transform t);

struct AugmentationSpec {
  std::vector<Transform> pool{Transform::kJitter, Transform::kScale, Transform::kRotation};
  double jitter_sigma = 0.05;
  double scale_sigma = 0.1;
  std::size_t max_segments = 5;
  // One rotation per call shared by every 3-channel group (acc and gyro live
  // in the same device frame). When false each group draws its own.
  bool shared_rotation = true;

  // jitter + scale + rotation
  static AugmentationSpec mobiact();
  // jitter + scale + permutation
  static AugmentationSpec ucihar();

  // Throws InvalidArgument: non-empty pool, sigmas >= 0, max_segments >= 2.
  void validate() const;

  bool operator==(const AugmentationSpec&) const = default;
};

using Rotation = std::array<double, 9>;  // row-major 3x3

// Uniform over SO(3) via a normalized Gaussian quaternion.
Rotation random_rotation(std::mt19937_64& rng);

// window: [T, S] (row-major values). Each pool member is included with
// probability 1/2, at least one is forced, and the chosen ones run in pool
// order. Throws InvalidArgument if rotation is in the pool and S % 3 != 0.
std::vector<double> augment(const AugmentationSpec& spec, std::span<const double> window,
                            std::size_t channels, std::mt19937_64& rng);

// Two independent augment() draws of the same window.
std::pair<std::vector<double>, std::vector<double>> make_pair(const AugmentationSpec& spec,
                                                              std::span<const double> window,
                                                              std::size_t channels,
                                                              std::mt19937_64& rng);

// Individual transforms, exposed for testing.
void jitter(std::span<double> window, double sigma, std::mt19937_64& rng);
void scale(std::span<double> window, std::size_t channels, double sigma, std::mt19937_64& rng);
void rotate(std::span<double> window, std::size_t channels, bool shared, std::mt19937_64& rng);
void permute_segments(std::span<double> window, std::size_t channels, std::size_t max_segments,
                      std::mt19937_64& rng);

}  // namespace shlb
