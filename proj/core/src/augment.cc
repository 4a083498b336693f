#include "shlb/augment.h"

#include <algorithm>
#include <cmath>

#include "shlb/error.h"

namespace shlb {

std::string_view to_string(Transform t) {
  switch (t) {
    case Transform::kJitter: return "jitter";
    case Transform::kScale: return "scale";
    case Transform::kRotation: return "rotation";
    case Transform::kPermutation: return "permutation";
  }
  return "unknown";
}

AugmentationSpec AugmentationSpec::mobiact() {
  AugmentationSpec spec;
  spec.pool = {Transform::kJitter, Transform::kScale, Transform::kRotation};
  return spec;
}

AugmentationSpec AugmentationSpec::ucihar() {
  AugmentationSpec spec;
  spec.pool = {Transform::kJitter, Transform::kScale, Transform::kPermutation};
  return spec;
}

void AugmentationSpec::validate() const {
  if (pool.empty()) throw InvalidArgument("augmentation pool is empty");
  if (jitter_sigma < 0.0 || scale_sigma < 0.0) {
    throw InvalidArgument("augmentation sigmas must be non-negative");
  }
  if (max_segments < 2) throw InvalidArgument("permutation needs max_segments >= 2");
}

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  double w, x, y, z, norm;
  do {
    w = gauss(rng);
    x = gauss(rng);
    y = gauss(rng);
    z = gauss(rng);
    norm = std::sqrt(w * w + x * x + y * y + z * z);
  } while (norm < 1e-12);
  w /= norm;
  x /= norm;
  y /= norm;
  z /= norm;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

void jitter(std::span<double> window, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : window) v += noise(rng);
}

void scale(std::span<double> window, std::size_t channels, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> factor(1.0, sigma > 0.0 ? sigma : 1.0);
  std::vector<double> factors(channels, 1.0);
  if (sigma > 0.0) {
    for (auto& f : factors) f = factor(rng);
  }
  for (std::size_t i = 0; i < window.size(); ++i) window[i] *= factors[i % channels];
}

void rotate(std::span<double> window, std::size_t channels, bool shared, std::mt19937_64& rng) {
  if (channels % 3 != 0) {
    throw InvalidArgument("rotation needs a channel count divisible by 3, got " +
                          std::to_string(channels));
  }
  const std::size_t groups = channels / 3;
  std::vector<Rotation> rotations;
  rotations.push_back(random_rotation(rng));
  for (std::size_t g = 1; g < groups; ++g) {
    rotations.push_back(shared ? rotations.front() : random_rotation(rng));
  }
  const std::size_t steps = window.size() / channels;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t g = 0; g < groups; ++g) {
      double* v = window.data() + t * channels + 3 * g;
      const Rotation& r = rotations[g];
      const double x = v[0], y = v[1], z = v[2];
      v[0] = r[0] * x + r[1] * y + r[2] * z;
      v[1] = r[3] * x + r[4] * y + r[5] * z;
      v[2] = r[6] * x + r[7] * y + r[8] * z;
    }
  }
}

void permute_segments(std::span<double> window, std::size_t channels, std::size_t max_segments,
                      std::mt19937_64& rng) {
  const std::size_t steps = window.size() / channels;
  if (steps < 2) return;
  const std::size_t upper = std::min(max_segments, steps);
  const std::size_t segments = std::uniform_int_distribution<std::size_t>(2, upper)(rng);
  // segments-1 distinct cut points in [1, steps-1]
  std::vector<std::size_t> candidates(steps - 1);
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i + 1;
  for (std::size_t i = 0; i + 1 < segments; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, candidates.size() - 1)(rng);
    std::swap(candidates[i], candidates[j]);
  }
  std::vector<std::size_t> cuts(candidates.begin(), candidates.begin() + (segments - 1));
  std::sort(cuts.begin(), cuts.end());
  cuts.insert(cuts.begin(), 0);
  cuts.push_back(steps);
  std::vector<std::size_t> order(segments);
  for (std::size_t i = 0; i < segments; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> out;
  out.reserve(window.size());
  for (std::size_t seg : order) {
    out.insert(out.end(), window.begin() + cuts[seg] * channels,
               window.begin() + cuts[seg + 1] * channels);
  }
  std::copy(out.begin(), out.end(), window.begin());
}

std::vector<double> augment(const AugmentationSpec& spec, std::span<const double> window,
                            std::size_t channels, std::mt19937_64& rng) {
  spec.validate();
  if (channels == 0 || window.size() % channels != 0) {
    throw InvalidArgument("window size is not a multiple of the channel count");
  }
  const bool rotation_in_pool =
      std::find(spec.pool.begin(), spec.pool.end(), Transform::kRotation) != spec.pool.end();
  if (rotation_in_pool && channels % 3 != 0) {
    throw InvalidArgument("rotation needs a channel count divisible by 3, got " +
                          std::to_string(channels));
  }
  std::bernoulli_distribution coin(0.5);
  std::vector<bool> chosen(spec.pool.size());
  bool any = false;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    chosen[i] = coin(rng);
    any = any || chosen[i];
  }
  if (!any) {
    chosen[std::uniform_int_distribution<std::size_t>(0, chosen.size() - 1)(rng)] = true;
  }
  std::vector<double> out(window.begin(), window.end());
  for (std::size_t i = 0; i < spec.pool.size(); ++i) {
    if (!chosen[i]) continue;
    switch (spec.pool[i]) {
      case Transform::kJitter: jitter(out, spec.jitter_sigma, rng); break;
      case Transform::kScale: scale(out, channels, spec.scale_sigma, rng); break;
      case Transform::kRotation: rotate(out, channels, spec.shared_rotation, rng); break;
      case Transform::kPermutation: permute_segments(out, channels, spec.max_segments, rng); break;
    }
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> make_pair(const AugmentationSpec& spec,
                                                              std::span<const double> window,
                                                              std::size_t channels,
                                                              std::mt19937_64& rng) {
  auto first = augment(spec, window, channels, rng);
  auto second = augment(spec, window, channels, rng);
  return {std::move(first), std::move(second)};
}

}  // namespace shlb
