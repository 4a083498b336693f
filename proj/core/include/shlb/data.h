#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shlb/tensor.h"

namespace shlb {

enum class ActivityType { kPeriodic, kStable, kTransition };

std::string_view to_string(ActivityType type);
// Throws InvalidArgument for anything other than periodic/stable/transition.
ActivityType parse_activity_type(std::string_view text);

// One continuous labeled recording: S named channels of equal length.
struct Recording {
  std::int64_t subject_id = 0;
  std::string recording_id;
  std::string activity;
  double sample_rate = 50.0;
  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> channels;

  std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
  // Throws InvalidArgument: S >= 1, equal lengths, sample_rate > 0.
  void validate() const;
};

// activity label -> {periodic, stable, transition}
class Taxonomy {
 public:
  Taxonomy() = default;
  Taxonomy(std::initializer_list<std::pair<const std::string, ActivityType>> entries)
      : entries_(entries) {}

  void set(const std::string& activity, ActivityType type) { entries_[activity] = type; }
  std::optional<ActivityType> find(const std::string& activity) const;
  // Throws InvalidArgument when the activity is not covered.
  ActivityType at(const std::string& activity) const;
  const std::map<std::string, ActivityType>& entries() const { return entries_; }

  // Activity categorization shipped for the two reference datasets.
  static Taxonomy mobiact();
  static Taxonomy ucihar();

  // CSV with header `activity,type`.
  static Taxonomy read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  bool operator==(const Taxonomy&) const = default;

 private:
  std::map<std::string, ActivityType> entries_;
};

struct TimeWindow {
  std::vector<double> values;  // [T, S] row-major
  std::size_t activity = 0;    // index into WindowSet::activities
  std::int64_t subject_id = 0;
  ActivityType activity_type = ActivityType::kPeriodic;
};

struct WindowSet {
  std::size_t window_length = 0;
  std::size_t channels = 0;
  std::vector<std::string> channel_names;
  std::vector<std::string> activities;
  std::vector<TimeWindow> windows;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
  std::vector<std::size_t> labels() const;
  std::set<std::int64_t> subjects() const;

  // Windows at `indices` stacked as [n, T, S].
  template <typename Scalar>
  Tensor<Scalar> batch(std::span<const std::size_t> indices) const;
  template <typename Scalar>
  Tensor<Scalar> all() const;

  WindowSet subset(std::span<const std::size_t> indices) const;
  WindowSet with_subjects(const std::set<std::int64_t>& subjects) const;
};

// --- ingest --------------------------------------------------------------

inline const std::vector<std::string> kDefaultChannels = {"acc_x",  "acc_y",  "acc_z",
                                                          "gyro_x", "gyro_y", "gyro_z"};

struct IngestOptions {
  // Channel columns to read, in this order. Empty: every non-id column.
  std::vector<std::string> channel_columns = kDefaultChannels;
  double sample_rate = 50.0;
};

// Canonical CSV: subject_id,recording_id,activity,<channels...>, rows in
// temporal order. One Recording per contiguous (subject, recording, activity)
// block. Throws ParseError with the offending line.
std::vector<Recording> ingest_csv(const std::filesystem::path& path,
                                  const IngestOptions& options = {});
std::vector<Recording> ingest_csv(std::istream& in, const std::string& source,
                                  const IngestOptions& options = {});
void write_recordings_csv(const std::filesystem::path& path,
                          const std::vector<Recording>& recordings);

// --- windowing ------------------------------------------------------------

struct WindowingReport {
  std::size_t skipped_recordings = 0;  // shorter than one window
};

std::size_t window_stride(std::size_t window_length, double overlap);
// Number of windows a recording of `length` yields: max(0, floor((L-T)/stride)+1).
std::size_t window_count(std::size_t length, std::size_t window_length, double overlap);

// Class indices follow the sorted set of activity labels. Every label must be
// covered by `taxonomy`.
WindowSet make_windows(const std::vector<Recording>& recordings, std::size_t window_length,
                       double overlap, const Taxonomy& taxonomy,
                       WindowingReport* report = nullptr);

// --- splits and normalization --------------------------------------------

enum class Split { kTrain, kValidation, kTest };

struct SplitSpec {
  std::set<std::int64_t> train, validation, test;
  std::uint64_t seed = 0;

  Split of(std::int64_t subject) const;
};

// test = round(0.2 n) (min 1), validation = round(0.2 * remaining) (min 1),
// rest train; round half up. Throws InvalidArgument for fewer than 3 subjects.
SplitSpec split_subjects(std::vector<std::int64_t> subject_ids, std::uint64_t seed);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<std::size_t> floored_channels;  // constant channels, std floored
};

inline constexpr double kStdFloor = 1e-8;

// Per-channel population mean/std over every sample of every window.
// Throws InvalidArgument on an empty set.
NormStats compute_norm_stats(const WindowSet& train);
void apply_norm(WindowSet& windows, const NormStats& stats);

struct PreparedDataset {
  WindowSet train, validation, test;
  SplitSpec split;
  NormStats stats;
  WindowingReport windowing;
};

// window -> subject split -> normalize with train statistics.
PreparedDataset prepare_dataset(const std::vector<Recording>& recordings,
                                std::size_t window_length, double overlap,
                                const Taxonomy& taxonomy, std::uint64_t seed);

// --- synthetic data -------------------------------------------------------

struct SynthSpec {
  std::size_t subjects = 8;
  std::size_t periodic_classes = 3;
  std::size_t stable_classes = 2;
  std::size_t transition_classes = 2;
  std::size_t recording_length = 200;
  std::size_t recordings_per_class = 2;
  std::size_t channels = 6;
  double sample_rate = 50.0;
  double noise = 0.05;
  // Channels whose content depends on the class. Empty means all. The other
  // channels carry a class-independent, subject-specific signal.
  std::vector<std::size_t> informative_channels;
  std::uint64_t seed = 7;
};

struct SyntheticDataset {
  std::vector<Recording> recordings;
  Taxonomy taxonomy;
};

// Periodic classes: phase/frequency-perturbed sinusoid mixtures. Stable:
// constant offsets plus small noise. Transition: smooth ramps between two
// offset levels. Every subject has its own per-channel gain, offset and
// tempo.
SyntheticDataset synthesize(const SynthSpec& spec);

}  // namespace shlb
