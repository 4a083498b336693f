#include "shlb/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "shlb/csv.h"
#include "shlb/error.h"

namespace shlb {

std::string_view to_string(ActivityType type) {
  switch (type) {
    case ActivityType::kPeriodic: return "periodic";
    case ActivityType::kStable: return "stable";
    case ActivityType::kTransition: return "transition";
  }
  return "unknown";
}

ActivityType parse_activity_type(std::string_view text) {
  if (text == "periodic") return ActivityType::kPeriodic;
  if (text == "stable") return ActivityType::kStable;
  if (text == "transition") return ActivityType::kTransition;
  throw InvalidArgument("unknown activity type '" + std::string(text) +
                        "' (expected periodic, stable or transition)");
}

void Recording::validate() const {
  if (channels.empty()) throw InvalidArgument("recording has no channels");
  if (!(sample_rate > 0.0)) throw InvalidArgument("recording sample rate must be positive");
  if (channel_names.size() != channels.size()) {
    throw InvalidArgument("recording channel names do not match channel count");
  }
  for (const auto& c : channels) {
    if (c.size() != channels.front().size()) {
      throw InvalidArgument("recording channels have unequal lengths");
    }
  }
}

// --- taxonomy ---------------------------------------------------------------

std::optional<ActivityType> Taxonomy::find(const std::string& activity) const {
  const auto it = entries_.find(activity);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

ActivityType Taxonomy::at(const std::string& activity) const {
  if (auto t = find(activity)) return *t;
  throw InvalidArgument("activity '" + activity + "' is not covered by the taxonomy");
}

Taxonomy Taxonomy::mobiact() {
  using enum ActivityType;
  return {{"Walking", kPeriodic},      {"Jogging", kPeriodic},      {"Jumping", kPeriodic},
          {"Stairs Up", kPeriodic},    {"Stairs Down", kPeriodic},  {"Standing", kStable},
          {"Sitting", kStable},        {"Stand to Sit", kTransition}, {"Sit to Stand", kTransition},
          {"Car-step in", kTransition}, {"Car-step out", kTransition}};
}

Taxonomy Taxonomy::ucihar() {
  using enum ActivityType;
  return {{"Walking", kPeriodic}, {"Walking Downstairs", kPeriodic}, {"Walking Upstairs", kPeriodic},
          {"Sitting", kStable},   {"Standing", kStable},             {"Laying", kStable}};
}

Taxonomy Taxonomy::read(const std::filesystem::path& path) {
  const CsvTable table = read_csv_file(path);
  const std::size_t activity = table.column("activity");
  const std::size_t type = table.column("type");
  Taxonomy out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    try {
      out.set(table.rows[r][activity], parse_activity_type(table.rows[r][type]));
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string(), r + 2, e.what());
    }
  }
  return out;
}

void Taxonomy::write(const std::filesystem::path& path) const {
  CsvTable table{{"activity", "type"}, {}};
  for (const auto& [activity, type] : entries_) {
    table.add_row({activity, std::string(to_string(type))});
  }
  write_csv_file(path, table);
}

// --- window set ---------------------------------------------------------------

std::vector<std::size_t> WindowSet::labels() const {
  std::vector<std::size_t> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.activity);
  return out;
}

std::set<std::int64_t> WindowSet::subjects() const {
  std::set<std::int64_t> out;
  for (const auto& w : windows) out.insert(w.subject_id);
  return out;
}

template <typename Scalar>
Tensor<Scalar> WindowSet::batch(std::span<const std::size_t> indices) const {
  Tensor<Scalar> out({indices.size(), window_length, channels});
  const std::size_t stride = window_length * channels;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& src = windows.at(indices[i]).values;
    std::transform(src.begin(), src.end(), out.data() + i * stride,
                   [](double v) { return static_cast<Scalar>(v); });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> WindowSet::all() const {
  std::vector<std::size_t> idx(windows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch<Scalar>(idx);
}

template Tensor<float> WindowSet::batch<float>(std::span<const std::size_t>) const;
template Tensor<double> WindowSet::batch<double>(std::span<const std::size_t>) const;
template Tensor<float> WindowSet::all<float>() const;
template Tensor<double> WindowSet::all<double>() const;

WindowSet WindowSet::subset(std::span<const std::size_t> indices) const {
  WindowSet out{window_length, channels, channel_names, activities, {}};
  out.windows.reserve(indices.size());
  for (std::size_t i : indices) out.windows.push_back(windows.at(i));
  return out;
}

WindowSet WindowSet::with_subjects(const std::set<std::int64_t>& subject_set) const {
  WindowSet out{window_length, channels, channel_names, activities, {}};
  for (const auto& w : windows) {
    if (subject_set.contains(w.subject_id)) out.windows.push_back(w);
  }
  return out;
}

// --- ingest -------------------------------------------------------------------

std::vector<Recording> ingest_csv(std::istream& in, const std::string& source,
                                  const IngestOptions& options) {
  const CsvTable table = read_csv(in, source);
  const auto require = [&](const std::string& name) {
    if (auto i = table.find_column(name)) return *i;
    throw ParseError(source, 1, "missing header column '" + name + "'");
  };
  const std::size_t subject_col = require("subject_id");
  const std::size_t recording_col = require("recording_id");
  const std::size_t activity_col = require("activity");

  std::vector<std::string> names = options.channel_columns;
  if (names.empty()) {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (i != subject_col && i != recording_col && i != activity_col) names.push_back(table.header[i]);
    }
  }
  if (names.empty()) throw ParseError(source, 1, "no channel columns");
  std::vector<std::size_t> channel_cols;
  for (const auto& n : names) channel_cols.push_back(require(n));

  std::vector<Recording> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = r + 2;
    const auto subject = parse_double(row[subject_col]);
    if (!subject || *subject != std::floor(*subject)) {
      throw ParseError(source, line, "subject_id '" + row[subject_col] + "' is not an integer");
    }
    const auto subject_id = static_cast<std::int64_t>(*subject);
    if (out.empty() || out.back().subject_id != subject_id ||
        out.back().recording_id != row[recording_col] || out.back().activity != row[activity_col]) {
      Recording rec;
      rec.subject_id = subject_id;
      rec.recording_id = row[recording_col];
      rec.activity = row[activity_col];
      rec.sample_rate = options.sample_rate;
      rec.channel_names = names;
      rec.channels.resize(names.size());
      out.push_back(std::move(rec));
    }
    for (std::size_t c = 0; c < channel_cols.size(); ++c) {
      const auto value = parse_double(row[channel_cols[c]]);
      if (!value) {
        throw ParseError(source, line, "non-numeric value '" + row[channel_cols[c]] +
                                           "' in column '" + names[c] + "'");
      }
      out.back().channels[c].push_back(*value);
    }
  }
  return out;
}

std::vector<Recording> ingest_csv(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return ingest_csv(in, path.string(), options);
}

void write_recordings_csv(const std::filesystem::path& path,
                          const std::vector<Recording>& recordings) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  if (recordings.empty()) throw InvalidArgument("no recordings to write");
  CsvTable table{{"subject_id", "recording_id", "activity"}, {}};
  for (const auto& n : recordings.front().channel_names) table.header.push_back(n);
  for (const auto& rec : recordings) {
    rec.validate();
    if (rec.channel_names != recordings.front().channel_names) {
      throw InvalidArgument("recordings disagree on channel layout");
    }
    for (std::size_t t = 0; t < rec.length(); ++t) {
      std::vector<std::string> row{std::to_string(rec.subject_id), rec.recording_id, rec.activity};
      for (const auto& c : rec.channels) row.push_back(format_double(c[t]));
      table.rows.push_back(std::move(row));
    }
  }
  write_csv(out, table);
}

// --- windowing ----------------------------------------------------------------

std::size_t window_stride(std::size_t window_length, double overlap) {
  if (window_length == 0) throw InvalidArgument("window length must be positive");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw InvalidArgument("overlap must lie in [0, 1)");
  const auto stride = std::llround(static_cast<double>(window_length) * (1.0 - overlap));
  return static_cast<std::size_t>(std::max<long long>(1, stride));
}

std::size_t window_count(std::size_t length, std::size_t window_length, double overlap) {
  const std::size_t stride = window_stride(window_length, overlap);
  if (length < window_length) return 0;
  return (length - window_length) / stride + 1;
}

WindowSet make_windows(const std::vector<Recording>& recordings, std::size_t window_length,
                       double overlap, const Taxonomy& taxonomy, WindowingReport* report) {
  const std::size_t stride = window_stride(window_length, overlap);
  WindowSet out;
  out.window_length = window_length;
  if (recordings.empty()) return out;

  std::set<std::string> labels;
  for (const auto& rec : recordings) {
    rec.validate();
    if (rec.channel_names != recordings.front().channel_names) {
      throw InvalidArgument("recordings disagree on channel layout");
    }
    labels.insert(rec.activity);
  }
  out.channels = recordings.front().channels.size();
  out.channel_names = recordings.front().channel_names;
  out.activities.assign(labels.begin(), labels.end());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < out.activities.size(); ++i) index[out.activities[i]] = i;

  WindowingReport local;
  for (const auto& rec : recordings) {
    const ActivityType type = taxonomy.at(rec.activity);
    if (rec.length() < window_length) {
      ++local.skipped_recordings;
      continue;
    }
    for (std::size_t start = 0; start + window_length <= rec.length(); start += stride) {
      TimeWindow w;
      w.values.resize(window_length * out.channels);
      for (std::size_t t = 0; t < window_length; ++t) {
        for (std::size_t c = 0; c < out.channels; ++c) {
          w.values[t * out.channels + c] = rec.channels[c][start + t];
        }
      }
      w.activity = index.at(rec.activity);
      w.subject_id = rec.subject_id;
      w.activity_type = type;
      out.windows.push_back(std::move(w));
    }
  }
  if (report) *report = local;
  return out;
}

// --- splits ------------------------------------------------------------------

Split SplitSpec::of(std::int64_t subject) const {
  if (test.contains(subject)) return Split::kTest;
  if (validation.contains(subject)) return Split::kValidation;
  if (train.contains(subject)) return Split::kTrain;
  throw InvalidArgument("subject " + std::to_string(subject) + " is not part of the split");
}

namespace {

std::size_t round_half_up_min1(double x) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(x + 0.5)));
}

}  // namespace

SplitSpec split_subjects(std::vector<std::int64_t> subject_ids, std::uint64_t seed) {
  std::sort(subject_ids.begin(), subject_ids.end());
  subject_ids.erase(std::unique(subject_ids.begin(), subject_ids.end()), subject_ids.end());
  const std::size_t n = subject_ids.size();
  if (n < 3) {
    throw InvalidArgument("subject split needs at least 3 subjects, got " + std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(subject_ids.begin(), subject_ids.end(), rng);
  const std::size_t test = round_half_up_min1(0.2 * static_cast<double>(n));
  const std::size_t validation = round_half_up_min1(0.2 * static_cast<double>(n - test));
  SplitSpec out;
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < test) {
      out.test.insert(subject_ids[i]);
    } else if (i < test + validation) {
      out.validation.insert(subject_ids[i]);
    } else {
      out.train.insert(subject_ids[i]);
    }
  }
  return out;
}

// --- normalization -------------------------------------------------------------

NormStats compute_norm_stats(const WindowSet& train) {
  if (train.empty()) throw InvalidArgument("normalization statistics need a non-empty train split");
  const std::size_t s = train.channels;
  NormStats stats;
  stats.mean.assign(s, 0.0);
  stats.stddev.assign(s, 0.0);
  double count = 0.0;
  for (const auto& w : train.windows) {
    for (std::size_t i = 0; i < w.values.size(); ++i) stats.mean[i % s] += w.values[i];
    count += static_cast<double>(train.window_length);
  }
  for (auto& m : stats.mean) m /= count;
  for (const auto& w : train.windows) {
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      const double d = w.values[i] - stats.mean[i % s];
      stats.stddev[i % s] += d * d;
    }
  }
  for (std::size_t c = 0; c < s; ++c) {
    stats.stddev[c] = std::sqrt(stats.stddev[c] / count);
    if (stats.stddev[c] < kStdFloor) {
      stats.stddev[c] = kStdFloor;
      stats.floored_channels.push_back(c);
    }
  }
  return stats;
}

void apply_norm(WindowSet& windows, const NormStats& stats) {
  const std::size_t s = windows.channels;
  if (stats.mean.size() != s || stats.stddev.size() != s) {
    throw InvalidArgument("normalization statistics do not match the channel count");
  }
  for (auto& w : windows.windows) {
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      w.values[i] = (w.values[i] - stats.mean[i % s]) / stats.stddev[i % s];
    }
  }
}

PreparedDataset prepare_dataset(const std::vector<Recording>& recordings,
                                std::size_t window_length, double overlap,
                                const Taxonomy& taxonomy, std::uint64_t seed) {
  PreparedDataset out;
  const WindowSet all = make_windows(recordings, window_length, overlap, taxonomy, &out.windowing);
  std::vector<std::int64_t> ids;
  for (const auto& rec : recordings) ids.push_back(rec.subject_id);
  out.split = split_subjects(ids, seed);
  out.train = all.with_subjects(out.split.train);
  out.validation = all.with_subjects(out.split.validation);
  out.test = all.with_subjects(out.split.test);
  out.stats = compute_norm_stats(out.train);
  apply_norm(out.train, out.stats);
  apply_norm(out.validation, out.stats);
  apply_norm(out.test, out.stats);
  return out;
}

// --- synthetic data ---------------------------------------------------------

namespace {

struct SubjectTraits {
  std::vector<double> gain, offset;
  double tempo = 1.0;
  double idle_frequency = 1.0;
};

struct PeriodicClass {
  double frequency = 1.0;
  std::vector<double> level, amplitude, phase, harmonic;
};

struct LevelClass {
  std::vector<double> from, to;
};

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

}  // namespace

SyntheticDataset synthesize(const SynthSpec& spec) {
  if (spec.channels == 0 || spec.subjects == 0 || spec.recording_length == 0) {
    throw InvalidArgument("synthetic spec needs positive subjects, channels and length");
  }
  const std::size_t s = spec.channels;
  std::vector<bool> informative(s, spec.informative_channels.empty());
  for (std::size_t c : spec.informative_channels) {
    if (c >= s) throw InvalidArgument("informative channel index out of range");
    informative[c] = true;
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < s; ++c) {
    names.push_back(s == kDefaultChannels.size() ? kDefaultChannels[c] : "ch" + std::to_string(c));
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto vec = [&](auto draw) {
    std::vector<double> v(s);
    for (auto& x : v) x = draw();
    return v;
  };

  SyntheticDataset out;
  std::vector<PeriodicClass> periodic(spec.periodic_classes);
  for (std::size_t k = 0; k < periodic.size(); ++k) {
    auto& p = periodic[k];
    p.frequency = 1.0 + 0.8 * static_cast<double>(k);
    p.level = vec([&] { return 0.5 * gauss(rng); });
    p.amplitude = vec([&] { return uniform(0.5, 1.5); });
    p.phase = vec([&] { return uniform(0.0, 2.0 * std::numbers::pi); });
    p.harmonic = vec([&] { return uniform(0.0, 0.5); });
    out.taxonomy.set("periodic_" + std::to_string(k), ActivityType::kPeriodic);
  }
  std::vector<LevelClass> stable(spec.stable_classes), transition(spec.transition_classes);
  for (std::size_t k = 0; k < stable.size(); ++k) {
    stable[k].from = vec([&] { return gauss(rng); });
    out.taxonomy.set("stable_" + std::to_string(k), ActivityType::kStable);
  }
  for (std::size_t k = 0; k < transition.size(); ++k) {
    transition[k].from = vec([&] { return gauss(rng); });
    transition[k].to = vec([&] { return gauss(rng); });
    out.taxonomy.set("transition_" + std::to_string(k), ActivityType::kTransition);
  }

  std::vector<SubjectTraits> traits(spec.subjects);
  for (auto& t : traits) {
    t.gain = vec([&] { return uniform(0.8, 1.2); });
    t.offset = vec([&] { return uniform(-0.3, 0.3); });
    t.tempo = uniform(0.9, 1.1);
    t.idle_frequency = uniform(0.5, 2.0);
  }

  const double dt = 1.0 / spec.sample_rate;
  const std::size_t length = spec.recording_length;
  for (std::size_t subject = 0; subject < spec.subjects; ++subject) {
    const SubjectTraits& trait = traits[subject];
    auto emit = [&](const std::string& activity, std::size_t rec_index, auto&& clean) {
      Recording rec;
      rec.subject_id = static_cast<std::int64_t>(subject + 1);
      rec.recording_id = activity + "_" + std::to_string(rec_index);
      rec.activity = activity;
      rec.sample_rate = spec.sample_rate;
      rec.channel_names = names;
      rec.channels.assign(s, std::vector<double>(length));
      const double phase_shift = uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t c = 0; c < s; ++c) {
        for (std::size_t i = 0; i < length; ++i) {
          const double time = static_cast<double>(i) * dt;
          const double base =
              informative[c]
                  ? clean(c, i, time, phase_shift)
                  : 0.5 * std::sin(2.0 * std::numbers::pi * trait.idle_frequency * time +
                                   phase_shift + static_cast<double>(c));
          rec.channels[c][i] = trait.gain[c] * base + trait.offset[c] + spec.noise * gauss(rng);
        }
      }
      out.recordings.push_back(std::move(rec));
    };

    for (std::size_t k = 0; k < periodic.size(); ++k) {
      const auto& p = periodic[k];
      for (std::size_t r = 0; r < spec.recordings_per_class; ++r) {
        const double freq = p.frequency * trait.tempo * uniform(0.95, 1.05);
        emit("periodic_" + std::to_string(k), r,
             [&](std::size_t c, std::size_t, double time, double shift) {
               const double w = 2.0 * std::numbers::pi * freq * time + p.phase[c] + shift;
               return p.level[c] + p.amplitude[c] * std::sin(w) + p.harmonic[c] * std::sin(2.0 * w);
             });
      }
    }
    for (std::size_t k = 0; k < stable.size(); ++k) {
      for (std::size_t r = 0; r < spec.recordings_per_class; ++r) {
        emit("stable_" + std::to_string(k), r,
             [&](std::size_t c, std::size_t, double, double) { return stable[k].from[c]; });
      }
    }
    for (std::size_t k = 0; k < transition.size(); ++k) {
      for (std::size_t r = 0; r < spec.recordings_per_class; ++r) {
        const double hold = static_cast<double>(length) * uniform(0.2, 0.3);
        const double ramp = static_cast<double>(length) * uniform(0.4, 0.5) * trait.tempo;
        emit("transition_" + std::to_string(k), r,
             [&](std::size_t c, std::size_t i, double, double) {
               const double x = smoothstep((static_cast<double>(i) - hold) / ramp);
               return transition[k].from[c] + (transition[k].to[c] - transition[k].from[c]) * x;
             });
      }
    }
  }
  return out;
}

}  // namespace shlb
