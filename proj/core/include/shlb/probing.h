#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shlb/csv.h"
#include "shlb/data.h"
#include "shlb/model.h"

namespace shlb {

struct FeatureTable {
  std::size_t dim = 0;
  std::vector<double> values;  // [N, D]
  std::vector<std::int64_t> subjects;
  std::vector<std::size_t> activities;
  std::vector<ActivityType> types;
  std::vector<std::string> activity_names;

  std::size_t size() const { return subjects.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }

  bool operator==(const FeatureTable&) const = default;
};

// Encoder output for every window of every set, in order. All sets must share
// the activity list.
template <typename Scalar>
FeatureTable extract_features(Model<Scalar>& model, std::span<const WindowSet* const> sets);

struct ProbeConfig {
  std::size_t epochs = 10;
  double learning_rate = 1e-4;
  std::size_t batch_size = 128;
  std::size_t folds = 5;

  bool operator==(const ProbeConfig&) const = default;
};

// Zero-initialized linear softmax probe trained with Adam on rows `train`;
// returns argmax predictions for rows `test`.
std::vector<std::size_t> train_probe(const FeatureTable& features,
                                     std::span<const std::size_t> train,
                                     std::span<const std::size_t> train_labels,
                                     std::size_t classes, std::span<const std::size_t> test,
                                     const ProbeConfig& config, std::uint64_t seed);

// Fold id per row: rows are shuffled within each subject and dealt round-robin
// (continuing across subjects), so every fold sees every subject when it has
// enough windows.
std::vector<std::size_t> subject_folds(std::span<const std::int64_t> subjects, std::size_t folds,
                                       std::uint64_t seed);

// Cartesian product over the present groups (periodic, stable, transition
// order) of one held-out activity per group.
std::vector<std::vector<std::string>> activity_type_combinations(const Taxonomy& taxonomy);

struct ActivityTypeRun {
  std::vector<std::size_t> held_out;  // activity indices
  std::vector<std::size_t> train, test;
};

std::vector<ActivityTypeRun> activity_type_plan(const FeatureTable& features);

struct ProbeEntry {
  std::string label;  // fold or held-out combination
  std::optional<double> macro_f1;
  std::string note;  // warning or error for this run
};

struct ProbeResult {
  std::string task;
  std::vector<ProbeEntry> entries;
  std::optional<double> mean;       // over scored entries
  std::optional<double> ci_margin;  // needs two scored entries
};

// Throws InvalidArgument for fewer than 2 subjects.
ProbeResult probe_subject_heterogeneity(const FeatureTable& features, const ProbeConfig& config,
                                        std::uint64_t seed);
// A run whose training set is empty is reported with an error note and no score.
ProbeResult probe_activity_type(const FeatureTable& features, const ProbeConfig& config,
                                std::uint64_t seed);

// task,framework,fold_or_combo,macro_f1
CsvTable probe_results_table();
void append_probe_results(CsvTable& table, const ProbeResult& result, const std::string& framework);
// task,framework,mean,ci_margin
CsvTable probe_summary_table();
void append_probe_summary(CsvTable& table, const ProbeResult& result, const std::string& framework);

}  // namespace shlb
