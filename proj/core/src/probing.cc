#include "shlb/probing.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "shlb/error.h"
#include "shlb/losses.h"
#include "shlb/metrics.h"
#include "shlb/optimizer.h"
#include "shlb/random.h"
#include "shlb/training.h"

namespace shlb {
namespace {

constexpr ActivityType kGroupOrder[] = {ActivityType::kPeriodic, ActivityType::kStable,
                                        ActivityType::kTransition};

ProbeResult summarize(std::string task, std::vector<ProbeEntry> entries) {
  ProbeResult r{std::move(task), std::move(entries), std::nullopt, std::nullopt};
  std::vector<double> scores;
  for (const auto& e : r.entries) {
    if (e.macro_f1) scores.push_back(*e.macro_f1);
  }
  if (scores.empty()) return r;
  if (scores.size() >= 2) {
    const auto ci = t_confidence_interval(scores);
    r.mean = ci.mean;
    r.ci_margin = ci.margin;
  } else {
    r.mean = scores.front();
  }
  return r;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

template <typename Scalar>
FeatureTable extract_features(Model<Scalar>& model, std::span<const WindowSet* const> sets) {
  FeatureTable out;
  out.dim = model.representation_dim();
  for (const WindowSet* set : sets) {
    if (out.activity_names.empty()) {
      out.activity_names = set->activities;
    } else if (set->activities != out.activity_names) {
      throw InvalidArgument("extract_features: window sets disagree on activity labels");
    }
    if (set->empty()) continue;
    const auto f = encode(model, *set);
    out.values.insert(out.values.end(), f.values().begin(), f.values().end());
    for (const auto& w : set->windows) {
      out.subjects.push_back(w.subject_id);
      out.activities.push_back(w.activity);
      out.types.push_back(w.activity_type);
    }
  }
  return out;
}

std::vector<std::size_t> train_probe(const FeatureTable& features,
                                     std::span<const std::size_t> train,
                                     std::span<const std::size_t> train_labels,
                                     std::size_t classes, std::span<const std::size_t> test,
                                     const ProbeConfig& config, std::uint64_t seed) {
  if (train.empty()) throw InvalidArgument("probe: empty training set");
  if (train.size() != train_labels.size()) throw InvalidArgument("probe: label count mismatch");
  if (config.batch_size == 0 || config.epochs == 0) {
    throw InvalidArgument("probe: epochs and batch size must be >= 1");
  }
  const std::size_t d = features.dim;
  Sequential<double> probe("probe");
  probe.add(LayerSpec::linear(d, classes));
  probe.add(LayerSpec::of(LayerKind::kSoftmax));
  const auto params = probe.parameters();
  for (const auto& p : params) p.param->value.fill(0.0);
  Optimizer<double> optimizer({OptimizerKind::kAdam, config.learning_rate});

  auto gather = [&](std::span<const std::size_t> rows) {
    Tensor<double> x({rows.size(), d});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto src = features.row(rows[r]);
      std::copy(src.begin(), src.end(), x.data() + r * d);
    }
    return x;
  };

  std::vector<std::size_t> order(train.size());
  std::vector<std::size_t> rows, labels;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, {epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      rows.clear();
      labels.clear();
      for (std::size_t i = begin; i < end; ++i) {
        rows.push_back(train[order[i]]);
        labels.push_back(train_labels[order[i]]);
      }
      for (const auto& p : params) p.param->value.zero_grad();
      const auto probs = probe.forward(gather(rows));
      const auto ce = cross_entropy(probs, labels);
      probe.backward(ce.grad, {});
      optimizer.step(params);
    }
  }

  std::vector<std::size_t> predictions;
  predictions.reserve(test.size());
  for (std::size_t begin = 0; begin < test.size(); begin += 1024) {
    const auto chunk = test.subspan(begin, std::min<std::size_t>(1024, test.size() - begin));
    const auto probs = probe.forward(gather(chunk));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const double* row = probs.data() + i * classes;
      predictions.push_back(static_cast<std::size_t>(std::max_element(row, row + classes) - row));
    }
  }
  return predictions;
}

std::vector<std::size_t> subject_folds(std::span<const std::int64_t> subjects, std::size_t folds,
                                       std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("need at least 2 folds");
  std::map<std::int64_t, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < subjects.size(); ++i) by_subject[subjects[i]].push_back(i);
  std::mt19937_64 rng(derive_seed(seed, {0xf01d}));
  std::vector<std::size_t> fold(subjects.size());
  std::size_t next = 0;
  for (auto& [subject, rows] : by_subject) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (auto r : rows) fold[r] = next++ % folds;
  }
  return fold;
}

std::vector<std::vector<std::string>> activity_type_combinations(const Taxonomy& taxonomy) {
  std::vector<std::vector<std::string>> groups;
  for (auto type : kGroupOrder) {
    std::vector<std::string> members;
    for (const auto& [activity, t] : taxonomy.entries()) {
      if (t == type) members.push_back(activity);
    }
    if (!members.empty()) groups.push_back(std::move(members));
  }
  std::vector<std::vector<std::string>> combos{{}};
  for (const auto& g : groups) {
    std::vector<std::vector<std::string>> next;
    for (const auto& c : combos) {
      for (const auto& a : g) {
        auto extended = c;
        extended.push_back(a);
        next.push_back(std::move(extended));
      }
    }
    combos = std::move(next);
  }
  if (groups.empty()) combos.clear();
  return combos;
}

std::vector<ActivityTypeRun> activity_type_plan(const FeatureTable& features) {
  Taxonomy present;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& name = features.activity_names.at(features.activities[i]);
    present.set(name, features.types[i]);
    index[name] = features.activities[i];
  }
  std::vector<ActivityTypeRun> runs;
  for (const auto& combo : activity_type_combinations(present)) {
    ActivityTypeRun run;
    for (const auto& name : combo) run.held_out.push_back(index.at(name));
    const std::set<std::size_t> held(run.held_out.begin(), run.held_out.end());
    for (std::size_t i = 0; i < features.size(); ++i) {
      (held.count(features.activities[i]) ? run.test : run.train).push_back(i);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

ProbeResult probe_subject_heterogeneity(const FeatureTable& features, const ProbeConfig& config,
                                        std::uint64_t seed) {
  std::map<std::int64_t, std::size_t> subject_index;
  for (auto s : features.subjects) subject_index.emplace(s, 0);
  if (subject_index.size() < 2) throw InvalidArgument("subject probe needs at least 2 subjects");
  std::size_t next = 0;
  for (auto& [s, idx] : subject_index) idx = next++;
  const std::size_t classes = subject_index.size();

  const auto fold = subject_folds(features.subjects, config.folds, seed);
  std::vector<ProbeEntry> entries;
  for (std::size_t f = 0; f < config.folds; ++f) {
    std::vector<std::size_t> train, train_labels, test, test_labels;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const auto label = subject_index.at(features.subjects[i]);
      if (fold[i] == f) {
        test.push_back(i);
        test_labels.push_back(label);
      } else {
        train.push_back(i);
        train_labels.push_back(label);
      }
    }
    ProbeEntry entry{"fold" + std::to_string(f), std::nullopt, ""};
    if (train.empty() || test.empty()) {
      entry.note = "empty fold";
    } else {
      const auto pred = train_probe(features, train, train_labels, classes, test, config,
                                    derive_seed(seed, {f}));
      entry.macro_f1 = macro_f1(ConfusionMatrix::from(test_labels, pred, classes));
    }
    entries.push_back(std::move(entry));
  }
  return summarize("subject-heterogeneity", std::move(entries));
}

ProbeResult probe_activity_type(const FeatureTable& features, const ProbeConfig& config,
                                std::uint64_t seed) {
  std::map<ActivityType, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < features.size(); ++i) {
    groups[features.types[i]].insert(features.activities[i]);
  }
  std::map<ActivityType, std::size_t> type_index;
  for (auto type : kGroupOrder) {
    if (groups.count(type)) type_index.emplace(type, type_index.size());
  }
  const std::size_t classes = type_index.size();

  std::vector<ProbeEntry> entries;
  std::size_t run_id = 0;
  for (const auto& run : activity_type_plan(features)) {
    std::vector<std::string> names;
    for (auto a : run.held_out) names.push_back(features.activity_names.at(a));
    ProbeEntry entry{join(names, '+'), std::nullopt, ""};
    std::vector<std::size_t> train_labels, test_labels;
    std::set<std::size_t> seen;
    for (auto i : run.train) {
      train_labels.push_back(type_index.at(features.types[i]));
      seen.insert(train_labels.back());
    }
    for (auto i : run.test) test_labels.push_back(type_index.at(features.types[i]));
    if (run.train.empty()) {
      entry.note = "error: empty training set";
    } else {
      if (seen.size() < classes) entry.note = "warning: a type has no training windows";
      const auto pred = train_probe(features, run.train, train_labels, classes, run.test, config,
                                    derive_seed(seed, {run_id}));
      entry.macro_f1 = macro_f1(ConfusionMatrix::from(test_labels, pred, classes));
    }
    entries.push_back(std::move(entry));
    ++run_id;
  }
  return summarize("activity-type", std::move(entries));
}

CsvTable probe_results_table() {
  CsvTable t;
  t.header = {"task", "framework", "fold_or_combo", "macro_f1"};
  return t;
}

void append_probe_results(CsvTable& table, const ProbeResult& result,
                          const std::string& framework) {
  for (const auto& e : result.entries) {
    table.add_row({result.task, framework, e.label, e.macro_f1 ? format_double(*e.macro_f1) : ""});
  }
}

CsvTable probe_summary_table() {
  CsvTable t;
  t.header = {"task", "framework", "mean", "ci_margin"};
  return t;
}

void append_probe_summary(CsvTable& table, const ProbeResult& result,
                          const std::string& framework) {
  table.add_row({result.task, framework, result.mean ? format_double(*result.mean) : "",
                 result.ci_margin ? format_double(*result.ci_margin) : ""});
}

template FeatureTable extract_features(Model<float>&, std::span<const WindowSet* const>);
template FeatureTable extract_features(Model<double>&, std::span<const WindowSet* const>);

}  // namespace shlb
