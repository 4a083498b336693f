// shlb: synthetic/canonical HAR data -> SSL and supervised training -> occlusion,
// saliency and probing analyses. Every command reads the same config and writes
// only under --out.

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "shlb/checkpoint.h"
#include "shlb/config.h"
#include "shlb/csv.h"
#include "shlb/data.h"
#include "shlb/error.h"
#include "shlb/occlusion.h"
#include "shlb/probing.h"
#include "shlb/random.h"
#include "shlb/report.h"
#include "shlb/saliency.h"
#include "shlb/training.h"

namespace fs = std::filesystem;
using namespace shlb;

namespace {

struct CommonFlags {
  std::string config;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct Flags {
  CommonFlags common;
  std::string method;
  std::string mode = "random";
  std::string k;
  std::optional<std::size_t> seeds;
  std::string task = "all";
  std::string device;
  std::string input;
  std::string taxonomy;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run config");
  cmd->add_option("--profile", f.profile, "mobiact | ucihar | desk");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--out", f.out, "output directory");
}

nlohmann::json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// csv profiles need data.csv; when the config leaves it out, ingest's --input
// or a previously ingested <out>/data.csv stands in.
RunConfig resolve_config(const CommonFlags& f, const std::string& input) {
  const std::optional<std::string> profile =
      f.profile.empty() ? std::nullopt : std::optional<std::string>(f.profile);
  nlohmann::json doc = f.config.empty() ? nlohmann::json::object() : read_config(f.config);
  if (!f.out.empty() && doc.is_object()) doc["out"] = f.out;
  RunConfig cfg;
  try {
    cfg = RunConfig::from_json(doc, profile);
  } catch (const ConfigError&) {
    const bool has_csv = doc.is_object() && doc.contains("data") && doc["data"].is_object() &&
                         doc["data"].contains("csv");
    fs::path fallback = input;
    if (fallback.empty()) {
      const std::string out = f.out.empty() ? doc.value("out", RunConfig{}.out) : f.out;
      if (fs::exists(fs::path(out) / "data.csv")) fallback = fs::path(out) / "data.csv";
    }
    if (has_csv || fallback.empty() || !doc.is_object() ||
        (doc.contains("data") && !doc["data"].is_object())) {
      throw;
    }
    doc["data"]["csv"] = fallback.string();
    cfg = RunConfig::from_json(doc, profile);
  }
  if (f.seed) cfg.seed = *f.seed;
  return cfg;
}

// Exclusive lock on the output directory for the lifetime of a command.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".shlb.lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw Error("output directory " + dir.string() + " is locked by another command (" +
                  path_.string() + ")");
    }
  }
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

Taxonomy resolve_taxonomy(const std::string& spec) {
  if (spec == "mobiact") return Taxonomy::mobiact();
  if (spec == "ucihar") return Taxonomy::ucihar();
  return Taxonomy::read(spec);
}

IngestOptions ingest_options(const RunConfig& cfg) {
  return {cfg.data.channels, cfg.data.sample_rate};
}

struct Dataset {
  std::vector<Recording> recordings;
  Taxonomy taxonomy;
};

// out/data.csv (written by synth or ingest) wins; otherwise the configured source.
Dataset load_dataset(const RunConfig& cfg) {
  const fs::path out(cfg.out);
  if (fs::exists(out / "data.csv")) {
    if (!fs::exists(out / "taxonomy.csv")) throw Error("missing " + (out / "taxonomy.csv").string());
    return {ingest_csv(out / "data.csv", ingest_options(cfg)), Taxonomy::read(out / "taxonomy.csv")};
  }
  if (cfg.data.source == "synth") {
    auto synth = synthesize(cfg.data.synth);
    return {std::move(synth.recordings), std::move(synth.taxonomy)};
  }
  if (cfg.data.taxonomy.empty()) throw ConfigError("data.taxonomy is required for source=csv");
  return {ingest_csv(cfg.data.csv, ingest_options(cfg)), resolve_taxonomy(cfg.data.taxonomy)};
}

PreparedDataset prepare(const RunConfig& cfg) {
  const auto data = load_dataset(cfg);
  auto prepared = prepare_dataset(data.recordings, cfg.data.window_length, cfg.data.overlap,
                                  data.taxonomy, cfg.seed);
  if (prepared.windowing.skipped_recordings > 0) {
    std::cerr << fmt::format("warning: {} recordings shorter than one window were skipped\n",
                             prepared.windowing.skipped_recordings);
  }
  if (!prepared.stats.floored_channels.empty()) {
    std::cerr << fmt::format("warning: {} constant channels had their std floored\n",
                             prepared.stats.floored_channels.size());
  }
  if (prepared.test.empty()) throw Error("test split has no windows");
  return prepared;
}

fs::path encoder_path(const RunConfig& cfg, const std::string& fw) {
  return fs::path(cfg.out) / ("encoder_" + fw + ".ckpt");
}
fs::path model_path(const RunConfig& cfg, const std::string& fw) {
  return fs::path(cfg.out) / ("model_" + fw + ".ckpt");
}

void save_with_spec(const fs::path& path, Model<float>& model) {
  save_model(path, model);
  fs::path sidecar = path;
  sidecar += ".json";
  std::ofstream(sidecar) << nlohmann::json{{"model", to_json(model.spec())},
                                           {"encoder_frozen", model.encoder_frozen()}}
                                .dump(2)
                         << "\n";
}

Model<float> load_with_spec(const fs::path& path, const PreparedDataset& data) {
  if (!fs::exists(path)) throw Error("missing checkpoint " + path.string());
  fs::path sidecar = path;
  sidecar += ".json";
  std::ifstream in(sidecar);
  if (!in) throw Error("missing checkpoint metadata " + sidecar.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(sidecar.string(), 0, e.what());
  }
  const ModelSpec spec = model_spec_from_json(doc.at("model"));
  if (spec.window_length != data.train.window_length || spec.channels != data.train.channels ||
      spec.num_classes != data.train.activities.size()) {
    throw Error(fmt::format(
        "dataset/profile mismatch: checkpoint {} expects T={} S={} classes={}, data has "
        "T={} S={} classes={}",
        path.string(), spec.window_length, spec.channels, spec.num_classes,
        data.train.window_length, data.train.channels, data.train.activities.size()));
  }
  Model<float> model(spec, 0);
  load_model(path, model);
  if (doc.value("encoder_frozen", false)) model.set_encoder_frozen(true);
  return model;
}

std::vector<std::string> selected_frameworks(const RunConfig& cfg, const std::string& method) {
  if (method.empty() || method == "all") return cfg.frameworks;
  parse_framework(method);
  return {method};
}

// Frameworks with a trained classifier checkpoint; an explicit --method must exist.
std::vector<std::string> trained_frameworks(const RunConfig& cfg, const std::string& method) {
  std::vector<std::string> out;
  for (const auto& fw : selected_frameworks(cfg, method)) {
    if (fs::exists(model_path(cfg, fw))) {
      out.push_back(fw);
    } else if (!method.empty() && method != "all") {
      throw Error("missing checkpoint " + model_path(cfg, fw).string());
    }
  }
  if (out.empty()) throw Error("no trained models under " + cfg.out + " (run train/finetune first)");
  return out;
}

std::vector<std::size_t> parse_k(const std::string& text) {
  std::vector<std::size_t> out;
  const auto dots = text.find("..");
  try {
    if (dots != std::string::npos) {
      const auto lo = std::stoul(text.substr(0, dots));
      const auto hi = std::stoul(text.substr(dots + 2));
      if (lo > hi) throw Error("bad --k range '" + text + "'");
      for (auto k = lo; k <= hi; ++k) out.push_back(k);
    } else {
      std::stringstream ss(text);
      std::string part;
      while (std::getline(ss, part, ',')) out.push_back(std::stoul(part));
    }
  } catch (const std::logic_error&) {
    throw Error("bad --k value '" + text + "' (use 1..5 or 1,2,3)");
  }
  if (out.empty()) throw Error("bad --k value '" + text + "'");
  return out;
}

std::string pct(double v) { return fmt::format("{:.2f}", 100.0 * v); }

// Replaces the rows of `table` whose `column` equals `value` with `fresh`.
void merge_rows(const fs::path& path, CsvTable fresh, std::size_t column,
                const std::vector<std::string>& values) {
  if (fs::exists(path)) {
    const CsvTable old = read_csv_file(path);
    if (old.header == fresh.header) {
      // fresh rows take the place of the block they replace, so reruns keep the order
      CsvTable merged;
      merged.header = fresh.header;
      bool placed = false;
      for (const auto& row : old.rows) {
        if (std::find(values.begin(), values.end(), row[column]) == values.end()) {
          merged.rows.push_back(row);
        } else if (!placed) {
          for (const auto& f : fresh.rows) merged.rows.push_back(f);
          placed = true;
        }
      }
      if (!placed) {
        for (const auto& f : fresh.rows) merged.rows.push_back(f);
      }
      fresh = std::move(merged);
    }
  }
  write_csv_file(path, fresh);
}

// --- commands ---------------------------------------------------------------

void cmd_synth(const RunConfig& cfg) {
  const auto synth = synthesize(cfg.data.synth);
  write_recordings_csv(fs::path(cfg.out) / "data.csv", synth.recordings);
  synth.taxonomy.write(fs::path(cfg.out) / "taxonomy.csv");
  std::cout << fmt::format("synth: {} recordings, {} activities -> {}\n", synth.recordings.size(),
                           synth.taxonomy.entries().size(), cfg.out);
}

void cmd_ingest(const RunConfig& cfg, const Flags& flags) {
  const std::string input = flags.input.empty() ? cfg.data.csv : flags.input;
  if (input.empty()) throw ConfigError("ingest needs --input or data.csv");
  const std::string tax = flags.taxonomy.empty() ? cfg.data.taxonomy : flags.taxonomy;
  if (tax.empty()) throw ConfigError("ingest needs --taxonomy or data.taxonomy");
  const auto recordings = ingest_csv(input, ingest_options(cfg));
  const auto taxonomy = resolve_taxonomy(tax);
  for (const auto& r : recordings) taxonomy.at(r.activity);
  write_recordings_csv(fs::path(cfg.out) / "data.csv", recordings);
  taxonomy.write(fs::path(cfg.out) / "taxonomy.csv");
  std::cout << fmt::format("ingest: {} recordings -> {}\n", recordings.size(), cfg.out);
}

void cmd_pretrain(const RunConfig& cfg, const Flags& flags) {
  const auto framework = parse_framework(flags.method.empty() ? "simclr" : flags.method);
  if (framework == Framework::kSupervised) throw Error("pretrain --method must be simclr or vicreg");
  const auto data = prepare(cfg);
  const auto pipeline = cfg.pipeline();
  const auto routine = framework == Framework::kSimClr ? Routine::kSimClr : Routine::kVicReg;
  const auto& base = framework == Framework::kSimClr ? pipeline.simclr : pipeline.vicreg;
  Model<float> model(fit_spec(pipeline.model, data.train), cfg.seed);
  const auto history = pretrain_ssl(model, strip_labels(data.train), seeded(base, routine, cfg.seed));
  const std::string fw(to_string(framework));
  save_with_spec(encoder_path(cfg, fw), model);
  write_history_csv(fs::path(cfg.out) / ("history_" + fw + "_pretrain.csv"), history);
  std::cout << fmt::format("pretrain {}: {} epochs, final loss {:.4f}\n", fw, history.size(),
                           history.back().loss);
}

void cmd_train(const RunConfig& cfg) {
  const auto data = prepare(cfg);
  const auto pipeline = cfg.pipeline();
  Model<float> model(fit_spec(pipeline.model, data.train), cfg.seed);
  const auto history =
      train_supervised(model, data.train, data.validation.empty() ? nullptr : &data.validation,
                       seeded(pipeline.supervised, Routine::kSupervised, cfg.seed));
  save_with_spec(model_path(cfg, "supervised"), model);
  write_history_csv(fs::path(cfg.out) / "history_supervised_train.csv", history);
  const auto test = evaluate(model, data.test);
  std::cout << fmt::format("train supervised: {} epochs, test macro-F1 {}\n", history.size(),
                           pct(test.macro_f1));
}

void cmd_finetune(const RunConfig& cfg, const Flags& flags) {
  std::vector<std::string> methods;
  if (flags.method.empty() || flags.method == "all") {
    for (const auto& fw : cfg.frameworks) {
      if (fw != "supervised" && fs::exists(encoder_path(cfg, fw))) methods.push_back(fw);
    }
    if (methods.empty()) throw Error("missing checkpoint: no pretrained encoder under " + cfg.out);
  } else {
    if (parse_framework(flags.method) == Framework::kSupervised) {
      throw Error("finetune --method must be simclr or vicreg");
    }
    methods.push_back(flags.method);
  }
  const auto data = prepare(cfg);
  const auto pipeline = cfg.pipeline();
  for (const auto& fw : methods) {
    auto model = load_with_spec(encoder_path(cfg, fw), data);
    model.set_encoder_frozen(true);
    const auto history =
        finetune_linear(model, data.train, data.validation.empty() ? nullptr : &data.validation,
                        seeded(pipeline.finetune, Routine::kFinetune, cfg.seed));
    save_with_spec(model_path(cfg, fw), model);
    write_history_csv(fs::path(cfg.out) / ("history_" + fw + "_finetune.csv"), history);
    const auto test = evaluate(model, data.test);
    std::cout << fmt::format("finetune {}: {} epochs, test macro-F1 {}\n", fw, history.size(),
                             pct(test.macro_f1));
  }
}

void cmd_evaluate(const RunConfig& cfg, const Flags& flags) {
  const auto data = prepare(cfg);
  CsvTable summary;
  summary.header = {"framework", "split", "macro_f1"};
  CsvTable recall;
  recall.header = {"framework", "activity", "recall"};
  for (const auto& fw : trained_frameworks(cfg, flags.method)) {
    auto model = load_with_spec(model_path(cfg, fw), data);
    for (const auto& [split, set] : {std::pair<const char*, const WindowSet*>{"validation", &data.validation},
                                     {"test", &data.test}}) {
      if (set->empty()) continue;
      const auto e = evaluate(model, *set);
      summary.add_row({fw, split, format_double(e.macro_f1)});
      if (std::string(split) == "test") {
        for (std::size_t c = 0; c < e.recall.size(); ++c) {
          if (e.recall[c]) recall.add_row({fw, data.test.activities[c], format_double(*e.recall[c])});
        }
        std::cout << fmt::format("evaluate {}: test macro-F1 {}\n", fw, pct(e.macro_f1));
      }
    }
  }
  write_csv_file(fs::path(cfg.out) / "evaluation.csv", summary);
  write_csv_file(fs::path(cfg.out) / "per_class_recall.csv", recall);
}

void cmd_occlude(const RunConfig& cfg, const Flags& flags) {
  const auto data = prepare(cfg);
  const NoiseSpec noise{cfg.occlusion.noise_mean, cfg.occlusion.noise_std};
  const fs::path out(cfg.out);
  CsvTable summary = occlusion_summary_table();

  if (flags.mode == "random") {
    RandomOcclusionSpec spec;
    spec.k_values = flags.k.empty() ? cfg.occlusion.k_values : parse_k(flags.k);
    spec.seeds = flags.seeds.value_or(cfg.occlusion.seeds);
    spec.seed = derive_seed(cfg.seed, {0x0cc1});
    spec.noise = noise;
    std::vector<RandomOcclusionResult> results;
    for (const auto& fw : trained_frameworks(cfg, flags.method)) {
      auto model = load_with_spec(model_path(cfg, fw), data);
      results.push_back(run_random_test_occlusion(model, parse_framework(fw), data.test, spec));
      append_summary(summary, results.back());
      const auto& r = results.back();
      std::string line = fmt::format("occlude {} random: k=0 {}", fw, pct(r.clean_macro_f1));
      for (std::size_t i = 0; i < r.k_values.size(); ++i) {
        line += fmt::format(", k={} {}±{}", r.k_values[i], pct(r.ci[i].mean), pct(r.ci[i].margin));
      }
      std::cout << line << "\n";
    }
    merge_rows(out / "occlusion_summary.csv", summary, 1, {"random"});
    write_csv_file(out / "drop_table.csv", drop_table(results));
    write_csv_file(out / "recall_table.csv", recall_table(results));
    write_csv_file(out / "occlusion_ci.csv", occlusion_ci_table(results));
  } else if (flags.mode == "device") {
    const auto groups = default_channel_groups(data.train.channel_names);
    const std::vector<std::string> devices =
        flags.device.empty() ? cfg.occlusion.devices : std::vector<std::string>{flags.device};
    for (const auto& d : devices) {
      if (d != "none" && !groups.count(d)) throw Error("unknown device '" + d + "'");
    }
    for (const auto& fw : selected_frameworks(cfg, flags.method)) {
      std::optional<double> baseline;  // same clean model for every device
      for (const auto& d : devices) {
        const auto target = d == "none" ? std::nullopt : std::optional<std::string>(d);
        const auto r = run_device_occlusion(data, parse_framework(fw), target, groups,
                                            cfg.pipeline(), cfg.seed, noise, baseline);
        baseline = r.baseline_macro_f1;
        append_summary(summary, r, cfg.seed);
        std::cout << fmt::format("occlude {} device {}: clean {} occluded {}\n", fw, r.target,
                                 pct(r.baseline_macro_f1), pct(r.macro_f1));
      }
    }
    merge_rows(out / "occlusion_summary.csv", summary, 1, {"device"});
  } else {
    throw Error("--mode must be random or device");
  }
}

void cmd_saliency(const RunConfig& cfg, const Flags& flags) {
  const auto data = prepare(cfg);
  const fs::path out(cfg.out);
  std::vector<GlobalAttribution> results;
  for (const auto& fw : trained_frameworks(cfg, flags.method)) {
    auto model = load_with_spec(model_path(cfg, fw), data);
    results.push_back(global_attributions(model, data.test, fw));
    const auto& g = results.back();
    for (const auto& name : g.omitted_activities) {
      std::cerr << fmt::format("warning: {}: no correctly classified '{}' window\n", fw, name);
    }
    if (g.uniform_fallbacks > 0) {
      std::cerr << fmt::format("warning: {}: {} all-zero attribution maps\n", fw, g.uniform_fallbacks);
    }
    const std::size_t local = std::min(cfg.saliency.local_windows, data.test.size());
    for (std::size_t i = 0; i < local; ++i) {
      const auto& w = data.test.windows[i];
      Tensor<float> x({data.test.window_length, data.test.channels},
                      std::vector<float>(w.values.begin(), w.values.end()));
      const auto map = guided_gradcam(model, x, w.activity);
      write_csv_file(out / fmt::format("local_attr_{}_{}.csv", fw, i),
                     local_attribution_table(map, data.test.channel_names));
    }
    if (cfg.saliency.svg) write_heatmap_svg(out / ("heatmap_" + fw + ".svg"), g);
    for (const auto& a : g.activities) {
      std::cout << fmt::format("saliency {} {}: H={:.2f} bits over {} windows\n", fw, a.name,
                               a.entropy_bits, a.windows);
    }
  }
  write_csv_file(out / "global_heatmap.csv", global_heatmap_table(results));
  write_csv_file(out / "entropy.csv", entropy_table(results));
}

void cmd_probe(const RunConfig& cfg, const Flags& flags) {
  const bool subject = flags.task == "all" || flags.task == "subject";
  const bool activity = flags.task == "all" || flags.task == "activity-type";
  if (!subject && !activity) throw Error("--task must be subject, activity-type or all");
  const auto data = prepare(cfg);
  CsvTable results = probe_results_table();
  CsvTable summary = probe_summary_table();
  const std::uint64_t seed = derive_seed(cfg.seed, {0x9b0be});
  for (const auto& fw : trained_frameworks(cfg, flags.method)) {
    auto model = load_with_spec(model_path(cfg, fw), data);
    const WindowSet* sets[] = {&data.train, &data.validation, &data.test};
    const auto features = extract_features(model, std::span<const WindowSet* const>(sets));
    std::vector<ProbeResult> probes;
    if (subject) probes.push_back(probe_subject_heterogeneity(features, cfg.probe, seed));
    if (activity) probes.push_back(probe_activity_type(features, cfg.probe, seed));
    for (const auto& p : probes) {
      append_probe_results(results, p, fw);
      append_probe_summary(summary, p, fw);
      for (const auto& e : p.entries) {
        if (!e.note.empty()) std::cerr << fmt::format("{} {} {}: {}\n", fw, p.task, e.label, e.note);
      }
      std::cout << fmt::format("probe {} {}: {}±{}\n", fw, p.task,
                               p.mean ? pct(*p.mean) : "n/a",
                               p.ci_margin ? pct(*p.ci_margin) : "n/a");
    }
  }
  write_csv_file(fs::path(cfg.out) / "probe_results.csv", results);
  write_csv_file(fs::path(cfg.out) / "probe_summary.csv", summary);
}

void cmd_report(const RunConfig& cfg) {
  const auto sections = collect_sections(cfg.out);
  const auto report = assemble_report(cfg.to_json(), {cfg.seed}, sections);
  std::ofstream(fs::path(cfg.out) / "report.json") << emit_report(report);
  std::cout << fmt::format("report: {} sections, fingerprint {} -> {}\n", sections.size(),
                           report.fingerprint, (fs::path(cfg.out) / "report.json").string());
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shlb: self-supervised HAR workbench"};
  app.require_subcommand(1);
  Flags flags;

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"synth", "generate the synthetic dataset into --out"},
      {"ingest", "validate a canonical CSV and copy it into --out"},
      {"pretrain", "SSL pre-training of encoder + projection"},
      {"train", "supervised end-to-end training"},
      {"finetune", "linear classifier on a frozen pretrained encoder"},
      {"evaluate", "macro-F1 and per-class recall of trained models"},
      {"occlude", "device or random test-time occlusion experiments"},
      {"saliency", "Guided Grad-CAM local and global attributions"},
      {"probe", "subject and activity-type linear probes"},
      {"report", "merge run outputs into report.json"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, flags.common);
    subs[c.name] = sub;
  }
  subs["ingest"]->add_option("--input", flags.input, "canonical CSV to ingest");
  subs["ingest"]->add_option("--taxonomy", flags.taxonomy, "mobiact | ucihar | taxonomy CSV");
  subs["pretrain"]->add_option("--method", flags.method, "simclr | vicreg")->required();
  subs["finetune"]->add_option("--method", flags.method, "simclr | vicreg | all");
  for (const char* name : {"evaluate", "occlude", "saliency", "probe"}) {
    subs[name]->add_option("--method", flags.method, "supervised | simclr | vicreg | all");
  }
  subs["occlude"]->add_option("--mode", flags.mode, "random | device")->capture_default_str();
  subs["occlude"]->add_option("--k", flags.k, "masked channel counts, e.g. 1..5 or 1,3");
  subs["occlude"]->add_option("--seeds", flags.seeds, "repetitions per k");
  subs["occlude"]->add_option("--device", flags.device, "accelerometer | gyroscope | none");
  subs["probe"]->add_option("--task", flags.task, "subject | activity-type | all")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig cfg = resolve_config(flags.common, flags.input);
    DirLock lock(cfg.out);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "synth") cmd_synth(cfg);
    else if (name == "ingest") cmd_ingest(cfg, flags);
    else if (name == "pretrain") cmd_pretrain(cfg, flags);
    else if (name == "train") cmd_train(cfg);
    else if (name == "finetune") cmd_finetune(cfg, flags);
    else if (name == "evaluate") cmd_evaluate(cfg, flags);
    else if (name == "occlude") cmd_occlude(cfg, flags);
    else if (name == "saliency") cmd_saliency(cfg, flags);
    else if (name == "probe") cmd_probe(cfg, flags);
    else if (name == "report") cmd_report(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
