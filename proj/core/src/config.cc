#include "shlb/config.h"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "shlb/error.h"

namespace shlb {
namespace {

using nlohmann::json;

std::string key_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

bool same_kind(const json& base, const json& value) {
  if (base.is_boolean()) return value.is_boolean();
  if (base.is_string()) return value.is_string();
  if (base.is_number_unsigned()) return value.is_number_unsigned();
  if (base.is_number_integer()) return value.is_number_integer();
  if (base.is_number()) return value.is_number();
  if (base.is_array()) {
    if (!value.is_array()) return false;
    if (base.empty()) return true;
    for (const auto& v : value) {
      if (!same_kind(base.front(), v)) return false;
    }
    return true;
  }
  return base.type() == value.type();
}

void merge(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) {
    throw ConfigError(fmt::format("config key '{}' must be an object", path.empty() ? "<root>" : path));
  }
  for (const auto& [key, value] : user.items()) {
    const auto p = key_path(path, key);
    const auto it = base.find(key);
    if (it == base.end()) throw ConfigError(fmt::format("unknown config key '{}'", p));
    if (it->is_object()) {
      merge(*it, value, p);
    } else if (!same_kind(*it, value)) {
      throw ConfigError(fmt::format("config key '{}' has the wrong type (expected {} like {})", p,
                                    it->type_name(), it->dump()));
    } else {
      *it = value;
    }
  }
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "lars-adam"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "lars-adam") return OptimizerKind::kLarsAdam;
  throw ConfigError("unknown optimizer '" + s + "' (adam, lars-adam)");
}

Transform parse_transform(const std::string& s) {
  for (auto t : {Transform::kJitter, Transform::kScale, Transform::kRotation, Transform::kPermutation}) {
    if (shlb::to_string(t) == s) return t;
  }
  throw ConfigError("unknown augmentation '" + s + "'");
}

json augmentation_json(const AugmentationSpec& a) {
  json pool = json::array();
  for (auto t : a.pool) pool.push_back(std::string(to_string(t)));
  return {{"pool", pool},
          {"jitter_sigma", a.jitter_sigma},
          {"scale_sigma", a.scale_sigma},
          {"max_segments", a.max_segments},
          {"shared_rotation", a.shared_rotation}};
}

AugmentationSpec augmentation_from_json(const json& j) {
  AugmentationSpec a;
  a.pool.clear();
  for (const auto& t : j.at("pool")) a.pool.push_back(parse_transform(t.get<std::string>()));
  a.jitter_sigma = j.at("jitter_sigma").get<double>();
  a.scale_sigma = j.at("scale_sigma").get<double>();
  a.max_segments = j.at("max_segments").get<std::size_t>();
  a.shared_rotation = j.at("shared_rotation").get<bool>();
  return a;
}

json train_json(const TrainConfig& c) {
  json j = {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"log_every", c.log_every},
            {"seed", c.seed},
            {"optimizer",
             {{"kind", to_string(c.optimizer.kind)},
              {"learning_rate", c.optimizer.learning_rate},
              {"beta1", c.optimizer.beta1},
              {"beta2", c.optimizer.beta2},
              {"epsilon", c.optimizer.epsilon},
              {"trust_clip", c.optimizer.trust_clip}}}};
  if (c.routine == Routine::kSimClr || c.routine == Routine::kVicReg) {
    j["augmentation"] = augmentation_json(c.augmentation);
  }
  if (c.routine == Routine::kSimClr) j["temperature"] = c.simclr.temperature;
  if (c.routine == Routine::kVicReg) {
    j["lambda"] = c.vicreg.lambda;
    j["mu"] = c.vicreg.mu;
    j["nu"] = c.vicreg.nu;
    j["gamma"] = c.vicreg.gamma;
    j["epsilon"] = c.vicreg.epsilon;
  }
  return j;
}

TrainConfig train_from_json(const json& j, Routine routine) {
  TrainConfig c;
  c.routine = routine;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.log_every = j.at("log_every").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto& o = j.at("optimizer");
  c.optimizer.kind = parse_optimizer(o.at("kind").get<std::string>());
  c.optimizer.learning_rate = o.at("learning_rate").get<double>();
  c.optimizer.beta1 = o.at("beta1").get<double>();
  c.optimizer.beta2 = o.at("beta2").get<double>();
  c.optimizer.epsilon = o.at("epsilon").get<double>();
  c.optimizer.trust_clip = o.at("trust_clip").get<double>();
  if (routine == Routine::kSimClr || routine == Routine::kVicReg) {
    c.augmentation = augmentation_from_json(j.at("augmentation"));
  }
  if (routine == Routine::kSimClr) c.simclr.temperature = j.at("temperature").get<double>();
  if (routine == Routine::kVicReg) {
    c.vicreg.lambda = j.at("lambda").get<double>();
    c.vicreg.mu = j.at("mu").get<double>();
    c.vicreg.nu = j.at("nu").get<double>();
    c.vicreg.gamma = j.at("gamma").get<double>();
    c.vicreg.epsilon = j.at("epsilon").get<double>();
  }
  return c;
}

TrainConfig make_train(Routine routine, std::size_t epochs, std::size_t batch, OptimizerKind kind,
                       double lr) {
  TrainConfig c;
  c.routine = routine;
  c.epochs = epochs;
  c.batch_size = batch;
  c.optimizer.kind = kind;
  c.optimizer.learning_rate = lr;
  return c;
}

json synth_json(const SynthSpec& s) {
  return {{"subjects", s.subjects},
          {"periodic_classes", s.periodic_classes},
          {"stable_classes", s.stable_classes},
          {"transition_classes", s.transition_classes},
          {"recording_length", s.recording_length},
          {"recordings_per_class", s.recordings_per_class},
          {"channels", s.channels},
          {"sample_rate", s.sample_rate},
          {"noise", s.noise},
          {"informative_channels", s.informative_channels},
          {"seed", s.seed}};
}

SynthSpec synth_from_json(const json& j) {
  SynthSpec s;
  s.subjects = j.at("subjects").get<std::size_t>();
  s.periodic_classes = j.at("periodic_classes").get<std::size_t>();
  s.stable_classes = j.at("stable_classes").get<std::size_t>();
  s.transition_classes = j.at("transition_classes").get<std::size_t>();
  s.recording_length = j.at("recording_length").get<std::size_t>();
  s.recordings_per_class = j.at("recordings_per_class").get<std::size_t>();
  s.channels = j.at("channels").get<std::size_t>();
  s.sample_rate = j.at("sample_rate").get<double>();
  s.noise = j.at("noise").get<double>();
  s.informative_channels = j.at("informative_channels").get<std::vector<std::size_t>>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace

json to_json(const ModelSpec& m) {
  return {{"window_length", m.window_length},
          {"channels", m.channels},
          {"conv_channels", m.conv_channels},
          {"kernel_size", m.kernel_size},
          {"conv_relu", m.conv_relu},
          {"transformer_layers", m.transformer_layers},
          {"attention_heads", m.attention_heads},
          {"ff_multiplier", m.ff_multiplier},
          {"positional_encoding", m.positional_encoding},
          {"projection_hidden", m.projection_hidden},
          {"projection_out", m.projection_out},
          {"num_classes", m.num_classes}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec m;
  m.window_length = j.at("window_length").get<std::size_t>();
  m.channels = j.at("channels").get<std::size_t>();
  m.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
  m.kernel_size = j.at("kernel_size").get<std::size_t>();
  m.conv_relu = j.at("conv_relu").get<bool>();
  m.transformer_layers = j.at("transformer_layers").get<std::size_t>();
  m.attention_heads = j.at("attention_heads").get<std::size_t>();
  m.ff_multiplier = j.at("ff_multiplier").get<std::size_t>();
  m.positional_encoding = j.at("positional_encoding").get<bool>();
  m.projection_hidden = j.at("projection_hidden").get<std::size_t>();
  m.projection_out = j.at("projection_out").get<std::size_t>();
  m.num_classes = j.at("num_classes").get<std::size_t>();
  return m;
}

RunConfig RunConfig::for_profile(std::string_view name) {
  RunConfig c;
  c.profile = std::string(name);
  c.supervised = make_train(Routine::kSupervised, 10, 32, OptimizerKind::kAdam, 1e-3);
  c.simclr = make_train(Routine::kSimClr, 20, 32, OptimizerKind::kLarsAdam, 1e-3);
  c.vicreg = make_train(Routine::kVicReg, 20, 32, OptimizerKind::kLarsAdam, 1e-3);
  c.finetune = make_train(Routine::kFinetune, 10, 32, OptimizerKind::kAdam, 1e-3);
  c.simclr.simclr.temperature = 0.1;
  c.vicreg.vicreg = VicRegConfig{10.0, 10.0, 5.0, 1.0, 1e-4};
  c.simclr.augmentation = c.vicreg.augmentation = AugmentationSpec::mobiact();

  if (name == "desk") {
    c.model.conv_channels = {16, 32, 64};
    c.model.transformer_layers = 2;
    c.model.attention_heads = 4;
    c.model.projection_hidden = 64;
    c.model.projection_out = 16;
    c.model.num_classes = 7;
    // The synthetic classes live in per-axis levels, which a random rotation
    // scrambles; VICReg then collapses onto the invariance term.
    c.vicreg.augmentation.pool = {Transform::kJitter, Transform::kScale};
    return c;
  }
  const bool mobiact = name == "mobiact";
  if (!mobiact && name != "ucihar") {
    throw ConfigError("unknown profile '" + std::string(name) + "' (mobiact, ucihar, desk)");
  }
  const std::size_t batch = mobiact ? 256 : 128;
  c.data.source = "csv";
  c.data.taxonomy = std::string(name);
  c.model.conv_channels = mobiact ? std::vector<std::size_t>{64, 128, 256}
                                  : std::vector<std::size_t>{32, 64, 128};
  c.model.transformer_layers = mobiact ? 6 : 8;
  c.model.attention_heads = 8;
  c.model.projection_hidden = mobiact ? 512 : 256;
  c.model.projection_out = 256;
  c.model.num_classes = mobiact ? 11 : 6;
  c.supervised = make_train(Routine::kSupervised, 100, batch, OptimizerKind::kAdam, 1e-3);
  c.finetune = make_train(Routine::kFinetune, 100, batch, OptimizerKind::kAdam, 1e-3);
  for (TrainConfig* t : {&c.simclr, &c.vicreg}) {
    t->epochs = 200;
    t->batch_size = batch;
    t->optimizer.kind = OptimizerKind::kLarsAdam;
    t->optimizer.learning_rate = 1e-4;
  }
  c.simclr.augmentation = c.vicreg.augmentation =
      mobiact ? AugmentationSpec::mobiact() : AugmentationSpec::ucihar();
  return c;
}

json RunConfig::to_json() const {
  return {
      {"profile", profile},
      {"seed", seed},
      {"out", out},
      {"frameworks", frameworks},
      {"data",
       {{"source", data.source},
        {"csv", data.csv},
        {"taxonomy", data.taxonomy},
        {"channels", data.channels},
        {"sample_rate", data.sample_rate},
        {"window_length", data.window_length},
        {"overlap", data.overlap},
        {"synth", synth_json(data.synth)}}},
      {"model", shlb::to_json(model)},
      {"supervised", train_json(supervised)},
      {"simclr", train_json(simclr)},
      {"vicreg", train_json(vicreg)},
      {"finetune", train_json(finetune)},
      {"occlusion",
       {{"k_values", occlusion.k_values},
        {"seeds", occlusion.seeds},
        {"devices", occlusion.devices},
        {"noise_mean", occlusion.noise_mean},
        {"noise_std", occlusion.noise_std}}},
      {"saliency", {{"local_windows", saliency.local_windows}, {"svg", saliency.svg}}},
      {"probe",
       {{"epochs", probe.epochs},
        {"learning_rate", probe.learning_rate},
        {"batch_size", probe.batch_size},
        {"folds", probe.folds}}},
  };
}

RunConfig RunConfig::from_json(const json& doc, const std::optional<std::string>& profile) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  std::string name = "desk";
  if (profile) {
    name = *profile;
  } else if (doc.contains("profile")) {
    if (!doc["profile"].is_string()) throw ConfigError("config key 'profile' must be a string");
    name = doc["profile"].get<std::string>();
  }
  json merged = for_profile(name).to_json();
  merge(merged, doc, "");
  merged["profile"] = name;

  RunConfig c;
  try {
    c.profile = name;
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.out = merged.at("out").get<std::string>();
    c.frameworks = merged.at("frameworks").get<std::vector<std::string>>();
    const auto& d = merged.at("data");
    c.data.source = d.at("source").get<std::string>();
    c.data.csv = d.at("csv").get<std::string>();
    c.data.taxonomy = d.at("taxonomy").get<std::string>();
    c.data.channels = d.at("channels").get<std::vector<std::string>>();
    c.data.sample_rate = d.at("sample_rate").get<double>();
    c.data.window_length = d.at("window_length").get<std::size_t>();
    c.data.overlap = d.at("overlap").get<double>();
    c.data.synth = synth_from_json(d.at("synth"));
    c.model = model_spec_from_json(merged.at("model"));
    c.supervised = train_from_json(merged.at("supervised"), Routine::kSupervised);
    c.simclr = train_from_json(merged.at("simclr"), Routine::kSimClr);
    c.vicreg = train_from_json(merged.at("vicreg"), Routine::kVicReg);
    c.finetune = train_from_json(merged.at("finetune"), Routine::kFinetune);
    const auto& o = merged.at("occlusion");
    c.occlusion.k_values = o.at("k_values").get<std::vector<std::size_t>>();
    c.occlusion.seeds = o.at("seeds").get<std::size_t>();
    c.occlusion.devices = o.at("devices").get<std::vector<std::string>>();
    c.occlusion.noise_mean = o.at("noise_mean").get<double>();
    c.occlusion.noise_std = o.at("noise_std").get<double>();
    const auto& s = merged.at("saliency");
    c.saliency.local_windows = s.at("local_windows").get<std::size_t>();
    c.saliency.svg = s.at("svg").get<bool>();
    const auto& p = merged.at("probe");
    c.probe.epochs = p.at("epochs").get<std::size_t>();
    c.probe.learning_rate = p.at("learning_rate").get<double>();
    c.probe.batch_size = p.at("batch_size").get<std::size_t>();
    c.probe.folds = p.at("folds").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path,
                          const std::optional<std::string>& profile) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(doc, profile);
}

PipelineConfig RunConfig::pipeline() const {
  return {model, supervised, simclr, vicreg, finetune};
}

void RunConfig::validate() const {
  auto wrap = [](const char* section, auto&& check) {
    try {
      check();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string(section) + ": " + e.what());
    }
  };
  wrap("model", [&] { model.validate(); });
  wrap("supervised", [&] { supervised.validate(); });
  wrap("simclr", [&] { simclr.validate(); });
  wrap("vicreg", [&] { vicreg.validate(); });
  wrap("finetune", [&] { finetune.validate(); });
  if (data.source != "synth" && data.source != "csv") {
    throw ConfigError("data.source must be 'synth' or 'csv'");
  }
  if (data.source == "csv" && data.csv.empty()) throw ConfigError("data.csv is required for source=csv");
  if (data.window_length == 0) throw ConfigError("data.window_length must be >= 1");
  if (!(data.overlap >= 0.0 && data.overlap < 1.0)) throw ConfigError("data.overlap must be in [0, 1)");
  if (!(data.sample_rate > 0.0)) throw ConfigError("data.sample_rate must be > 0");
  if (data.channels.empty()) throw ConfigError("data.channels must not be empty");
  if (occlusion.k_values.empty()) throw ConfigError("occlusion.k_values must not be empty");
  if (occlusion.seeds == 0) throw ConfigError("occlusion.seeds must be >= 1");
  if (!(occlusion.noise_std > 0.0)) throw ConfigError("occlusion.noise_std must be > 0");
  if (probe.folds < 2) throw ConfigError("probe.folds must be >= 2");
  if (probe.epochs == 0 || probe.batch_size == 0) throw ConfigError("probe epochs and batch_size must be >= 1");
  if (frameworks.empty()) throw ConfigError("frameworks must not be empty");
  std::set<std::string> seen;
  for (const auto& f : frameworks) {
    try {
      parse_framework(f);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("frameworks: ") + e.what());
    }
    if (!seen.insert(f).second) throw ConfigError("frameworks: duplicate '" + f + "'");
  }
}

std::string config_fingerprint(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace shlb
