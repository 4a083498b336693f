#include "shlb/training.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "shlb/checkpoint.h"
#include "shlb/error.h"
#include "shlb/random.h"

namespace shlb {
namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, {epoch}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

template <typename Scalar>
Tensor<Scalar> gather_rows(const Tensor<Scalar>& t, std::span<const std::size_t> rows) {
  const std::size_t width = t.size() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = rows.size();
  Tensor<Scalar> out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(t.data() + rows[r] * width, width, out.data() + r * width);
  }
  return out;
}

template <typename Scalar>
std::vector<std::size_t> argmax_rows(const Tensor<Scalar>& t) {
  std::vector<std::size_t> out(t.dim(0));
  const std::size_t cols = t.dim(1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Scalar* row = t.data() + i * cols;
    out[i] = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
  }
  return out;
}

void check_labels(const WindowSet& windows, std::size_t classes) {
  for (const auto& w : windows.windows) {
    if (w.activity >= classes) {
      throw InvalidArgument("activity index " + std::to_string(w.activity) +
                            " exceeds the model's " + std::to_string(classes) + " classes");
    }
  }
}

template <typename Scalar>
std::vector<NamedParameter<Scalar>> joined(std::vector<NamedParameter<Scalar>> a,
                                           const std::vector<NamedParameter<Scalar>>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

bool logging_epoch(const TrainConfig& config, std::size_t epoch) {
  return epoch == config.epochs || epoch % config.log_every == 0;
}

std::filesystem::path best_path(const std::filesystem::path& p) {
  auto out = p;
  out += ".best";
  return out;
}

// Tracks the best validation score and writes checkpoints when configured.
template <typename Scalar>
void checkpoint_epoch(Model<Scalar>& model, const TrainConfig& config, const EpochRecord& record,
                      std::optional<double>& best) {
  if (config.checkpoint_path.empty()) return;
  if (record.val_macro_f1 && (!best || *record.val_macro_f1 > *best)) {
    best = record.val_macro_f1;
    save_model(best_path(config.checkpoint_path), model);
  }
  if (record.epoch == config.epochs) save_model(config.checkpoint_path, model);
}

// Classifier forward on precomputed features, argmax.
template <typename Scalar>
std::vector<std::size_t> classify_features(Sequential<Scalar>& classifier,
                                           const Tensor<Scalar>& features) {
  return argmax_rows(classifier.forward(features));
}

}  // namespace

std::string_view to_string(Routine r) {
  switch (r) {
    case Routine::kSupervised: return "supervised";
    case Routine::kSimClr: return "simclr";
    case Routine::kVicReg: return "vicreg";
    case Routine::kFinetune: return "finetune";
  }
  return "?";
}

Routine parse_routine(std::string_view text) {
  for (auto r : {Routine::kSupervised, Routine::kSimClr, Routine::kVicReg, Routine::kFinetune}) {
    if (to_string(r) == text) return r;
  }
  throw InvalidArgument("unknown routine '" + std::string(text) + "'");
}

std::string_view to_string(Framework f) {
  switch (f) {
    case Framework::kSupervised: return "supervised";
    case Framework::kSimClr: return "simclr";
    case Framework::kVicReg: return "vicreg";
  }
  return "?";
}

Framework parse_framework(std::string_view text) {
  for (auto f : {Framework::kSupervised, Framework::kSimClr, Framework::kVicReg}) {
    if (to_string(f) == text) return f;
  }
  throw InvalidArgument("unknown framework '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (routine == Routine::kVicReg && batch_size < 2) {
    throw InvalidArgument("VICReg needs a batch size of at least 2");
  }
  if (log_every < 1) throw InvalidArgument("log_every must be >= 1");
  if (routine == Routine::kSimClr && !(simclr.temperature > 0.0)) {
    throw InvalidArgument("temperature must be > 0");
  }
  if (routine == Routine::kVicReg) vicreg.validate();
  if (routine == Routine::kSimClr || routine == Routine::kVicReg) augmentation.validate();
}

CsvTable history_table(const History& history) {
  CsvTable t;
  t.header = {"epoch", "loss", "val_macro_f1"};
  for (const auto& r : history) {
    t.add_row({std::to_string(r.epoch), format_double(r.loss),
               r.val_macro_f1 ? format_double(*r.val_macro_f1) : ""});
  }
  return t;
}

void write_history_csv(const std::filesystem::path& path, const History& history) {
  write_csv_file(path, history_table(history));
}

UnlabeledWindows strip_labels(const WindowSet& windows) {
  UnlabeledWindows out{windows.window_length, windows.channels, {}};
  out.values.reserve(windows.size());
  for (const auto& w : windows.windows) out.values.push_back(w.values);
  return out;
}

template <typename Scalar>
Tensor<Scalar> encode(Model<Scalar>& model, const WindowSet& windows, std::size_t batch_size) {
  const std::size_t n = windows.size(), d = model.representation_dim();
  Tensor<Scalar> out({n, d});
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const auto f = model.forward(windows.batch<Scalar>(idx), Head::kEncoder);
    std::copy(f.values().begin(), f.values().end(), out.data() + begin * d);
  }
  return out;
}

template <typename Scalar>
std::vector<std::size_t> predict(Model<Scalar>& model, const WindowSet& windows,
                                 std::size_t batch_size) {
  std::vector<std::size_t> out;
  out.reserve(windows.size());
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < windows.size(); begin += batch_size) {
    const std::size_t end = std::min(windows.size(), begin + batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const auto probs = model.forward(windows.batch<Scalar>(idx), Head::kClassifier);
    const auto p = argmax_rows(probs);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

namespace {

Evaluation make_evaluation(const std::vector<std::size_t>& truth,
                           std::vector<std::size_t> predictions, std::size_t classes) {
  Evaluation e;
  e.confusion = ConfusionMatrix::from(truth, predictions, classes);
  e.macro_f1 = macro_f1(e.confusion);
  e.recall = per_class_recall(e.confusion);
  e.predictions = std::move(predictions);
  return e;
}

}  // namespace

template <typename Scalar>
Evaluation evaluate(Model<Scalar>& model, const WindowSet& windows, std::size_t batch_size) {
  if (windows.empty()) throw InvalidArgument("evaluate: empty window set");
  const std::size_t classes = model.spec().num_classes;
  check_labels(windows, classes);
  return make_evaluation(windows.labels(), predict(model, windows, batch_size), classes);
}

template <typename Scalar>
History train_supervised(Model<Scalar>& model, const WindowSet& train,
                         const WindowSet* validation, const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw InvalidArgument("train_supervised: empty training split");
  check_labels(train, model.spec().num_classes);
  const bool validate = validation && !validation->empty();
  const auto labels = train.labels();
  const auto params = joined(model.parameters(Component::kEncoder),
                             model.parameters(Component::kClassifier));
  Optimizer<Scalar> optimizer(config.optimizer);
  History history;
  std::optional<double> best;
  std::vector<std::size_t> batch_labels;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), config.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + begin,
                                             std::min(config.batch_size, order.size() - begin));
      batch_labels.clear();
      for (auto i : idx) batch_labels.push_back(labels[i]);
      model.zero_grad();
      const auto probs = model.forward(train.batch<Scalar>(idx), Head::kClassifier);
      const auto ce = cross_entropy(probs, batch_labels);
      model.backward(ce.grad, {}, false);
      optimizer.step(params);
      loss_sum += ce.value * static_cast<double>(idx.size());
    }
    EpochRecord record{epoch, loss_sum / static_cast<double>(train.size()), std::nullopt,
                       std::nullopt};
    if (validate && logging_epoch(config, epoch)) {
      record.val_macro_f1 = evaluate(model, *validation).macro_f1;
    }
    checkpoint_epoch(model, config, record, best);
    history.push_back(record);
  }
  return history;
}

template <typename Scalar>
History pretrain_ssl(Model<Scalar>& model, const UnlabeledWindows& windows,
                     const TrainConfig& config) {
  config.validate();
  if (config.routine != Routine::kSimClr && config.routine != Routine::kVicReg) {
    throw InvalidArgument("pretrain_ssl: routine must be simclr or vicreg");
  }
  const bool vicreg = config.routine == Routine::kVicReg;
  const std::size_t n = windows.size();
  if (n == 0 || (vicreg && n < 2)) throw InvalidArgument("pretrain_ssl: not enough windows");
  const std::size_t t = windows.window_length, s = windows.channels;
  const std::size_t window_size = t * s;
  const auto params = joined(model.parameters(Component::kEncoder),
                             model.parameters(Component::kProjection));
  Optimizer<Scalar> optimizer(config.optimizer);
  History history;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(n, config.seed, epoch);
    std::mt19937_64 rng(derive_seed(config.seed, {epoch, 1}));
    double loss_sum = 0.0, variance_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t m = std::min(config.batch_size, n - begin);
      if (vicreg && m < 2) continue;
      Tensor<Scalar> views({2 * m, t, s});
      for (std::size_t i = 0; i < m; ++i) {
        const auto [a, b] = make_pair(config.augmentation, windows.values[order[begin + i]], s, rng);
        std::copy(a.begin(), a.end(), views.data() + i * window_size);
        std::copy(b.begin(), b.end(), views.data() + (m + i) * window_size);
      }
      model.zero_grad();
      const auto z_all = model.forward(views, Head::kProjection);
      const auto z = slice_rows(z_all, 0, m);
      const auto z_prime = slice_rows(z_all, m, 2 * m);
      PairLoss<Scalar> loss;
      if (vicreg) {
        VicRegTerms terms;
        loss = vicreg_total(z, z_prime, config.vicreg, &terms);
        variance_sum += 0.5 * (terms.variance_first + terms.variance_second);
      } else {
        loss = nt_xent(z, z_prime, config.simclr.temperature);
      }
      model.backward(concat_rows(loss.grad_first, loss.grad_second), {}, false);
      optimizer.step(params);
      loss_sum += loss.value;
      ++batches;
    }
    EpochRecord record{epoch, loss_sum / static_cast<double>(batches), std::nullopt, std::nullopt};
    if (vicreg) record.variance_term = variance_sum / static_cast<double>(batches);
    if (!config.checkpoint_path.empty() && epoch == config.epochs) {
      save_model(config.checkpoint_path, model);
    }
    history.push_back(record);
  }
  return history;
}

template <typename Scalar>
History finetune_linear(Model<Scalar>& model, const WindowSet& train,
                        const WindowSet* validation, const TrainConfig& config) {
  config.validate();
  if (!model.encoder_frozen()) {
    throw InvalidArgument("finetune_linear: encoder is not frozen");
  }
  if (train.empty()) throw InvalidArgument("finetune_linear: empty training split");
  const std::size_t classes = model.spec().num_classes;
  check_labels(train, classes);
  const auto features = encode(model, train);
  const auto labels = train.labels();
  const bool validate = validation && !validation->empty();
  Tensor<Scalar> val_features;
  std::vector<std::size_t> val_labels;
  if (validate) {
    check_labels(*validation, classes);
    val_features = encode(model, *validation);
    val_labels = validation->labels();
  }

  auto& classifier = model.classifier();
  const auto params = model.parameters(Component::kClassifier);
  Optimizer<Scalar> optimizer(config.optimizer);
  History history;
  std::optional<double> best;
  std::vector<std::size_t> batch_labels;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), config.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + begin,
                                             std::min(config.batch_size, order.size() - begin));
      batch_labels.clear();
      for (auto i : idx) batch_labels.push_back(labels[i]);
      for (auto& p : params) p.param->value.zero_grad();
      const auto probs = classifier.forward(gather_rows(features, idx));
      const auto ce = cross_entropy(probs, batch_labels);
      classifier.backward(ce.grad, {});
      optimizer.step(params);
      loss_sum += ce.value * static_cast<double>(idx.size());
    }
    EpochRecord record{epoch, loss_sum / static_cast<double>(train.size()), std::nullopt,
                       std::nullopt};
    if (validate && logging_epoch(config, epoch)) {
      record.val_macro_f1 =
          make_evaluation(val_labels, classify_features(classifier, val_features), classes)
              .macro_f1;
    }
    checkpoint_epoch(model, config, record, best);
    history.push_back(record);
  }
  return history;
}

ModelSpec fit_spec(ModelSpec spec, const WindowSet& data) {
  spec.window_length = data.window_length;
  spec.channels = data.channels;
  spec.num_classes = data.activities.size();
  return spec;
}

TrainConfig seeded(TrainConfig config, Routine routine, std::uint64_t seed) {
  config.routine = routine;
  config.seed = derive_seed(seed, {config.seed, static_cast<std::uint64_t>(routine)});
  return config;
}

TrainedModel train_framework(Framework framework, const PreparedDataset& data,
                             const PipelineConfig& config, std::uint64_t seed) {
  TrainedModel out{Model<float>(fit_spec(config.model, data.train), seed), {}, {}};
  const WindowSet* validation = data.validation.empty() ? nullptr : &data.validation;
  auto with_seed = [seed](const TrainConfig& c, Routine routine) { return seeded(c, routine, seed); };
  switch (framework) {
    case Framework::kSupervised:
      out.train = train_supervised(out.model, data.train, validation,
                                   with_seed(config.supervised, Routine::kSupervised));
      break;
    case Framework::kSimClr:
    case Framework::kVicReg: {
      const auto routine = framework == Framework::kSimClr ? Routine::kSimClr : Routine::kVicReg;
      const auto& pre = framework == Framework::kSimClr ? config.simclr : config.vicreg;
      out.pretrain = pretrain_ssl(out.model, strip_labels(data.train), with_seed(pre, routine));
      out.model.set_encoder_frozen(true);
      out.train = finetune_linear(out.model, data.train, validation,
                                  with_seed(config.finetune, Routine::kFinetune));
      break;
    }
  }
  return out;
}

#define SHLB_INSTANTIATE(T)                                                                      \
  template std::vector<std::size_t> predict(Model<T>&, const WindowSet&, std::size_t);          \
  template Evaluation evaluate(Model<T>&, const WindowSet&, std::size_t);                       \
  template History train_supervised(Model<T>&, const WindowSet&, const WindowSet*,              \
                                    const TrainConfig&);                                        \
  template History pretrain_ssl(Model<T>&, const UnlabeledWindows&, const TrainConfig&);        \
  template History finetune_linear(Model<T>&, const WindowSet&, const WindowSet*,               \
                                   const TrainConfig&);                                         \
  template Tensor<T> encode(Model<T>&, const WindowSet&, std::size_t);

SHLB_INSTANTIATE(float)
SHLB_INSTANTIATE(double)
#undef SHLB_INSTANTIATE

}  // namespace shlb
