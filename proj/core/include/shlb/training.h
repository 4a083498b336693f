#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shlb/augment.h"
#include "shlb/csv.h"
#include "shlb/data.h"
#include "shlb/losses.h"
#include "shlb/metrics.h"
#include "shlb/model.h"
#include "shlb/optimizer.h"

namespace shlb {

enum class Routine { kSupervised, kSimClr, kVicReg, kFinetune };

std::string_view to_string(Routine r);
Routine parse_routine(std::string_view text);

struct TrainConfig {
  Routine routine = Routine::kSupervised;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  OptimizerSpec optimizer;
  std::uint64_t seed = 0;
  // Validation macro-F1 is computed every `log_every` epochs and on the last one.
  std::size_t log_every = 1;
  // When set, the final model is written here and the best-validation model
  // next to it with a ".best" suffix.
  std::filesystem::path checkpoint_path;

  SimClrConfig simclr;
  VicRegConfig vicreg;
  AugmentationSpec augmentation;

  // Throws InvalidArgument: epochs >= 1, batch >= 1 (>= 2 for VICReg).
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  std::optional<double> val_macro_f1;
  // VICReg only: mean of (v(Z) + v(Z')) / 2 over the epoch's batches.
  std::optional<double> variance_term;

  bool operator==(const EpochRecord&) const = default;
};

using History = std::vector<EpochRecord>;

// Columns epoch,loss,val_macro_f1 (empty when not computed).
CsvTable history_table(const History& history);
void write_history_csv(const std::filesystem::path& path, const History& history);

// SSL input: window values only. Nothing else from the labeled set crosses
// into pre-training.
struct UnlabeledWindows {
  std::size_t window_length = 0;
  std::size_t channels = 0;
  std::vector<std::vector<double>> values;  // each [T, S]

  std::size_t size() const { return values.size(); }
};

UnlabeledWindows strip_labels(const WindowSet& windows);

struct Evaluation {
  ConfusionMatrix confusion;
  double macro_f1 = 0.0;
  std::vector<std::optional<double>> recall;
  std::vector<std::size_t> predictions;
};

// Argmax class per window (first maximum on ties).
template <typename Scalar>
std::vector<std::size_t> predict(Model<Scalar>& model, const WindowSet& windows,
                                 std::size_t batch_size = 256);

// Throws InvalidArgument on an empty set.
template <typename Scalar>
Evaluation evaluate(Model<Scalar>& model, const WindowSet& windows, std::size_t batch_size = 256);

// Encoder + classifier on cross-entropy. Throws InvalidArgument on an empty
// training set.
template <typename Scalar>
History train_supervised(Model<Scalar>& model, const WindowSet& train,
                         const WindowSet* validation, const TrainConfig& config);

// Encoder + projection on NT-Xent (routine kSimClr) or VICReg (kVicReg) over
// augmented view pairs. The classifier is untouched.
template <typename Scalar>
History pretrain_ssl(Model<Scalar>& model, const UnlabeledWindows& windows,
                     const TrainConfig& config);

// Classifier only, on features of the frozen encoder. Throws InvalidArgument
// unless model.encoder_frozen().
template <typename Scalar>
History finetune_linear(Model<Scalar>& model, const WindowSet& train,
                        const WindowSet* validation, const TrainConfig& config);

// Encoder features [N, D] for every window.
template <typename Scalar>
Tensor<Scalar> encode(Model<Scalar>& model, const WindowSet& windows, std::size_t batch_size = 256);

// --- whole training routines ----------------------------------------------

enum class Framework { kSupervised, kSimClr, kVicReg };

std::string_view to_string(Framework f);
Framework parse_framework(std::string_view text);

struct PipelineConfig {
  ModelSpec model;
  TrainConfig supervised;
  TrainConfig simclr;
  TrainConfig vicreg;
  TrainConfig finetune;
};

struct TrainedModel {
  Model<float> model;
  History pretrain;  // empty for supervised
  History train;
};

// Model spec with window length, channels and class count taken from the data.
ModelSpec fit_spec(ModelSpec spec, const WindowSet& data);
// Routine config whose seed is derived from the run seed.
TrainConfig seeded(TrainConfig config, Routine routine, std::uint64_t seed);

// Supervised: train_supervised from scratch. SSL: pretrain on the train split,
// freeze, fine-tune the classifier.
TrainedModel train_framework(Framework framework, const PreparedDataset& data,
                             const PipelineConfig& config, std::uint64_t seed);

}  // namespace shlb
