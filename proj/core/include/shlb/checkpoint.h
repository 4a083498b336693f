#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shlb/model.h"
#include "shlb/tensor.h"

namespace shlb {

// Flat little-endian binary layout:
//   "SHLB" | u32 version | u64 entry count |
//   per entry: u32 name length | utf-8 name | u32 rank | u64 dims[rank] | f32 values[prod(dims)]
inline constexpr char kCheckpointMagic[4] = {'S', 'H', 'L', 'B'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Tensor<float> tensor;

  bool operator==(const CheckpointEntry&) const = default;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
// Throws ParseError on a bad magic, unknown version or truncated file.
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
std::vector<CheckpointEntry> model_state(Model<Scalar>& model);
// Every model parameter must be present with a matching shape.
template <typename Scalar>
void load_model_state(Model<Scalar>& model, const std::vector<CheckpointEntry>& entries);

template <typename Scalar>
void save_model(const std::filesystem::path& path, Model<Scalar>& model) {
  write_checkpoint(path, model_state(model));
}
template <typename Scalar>
void load_model(const std::filesystem::path& path, Model<Scalar>& model) {
  load_model_state(model, read_checkpoint(path));
}

}  // namespace shlb
