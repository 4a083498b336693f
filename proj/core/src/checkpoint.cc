#include "shlb/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "shlb/error.h"

namespace shlb {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  template <typename T>
  T get(const char* what) {
    T value{};
    bytes(reinterpret_cast<char*>(&value), sizeof(T), what);
    return value;
  }

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw ParseError(source_, 0, std::string("truncated checkpoint while reading ") + what);
    }
  }

  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, entries.size());
  for (const auto& e : entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (std::size_t d : e.tensor.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(e.tensor.data()),
              static_cast<std::streamsize>(e.tensor.size() * sizeof(float)));
  }
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  Reader reader(in, path.string());
  char magic[4];
  reader.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ParseError(reader.source(), 0, "not a SHLB checkpoint (bad magic)");
  }
  const auto version = reader.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError(reader.source(), 0, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = reader.get<std::uint64_t>("entry count");
  std::vector<CheckpointEntry> entries;
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name.resize(reader.get<std::uint32_t>("name length"));
    reader.bytes(e.name.data(), e.name.size(), "name");
    const auto rank = reader.get<std::uint32_t>("rank");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(reader.get<std::uint64_t>("dims"));
    std::vector<float> values(shape_size(shape));
    reader.bytes(reinterpret_cast<char*>(values.data()), values.size() * sizeof(float), "values");
    e.tensor = Tensor<float>(std::move(shape), std::move(values));
    entries.push_back(std::move(e));
  }
  return entries;
}

template <typename Scalar>
std::vector<CheckpointEntry> model_state(Model<Scalar>& model) {
  std::vector<CheckpointEntry> out;
  for (const auto& p : model.parameters()) {
    out.push_back({p.path, p.param->value.template cast<float>()});
  }
  return out;
}

template <typename Scalar>
void load_model_state(Model<Scalar>& model, const std::vector<CheckpointEntry>& entries) {
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (const auto& p : model.parameters()) {
    const auto it = by_name.find(p.path);
    if (it == by_name.end()) throw Error("checkpoint is missing parameter '" + p.path + "'");
    const Tensor<float>& src = it->second->tensor;
    if (src.shape() != p.param->value.shape()) {
      throw ShapeError(p.path, "checkpoint has " + shape_string(src.shape()) + ", model expects " +
                                   shape_string(p.param->value.shape()));
    }
    auto dst = p.param->value.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Scalar>(src[i]);
  }
}

template std::vector<CheckpointEntry> model_state(Model<float>&);
template std::vector<CheckpointEntry> model_state(Model<double>&);
template void load_model_state(Model<float>&, const std::vector<CheckpointEntry>&);
template void load_model_state(Model<double>&, const std::vector<CheckpointEntry>&);

}  // namespace shlb
