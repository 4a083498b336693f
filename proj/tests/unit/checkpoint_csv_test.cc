#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "shlb/checkpoint.h"
#include "shlb/csv.h"
#include "shlb/error.h"
#include "shlb_test_util.h"

namespace shlb {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Checkpoint, ModelRoundTrip) {
  auto dir = testing::scratch_dir("ckpt");
  Model<float> a(testing::tiny_spec(), 1), b(testing::tiny_spec(), 2);
  save_model(dir / "m.ckpt", a);
  load_model(dir / "m.ckpt", b);
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].param->value, pb[i].param->value);
  save_model(dir / "m2.ckpt", b);
  EXPECT_EQ(slurp(dir / "m.ckpt"), slurp(dir / "m2.ckpt"));
}

TEST(Checkpoint, ByteLayout) {
  auto dir = testing::scratch_dir("ckpt_layout");
  write_checkpoint(dir / "x.ckpt", {{"ab", Tensor<float>::from({2, 1}, {1.5f, -2.0f})}});
  const std::string bytes = slurp(dir / "x.ckpt");
  // 4 magic + 4 version + 8 count + 4 len + 2 name + 4 rank + 16 dims + 8 values
  ASSERT_EQ(bytes.size(), 50u);
  EXPECT_EQ(bytes.substr(0, 4), "SHLB");
  std::uint32_t version, len, rank;
  std::uint64_t count, d0, d1;
  float v0, v1;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&count, bytes.data() + 8, 8);
  std::memcpy(&len, bytes.data() + 16, 4);
  std::memcpy(&rank, bytes.data() + 22, 4);
  std::memcpy(&d0, bytes.data() + 26, 8);
  std::memcpy(&d1, bytes.data() + 34, 8);
  std::memcpy(&v0, bytes.data() + 42, 4);
  std::memcpy(&v1, bytes.data() + 46, 4);
  EXPECT_EQ(version, 1u);
  EXPECT_EQ(count, 1u);
  EXPECT_EQ(len, 2u);
  EXPECT_EQ(bytes.substr(20, 2), "ab");
  EXPECT_EQ(rank, 2u);
  EXPECT_EQ(d0, 2u);
  EXPECT_EQ(d1, 1u);
  EXPECT_EQ(v0, 1.5f);
  EXPECT_EQ(v1, -2.0f);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  auto dir = testing::scratch_dir("ckpt_bad");
  Model<float> m(testing::tiny_spec(), 1);
  save_model(dir / "m.ckpt", m);
  std::string bytes = slurp(dir / "m.ckpt");
  {
    std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream(dir / "magic.ckpt", std::ios::binary) << bad;
  }
  EXPECT_THROW(read_checkpoint(dir / "trunc.ckpt"), ParseError);
  EXPECT_THROW(read_checkpoint(dir / "magic.ckpt"), ParseError);
  Model<float> other(testing::tiny_spec(5), 1);
  EXPECT_THROW(load_model(dir / "m.ckpt", other), ShapeError);
}

TEST(Csv, RoundTripWithQuoting) {
  CsvTable t;
  t.header = {"a", "b"};
  t.add_row({"plain", "with,comma"});
  t.add_row({"has \"quote\"", "multi\nline"});
  t.add_row({"", "x"});
  std::stringstream ss;
  write_csv(ss, t);
  EXPECT_EQ(read_csv(ss), t);
}

TEST(Csv, RaggedRowReportsLine) {
  std::stringstream ss("a,b\n1,2\n3\n");
  try {
    read_csv(ss, "f.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.source(), "f.csv");
  }
  std::stringstream empty("");
  EXPECT_THROW(read_csv(empty), ParseError);
}

TEST(Csv, DoublesRoundTripExactly) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 20 - 10);
    EXPECT_EQ(*parse_double(format_double(v)), v);
  }
  EXPECT_FALSE(parse_double("1.5x"));
  EXPECT_FALSE(parse_double(""));
}

TEST(Csv, MissingColumnThrows) {
  CsvTable t;
  t.header = {"a"};
  EXPECT_THROW(t.column("b"), InvalidArgument);
  EXPECT_THROW(t.add_row({"1", "2"}), InvalidArgument);
}

}  // namespace
}  // namespace shlb
