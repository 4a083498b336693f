#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shlb/csv.h"
#include "shlb_test_util.h"

namespace fs = std::filesystem;

namespace shlb {
namespace {

struct Outcome {
  int status = 0;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome shlb(const fs::path& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(SHLB_CLI) + " " + args + " >" + out.string() + " 2>" +
                          err.string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

const char* kTinyConfig = R"({
  "frameworks": ["supervised", "simclr"],
  "data": {"synth": {"subjects": 6, "recording_length": 120, "recordings_per_class": 1}},
  "model": {"conv_channels": [4, 8], "transformer_layers": 1, "attention_heads": 2,
            "projection_hidden": 16, "projection_out": 8},
  "supervised": {"epochs": 1, "batch_size": 16},
  "simclr": {"epochs": 1, "batch_size": 16},
  "vicreg": {"epochs": 1, "batch_size": 16},
  "finetune": {"epochs": 1, "batch_size": 16},
  "probe": {"epochs": 1}
})";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing::scratch_dir(std::string("cli_") +
                                ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::ofstream(dir_ / "tiny.json") << kTinyConfig;
  }
  Outcome run(const std::string& args) {
    return shlb(dir_, args + " --config " + (dir_ / "tiny.json").string() + " --out " +
                          (dir_ / "run").string());
  }
  fs::path dir_;
};

bool one_error_line(const Outcome& r) {
  return r.status != 0 && r.err.rfind("error: ", 0) == 0 &&
         r.err.find('\n') == r.err.size() - 1;
}

TEST_F(Cli, HelpListsEveryFlag) {
  const std::map<std::string, std::vector<std::string>> extra{
      {"synth", {}},
      {"ingest", {"--input", "--taxonomy"}},
      {"pretrain", {"--method"}},
      {"train", {}},
      {"finetune", {"--method"}},
      {"evaluate", {"--method"}},
      {"occlude", {"--method", "--mode", "--k", "--seeds", "--device"}},
      {"saliency", {"--method"}},
      {"probe", {"--method", "--task"}},
      {"report", {}},
  };
  const auto top = shlb(dir_, "--help");
  EXPECT_EQ(top.status, 0);
  for (const auto& [cmd, flags] : extra) {
    EXPECT_NE(top.out.find(cmd), std::string::npos) << cmd;
    const auto r = shlb(dir_, cmd + " --help");
    EXPECT_EQ(r.status, 0) << cmd;
    for (const char* common : {"--config", "--profile", "--seed", "--out"}) {
      EXPECT_NE(r.out.find(common), std::string::npos) << cmd << " " << common;
    }
    for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
  EXPECT_NE(shlb(dir_, "").status, 0);
  EXPECT_NE(shlb(dir_, "fly").status, 0);
}

TEST_F(Cli, MalformedConfigIsOneErrorLine) {
  std::ofstream(dir_ / "bad.json") << R"({"model": {"depth": 2}})";
  auto r = shlb(dir_, "train --config " + (dir_ / "bad.json").string() + " --out " +
                          (dir_ / "run").string());
  EXPECT_TRUE(one_error_line(r)) << r.err;
  EXPECT_NE(r.err.find("model.depth"), std::string::npos);
  std::ofstream(dir_ / "broken.json") << "{";
  r = shlb(dir_, "train --config " + (dir_ / "broken.json").string());
  EXPECT_TRUE(one_error_line(r)) << r.err;
  r = shlb(dir_, "train --profile wisdm --out " + (dir_ / "run").string());
  EXPECT_TRUE(one_error_line(r)) << r.err;
}

TEST_F(Cli, MissingCheckpointAndLock) {
  auto r = run("finetune --method simclr");
  EXPECT_TRUE(one_error_line(r)) << r.err;
  EXPECT_NE(r.err.find("missing checkpoint"), std::string::npos);
  r = run("evaluate --method vicreg");
  EXPECT_TRUE(one_error_line(r)) << r.err;
  EXPECT_NE(r.err.find("missing checkpoint"), std::string::npos);

  std::ofstream(dir_ / "run" / ".shlb.lock") << "";
  r = run("synth");
  EXPECT_TRUE(one_error_line(r)) << r.err;
  EXPECT_NE(r.err.find("locked"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "run" / "data.csv"));
  fs::remove(dir_ / "run" / ".shlb.lock");
  EXPECT_EQ(run("synth").status, 0);
  EXPECT_FALSE(fs::exists(dir_ / "run" / ".shlb.lock"));
}

TEST_F(Cli, PipelineRowCountsAndRerun) {
  for (const char* step : {"synth", "train", "pretrain --method simclr", "finetune"}) {
    const auto r = run(step);
    ASSERT_EQ(r.status, 0) << step << ": " << r.err;
  }
  EXPECT_TRUE(fs::exists(dir_ / "run" / "encoder_simclr.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "model_simclr.ckpt"));

  ASSERT_EQ(run("occlude --mode random --k 1..5 --seeds 10").status, 0);
  const auto summary = read_csv_file(dir_ / "run" / "occlusion_summary.csv");
  const std::size_t frameworks = 2;
  EXPECT_EQ(summary.rows.size(), 5 * 10 * frameworks + frameworks);
  std::size_t baseline = 0;
  for (const auto& row : summary.rows) baseline += row[2] == "0";
  EXPECT_EQ(baseline, frameworks);
  const auto first = slurp(dir_ / "run" / "occlusion_summary.csv");
  ASSERT_EQ(run("occlude --mode random --k 1..5 --seeds 10").status, 0);
  EXPECT_EQ(slurp(dir_ / "run" / "occlusion_summary.csv"), first);
  ASSERT_EQ(run("occlude --mode device --method supervised").status, 0);
  const auto both = slurp(dir_ / "run" / "occlusion_summary.csv");
  EXPECT_GT(both.size(), first.size());
  ASSERT_EQ(run("occlude --mode random --k 1..5 --seeds 10").status, 0);
  EXPECT_EQ(slurp(dir_ / "run" / "occlusion_summary.csv"), both);

  ASSERT_EQ(run("occlude --mode random --k 1,3 --seeds 2 --method simclr").status, 0);
  std::size_t random_rows = 0, device_rows = 0;
  for (const auto& row : read_csv_file(dir_ / "run" / "occlusion_summary.csv").rows) {
    random_rows += row[1] == "random";
    device_rows += row[1] == "device";
  }
  EXPECT_EQ(random_rows, 1 + 2 * 2u);
  EXPECT_GT(device_rows, 0u);
  EXPECT_EQ(read_csv_file(dir_ / "run" / "drop_table.csv").header,
            (std::vector<std::string>{"framework", "activity", "delta_0_1", "delta_1_2"}));
  auto r = run("occlude --mode random --k 6");
  EXPECT_TRUE(one_error_line(r)) << r.err;
  r = run("occlude --mode sideways");
  EXPECT_TRUE(one_error_line(r)) << r.err;

  ASSERT_EQ(run("probe --task subject").status, 0);
  EXPECT_EQ(read_csv_file(dir_ / "run" / "probe_results.csv").rows.size(), frameworks * 5);
  r = shlb(dir_, "report --seed 9 --config " + (dir_ / "tiny.json").string() + " --out " +
                     (dir_ / "run").string());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir_ / "run" / "report.json"));
  EXPECT_EQ(doc["config"]["seed"], 9);
  EXPECT_EQ(doc["seeds"], nlohmann::json::parse("[9]"));
  EXPECT_TRUE(doc["results"]["simclr"].contains("occlusion_summary"));
  EXPECT_TRUE(doc["results"]["supervised"].contains("probe_results"));
}

TEST_F(Cli, CsvProfileRunsOnIngestedData) {
  ASSERT_EQ(run("synth").status, 0);
  nlohmann::json cfg = nlohmann::json::parse(kTinyConfig);
  cfg["profile"] = "mobiact";
  cfg["frameworks"] = {"supervised"};
  std::ofstream(dir_ / "csv.json") << cfg.dump();
  const auto with = [&](const std::string& args) {
    return shlb(dir_, args + " --config " + (dir_ / "csv.json").string() + " --out " +
                          (dir_ / "ingested").string());
  };
  auto r = with("train");
  EXPECT_TRUE(one_error_line(r)) << r.err;
  EXPECT_NE(r.err.find("data.csv"), std::string::npos);
  r = with("ingest --input " + (dir_ / "run" / "data.csv").string() + " --taxonomy " +
           (dir_ / "run" / "taxonomy.csv").string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "ingested" / "data.csv"), slurp(dir_ / "run" / "data.csv"));
  r = with("train");
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "ingested" / "model_supervised.ckpt"));
}

TEST_F(Cli, CheckpointFromAnotherShapeIsRefused) {
  ASSERT_EQ(run("train").status, 0);
  nlohmann::json cfg = nlohmann::json::parse(kTinyConfig);
  cfg["data"]["window_length"] = 40;
  std::ofstream(dir_ / "short.json") << cfg.dump();
  const auto r = shlb(dir_, "evaluate --method supervised --config " +
                                (dir_ / "short.json").string() + " --out " +
                                (dir_ / "run").string());
  EXPECT_TRUE(one_error_line(r)) << r.err;
  EXPECT_NE(r.err.find("mismatch"), std::string::npos);
}

}  // namespace
}  // namespace shlb