#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shlb/csv.h"

namespace shlb {

struct ReportSection {
  std::string framework;
  std::string experiment;
  CsvTable table;
};

struct RunReport {
  nlohmann::json config;
  std::string fingerprint;
  std::vector<std::uint64_t> seeds;
  // framework -> experiment -> table (cells kept verbatim)
  std::map<std::string, std::map<std::string, CsvTable>> results;

  bool operator==(const RunReport&) const = default;
};

// Throws InvalidArgument on no sections or two differing tables under the
// same (framework, experiment).
RunReport assemble_report(const nlohmann::json& config, std::vector<std::uint64_t> seeds,
                          std::span<const ReportSection> sections);

// Top-level CSVs of a run directory. Tables with a framework column are split
// per framework; history_<framework>_<routine>.csv becomes experiment
// history_<routine>; local_attr_* files are left out; anything else is filed
// under framework "all".
std::vector<ReportSection> collect_sections(const std::filesystem::path& dir);

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);
std::string emit_report(const RunReport& report);
// Throws ParseError.
RunReport parse_report(std::string_view text);

}  // namespace shlb
