#include "shlb/report.h"

#include <algorithm>

#include "shlb/config.h"
#include "shlb/error.h"

namespace shlb {

using nlohmann::json;

RunReport assemble_report(const json& config, std::vector<std::uint64_t> seeds,
                          std::span<const ReportSection> sections) {
  if (sections.empty()) throw InvalidArgument("report: no experiment outputs found");
  RunReport r;
  r.config = config;
  r.fingerprint = config_fingerprint(config);
  r.seeds = std::move(seeds);
  for (const auto& s : sections) {
    auto& slot = r.results[s.framework];
    const auto [it, inserted] = slot.emplace(s.experiment, s.table);
    if (!inserted && !(it->second == s.table)) {
      throw InvalidArgument("report: conflicting duplicate key (" + s.framework + ", " +
                            s.experiment + ")");
    }
  }
  return r;
}

std::vector<ReportSection> collect_sections(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ReportSection> out;
  for (const auto& path : files) {
    const std::string stem = path.stem().string();
    if (stem.rfind("local_attr_", 0) == 0 || stem == "data" || stem == "taxonomy") continue;
    CsvTable table = read_csv_file(path);
    if (stem.rfind("history_", 0) == 0) {
      const auto rest = stem.substr(8);
      const auto cut = rest.find('_');
      const std::string framework = rest.substr(0, cut);
      const std::string routine = cut == std::string::npos ? "train" : rest.substr(cut + 1);
      out.push_back({framework, "history_" + routine, std::move(table)});
      continue;
    }
    const auto column = table.find_column("framework");
    if (!column) {
      out.push_back({"all", stem, std::move(table)});
      continue;
    }
    std::map<std::string, CsvTable> split;
    for (const auto& row : table.rows) {
      auto& part = split[row[*column]];
      part.header = table.header;
      part.rows.push_back(row);
    }
    for (auto& [framework, part] : split) out.push_back({framework, stem, std::move(part)});
  }
  return out;
}

json report_to_json(const RunReport& report) {
  json results = json::object();
  for (const auto& [framework, experiments] : report.results) {
    for (const auto& [experiment, table] : experiments) {
      results[framework][experiment] = {{"header", table.header}, {"rows", table.rows}};
    }
  }
  return {{"fingerprint", report.fingerprint},
          {"seeds", report.seeds},
          {"config", report.config},
          {"results", results}};
}

RunReport report_from_json(const json& doc) {
  RunReport r;
  try {
    r.fingerprint = doc.at("fingerprint").get<std::string>();
    r.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    r.config = doc.at("config");
    for (const auto& [framework, experiments] : doc.at("results").items()) {
      for (const auto& [experiment, table] : experiments.items()) {
        CsvTable t;
        t.header = table.at("header").get<std::vector<std::string>>();
        t.rows = table.at("rows").get<std::vector<std::vector<std::string>>>();
        r.results[framework][experiment] = std::move(t);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError("report.json", 0, e.what());
  }
  return r;
}

std::string emit_report(const RunReport& report) { return report_to_json(report).dump(2) + "\n"; }

RunReport parse_report(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("report.json", 0, e.what());
  }
  return report_from_json(doc);
}

}  // namespace shlb
