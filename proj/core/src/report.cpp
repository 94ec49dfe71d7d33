#include "mfclab/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mfc {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void Csv::add_row(std::vector<std::string> cells) {
  if (cells.size() != header.size())
    throw std::invalid_argument("Csv: row width does not match the header");
  rows.push_back(std::move(cells));
}

std::string Csv::serialize() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
  return out.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw std::runtime_error("read failed for " + path);
  return buf.str();
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string write_manifest(const std::string& dir, std::vector<ManifestEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return std::tie(a.role, a.name) < std::tie(b.role, b.name);
  });
  std::ostringstream out;
  for (const auto& e : entries) {
    const std::string bytes = read_text_file(e.path);
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    out << e.role << "  fnv1a64:" << hash << "  " << bytes.size() << "  " << e.name << '\n';
  }
  const std::string content = out.str();
  write_text_file((fs::path(dir) / "MANIFEST").string(), content);
  return content;
}

namespace {

std::string json_num(const ordered_json& j) {
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_number()) return format_number(j.get<double>());
  return j.is_string() ? j.get<std::string>() : j.dump();
}

struct ReportRow {
  std::string run;
  std::string experiment;
  std::string rate_name;
  std::string slope, ci_lo, ci_hi;
  std::string check_name;
  std::string check_passed;
};

}  // namespace

void consolidate_reports(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("consolidate_reports: not a directory: " + dir);

  std::vector<fs::path> summaries;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "summary.json")
      summaries.push_back(entry.path());
  }
  if (summaries.empty())
    throw std::invalid_argument("consolidate_reports: no summary.json under " + dir);
  std::sort(summaries.begin(), summaries.end());

  // One row per fitted rate and one per check; runs without either still get
  // a bare row so every summary is visible in the table.
  std::vector<ReportRow> rows;
  for (const auto& path : summaries) {
    ordered_json j = ordered_json::parse(read_text_file(path.string()));
    ReportRow base;
    base.run = fs::relative(path.parent_path(), dir).generic_string();
    if (base.run == ".") base.run = "";
    base.experiment = j.value("experiment", std::string("?"));
    bool emitted = false;
    if (j.contains("rates")) {
      for (const auto& r : j["rates"]) {
        ReportRow row = base;
        row.rate_name = r.value("name", std::string("rate"));
        if (r.contains("slope")) row.slope = json_num(r["slope"]);
        if (r.contains("ci_lo")) row.ci_lo = json_num(r["ci_lo"]);
        if (r.contains("ci_hi")) row.ci_hi = json_num(r["ci_hi"]);
        rows.push_back(row);
        emitted = true;
      }
    }
    if (j.contains("checks")) {
      for (const auto& c : j["checks"]) {
        ReportRow row = base;
        row.check_name = c.value("name", std::string("check"));
        row.check_passed = c.value("passed", false) ? "pass" : "fail";
        rows.push_back(row);
        emitted = true;
      }
    }
    if (!emitted) rows.push_back(base);
  }

  Csv csv;
  csv.header = {"run", "experiment", "rate", "slope", "ci_lo", "ci_hi", "check", "outcome"};
  for (const auto& r : rows)
    csv.add_row({r.run, r.experiment, r.rate_name, r.slope, r.ci_lo, r.ci_hi, r.check_name,
                 r.check_passed});
  write_text_file((fs::path(dir) / "report.csv").string(), csv.serialize());

  std::ostringstream md;
  md << "# Run report\n\n";
  md << "| run | experiment | rate | slope | ci_lo | ci_hi | check | outcome |\n";
  md << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows)
    md << "| " << r.run << " | " << r.experiment << " | " << r.rate_name << " | " << r.slope
       << " | " << r.ci_lo << " | " << r.ci_hi << " | " << r.check_name << " | " << r.check_passed
       << " |\n";
  write_text_file((fs::path(dir) / "report.md").string(), md.str());
}

}  // namespace mfc
