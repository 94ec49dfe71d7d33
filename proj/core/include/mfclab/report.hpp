#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mfc {

// Shared numeric cell formatting: %.17g, which round-trips doubles exactly
// and keeps artifacts byte-stable across reruns.
std::string format_number(double x);

// Rectangular CSV payload; every row must match the header width.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells);
  std::string serialize() const;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

// FNV-1a over the raw bytes, 64-bit variant.
std::uint64_t fnv1a64(std::string_view bytes);

struct ManifestEntry {
  std::string role;  // "in" or "out"
  std::string name;  // name recorded in the listing
  std::string path;  // file whose bytes are hashed
};

// Writes dir/MANIFEST with one line per entry, sorted by (role, name):
// "role  fnv1a64:<16 hex>  <byte count>  <name>".  Returns the content.
std::string write_manifest(const std::string& dir, std::vector<ManifestEntry> entries);

// Merges every summary.json found under dir (recursive, sorted by path) into
// dir/report.md and dir/report.csv: one row per run with the experiment
// label, fitted rates with intervals, and check outcomes.  Wall time is
// dropped, so a rerun over the same summaries is byte-identical.  Throws
// when the directory holds no summary.
void consolidate_reports(const std::string& dir);

}  // namespace mfc
