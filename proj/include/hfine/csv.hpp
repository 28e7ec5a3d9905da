#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace hfine {

// Locale-independent shortest-round-trip number formatting (byte-identical
// output for identical inputs).
std::string format_number(double v);

// CSV with '#'-prefixed header lines carrying units, the config hash and the
// column definitions; comma separated, '.' decimal.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& command, std::uint64_t config_hash,
            std::span<const std::string> comment_lines, std::span<const std::string> columns);

  void row(std::span<const double> values);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t n_columns_;
};

// key=value text block (reports, manifests)
class ReportWriter {
 public:
  explicit ReportWriter(const std::string& path);
  void line(const std::string& text);
  void kv(const std::string& key, double value);
  void kv(const std::string& key, const std::string& value);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace hfine
