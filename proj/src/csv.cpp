#include "hfine/csv.hpp"

#include <charconv>
#include <cstdio>

#include "hfine/errors.hpp"

namespace hfine {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::string& command,
                     std::uint64_t config_hash, std::span<const std::string> comment_lines,
                     std::span<const std::string> columns)
    : path_(path), out_(path, std::ios::binary), n_columns_(columns.size()) {
  if (!out_) throw Error("cannot open output file '" + path + "'");
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx", static_cast<unsigned long long>(config_hash));
  out_ << "# hfine " << command << "\n# config_hash=" << hash_hex << "\n";
  for (const auto& line : comment_lines) out_ << "# " << line << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void CsvWriter::row(std::span<const double> values) {
  if (values.size() != n_columns_) throw Error("csv row width mismatch");
  for (std::size_t i = 0; i < values.size(); ++i)
    out_ << (i ? "," : "") << format_number(values[i]);
  out_ << '\n';
}

ReportWriter::ReportWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw Error("cannot open output file '" + path + "'");
}

void ReportWriter::line(const std::string& text) { out_ << text << '\n'; }

void ReportWriter::kv(const std::string& key, double value) {
  out_ << key << '=' << format_number(value) << '\n';
}

void ReportWriter::kv(const std::string& key, const std::string& value) {
  out_ << key << '=' << value << '\n';
}

}  // namespace hfine
