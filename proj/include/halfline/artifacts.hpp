#pragma once

// Output files: RFC-4180 CSV with 17 significant digits, JSON documents and
// timestamped run directories.

#include <filesystem>
#include <string>
#include <vector>

namespace halfline {

/// "%.17g"; non-finite values print as nan, inf, -inf.
std::string format_number(double value);
/// Quotes a field when it holds a comma, quote or line break.
std::string csv_field(const std::string& text);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(const std::vector<double>& values);
  void add_row(const std::vector<std::string>& fields);
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

/// UTC time as 2026-01-31T12:00:00Z.
std::string utc_timestamp();

/// Creates root/<command>-<UTC yyyymmddTHHMMSS>-<hash prefix>, adding -1, -2, ... when taken.
std::filesystem::path make_run_directory(const std::filesystem::path& root, const std::string& command,
                                         const std::string& config_hash);

}  // namespace halfline
