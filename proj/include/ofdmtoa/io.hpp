#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ofdmtoa {

/// 12 significant digits, locale independent,
/// "nan"/"inf" for non-finite values.
std::string format_number(double x);

/// Provenance written as the first line of every CSV and into every JSON output.
struct RunStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version;
};

/// Comma-separated table with a "# key=value,..." metadata line and a header row.
class CsvTable {
 public:
  CsvTable(const RunStamp& stamp, std::vector<std::string> header);
  CsvTable& add(double x);
  CsvTable& add(const std::string& s);
  CsvTable& add(std::uint64_t x);
  /// Ends the current row; throws if it has the wrong number of fields.
  void end_row();
  std::string str() const;

 private:
  std::string text_;
  std::vector<std::string> row_;
  std::size_t columns_;
};

/// Writes via a temporary sibling file and rename, so readers never see partial output.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace ofdmtoa
