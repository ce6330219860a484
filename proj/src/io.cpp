#include "ofdmtoa/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include <unistd.h>

namespace ofdmtoa {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 12);
  return std::string(buf, r.ptr);
}

CsvTable::CsvTable(const RunStamp& stamp, std::vector<std::string> header) : columns_(header.size()) {
  text_ = "# config_hash=" + stamp.config_hash + ",seed=" + std::to_string(stamp.seed) +
          ",tool_version=" + stamp.tool_version + "\n";
  for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
  text_ += "\n";
}

CsvTable& CsvTable::add(double x) {
  row_.push_back(format_number(x));
  return *this;
}

CsvTable& CsvTable::add(const std::string& s) {
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    row_.push_back(q + "\"");
  } else {
    row_.push_back(s);
  }
  return *this;
}

CsvTable& CsvTable::add(std::uint64_t x) {
  row_.push_back(std::to_string(x));
  return *this;
}

void CsvTable::end_row() {
  if (row_.size() != columns_) throw std::logic_error("CSV row has the wrong number of fields");
  for (std::size_t i = 0; i < row_.size(); ++i) text_ += (i ? "," : "") + row_[i];
  text_ += "\n";
  row_.clear();
}

std::string CsvTable::str() const { return text_; }

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename into " + path + ": " + ec.message());
  }
}

}  // namespace ofdmtoa
