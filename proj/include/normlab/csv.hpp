#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace normlab {

// Round-trip-exact float formatting (17 significant digits), '.' decimal
// point regardless of locale.
std::string format_double(double v);

// Minimal CSV emitter: UTF-8, comma separator, LF line endings, header always
// written. Output bytes depend only on the rows pushed, so identical runs
// produce identical files.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& fields);

  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(unsigned long long v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace normlab
