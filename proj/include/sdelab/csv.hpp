#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace sdelab {

// shortest round-trip decimal form; keeps outputs byte-stable across runs
std::string csv_cell(double v);
std::string csv_cell(long long v);

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void header(const std::vector<std::string>& cols);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::ofstream out_;
  size_t cols_ = 0;
};

uint64_t fnv1a64(const void* data, size_t len);
std::string fnv1a64_hex(const std::string& data);
std::string file_checksum(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace sdelab
