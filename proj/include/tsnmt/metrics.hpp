#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace tsnmt {

struct MetricsRecord {
  std::string run;
  std::uint64_t update = 0;
  double t = 0.0;  // seconds since the writer was opened
  std::string metric;
  double value = 0.0;
  std::string method;

  std::string to_json() const;
  bool operator==(const MetricsRecord&) const = default;
};

// Append-only JSONL stream, one record per line, flushed per record.
class MetricsWriter {
 public:
  MetricsWriter() = default;  // in-memory only
  MetricsWriter(const std::filesystem::path& path, std::string run, std::string method, bool append = true);

  void write(std::uint64_t update, const std::string& metric, double value);
  void write(const MetricsRecord& r);
  const std::vector<MetricsRecord>& records() const { return records_; }
  const std::string& run() const { return run_; }
  const std::string& method() const { return method_; }

 private:
  std::ofstream out_;
  std::string run_;
  std::string method_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::uint64_t last_update_ = 0;
  std::vector<MetricsRecord> records_;
};

struct MetricsReadResult {
  std::vector<MetricsRecord> records;
  std::size_t malformed = 0;
};

// Parses line by line; unparseable lines (e.g. a truncated tail) are counted.
MetricsReadResult read_metrics(const std::filesystem::path& path);

}  // namespace tsnmt
