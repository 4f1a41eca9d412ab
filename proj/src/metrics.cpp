#include "tsnmt/metrics.hpp"

#include <json.hpp>

#include "tsnmt/errors.hpp"

namespace tsnmt {

std::string MetricsRecord::to_json() const {
  nlohmann::ordered_json j;
  j["run"] = run;
  j["update"] = update;
  j["t"] = t;
  j["metric"] = metric;
  j["value"] = value;
  j["method"] = method;
  return j.dump();
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, std::string run, std::string method, bool append)
    : run_(std::move(run)), method_(std::move(method)) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw DataError("cannot open metrics file " + path.string());
}

void MetricsWriter::write(std::uint64_t update, const std::string& metric, double value) {
  MetricsRecord r;
  r.run = run_;
  r.update = update;
  r.t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  r.metric = metric;
  r.value = value;
  r.method = method_;
  write(r);
}

void MetricsWriter::write(const MetricsRecord& r) {
  if (r.update < last_update_) throw ContractError("metrics: update count went backwards");
  last_update_ = r.update;
  records_.push_back(r);
  if (out_.is_open()) {
    out_ << r.to_json() << '\n';
    out_.flush();
  }
}

MetricsReadResult read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read metrics file " + path.string());
  MetricsReadResult res;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MetricsRecord r;
      r.run = j.at("run").get<std::string>();
      r.update = j.at("update").get<std::uint64_t>();
      r.t = j.at("t").get<double>();
      r.metric = j.at("metric").get<std::string>();
      r.value = j.at("value").get<double>();
      r.method = j.at("method").get<std::string>();
      res.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception&) {
      ++res.malformed;
    }
  }
  return res;
}

}  // namespace tsnmt
