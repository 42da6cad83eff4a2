#include <dysonlab/linalg.hpp>
#include <dysonlab/report.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>
#include <vector>

#ifndef DYSONLAB_VERSION
#define DYSONLAB_VERSION "0.0.0+unknown"
#endif

namespace dlab {

std::string version_string() { return DYSONLAB_VERSION; }

std::string timestamp_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw config_error("cannot open '" + tmp + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw config_error("failed writing '" + tmp + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw config_error("cannot rename onto '" + path + "': " + ec.message());
  }
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

namespace {

std::string csv_cell(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  if (v.is_structured()) return csv_cell(nlohmann::json(v.dump()));
  return v.dump();
}

}  // namespace

std::string records_to_csv(const nlohmann::json& records) {
  std::vector<std::string> cols;
  for (const auto& r : records)
    for (auto it = r.begin(); it != r.end(); ++it)
      if (std::find(cols.begin(), cols.end(), it.key()) == cols.end()) cols.push_back(it.key());
  std::ostringstream os;
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << "\n";
  for (const auto& r : records) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) os << ",";
      if (r.contains(cols[c])) os << csv_cell(r.at(cols[c]));
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace dlab
