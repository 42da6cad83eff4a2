#pragma once

#include <json.hpp>
#include <string>

namespace dlab {

// "<semver>+<git hash>", fixed at build time.
std::string version_string();

// UTC, ISO 8601 with seconds.
std::string timestamp_utc();

// Writes to "<path>.tmp.<pid>" and renames over path.
void write_atomic(const std::string& path, const std::string& content);

// JSON text with every double in shortest round-trip form (17 significant digits at most).
std::string dump_json(const nlohmann::json& j);

// One CSV row per element of an array of flat objects; columns are the union of keys in
// first-seen order. Nested values are written as JSON text.
std::string records_to_csv(const nlohmann::json& records);

}  // namespace dlab
