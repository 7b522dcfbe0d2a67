#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ffoundry::jsonl {

using json = nlohmann::json;

// One JSON object per line, UTF-8. Readers skip blank lines; writers emit
// keys in sorted order so identical records always serialize identically.
std::vector<json> read_file(const std::filesystem::path& path);
void for_each(const std::filesystem::path& path,
              const std::function<void(const json&)>& fn);

// Writes to a temp file in the same directory, then renames over the target.
void write_file(const std::filesystem::path& path, const std::vector<json>& records);

std::string to_line(const json& record);

}  // namespace ffoundry::jsonl
