#include "ffoundry/jsonl.hpp"

#include <fstream>

#include "ffoundry/error.hpp"

namespace ffoundry::jsonl {

std::vector<json> read_file(const std::filesystem::path& path) {
  std::vector<json> out;
  for_each(path, [&](const json& j) { out.push_back(j); });
  return out;
}

void for_each(const std::filesystem::path& path,
              const std::function<void(const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::IoFailure, path.string() + ":" +
                                            std::to_string(lineno) +
                                            ": invalid JSON");
    }
    fn(j);
  }
}

std::string to_line(const json& record) { return record.dump(); }

void write_file(const std::filesystem::path& path,
                const std::vector<json>& records) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    for (const auto& r : records) out << r.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ffoundry::jsonl
