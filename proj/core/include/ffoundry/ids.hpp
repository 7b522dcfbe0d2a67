#pragma once

#include <string>

namespace ffoundry {

// Full SHA-256 as lowercase hex.
std::string sha256_hex(const std::string& data);

// Stage-prefixed content id: prefix + first 16 hex chars of SHA-256.
// Deterministic, so reruns over identical inputs produce identical ids.
std::string content_id(const std::string& prefix, const std::string& data);

inline std::string seed_id(const std::string& source, const std::string& content) {
  return content_id("s_", source + "\x1f" + content);
}

}  // namespace ffoundry
