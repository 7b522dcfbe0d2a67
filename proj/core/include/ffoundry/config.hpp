#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ffoundry/domain.hpp"
#include "ffoundry/gateway.hpp"
#include "ffoundry/ingest.hpp"

namespace ffoundry {

struct SeedSourceConfig {
  std::string type;  // "text" | "gdelt" | "mediacloud"
  std::string path;  // text: file or directory
  int lookback_days = 14;
  int max_seeds = 100;
  std::vector<std::string> diversity_keys;
};

// One structured config file drives a run; ${VAR} in string values is
// replaced from the environment (secrets never live in the file itself).
// Command-line flags override individual fields.
struct RunConfig {
  // run identity and clocks
  ResolutionWindow window{UtcTime::from_ymd(2025, 10, 15),
                          UtcTime::from_ymd(2025, 12, 31, 23, 59, 59)};
  UtcTime research_date = UtcTime::from_ymd(2025, 10, 21);  // becomes fake_now
  UtcTime resolution_date = UtcTime::from_ymd(2026, 1, 15);
  std::string clock = "fixed";  // "fixed" pins now() for reproducible runs
  UtcTime fixed_now = UtcTime::from_ymd(2025, 10, 2);
  std::uint64_t root_seed = 20251002;

  std::string backend_profile = "mock";  // "mock" | "live"
  std::map<std::string, BackendConfig> backends;
  std::map<std::string, std::string> roles;

  std::filesystem::path prompts_dir = "prompts";
  std::filesystem::path fixtures_dir;  // recorded mock fixtures, optional
  std::filesystem::path article_fixture_dir;  // recorded harvests, optional

  std::vector<SeedSourceConfig> seed_sources;
  IngestConfig ingest;

  // stage knobs
  int research_budget = 40;
  double dedup_similarity = 0.85;
  int dedup_min_points = 2;
  int dedup_max_pairs_per_cluster = 200;
  int embed_batch_size = 32;
  int reliability_bins = 10;
  int bootstrap_iterations = 10000;
  double ci_mass = 0.95;
  int distribution_bins = 20;
  int topic_k = 12;
  int pairs_per_cluster = 15;
  int label_sample = 20;
  int subq_sample = 5;
  std::string forecast_strategy = "direct";  // "direct" | "subq"
  std::string adjudication = "tiebreak_final";
  int workers = 8;

  UtcTime now() const;
  std::string role(const std::string& name) const;

  static RunConfig defaults_mock();
  static RunConfig load(const std::filesystem::path& file);
  json to_json() const;
  static RunConfig from_json(const json& j);
};

// ${VAR} interpolation over every string in the tree.
json interpolate_env(const json& j);

}  // namespace ffoundry
