#include "ffoundry/config.hpp"

#include <cstdlib>
#include <fstream>

namespace ffoundry {

namespace {

const char* kRoleNames[] = {
    "proto_generator", "refiner",          "verifier",       "embedder",
    "dedup_checker",   "researcher",       "forecaster",     "subq_decomposer",
    "resolver_a",      "resolver_b",       "resolver_c",     "resolver_tiebreak",
    "topic_labeler",   "pair_scorer",
};

BackendConfig mock_backend(const std::string& id) {
  BackendConfig b;
  b.backend_id = id;
  b.kind = "mock";
  b.max_retries = 3;
  b.retry_backoff_ms = {0, 0, 0};  // mock faults need no real backoff
  b.requests_per_minute = 100000;
  b.max_in_flight = 8;
  return b;
}

}  // namespace

UtcTime RunConfig::now() const {
  return clock == "system" ? UtcTime::now() : fixed_now;
}

std::string RunConfig::role(const std::string& name) const {
  auto it = roles.find(name);
  if (it != roles.end()) return it->second;
  throw Error(ErrorCode::ConfigInvalid, "role not configured: " + name);
}

RunConfig RunConfig::defaults_mock() {
  RunConfig c;
  c.backends["mock"] = mock_backend("mock");
  c.backends["mock_tiebreak"] = mock_backend("mock_tiebreak");
  for (const char* name : kRoleNames) c.roles[name] = "mock";
  c.roles["resolver_tiebreak"] = "mock_tiebreak";
  return c;
}

json interpolate_env(const json& j) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    std::string out;
    for (size_t i = 0; i < s.size();) {
      if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
        size_t close = s.find('}', i + 2);
        if (close != std::string::npos) {
          const std::string var = s.substr(i + 2, close - i - 2);
          const char* v = std::getenv(var.c_str());
          out += v ? v : "";
          i = close + 1;
          continue;
        }
      }
      out += s[i++];
    }
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it)
      out[it.key()] = interpolate_env(it.value());
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(interpolate_env(v));
    return out;
  }
  return j;
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in)
    throw Error(ErrorCode::ConfigInvalid, "cannot read config: " + file.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw Error(ErrorCode::ConfigInvalid, "config is not valid JSON: " + file.string());
  return from_json(interpolate_env(j));
}

json RunConfig::to_json() const {
  json j;
  j["window"] = {{"start", window.start.to_iso8601()},
                 {"end", window.end.to_iso8601()}};
  j["research_date"] = research_date.to_iso8601();
  j["resolution_date"] = resolution_date.to_iso8601();
  j["clock"] = clock;
  j["fixed_now"] = fixed_now.to_iso8601();
  j["root_seed"] = root_seed;
  j["backend_profile"] = backend_profile;
  json backends_json = json::object();
  for (const auto& [id, b] : backends) backends_json[id] = b.to_json();
  j["backends"] = backends_json;
  j["roles"] = roles;
  j["prompts_dir"] = prompts_dir.string();
  if (!fixtures_dir.empty()) j["fixtures_dir"] = fixtures_dir.string();
  if (!article_fixture_dir.empty())
    j["article_fixture_dir"] = article_fixture_dir.string();
  json sources = json::array();
  for (const auto& s : seed_sources) {
    json sj;
    sj["type"] = s.type;
    if (!s.path.empty()) sj["path"] = s.path;
    sj["lookback_days"] = s.lookback_days;
    sj["max_seeds"] = s.max_seeds;
    if (!s.diversity_keys.empty()) sj["diversity_keys"] = s.diversity_keys;
    sources.push_back(sj);
  }
  j["seed_sources"] = sources;
  j["ingest"] = {{"gdelt_endpoint", ingest.gdelt_endpoint},
                 {"mediacloud_endpoint", ingest.mediacloud_endpoint},
                 {"mediacloud_key_env", ingest.mediacloud_key_env},
                 {"max_content_chars", ingest.max_content_chars},
                 {"concurrent_fetches", ingest.concurrent_fetches}};
  j["research_budget"] = research_budget;
  j["dedup_similarity"] = dedup_similarity;
  j["dedup_min_points"] = dedup_min_points;
  j["dedup_max_pairs_per_cluster"] = dedup_max_pairs_per_cluster;
  j["embed_batch_size"] = embed_batch_size;
  j["reliability_bins"] = reliability_bins;
  j["bootstrap_iterations"] = bootstrap_iterations;
  j["ci_mass"] = ci_mass;
  j["distribution_bins"] = distribution_bins;
  j["topic_k"] = topic_k;
  j["pairs_per_cluster"] = pairs_per_cluster;
  j["label_sample"] = label_sample;
  j["subq_sample"] = subq_sample;
  j["forecast_strategy"] = forecast_strategy;
  j["adjudication"] = adjudication;
  j["workers"] = workers;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c = defaults_mock();
  try {
    if (j.contains("window")) {
      c.window.start =
          UtcTime::parse_or_throw(j.at("window").at("start").get<std::string>());
      c.window.end =
          UtcTime::parse_or_throw(j.at("window").at("end").get<std::string>());
      if (!(c.window.start < c.window.end))
        throw Error(ErrorCode::ConfigInvalid, "run window must end after it starts");
    }
    if (j.contains("research_date"))
      c.research_date = UtcTime::parse_or_throw(j.at("research_date").get<std::string>());
    if (j.contains("resolution_date"))
      c.resolution_date =
          UtcTime::parse_or_throw(j.at("resolution_date").get<std::string>());
    if (j.contains("clock")) c.clock = j.at("clock").get<std::string>();
    if (c.clock != "fixed" && c.clock != "system")
      throw Error(ErrorCode::ConfigInvalid, "clock must be fixed or system");
    if (j.contains("fixed_now"))
      c.fixed_now = UtcTime::parse_or_throw(j.at("fixed_now").get<std::string>());
    c.root_seed = j.value("root_seed", c.root_seed);
    c.backend_profile = j.value("backend_profile", c.backend_profile);
    if (j.contains("backends")) {
      for (auto it = j.at("backends").begin(); it != j.at("backends").end(); ++it) {
        BackendConfig b = BackendConfig::from_json(it.value());
        if (b.backend_id.empty()) b.backend_id = it.key();
        c.backends[it.key()] = b;
      }
    }
    if (j.contains("roles")) {
      for (auto it = j.at("roles").begin(); it != j.at("roles").end(); ++it)
        c.roles[it.key()] = it.value().get<std::string>();
    }
    for (const auto& [role, backend] : c.roles) {
      if (!c.backends.count(backend))
        throw Error(ErrorCode::ConfigInvalid,
                    "role " + role + " names unknown backend " + backend);
    }
    if (j.contains("prompts_dir"))
      c.prompts_dir = j.at("prompts_dir").get<std::string>();
    if (j.contains("fixtures_dir"))
      c.fixtures_dir = j.at("fixtures_dir").get<std::string>();
    if (j.contains("article_fixture_dir"))
      c.article_fixture_dir = j.at("article_fixture_dir").get<std::string>();
    if (j.contains("seed_sources")) {
      c.seed_sources.clear();
      for (const auto& sj : j.at("seed_sources")) {
        SeedSourceConfig s;
        s.type = sj.at("type").get<std::string>();
        if (s.type != "text" && s.type != "gdelt" && s.type != "mediacloud")
          throw Error(ErrorCode::ConfigInvalid, "unknown seed source: " + s.type);
        s.path = sj.value("path", "");
        s.lookback_days = sj.value("lookback_days", s.lookback_days);
        s.max_seeds = sj.value("max_seeds", s.max_seeds);
        if (sj.contains("diversity_keys"))
          s.diversity_keys = sj.at("diversity_keys").get<std::vector<std::string>>();
        c.seed_sources.push_back(s);
      }
    }
    if (j.contains("ingest")) {
      const auto& ij = j.at("ingest");
      c.ingest.gdelt_endpoint = ij.value("gdelt_endpoint", c.ingest.gdelt_endpoint);
      c.ingest.mediacloud_endpoint =
          ij.value("mediacloud_endpoint", c.ingest.mediacloud_endpoint);
      c.ingest.mediacloud_key_env =
          ij.value("mediacloud_key_env", c.ingest.mediacloud_key_env);
      c.ingest.max_content_chars =
          ij.value("max_content_chars", c.ingest.max_content_chars);
      c.ingest.concurrent_fetches =
          ij.value("concurrent_fetches", c.ingest.concurrent_fetches);
    }
    c.research_budget = j.value("research_budget", c.research_budget);
    c.dedup_similarity = j.value("dedup_similarity", c.dedup_similarity);
    c.dedup_min_points = j.value("dedup_min_points", c.dedup_min_points);
    c.dedup_max_pairs_per_cluster =
        j.value("dedup_max_pairs_per_cluster", c.dedup_max_pairs_per_cluster);
    c.embed_batch_size = j.value("embed_batch_size", c.embed_batch_size);
    c.reliability_bins = j.value("reliability_bins", c.reliability_bins);
    c.bootstrap_iterations = j.value("bootstrap_iterations", c.bootstrap_iterations);
    c.ci_mass = j.value("ci_mass", c.ci_mass);
    c.distribution_bins = j.value("distribution_bins", c.distribution_bins);
    c.topic_k = j.value("topic_k", c.topic_k);
    c.pairs_per_cluster = j.value("pairs_per_cluster", c.pairs_per_cluster);
    c.label_sample = j.value("label_sample", c.label_sample);
    c.subq_sample = j.value("subq_sample", c.subq_sample);
    c.forecast_strategy = j.value("forecast_strategy", c.forecast_strategy);
    c.adjudication = j.value("adjudication", c.adjudication);
    c.workers = j.value("workers", c.workers);
    if (c.research_budget < 1 || c.workers < 1)
      throw Error(ErrorCode::ConfigInvalid, "budget and workers must be positive");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
  }
  return c;
}

}  // namespace ffoundry
