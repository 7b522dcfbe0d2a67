#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ffoundry/domain.hpp"
#include "ffoundry/error.hpp"

namespace ffoundry {

struct SeedQuerySpec {
  SeedSource source = SeedSource::gdelt;
  int lookback_days = 14;
  int max_seeds = 100;
  // Article-record fields used to stratify sampling (e.g. event type and
  // geography columns of the upstream API).
  std::vector<std::string> diversity_keys;
};

// Transport used both for the upstream APIs and for article fetches, so the
// whole harvest can be replayed from recorded fixtures.
class ArticleFetcher {
 public:
  struct Response {
    int status = 0;
    std::string body;
  };
  virtual ~ArticleFetcher() = default;
  virtual Response get(const std::string& url) = 0;
};

class LiveArticleFetcher : public ArticleFetcher {
 public:
  Response get(const std::string& url) override;
};

// Replays a recorded harvest: index.json in the fixture directory maps
// URL -> relative file. Unlisted URLs return 404. Requested URLs are logged
// so tests can assert on query parameters.
class FixtureArticleFetcher : public ArticleFetcher {
 public:
  explicit FixtureArticleFetcher(std::filesystem::path dir);
  Response get(const std::string& url) override;

  std::vector<std::string> requests() const;

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> index_;
  mutable std::mutex mu_;
  std::vector<std::string> requests_;
};

struct IngestConfig {
  std::string gdelt_endpoint =
      "https://api.gdeltproject.org/api/v2/doc/doc";
  std::string mediacloud_endpoint =
      "https://search.mediacloud.org/api/search/story-list";
  std::string mediacloud_key_env = "MEDIACLOUD_API_KEY";
  int max_content_chars = 60000;
  int concurrent_fetches = 4;  // politeness cap
};

struct IngestResult {
  std::vector<Seed> seeds;  // sorted by id
  std::vector<std::string> warnings;
};

class SeedIngestor {
 public:
  SeedIngestor(IngestConfig config, std::shared_ptr<ArticleFetcher> fetcher,
               UtcTime now, std::uint64_t sampler_seed);

  IngestResult fetch_gdelt(const SeedQuerySpec& spec);
  IngestResult fetch_mediacloud(const SeedQuerySpec& spec);

  static IngestResult load_text_seeds(const std::filesystem::path& path,
                                      UtcTime now, int max_content_chars = 60000);

 private:
  struct Candidate {
    std::string url;
    std::string stratum;
  };
  IngestResult harvest(const std::vector<Candidate>& candidates,
                       const SeedQuerySpec& spec);

  IngestConfig config_;
  std::shared_ptr<ArticleFetcher> fetcher_;
  UtcTime now_;
  std::uint64_t sampler_seed_;
};

// Stratified pick of up to max_count items: strata visited round-robin in
// sorted order, items inside a stratum in their listed order. Exposed so the
// brute-force oracle in tests can check it directly.
std::vector<std::size_t> stratified_sample(const std::vector<std::string>& strata,
                                           std::size_t max_count,
                                           std::uint64_t seed);

// Readability-style main-content extraction from HTML: drops script/style,
// prefers <article>/<main>, falls back to <p> blocks, then to a bare strip.
std::string extract_main_text(const std::string& html);

// Cuts at the last paragraph boundary within the limit and appends a marker.
std::string truncate_at_paragraph(const std::string& text, int max_chars);

}  // namespace ffoundry
