#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>

#include "ffoundry/error.hpp"
#include "ffoundry/ingest.hpp"

using namespace ffoundry;

namespace {

namespace fs = std::filesystem;

const fs::path kFixtures = fs::path(FFOUNDRY_SOURCE_DIR) / "tests" / "fixtures";

IngestConfig test_config() {
  IngestConfig c;
  c.gdelt_endpoint = "https://gdelt.test/api";
  c.mediacloud_endpoint = "https://mediacloud.test/api";
  c.max_content_chars = 60000;
  return c;
}

// Brute-force check of the stratified pick: counts per stratum must be as
// even as a round-robin allows, and every selected index unique.
void check_stratified(const std::vector<std::string>& strata,
                      const std::vector<std::size_t>& picked,
                      std::size_t max_count) {
  std::set<std::size_t> unique(picked.begin(), picked.end());
  CHECK(unique.size() == picked.size());
  CHECK(picked.size() == std::min(max_count, strata.size()));

  std::map<std::string, std::size_t> available, taken;
  for (const auto& s : strata) ++available[s];
  for (std::size_t i : picked) ++taken[strata[i]];
  std::size_t max_taken = 0, min_taken = SIZE_MAX;
  for (const auto& [name, avail] : available) {
    const std::size_t t = taken.count(name) ? taken[name] : 0;
    max_taken = std::max(max_taken, t);
    // a stratum may fall short only if it ran out of items
    if (t < min_taken && t < avail) min_taken = std::min(min_taken, t);
    if (t == avail) continue;
    min_taken = std::min(min_taken, t);
  }
  if (min_taken != SIZE_MAX) CHECK(max_taken - min_taken <= 1);
}

}  // namespace

TEST_CASE("stratified sampler is balanced, deterministic, and exhaustive") {
  std::vector<std::string> strata;
  for (int i = 0; i < 30; ++i) strata.push_back("type" + std::to_string(i % 5));

  auto picked = stratified_sample(strata, 10, 42);
  check_stratified(strata, picked, 10);
  std::set<std::string> covered;
  for (std::size_t i : picked) covered.insert(strata[i]);
  CHECK(covered.size() >= 3);  // 10 picks over 5 types covers them all here
  CHECK(covered.size() == 5);

  // deterministic under the same seed
  CHECK(stratified_sample(strata, 10, 42) == picked);
  // asking for more than available returns everything once
  CHECK(stratified_sample(strata, 100, 42).size() == 30);
}

TEST_CASE("fetch_gdelt samples across event types from the recorded fixture") {
  auto fetcher = std::make_shared<FixtureArticleFetcher>(kFixtures / "gdelt");
  SeedIngestor ingestor(test_config(), fetcher, UtcTime::from_ymd(2025, 10, 2), 7);
  SeedQuerySpec spec;
  spec.source = SeedSource::gdelt;
  spec.lookback_days = 14;
  spec.max_seeds = 10;
  spec.diversity_keys = {"eventtype"};

  auto result = ingestor.fetch_gdelt(spec);
  CHECK(result.seeds.size() == 10);
  for (const auto& s : result.seeds) {
    CHECK_FALSE(s.content.empty());
    CHECK(s.content.find("Officials commented") != std::string::npos);
    CHECK_FALSE(s.url.empty());
    CHECK(s.source == SeedSource::gdelt);
  }
  // sampling is stratified: with 10 picks over 5 types, at least 3 types appear
  std::set<std::string> types;
  for (const auto& s : result.seeds) {
    const auto pos = s.url.find("news.test/");
    types.insert(s.url.substr(pos + 10, s.url.find('/', pos + 10) - pos - 10));
  }
  CHECK(types.size() >= 3);

  // re-running over the identical fixture yields the identical seed set
  auto again = ingestor.fetch_gdelt(spec);
  REQUIRE(again.seeds.size() == result.seeds.size());
  for (std::size_t i = 0; i < result.seeds.size(); ++i)
    CHECK(again.seeds[i].id == result.seeds[i].id);

  // query params echo the lookback window
  bool saw_timespan = false;
  for (const auto& url : fetcher->requests())
    saw_timespan = saw_timespan || url.find("timespan=14d") != std::string::npos;
  CHECK(saw_timespan);
}

TEST_CASE("fetch_gdelt precondition and harvest failures") {
  auto fetcher = std::make_shared<FixtureArticleFetcher>(kFixtures / "gdelt");
  SeedIngestor ingestor(test_config(), fetcher, UtcTime::from_ymd(2025, 10, 2), 7);
  SeedQuerySpec spec;
  spec.source = SeedSource::gdelt;

  SUBCASE("max seeds zero") {
    spec.max_seeds = 0;
    CHECK_THROWS_AS((void)ingestor.fetch_gdelt(spec), Error);
  }
  SUBCASE("zero articles from upstream") {
    auto empty = std::make_shared<FixtureArticleFetcher>(kFixtures / "gdelt_empty");
    SeedIngestor ing(test_config(), empty, UtcTime::from_ymd(2025, 10, 2), 7);
    spec.max_seeds = 5;
    try {
      (void)ing.fetch_gdelt(spec);
      FAIL("expected EmptyHarvest");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyHarvest);
    }
  }
  SUBCASE("every article fetch 404s") {
    auto gone = std::make_shared<FixtureArticleFetcher>(kFixtures / "gdelt_404");
    SeedIngestor ing(test_config(), gone, UtcTime::from_ymd(2025, 10, 2), 7);
    spec.max_seeds = 5;
    try {
      (void)ing.fetch_gdelt(spec);
      FAIL("expected EmptyHarvest");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyHarvest);
    }
  }
}

TEST_CASE("fetch_mediacloud uses the key env var and echoes the lookback") {
  auto fetcher = std::make_shared<FixtureArticleFetcher>(kFixtures / "mediacloud");
  SeedIngestor ingestor(test_config(), fetcher, UtcTime::from_ymd(2025, 10, 2), 7);
  SeedQuerySpec spec;
  spec.source = SeedSource::mediacloud;
  spec.lookback_days = 5;
  spec.max_seeds = 5;

  SUBCASE("missing API key is a configuration failure") {
    ::unsetenv("MEDIACLOUD_API_KEY");
    try {
      (void)ingestor.fetch_mediacloud(spec);
      FAIL("expected UpstreamUnavailable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UpstreamUnavailable);
      CHECK(std::string(e.what()).find("MEDIACLOUD_API_KEY") != std::string::npos);
    }
  }

  SUBCASE("harvest with key present") {
    ::setenv("MEDIACLOUD_API_KEY", "test-key", 1);
    auto result = ingestor.fetch_mediacloud(spec);
    CHECK(result.seeds.size() == 5);
    for (const auto& s : result.seeds) {
      CHECK(s.source == SeedSource::mediacloud);
      CHECK(s.content.find("full text paragraph one") != std::string::npos);
    }
    bool saw_lookback = false;
    for (const auto& url : fetcher->requests())
      saw_lookback = saw_lookback || url.find("last_days=5") != std::string::npos;
    CHECK(saw_lookback);
    ::unsetenv("MEDIACLOUD_API_KEY");
  }
}

TEST_CASE("load_text_seeds: ids deterministic, empty files skipped") {
  const auto dir = kFixtures / "text_seeds";
  auto first = SeedIngestor::load_text_seeds(dir, UtcTime::from_ymd(2025, 10, 2));
  CHECK(first.seeds.size() == 3);  // the blank file is skipped
  CHECK(first.warnings.size() == 1);

  auto second = SeedIngestor::load_text_seeds(dir, UtcTime::from_ymd(2025, 10, 2));
  REQUIRE(second.seeds.size() == first.seeds.size());
  for (std::size_t i = 0; i < first.seeds.size(); ++i)
    CHECK(second.seeds[i].id == first.seeds[i].id);

  CHECK_THROWS_AS(
      (void)SeedIngestor::load_text_seeds(dir / "missing", UtcTime()), Error);
}

TEST_CASE("main-content extraction drops chrome and keeps paragraphs") {
  const std::string html =
      "<html><head><script>junk()</script><style>.x{}</style></head><body>"
      "<nav>site menu</nav>"
      "<article><p>Lead &amp; context.</p><p>Second paragraph.</p></article>"
      "</body></html>";
  const auto text = extract_main_text(html);
  CHECK(text.find("Lead & context.") != std::string::npos);
  CHECK(text.find("Second paragraph.") != std::string::npos);
  CHECK(text.find("junk") == std::string::npos);
  CHECK(text.find("site menu") == std::string::npos);
}

TEST_CASE("truncation cuts at a paragraph boundary with a marker") {
  std::string text;
  for (int i = 0; i < 40; ++i)
    text += "Paragraph " + std::to_string(i) + " with some filler words.\n\n";
  const auto out = truncate_at_paragraph(text, 300);
  CHECK(out.size() < 340);
  CHECK(out.find("[content truncated]") != std::string::npos);
  // the cut lands between paragraphs, not mid-word
  const auto before_marker = out.substr(0, out.find("\n\n[content truncated]"));
  CHECK(before_marker.back() == '.');

  CHECK(truncate_at_paragraph("short", 300) == "short");
}
