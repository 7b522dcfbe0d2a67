#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ffoundry/domain.hpp"
#include "ffoundry/error.hpp"
#include "ffoundry/ids.hpp"
#include "ffoundry/rng.hpp"
#include "ffoundry/time.hpp"

using namespace ffoundry;

namespace {

Question sample_question(UtcTime start, UtcTime end) {
  return Question::make("p_0123456789abcdef", "Will it happen by year end?",
                        "Context for the question.",
                        "Resolves YES when the source confirms it.", start, end,
                        UtcTime::from_ymd(2025, 10, 2));
}

ResolutionWindow run_window() {
  return {UtcTime::from_ymd(2025, 10, 15),
          UtcTime::from_ymd(2025, 12, 31, 23, 59, 59)};
}

}  // namespace

TEST_CASE("utc time parses offsets chronologically") {
  auto z = UtcTime::parse("2025-10-15T12:00:00Z");
  auto plus2 = UtcTime::parse("2025-10-15T14:00:00+02:00");
  REQUIRE(z);
  REQUIRE(plus2);
  CHECK(*z == *plus2);  // same instant, different rendering

  auto date_only = UtcTime::parse("2025-10-15");
  REQUIRE(date_only);
  CHECK(date_only->to_iso8601() == "2025-10-15T00:00:00Z");

  CHECK_FALSE(UtcTime::parse("2025-10-15T12:00:00"));  // offset required
  CHECK_FALSE(UtcTime::parse("not a date"));
  CHECK_FALSE(UtcTime::parse("2025-13-40"));

  auto t = UtcTime::parse("2025-01-02T03:04:05Z");
  CHECK(t->to_iso8601() == "2025-01-02T03:04:05Z");
}

TEST_CASE("content ids are deterministic and stage-prefixed") {
  const auto a = seed_id("text", "same content");
  const auto b = seed_id("text", "same content");
  const auto c = seed_id("gdelt", "same content");
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.substr(0, 2) == "s_");
  CHECK(a.size() == 2 + 16);
}

TEST_CASE("seed construction enforces non-empty content") {
  CHECK_THROWS_AS((void)Seed::make(SeedSource::text, "", "", UtcTime()), Error);
}

TEST_CASE("validate_question worked examples") {
  const auto w = run_window();

  SUBCASE("well formed inside the run window") {
    auto q = sample_question(UtcTime::from_ymd(2025, 10, 20),
                             UtcTime::from_ymd(2025, 12, 1));
    CHECK(validate_question(q, w).ok());
  }

  SUBCASE("empty window") {
    auto t = UtcTime::from_ymd(2025, 11, 1);
    auto q = sample_question(t, t);
    auto report = validate_question(q, w);
    REQUIRE_FALSE(report.ok());
    bool found = false;
    for (const auto& v : report.violations) found = found || v == "empty window";
    CHECK(found);
  }

  SUBCASE("outside the run window") {
    auto q = sample_question(UtcTime::from_ymd(2025, 10, 20),
                             UtcTime::from_ymd(2026, 1, 5));
    auto report = validate_question(q, w);
    REQUIRE_FALSE(report.ok());
    bool found = false;
    for (const auto& v : report.violations)
      found = found || v == "outside run window";
    CHECK(found);
  }

  SUBCASE("missing text fields accumulate violations") {
    auto q = sample_question(UtcTime::from_ymd(2025, 10, 20),
                             UtcTime::from_ymd(2025, 12, 1));
    q.background.clear();
    q.resolution_criteria.clear();
    CHECK(validate_question(q, w).violations.size() == 2);
  }
}

TEST_CASE("lifecycle transitions advance one step and reject skips") {
  LifecycleStore store;
  store.start("q_1", LifecycleState::refined);

  CHECK(store.advance("q_1", LifecycleState::refined, LifecycleState::verified) ==
        LifecycleState::verified);
  // re-applying the same transition target is a no-op
  CHECK(store.advance("q_1", LifecycleState::verified, LifecycleState::verified) ==
        LifecycleState::verified);
  // skipping states is illegal
  CHECK_THROWS_AS(
      store.advance("q_1", LifecycleState::verified, LifecycleState::resolved),
      Error);
  // reversals are illegal
  CHECK_THROWS_AS(
      store.advance("q_1", LifecycleState::verified, LifecycleState::refined),
      Error);

  store.reject("q_1", "verify", "parked");
  CHECK(store.rejected("q_1"));
  CHECK_THROWS_AS(
      store.advance("q_1", LifecycleState::verified, LifecycleState::deduped),
      Error);
}

TEST_CASE("lifecycle store round-trips through json") {
  LifecycleStore store;
  store.start("q_1", LifecycleState::verified);
  store.start("q_2", LifecycleState::proto);
  store.reject("q_2", "refine", "outside run window");
  auto restored = LifecycleStore::from_json(store.to_json());
  CHECK(restored.state_of("q_1") == LifecycleState::verified);
  CHECK(restored.rejected("q_2"));
}

TEST_CASE("serialization round trip across domain types") {
  Rng rng(99);
  for (int i = 0; i < 50; ++i) {
    Seed s = Seed::make(
        i % 2 ? SeedSource::gdelt : SeedSource::text,
        "content " + std::to_string(rng.next_u64()),
        i % 3 ? "https://example.org/" + std::to_string(i) : "",
        UtcTime(static_cast<std::int64_t>(rng.next_below(2000000000))));
    auto s2 = Seed::from_json(s.to_json());
    CHECK(s2.id == s.id);
    CHECK(s2.content == s.content);
    CHECK(s2.url == s.url);
    CHECK(s2.retrieved_at == s.retrieved_at);
    CHECK(s2.to_json() == s.to_json());

    ProtoQuestion p = ProtoQuestion::make(
        s.id, "Will event " + std::to_string(i) + " occur?", "because");
    CHECK(ProtoQuestion::from_json(p.to_json()).to_json() == p.to_json());

    Question q = sample_question(UtcTime::from_ymd(2025, 10, 20),
                                 UtcTime::from_ymd(2025, 12, 1));
    CHECK(Question::from_json(q.to_json()).to_json() == q.to_json());
  }
}

TEST_CASE("unknown fields survive a round trip") {
  auto q = sample_question(UtcTime::from_ymd(2025, 10, 20),
                           UtcTime::from_ymd(2025, 12, 1));
  json j = q.to_json();
  j["operator_note"] = "added by a later tool";
  j["nested"] = {{"a", 1}, {"b", "x"}};
  auto q2 = Question::from_json(j);
  json round = q2.to_json();
  CHECK(round["operator_note"] == "added by a later tool");
  CHECK(round["nested"]["a"] == 1);
  CHECK(round["title"] == q.title);
}
