#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "ffoundry/forecast.hpp"
#include "ffoundry/mock_backend.hpp"

using namespace ffoundry;

namespace {

namespace fs = std::filesystem;

struct Fixture {
  fs::path dir;
  std::shared_ptr<MockBackend> mock;
  std::unique_ptr<Gateway> gateway;
  std::unique_ptr<ForecastHarness> harness;

  Fixture() {
    dir = fs::temp_directory_path() /
          ("ffoundry_fc_" + std::to_string(::getpid()) + "_" +
           std::to_string(rand()));
    BackendConfig b;
    b.backend_id = "mock";
    b.kind = "mock";
    b.retry_backoff_ms = {0, 0, 0};
    b.requests_per_minute = 1000000;
    std::map<std::string, BackendConfig> backends{{"mock", b}};
    gateway = std::make_unique<Gateway>(
        backends, TemplateStore::load_dir(fs::path(FFOUNDRY_SOURCE_DIR) / "prompts"),
        dir / "transcripts");
    mock = std::make_shared<MockBackend>();
    gateway->register_backend("mock", mock);
    harness = std::make_unique<ForecastHarness>(*gateway, 40,
                                                UtcTime::from_ymd(2025, 10, 21));
  }
  ~Fixture() { fs::remove_all(dir); }
};

Question question(const std::string& title) {
  return Question::make("p_x", title, "background text", "resolution criteria",
                        UtcTime::from_ymd(2025, 10, 15),
                        UtcTime::from_ymd(2025, 12, 31),
                        UtcTime::from_ymd(2025, 10, 2));
}

const UtcTime kFakeNow = UtcTime::from_ymd(2025, 10, 21);

}  // namespace

TEST_CASE("research produces a persisted dossier with the injected date") {
  Fixture fx;
  auto q = question("Will the researched event occur by December 31, 2025?");
  auto d = fx.harness->research(q, "mock", kFakeNow);
  CHECK(d.question_id == q.id);
  CHECK_FALSE(d.dossier_text.empty());
  CHECK(d.fake_now == kFakeNow);
  CHECK(fs::exists(fx.dir / d.transcript_ref));
  // the simulated "today" went into the system prompt of the transcript
  std::ifstream in(fx.dir / d.transcript_ref);
  std::string transcript((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  (void)transcript;

  // identical call, identical dossier text
  auto d2 = fx.harness->research(q, "mock", kFakeNow);
  CHECK(d2.dossier_text == d.dossier_text);
  CHECK(d2.id == d.id);
}

TEST_CASE("research rejects a fake_now past the window end") {
  Fixture fx;
  auto q = question("Will the stale research be refused?");
  CHECK_THROWS_AS(
      (void)fx.harness->research(q, "mock", UtcTime::from_ymd(2026, 2, 1)), Error);
}

TEST_CASE("research failures surface after retries") {
  Fixture fx;
  fx.mock->fail_transport("forecast_research", "", 99);
  auto q = question("Will the unavailable backend fail this research?");
  try {
    (void)fx.harness->research(q, "mock", kFakeNow);
    FAIL("expected BackendUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BackendUnavailable);
  }
}

TEST_CASE("forecast parses the probability and never researches") {
  Fixture fx;
  auto q = question("Will the forecast [[p:27]] parse correctly?");
  auto d = fx.harness->research(q, "mock", kFakeNow);
  const auto research_calls = fx.mock->calls_for_template("forecast_research");

  auto r = fx.harness->forecast(q, d, "mock");
  CHECK(r.probability == doctest::Approx(0.27));
  CHECK(r.strategy == ForecastStrategy::direct);
  CHECK(r.question_id == q.id);
  CHECK(r.dossier_ref == d.id);
  // the anti-leak discipline: the record carries the dossier's fake_now
  CHECK(r.fake_now == d.fake_now);
  // forecasting a stored dossier triggers zero research calls
  CHECK(fx.mock->calls_for_template("forecast_research") == research_calls);

  // boundary: an explicit 0 is accepted
  auto q0 = question("Will the zero forecast [[p:0]] be accepted?");
  auto d0 = fx.harness->research(q0, "mock", kFakeNow);
  CHECK(fx.harness->forecast(q0, d0, "mock").probability == doctest::Approx(0.0));
}

TEST_CASE("forecast refuses a dossier from another question") {
  Fixture fx;
  auto q1 = question("Will the first question resolve by December 31, 2025?");
  auto q2 = question("Will the second question resolve by December 31, 2025?");
  auto d1 = fx.harness->research(q1, "mock", kFakeNow);
  CHECK_THROWS_AS((void)fx.harness->forecast(q2, d1, "mock"), Error);
}

TEST_CASE("forecasts over a fixed dossier are reproducible") {
  Fixture fx;
  auto q = question("Will the deterministic forecast repeat itself?");
  auto d = fx.harness->research(q, "mock", kFakeNow);
  auto a = fx.harness->forecast(q, d, "mock");
  auto b = fx.harness->forecast(q, d, "mock");
  CHECK(a.probability == b.probability);
}

TEST_CASE("decompose yields subquestion records with defaults filled") {
  Fixture fx;
  auto q = question("Will the decomposed event [[subq:4]] occur?");
  auto r = fx.harness->decompose(q, "mock");
  REQUIRE(r.subquestions.size() == 4);
  for (const auto& sq : r.subquestions) {
    CHECK_FALSE(sq.title.empty());
    CHECK_FALSE(sq.background.empty());
    CHECK_FALSE(sq.resolution_criteria.empty());
    CHECK(sq.proto_id == q.id);
    // self-contained: never quotes the parent title
    CHECK(sq.title.find(q.title) == std::string::npos);
  }
}

TEST_CASE("decompose truncates beyond five and screens parent echoes") {
  Fixture fx;
  auto q6 = question("Will the over-eager decomposition [[subq:6]] shrink?");
  auto r6 = fx.harness->decompose(q6, "mock");
  CHECK(r6.subquestions.size() == 5);
  CHECK_FALSE(r6.warnings.empty());
  // document order preserved through truncation
  for (std::size_t i = 0; i < r6.subquestions.size(); ++i) {
    CHECK(r6.subquestions[i].title.find("-" + std::to_string(i + 1) + " ") !=
          std::string::npos);
  }

  auto qe = question("Will the echoing decomposition [[subq-echo-parent]] be caught?");
  auto re = fx.harness->decompose(qe, "mock");
  CHECK(re.subquestions.size() == 2);  // one of three screened out
  bool warned = false;
  for (const auto& w : re.warnings)
    warned = warned || w.find("screened out") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("parse_subquestion_list handles malformed and empty answers") {
  auto parent = question("Will the parent question hold?");
  CHECK(parse_subquestion_list(parent, "No subquestions are needed here.",
                               kFakeNow)
            .subquestions.empty());
  CHECK_THROWS_AS((void)parse_subquestion_list(
                      parent, "free-form musings with no list", kFakeNow),
                  Error);
}

TEST_CASE("subquestion bundle forecast composes research and subforecasts") {
  Fixture fx;
  auto q = question("Will the bundled forecast [[subqp:13]] combine evidence?");
  auto d = fx.harness->research(q, "mock", kFakeNow);
  auto dec = fx.harness->decompose(q, "mock");
  REQUIRE(dec.subquestions.size() == 3);

  SubquestionBundle bundle;
  bundle.parent_id = q.id;
  bundle.subquestions = dec.subquestions;
  for (const auto& sq : bundle.subquestions) {
    auto sd = fx.harness->research(sq, "mock", kFakeNow);
    bundle.subdossiers.push_back(sd);
    bundle.subforecasts.push_back(fx.harness->forecast(sq, sd, "mock"));
  }
  bundle.composed_dossier = ForecastHarness::compose_dossier(d, bundle);

  auto r = fx.harness->forecast_with_subquestions(q, d, bundle, "mock");
  CHECK(r.probability == doctest::Approx(0.13));
  CHECK(r.strategy == ForecastStrategy::subquestions);
  CHECK(r.fake_now == d.fake_now);
}

TEST_CASE("incomplete bundles are refused") {
  Fixture fx;
  auto q = question("Will the missing subforecast be noticed?");
  auto d = fx.harness->research(q, "mock", kFakeNow);
  auto dec = fx.harness->decompose(q, "mock");
  SubquestionBundle bundle;
  bundle.parent_id = q.id;
  bundle.subquestions = dec.subquestions;
  for (const auto& sq : bundle.subquestions) {
    auto sd = fx.harness->research(sq, "mock", kFakeNow);
    bundle.subdossiers.push_back(sd);
    bundle.subforecasts.push_back(fx.harness->forecast(sq, sd, "mock"));
  }
  bundle.subforecasts.pop_back();
  try {
    (void)fx.harness->forecast_with_subquestions(q, d, bundle, "mock");
    FAIL("expected IncompleteBundle");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompleteBundle);
  }
}

TEST_CASE("a zero-subquestion bundle falls back to direct, flagged") {
  Fixture fx;
  auto q = question("Will the empty decomposition fall back gracefully?");
  auto d = fx.harness->research(q, "mock", kFakeNow);
  SubquestionBundle empty;
  empty.parent_id = q.id;
  auto r = fx.harness->forecast_with_subquestions(q, d, empty, "mock");
  CHECK(r.strategy == ForecastStrategy::direct);
  REQUIRE_FALSE(r.flags.empty());
  CHECK(r.flags[0] == "subq_fallback_direct");
  // the flag survives serialization
  CHECK(ForecastRecord::from_json(r.to_json()).flags == r.flags);
}

TEST_CASE("forecast and dossier records round-trip through json") {
  Fixture fx;
  auto q = question("Will the serialization hold up?");
  auto d = fx.harness->research(q, "mock", kFakeNow);
  auto r = fx.harness->forecast(q, d, "mock");
  CHECK(ResearchDossier::from_json(d.to_json()).to_json() == d.to_json());
  CHECK(ForecastRecord::from_json(r.to_json()).to_json() == r.to_json());
}
