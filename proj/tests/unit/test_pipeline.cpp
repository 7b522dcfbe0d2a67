#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ffoundry/jsonl.hpp"
#include "ffoundry/pipeline.hpp"

using namespace ffoundry;

namespace {

namespace fs = std::filesystem;

struct TempRun {
  fs::path path;
  TempRun() {
    path = fs::temp_directory_path() /
           ("ffoundry_pipe_" + std::to_string(::getpid()) + "_" +
            std::to_string(rand()));
  }
  ~TempRun() { fs::remove_all(path); }
};

RunConfig test_config() {
  RunConfig cfg = RunConfig::defaults_mock();
  cfg.prompts_dir = fs::path(FFOUNDRY_SOURCE_DIR) / "prompts";
  SeedSourceConfig src;
  src.type = "text";
  src.path = (fs::path(FFOUNDRY_SOURCE_DIR) / "tests/fixtures/e2e_seeds").string();
  cfg.seed_sources = {src};
  cfg.workers = 4;
  cfg.subq_sample = 3;
  cfg.topic_k = 4;
  return cfg;
}

}  // namespace

TEST_CASE("config loads, interpolates env vars, and validates") {
  ::setenv("FFOUNDRY_TEST_SECRET", "sekrit", 1);
  json j;
  j["backends"] = {{"mock", {{"kind", "mock"}, {"auth_env", "${FFOUNDRY_TEST_SECRET}"}}}};
  auto interpolated = interpolate_env(j);
  CHECK(interpolated["backends"]["mock"]["auth_env"] == "sekrit");

  json bad;
  bad["roles"] = {{"forecaster", "missing_backend"}};
  CHECK_THROWS_AS((void)RunConfig::from_json(bad), Error);

  json bad_clock;
  bad_clock["clock"] = "sundial";
  CHECK_THROWS_AS((void)RunConfig::from_json(bad_clock), Error);

  // round trip keeps the snapshot usable
  auto cfg = test_config();
  auto again = RunConfig::from_json(cfg.to_json());
  CHECK(again.root_seed == cfg.root_seed);
  CHECK(again.seed_sources.size() == 1);
}

TEST_CASE("stages require their upstream markers") {
  TempRun run;
  Pipeline p(test_config(), run.path);
  try {
    (void)p.run_stage(Stage::verify);
    FAIL("expected MissingUpstream");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingUpstream);
  }
}

TEST_CASE("rerunning a completed stage skips everything") {
  TempRun run;
  Pipeline p(test_config(), run.path);
  auto first = p.run_stage(Stage::seed);
  CHECK(first.processed == 20);
  auto second = p.run_stage(Stage::seed);
  CHECK(second.processed == 0);
  CHECK(second.skipped == 20);
}

TEST_CASE("limit caps how many items a stage consumes") {
  TempRun run;
  Pipeline p(test_config(), run.path);
  (void)p.run_stage(Stage::seed);
  auto summary = p.run_stage(Stage::generate, 5);
  CHECK(summary.processed == 5);
  // at most 5 seeds consumed: protos reference at most 5 distinct seeds
  std::set<std::string> seed_ids;
  for (const auto& row : jsonl::read_file(run.path / "protos.jsonl"))
    seed_ids.insert(row.at("seed_id").get<std::string>());
  CHECK(seed_ids.size() <= 5);
}

TEST_CASE("a corrupted upstream digest is caught with a remediation hint") {
  TempRun run;
  Pipeline p(test_config(), run.path);
  (void)p.run_stage(Stage::seed);
  {
    std::ofstream out(run.path / "seeds.jsonl", std::ios::app);
    out << "\n";
  }
  try {
    (void)p.run_stage(Stage::generate);
    FAIL("expected MissingUpstream");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingUpstream);
    CHECK(std::string(e.what()).find("rerun") != std::string::npos);
  }
}

TEST_CASE("interrupted runs resume to identical outputs") {
  auto cfg = test_config();
  cfg.forecast_strategy = "subq";

  // reference: uninterrupted run
  TempRun ref;
  {
    Pipeline p(cfg, ref.path);
    for (auto s : p.run_all()) CHECK(s.failed == 0);
  }

  // interrupted: run the first four stages in one pipeline object, then
  // resume everything with a fresh process-like pipeline instance
  TempRun resumed;
  {
    Pipeline p(cfg, resumed.path);
    (void)p.run_stage(Stage::seed);
    (void)p.run_stage(Stage::generate);
  }
  {
    Pipeline p(cfg, resumed.path);
    for (auto s : p.run_all()) CHECK(s.failed == 0);
  }

  for (const char* file :
       {"seeds.jsonl", "protos.jsonl", "questions.jsonl", "verdicts.jsonl",
        "gate_results.jsonl", "dedup_report.jsonl", "dossiers.jsonl",
        "forecasts.jsonl", "subq_forecasts.jsonl", "votes.jsonl",
        "resolutions.jsonl", "scores.jsonl", "report/report.md"}) {
    CAPTURE(file);
    std::ifstream a(ref.path / file), b(resumed.path / file);
    REQUIRE(a);
    REQUIRE(b);
    std::string sa((std::istreambuf_iterator<char>(a)),
                   std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)),
                   std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }
}

TEST_CASE("verifier failures park the question after running all four") {
  TempRun run;
  const fs::path seeds = run.path / "seeds_src";
  fs::create_directories(seeds);
  std::ofstream(seeds / "ok.txt")
      << "Article.\nPROTO: Will the healthy question resolve by December 31, "
         "2025? | rationale: r\n";
  std::ofstream(seeds / "garbled.txt")
      << "Article.\nPROTO: Will the garbled verdict [[quality:excellent]] park "
         "this by December 31, 2025? | rationale: r\n";

  auto cfg = test_config();
  cfg.seed_sources[0].path = seeds.string();
  Pipeline p(cfg, run.path);
  (void)p.run_stage(Stage::seed);
  (void)p.run_stage(Stage::generate);
  (void)p.run_stage(Stage::refine);
  const auto before = p.mock_backend()->calls_for_template("verify_forecast");
  auto summary = p.run_stage(Stage::verify);
  CHECK(summary.processed == 2);
  CHECK(summary.failed == 0);

  // the parked question still consulted every verifier (no early exit)
  CHECK(p.mock_backend()->calls_for_template("verify_forecast") - before == 2);

  auto parked = jsonl::read_file(run.path / "needs_attention.jsonl");
  REQUIRE(parked.size() == 1);
  CHECK(parked[0].at("stage") == "verify");
  // one gate result for the healthy question only
  CHECK(p.load_gate_results().size() == 1);
  // the parked question is skipped, not retried, on rerun
  auto again = p.run_stage(Stage::verify);
  CHECK(again.processed == 0);
}

TEST_CASE("imported expert ratings and ground truth feed the report") {
  auto cfg = test_config();
  TempRun run;
  Pipeline p(cfg, run.path);
  for (Stage s : {Stage::seed, Stage::generate, Stage::refine, Stage::verify,
                  Stage::dedup, Stage::research, Stage::forecast, Stage::resolve,
                  Stage::score})
    (void)p.run_stage(s);

  // external files: one rating per verdict category, truth agreeing with the
  // first two resolutions
  auto resolutions = p.load_resolutions();
  REQUIRE(resolutions.size() >= 2);
  std::vector<json> ratings, truth;
  const char* labels[] = {"accept", "soft reject", "hard reject"};
  for (int i = 0; i < 3 && i < static_cast<int>(resolutions.size()); ++i) {
    json r;
    r["question_id"] = resolutions[i].question_id;
    r["rating"] = labels[i];
    ratings.push_back(r);
  }
  for (int i = 0; i < 2; ++i) {
    json t;
    t["question_id"] = resolutions[i].question_id;
    t["verdict"] = to_string(resolutions[i].verdict);
    truth.push_back(t);
  }
  jsonl::write_file(run.path / "expert_ratings.jsonl", ratings);
  jsonl::write_file(run.path / "ground_truth.jsonl", truth);

  (void)p.run_stage(Stage::report);
  std::ifstream in(run.path / "report/report.md");
  std::string report((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
  CHECK(report.find("| accept | 1 |") != std::string::npos);
  CHECK(report.find("| soft reject | 1 |") != std::string::npos);
  CHECK(report.find("verified sample: 2 questions, 0 resolver errors") !=
        std::string::npos);
}

TEST_CASE("funnel counts never invent ids downstream") {
  auto cfg = test_config();
  TempRun run;
  Pipeline p(cfg, run.path);
  (void)p.run_stage(Stage::seed);
  (void)p.run_stage(Stage::generate);
  (void)p.run_stage(Stage::refine);
  (void)p.run_stage(Stage::verify);
  (void)p.run_stage(Stage::dedup);

  std::set<std::string> seed_ids, proto_seed_refs, proto_ids, question_protos;
  for (const auto& s : p.load_seeds()) seed_ids.insert(s.id);
  for (const auto& pr : p.load_protos()) {
    proto_ids.insert(pr.id);
    proto_seed_refs.insert(pr.seed_id);
  }
  for (const auto& q : p.load_questions()) question_protos.insert(q.proto_id);
  for (const auto& sid : proto_seed_refs) CHECK(seed_ids.count(sid) == 1);
  for (const auto& pid : question_protos) CHECK(proto_ids.count(pid) == 1);

  const auto gates = p.load_gate_results();
  CHECK(gates.size() == p.load_questions().size());
  CHECK(p.kept_questions().size() <= gates.size());
}
