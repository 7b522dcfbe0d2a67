#include "ffoundry/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "ffoundry/dedup.hpp"
#include "ffoundry/http_backend.hpp"
#include "ffoundry/ids.hpp"
#include "ffoundry/ingest.hpp"
#include "ffoundry/jsonl.hpp"
#include "ffoundry/qgen.hpp"
#include "ffoundry/report.hpp"
#include "ffoundry/resolve.hpp"
#include "ffoundry/rng.hpp"

namespace ffoundry {

const char* to_string(Stage s) {
  switch (s) {
    case Stage::seed: return "seed";
    case Stage::generate: return "generate";
    case Stage::refine: return "refine";
    case Stage::verify: return "verify";
    case Stage::dedup: return "dedup";
    case Stage::research: return "research";
    case Stage::forecast: return "forecast";
    case Stage::subq: return "subq";
    case Stage::resolve: return "resolve";
    case Stage::score: return "score";
    case Stage::report: return "report";
  }
  return "seed";
}

std::optional<Stage> stage_from_string(const std::string& s) {
  for (Stage st : all_stages())
    if (s == to_string(st)) return st;
  return std::nullopt;
}

std::vector<Stage> all_stages() {
  return {Stage::seed,     Stage::generate, Stage::refine, Stage::verify,
          Stage::dedup,    Stage::research, Stage::forecast, Stage::subq,
          Stage::resolve,  Stage::score,    Stage::report};
}

namespace {

// subq is optional: downstream stages depend on the chain without it.
std::vector<Stage> prerequisites(Stage s) {
  switch (s) {
    case Stage::seed: return {};
    case Stage::generate: return {Stage::seed};
    case Stage::refine: return {Stage::generate};
    case Stage::verify: return {Stage::refine};
    case Stage::dedup: return {Stage::verify};
    case Stage::research: return {Stage::dedup};
    case Stage::forecast: return {Stage::research};
    case Stage::subq: return {Stage::research};
    case Stage::resolve: return {Stage::forecast};
    case Stage::score: return {Stage::resolve};
    case Stage::report: return {Stage::score};
  }
  return {};
}

}  // namespace

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot digest " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return sha256_hex(content);
}

RunManifest RunManifest::load(const std::filesystem::path& run_dir) {
  RunManifest m;
  std::ifstream in(run_dir / "manifest.json");
  if (!in) return m;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw Error(ErrorCode::IoFailure, "manifest.json is corrupt");
  m.run_id = j.value("run_id", "");
  m.created_at = j.value("created_at", "");
  m.config_snapshot = j.value("config", json::object());
  const json stages = j.value("stages", json::object());
  for (auto it = stages.begin(); it != stages.end(); ++it) {
    Mark mark;
    mark.completed_at = it.value().value("completed_at", "");
    const json outputs = it.value().value("outputs", json::object());
    for (auto d = outputs.begin(); d != outputs.end(); ++d)
      mark.output_digests[d.key()] = d.value().get<std::string>();
    const json inputs = it.value().value("inputs", json::object());
    for (auto d = inputs.begin(); d != inputs.end(); ++d)
      mark.input_digests[d.key()] = d.value().get<std::string>();
    m.stages[it.key()] = mark;
  }
  return m;
}

void RunManifest::save(const std::filesystem::path& run_dir) const {
  json j;
  j["run_id"] = run_id;
  j["created_at"] = created_at;
  j["config"] = config_snapshot;
  json stages_json = json::object();
  for (const auto& [name, mark] : stages) {
    json mj;
    mj["completed_at"] = mark.completed_at;
    json outputs = json::object();
    for (const auto& [file, digest] : mark.output_digests) outputs[file] = digest;
    mj["outputs"] = outputs;
    json inputs = json::object();
    for (const auto& [file, digest] : mark.input_digests) inputs[file] = digest;
    mj["inputs"] = inputs;
    stages_json[name] = mj;
  }
  j["stages"] = stages_json;
  const auto tmp = run_dir / "manifest.json.tmp";
  std::ofstream out(tmp, std::ios::trunc);
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "manifest write failed");
  out.close();
  std::filesystem::rename(tmp, run_dir / "manifest.json");
}

Pipeline::Pipeline(RunConfig config, std::filesystem::path run_dir)
    : config_(std::move(config)), run_dir_(std::move(run_dir)) {
  std::filesystem::create_directories(run_dir_);
  manifest_ = RunManifest::load(run_dir_);
  if (manifest_.run_id.empty()) {
    manifest_.run_id = run_dir_.filename().string();
    manifest_.created_at = config_.now().to_iso8601();
    manifest_.config_snapshot = config_.to_json();
    manifest_.save(run_dir_);
  }

  TemplateStore templates = TemplateStore::load_dir(config_.prompts_dir);
  gateway_ = std::make_unique<Gateway>(config_.backends, std::move(templates),
                                       run_dir_ / "transcripts");

  bool any_mock = false, any_http = false;
  for (const auto& [id, b] : config_.backends) {
    any_mock = any_mock || b.kind == "mock";
    any_http = any_http || b.kind == "http";
  }
  if (any_mock) mock_ = std::make_shared<MockBackend>(config_.fixtures_dir);
  std::shared_ptr<HttpBackend> http;
  if (any_http)
    http = std::make_shared<HttpBackend>(
        std::make_shared<LiveToolExecutor>(std::string()));
  for (const auto& [id, b] : config_.backends) {
    if (b.kind == "mock")
      gateway_->register_backend(id, mock_);
    else if (b.kind == "http")
      gateway_->register_backend(id, http);
    else
      throw Error(ErrorCode::ConfigInvalid, "unknown backend kind: " + b.kind);
  }
}

std::filesystem::path Pipeline::data(const std::string& name) const {
  return run_dir_ / name;
}

bool Pipeline::stage_complete(Stage stage) const {
  auto it = manifest_.stages.find(to_string(stage));
  if (it == manifest_.stages.end()) return false;
  for (const auto& [file, digest] : it->second.output_digests) {
    const auto path = run_dir_ / file;
    if (!std::filesystem::exists(path) || file_sha256(path) != digest)
      return false;
  }
  // stale if any upstream output changed since this stage ran
  for (const auto& [file, digest] : it->second.input_digests) {
    const auto path = run_dir_ / file;
    if (!std::filesystem::exists(path) || file_sha256(path) != digest)
      return false;
  }
  return true;
}

void Pipeline::require_upstream(Stage stage) const {
  for (Stage pre : prerequisites(stage)) {
    auto it = manifest_.stages.find(to_string(pre));
    if (it == manifest_.stages.end())
      throw Error(ErrorCode::MissingUpstream,
                  std::string("stage ") + to_string(stage) + " needs " +
                      to_string(pre) + " first; run `ffoundry " +
                      to_string(pre) + "`");
    for (const auto& [file, digest] : it->second.output_digests) {
      const auto path = run_dir_ / file;
      if (!std::filesystem::exists(path) || file_sha256(path) != digest)
        throw Error(ErrorCode::MissingUpstream,
                    "output of stage " + std::string(to_string(pre)) +
                        " no longer matches its recorded digest (" + file +
                        "); rerun `ffoundry " + to_string(pre) + "`");
    }
  }
}

void Pipeline::mark_stage(Stage stage, const std::vector<std::string>& files) {
  RunManifest::Mark mark;
  mark.completed_at = config_.now().to_iso8601();
  for (const auto& f : files) mark.output_digests[f] = file_sha256(run_dir_ / f);
  for (Stage pre : prerequisites(stage)) {
    auto it = manifest_.stages.find(to_string(pre));
    if (it == manifest_.stages.end()) continue;
    for (const auto& [file, digest] : it->second.output_digests) {
      (void)digest;
      if (std::filesystem::exists(run_dir_ / file))
        mark.input_digests[file] = file_sha256(run_dir_ / file);
    }
  }
  manifest_.stages[to_string(stage)] = mark;
  manifest_.save(run_dir_);
}

template <typename Item, typename Fn>
void Pipeline::parallel_for(const std::vector<Item>& items, Fn&& fn) {
  if (items.empty()) return;
  const int workers =
      std::max(1, std::min<int>(config_.workers, static_cast<int>(items.size())));
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= items.size()) return;
        fn(items[i]);
      }
    });
  }
  for (auto& t : pool) t.join();
}

void Pipeline::append_failure(const std::string& stage, const std::string& id,
                              const std::string& error) {
  // failures.jsonl is informational: failed items stay retryable.
  json row;
  row["stage"] = stage;
  row["id"] = id;
  row["error"] = error;
  std::ofstream out(data("failures.jsonl"), std::ios::app);
  out << row.dump() << '\n';
}

void Pipeline::rewrite_rejects(const std::string& stage, std::vector<json> new_rows) {
  std::vector<json> rows;
  if (std::filesystem::exists(data("rejects.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("rejects.jsonl"))) {
      if (row.value("stage", "") != stage) rows.push_back(row);
    }
  }
  for (auto& r : new_rows) rows.push_back(std::move(r));
  std::sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
    if (a.value("stage", "") != b.value("stage", ""))
      return a.value("stage", "") < b.value("stage", "");
    return a.value("id", "") < b.value("id", "");
  });
  jsonl::write_file(data("rejects.jsonl"), rows);
}

std::vector<Seed> Pipeline::load_seeds() const {
  std::vector<Seed> out;
  for (const auto& j : jsonl::read_file(data("seeds.jsonl")))
    out.push_back(Seed::from_json(j));
  return out;
}

std::vector<ProtoQuestion> Pipeline::load_protos() const {
  std::vector<ProtoQuestion> out;
  for (const auto& j : jsonl::read_file(data("protos.jsonl")))
    out.push_back(ProtoQuestion::from_json(j));
  return out;
}

std::vector<Question> Pipeline::load_questions() const {
  std::vector<Question> out;
  for (const auto& j : jsonl::read_file(data("questions.jsonl")))
    out.push_back(Question::from_json(j));
  return out;
}

std::vector<GateResult> Pipeline::load_gate_results() const {
  std::vector<GateResult> out;
  for (const auto& j : jsonl::read_file(data("gate_results.jsonl")))
    out.push_back(GateResult::from_json(j));
  return out;
}

std::vector<Question> Pipeline::kept_questions() const {
  std::set<std::string> passed;
  for (const auto& g : load_gate_results())
    if (g.passed) passed.insert(g.question_id);
  std::set<std::string> kept;
  for (const auto& j : jsonl::read_file(data("dedup_report.jsonl"))) {
    if (j.value("kept", false)) kept.insert(j.at("question_id").get<std::string>());
  }
  std::vector<Question> out;
  for (auto& q : load_questions()) {
    if (passed.count(q.id) && kept.count(q.id)) out.push_back(std::move(q));
  }
  std::sort(out.begin(), out.end(),
            [](const Question& a, const Question& b) { return a.id < b.id; });
  return out;
}

std::vector<ResearchDossier> Pipeline::load_dossiers() const {
  std::vector<ResearchDossier> out;
  for (const auto& j : jsonl::read_file(data("dossiers.jsonl")))
    out.push_back(ResearchDossier::from_json(j));
  return out;
}

std::vector<ForecastRecord> Pipeline::load_forecasts(const std::string& file) const {
  std::vector<ForecastRecord> out;
  if (!std::filesystem::exists(data(file))) return out;
  for (const auto& j : jsonl::read_file(data(file)))
    out.push_back(ForecastRecord::from_json(j));
  return out;
}

std::vector<ResolutionVote> Pipeline::load_votes() const {
  std::vector<ResolutionVote> out;
  for (const auto& j : jsonl::read_file(data("votes.jsonl")))
    out.push_back(ResolutionVote::from_json(j));
  return out;
}

std::vector<FinalResolution> Pipeline::load_resolutions() const {
  std::vector<FinalResolution> out;
  for (const auto& j : jsonl::read_file(data("resolutions.jsonl")))
    out.push_back(FinalResolution::from_json(j));
  return out;
}

StageSummary Pipeline::run_stage(Stage stage, std::optional<int> limit) {
  require_upstream(stage);
  // resolve re-evaluates which questions are due (the --as-of cutoff moves
  // between waves), so it never takes the whole-stage shortcut; its
  // item-level resume keeps reruns cheap and idempotent.
  if (stage != Stage::resolve && stage_complete(stage)) {
    StageSummary s;
    s.stage = stage;
    auto it = manifest_.stages.find(to_string(stage));
    if (!it->second.output_digests.empty()) {
      const auto& first = it->second.output_digests.begin()->first;
      if (first.size() > 6 && first.substr(first.size() - 6) == ".jsonl")
        s.skipped = static_cast<int>(jsonl::read_file(run_dir_ / first).size());
    }
    return s;
  }
  switch (stage) {
    case Stage::seed: return stage_seed(limit);
    case Stage::generate: return stage_generate(limit);
    case Stage::refine: return stage_refine(limit);
    case Stage::verify: return stage_verify(limit);
    case Stage::dedup: return stage_dedup(limit);
    case Stage::research: return stage_research(limit);
    case Stage::forecast: return stage_forecast(limit);
    case Stage::subq: return stage_subq(limit);
    case Stage::resolve: return stage_resolve(limit);
    case Stage::score: return stage_score(limit);
    case Stage::report: return stage_report(limit);
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown stage");
}

std::vector<StageSummary> Pipeline::run_all(std::optional<int> limit) {
  std::vector<StageSummary> out;
  for (Stage s : all_stages()) {
    if (s == Stage::subq && config_.forecast_strategy != "subq") continue;
    out.push_back(run_stage(s, limit));
  }
  return out;
}

StageSummary Pipeline::stage_seed(std::optional<int> limit) {
  StageSummary summary;
  summary.stage = Stage::seed;
  if (config_.seed_sources.empty())
    throw Error(ErrorCode::ConfigInvalid, "no seed sources configured");

  std::shared_ptr<ArticleFetcher> fetcher;
  std::vector<Seed> seeds;
  for (const auto& src : config_.seed_sources) {
    if (src.type == "text") {
      auto result = SeedIngestor::load_text_seeds(src.path, config_.now(),
                                                  config_.ingest.max_content_chars);
      for (auto& s : result.seeds) seeds.push_back(std::move(s));
      continue;
    }
    if (!fetcher) {
      if (!config_.article_fixture_dir.empty())
        fetcher = std::make_shared<FixtureArticleFetcher>(config_.article_fixture_dir);
      else
        fetcher = std::make_shared<LiveArticleFetcher>();
    }
    SeedQuerySpec spec;
    spec.lookback_days = src.lookback_days;
    spec.max_seeds = src.max_seeds;
    spec.diversity_keys = src.diversity_keys;
    SeedIngestor ingestor(config_.ingest, fetcher, config_.now(),
                          derive_seed(config_.root_seed, "ingest_" + src.type));
    IngestResult result;
    if (src.type == "gdelt") {
      spec.source = SeedSource::gdelt;
      result = ingestor.fetch_gdelt(spec);
    } else {
      spec.source = SeedSource::mediacloud;
      result = ingestor.fetch_mediacloud(spec);
    }
    for (auto& s : result.seeds) seeds.push_back(std::move(s));
  }

  std::sort(seeds.begin(), seeds.end(),
            [](const Seed& a, const Seed& b) { return a.id < b.id; });
  seeds.erase(std::unique(seeds.begin(), seeds.end(),
                          [](const Seed& a, const Seed& b) { return a.id == b.id; }),
              seeds.end());
  if (limit && static_cast<int>(seeds.size()) > *limit)
    seeds.resize(static_cast<std::size_t>(*limit));

  std::vector<json> rows;
  for (const auto& s : seeds) rows.push_back(s.to_json());
  jsonl::write_file(data("seeds.jsonl"), rows);
  mark_stage(Stage::seed, {"seeds.jsonl"});
  summary.processed = static_cast<int>(seeds.size());
  return summary;
}

StageSummary Pipeline::stage_generate(std::optional<int> limit) {
  StageSummary summary;
  summary.stage = Stage::generate;
  auto seeds = load_seeds();
  if (limit && static_cast<int>(seeds.size()) > *limit)
    seeds.resize(static_cast<std::size_t>(*limit));

  std::set<std::string> done;
  std::vector<ProtoQuestion> protos;
  if (std::filesystem::exists(data("protos.jsonl"))) {
    for (auto& p : load_protos()) {
      done.insert(p.seed_id);
      protos.push_back(std::move(p));
    }
  }
  if (std::filesystem::exists(data("rejects.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("rejects.jsonl")))
      if (row.value("stage", "") == "generate") done.insert(row.value("id", ""));
  }

  QuestionGenerator generator(*gateway_, config_.role("proto_generator"),
                              config_.role("refiner"), config_.window,
                              config_.research_budget, config_.now());

  std::vector<Seed> pending;
  for (auto& s : seeds) {
    if (done.count(s.id))
      ++summary.skipped;
    else
      pending.push_back(std::move(s));
  }

  std::mutex mu;
  std::vector<json> reject_rows;
  parallel_for(pending, [&](const Seed& seed) {
    try {
      auto result = generator.generate_protos(seed);
      std::lock_guard<std::mutex> lock(mu);
      ++summary.processed;
      if (result.protos.empty()) {
        json row;
        row["stage"] = "generate";
        row["id"] = seed.id;
        row["reason"] = "seed yielded no proto-questions";
        reject_rows.push_back(row);
      }
      for (auto& p : result.protos) protos.push_back(std::move(p));
    } catch (const Error& e) {
      std::lock_guard<std::mutex> lock(mu);
      if (e.code() == ErrorCode::MalformedList) {
        ++summary.processed;
        json row;
        row["stage"] = "generate";
        row["id"] = seed.id;
        row["reason"] = e.what();
        reject_rows.push_back(row);
      } else {
        ++summary.failed;
        append_failure("generate", seed.id, e.what());
      }
    }
  });

  std::sort(protos.begin(), protos.end(),
            [](const ProtoQuestion& a, const ProtoQuestion& b) { return a.id < b.id; });
  protos.erase(std::unique(protos.begin(), protos.end(),
                           [](const ProtoQuestion& a, const ProtoQuestion& b) {
                             return a.id == b.id;
                           }),
               protos.end());
  std::vector<json> rows;
  for (const auto& p : protos) rows.push_back(p.to_json());
  jsonl::write_file(data("protos.jsonl"), rows);

  // keep previously recorded generate rejects for seeds not reprocessed
  if (std::filesystem::exists(data("rejects.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("rejects.jsonl"))) {
      if (row.value("stage", "") == "generate" &&
          done.count(row.value("id", "")))
        reject_rows.push_back(row);
    }
  }
  rewrite_rejects("generate", std::move(reject_rows));
  mark_stage(Stage::generate, {"protos.jsonl", "rejects.jsonl"});
  return summary;
}

StageSummary Pipeline::stage_refine(std::optional<int> limit) {
  StageSummary summary;
  summary.stage = Stage::refine;
  auto protos = load_protos();
  if (limit && static_cast<int>(protos.size()) > *limit)
    protos.resize(static_cast<std::size_t>(*limit));

  std::set<std::string> done;
  std::vector<Question> questions;
  if (std::filesystem::exists(data("questions.jsonl"))) {
    for (auto& q : load_questions()) {
      done.insert(q.proto_id);
      questions.push_back(std::move(q));
    }
  }
  std::vector<json> kept_rejects;
  if (std::filesystem::exists(data("rejects.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("rejects.jsonl"))) {
      if (row.value("stage", "") == "refine") {
        done.insert(row.value("id", ""));
        kept_rejects.push_back(row);
      }
    }
  }

  QuestionGenerator generator(*gateway_, config_.role("proto_generator"),
                              config_.role("refiner"), config_.window,
                              config_.research_budget, config_.now());

  std::vector<ProtoQuestion> pending;
  for (auto& p : protos) {
    if (done.count(p.id))
      ++summary.skipped;
    else
      pending.push_back(std::move(p));
  }

  std::mutex mu;
  std::vector<json> reject_rows = std::move(kept_rejects);
  parallel_for(pending, [&](const ProtoQuestion& proto) {
    try {
      Question q = generator.refine(proto);
      std::lock_guard<std::mutex> lock(mu);
      ++summary.processed;
      questions.push_back(std::move(q));
    } catch (const Error& e) {
      std::lock_guard<std::mutex> lock(mu);
      if (e.code() == ErrorCode::RefinementRejected) {
        ++summary.processed;
        json row;
        row["stage"] = "refine";
        row["id"] = proto.id;
        row["reason"] = e.what();
        reject_rows.push_back(row);
      } else {
        ++summary.failed;
        append_failure("refine", proto.id, e.what());
      }
    }
  });

  std::sort(questions.begin(), questions.end(),
            [](const Question& a, const Question& b) { return a.id < b.id; });
  questions.erase(std::unique(questions.begin(), questions.end(),
                              [](const Question& a, const Question& b) {
                                return a.id == b.id;
                              }),
                  questions.end());
  std::vector<json> rows;
  for (const auto& q : questions) rows.push_back(q.to_json());
  jsonl::write_file(data("questions.jsonl"), rows);
  rewrite_rejects("refine", std::move(reject_rows));
  mark_stage(Stage::refine, {"questions.jsonl", "rejects.jsonl"});
  return summary;
}

StageSummary Pipeline::stage_verify(std::optional<int> limit) {
  StageSummary summary;
  summary.stage = Stage::verify;
  auto questions = load_questions();
  if (limit && static_cast<int>(questions.size()) > *limit)
    questions.resize(static_cast<std::size_t>(*limit));

  std::set<std::string> done;
  std::vector<json> verdict_rows;
  std::vector<json> gate_rows;
  if (std::filesystem::exists(data("gate_results.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("gate_results.jsonl"))) {
      done.insert(row.at("question_id").get<std::string>());
      gate_rows.push_back(row);
    }
  }
  if (std::filesystem::exists(data("verdicts.jsonl")))
    verdict_rows = jsonl::read_file(data("verdicts.jsonl"));
  std::vector<json> parked_rows;
  if (std::filesystem::exists(data("needs_attention.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("needs_attention.jsonl"))) {
      if (row.value("stage", "") == "verify") {
        done.insert(row.value("id", ""));
        parked_rows.push_back(row);
      } else {
        parked_rows.push_back(row);
      }
    }
  }

  QuestionVerifier verifier(*gateway_, config_.role("verifier"),
                            config_.research_budget, config_.now());

  std::vector<Question> pending;
  for (auto& q : questions) {
    if (done.count(q.id))
      ++summary.skipped;
    else
      pending.push_back(std::move(q));
  }

  std::mutex mu;
  parallel_for(pending, [&](const Question& q) {
    // all four verifiers run regardless of individual failures: the funnel
    // analysis needs complete verdict data, and verifier noise parks the
    // question rather than rejecting it
    std::vector<Verdict> verdicts;
    std::vector<std::string> park_reasons;
    bool transport_failed = false;
    std::string transport_error;
    for (VerifierKind kind : {VerifierKind::quality, VerifierKind::ambiguity,
                              VerifierKind::resolvability, VerifierKind::forecast}) {
      try {
        verdicts.push_back(verifier.run_verifier(q, kind));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::UnknownLabel ||
            e.code() == ErrorCode::ParseFailure ||
            e.code() == ErrorCode::NotNumeric ||
            e.code() == ErrorCode::OutOfRange) {
          park_reasons.push_back(e.what());
        } else {
          transport_failed = true;
          transport_error = e.what();
        }
      }
    }
    std::lock_guard<std::mutex> lock(mu);
    if (transport_failed) {
      ++summary.failed;
      append_failure("verify", q.id, transport_error);
      return;
    }
    if (!park_reasons.empty()) {
      ++summary.processed;
      std::string reason;
      for (const auto& r : park_reasons)
        reason += (reason.empty() ? "" : "; ") + r;
      json row;
      row["stage"] = "verify";
      row["id"] = q.id;
      row["reason"] = reason;
      parked_rows.push_back(row);
      return;
    }
    GateResult gate = apply_gate(verdicts);
    ++summary.processed;
    for (const auto& v : gate.verdicts) verdict_rows.push_back(v.to_json());
    gate_rows.push_back(gate.to_json());
  });

  auto by_qid = [](const json& a, const json& b) {
    if (a.at("question_id") != b.at("question_id"))
      return a.at("question_id") < b.at("question_id");
    return a.value("kind", "") < b.value("kind", "");
  };
  std::sort(verdict_rows.begin(), verdict_rows.end(), by_qid);
  std::sort(gate_rows.begin(), gate_rows.end(), by_qid);
  std::sort(parked_rows.begin(), parked_rows.end(),
            [](const json& a, const json& b) {
              if (a.value("stage", "") != b.value("stage", ""))
                return a.value("stage", "") < b.value("stage", "");
              return a.value("id", "") < b.value("id", "");
            });
  jsonl::write_file(data("verdicts.jsonl"), verdict_rows);
  jsonl::write_file(data("gate_results.jsonl"), gate_rows);
  jsonl::write_file(data("needs_attention.jsonl"), parked_rows);
  mark_stage(Stage::verify,
             {"verdicts.jsonl", "gate_results.jsonl", "needs_attention.jsonl"});
  return summary;
}

StageSummary Pipeline::stage_dedup(std::optional<int> limit) {
  (void)limit;
  StageSummary summary;
  summary.stage = Stage::dedup;

  std::set<std::string> passed;
  for (const auto& g : load_gate_results())
    if (g.passed) passed.insert(g.question_id);
  std::vector<Question> questions;
  for (auto& q : load_questions())
    if (passed.count(q.id)) questions.push_back(std::move(q));
  std::sort(questions.begin(), questions.end(),
            [](const Question& a, const Question& b) { return a.id < b.id; });

  ClusterParams params;
  params.similarity_threshold = config_.dedup_similarity;
  params.min_points = config_.dedup_min_points;
  Deduplicator dedup(*gateway_, config_.role("embedder"),
                     config_.role("dedup_checker"), params,
                     config_.embed_batch_size,
                     config_.dedup_max_pairs_per_cluster);

  std::vector<json> report_rows, cluster_rows, pair_rows;
  if (!questions.empty()) {
    std::vector<std::string> texts;
    for (const auto& q : questions) texts.push_back(q.title + "\n\n" + q.background);
    auto vectors = dedup.embed(texts);
    for (std::size_t i = 0; i < questions.size(); ++i)
      vectors[i].question_id = questions[i].id;
    write_embeddings(data("embeddings.bin"), data("embeddings_index.jsonl"), vectors);

    DedupOutcome outcome = dedup.dedup_set(questions);
    for (std::size_t i = 0; i < questions.size(); ++i) {
      json row;
      row["question_id"] = questions[i].id;
      row["cluster_id"] = outcome.assignments[i];
      cluster_rows.push_back(row);
    }
    for (const auto& p : outcome.confirmed_pairs) {
      json row;
      row["a"] = p.a;
      row["b"] = p.b;
      pair_rows.push_back(row);
    }
    std::set<std::string> kept(outcome.kept.begin(), outcome.kept.end());
    for (const auto& q : questions) {
      json row;
      row["question_id"] = q.id;
      row["kept"] = kept.count(q.id) > 0;
      auto rep = outcome.group_representative.find(q.id);
      if (rep != outcome.group_representative.end() && rep->second != q.id)
        row["duplicate_of"] = rep->second;
      report_rows.push_back(row);
    }
    summary.processed = static_cast<int>(questions.size());
  } else {
    // no survivors: still emit empty artifacts so downstream stages see files
    write_embeddings(data("embeddings.bin"), data("embeddings_index.jsonl"), {});
  }
  jsonl::write_file(data("clusters.jsonl"), cluster_rows);
  jsonl::write_file(data("dedup_pairs.jsonl"), pair_rows);
  jsonl::write_file(data("dedup_report.jsonl"), report_rows);
  mark_stage(Stage::dedup, {"embeddings.bin", "embeddings_index.jsonl",
                            "clusters.jsonl", "dedup_pairs.jsonl",
                            "dedup_report.jsonl"});
  return summary;
}

StageSummary Pipeline::stage_research(std::optional<int> limit) {
  StageSummary summary;
  summary.stage = Stage::research;
  auto questions = kept_questions();
  if (limit && static_cast<int>(questions.size()) > *limit)
    questions.resize(static_cast<std::size_t>(*limit));

  std::set<std::string> done;
  std::vector<json> dossier_rows;
  if (std::filesystem::exists(data("dossiers.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("dossiers.jsonl"))) {
      done.insert(row.at("question_id").get<std::string>());
      dossier_rows.push_back(row);
    }
  }

  ForecastHarness harness(*gateway_, config_.research_budget, config_.now());
  const std::string backend = config_.role("researcher");

  std::vector<Question> pending;
  for (auto& q : questions) {
    if (done.count(q.id))
      ++summary.skipped;
    else
      pending.push_back(std::move(q));
  }

  std::mutex mu;
  parallel_for(pending, [&](const Question& q) {
    try {
      ResearchDossier d = harness.research(q, backend, config_.research_date);
      std::lock_guard<std::mutex> lock(mu);
      ++summary.processed;
      dossier_rows.push_back(d.to_json());
    } catch (const Error& e) {
      std::lock_guard<std::mutex> lock(mu);
      ++summary.failed;
      append_failure("research", q.id, e.what());
    }
  });

  std::sort(dossier_rows.begin(), dossier_rows.end(),
            [](const json& a, const json& b) {
              return a.at("question_id") < b.at("question_id");
            });
  jsonl::write_file(data("dossiers.jsonl"), dossier_rows);
  mark_stage(Stage::research, {"dossiers.jsonl"});
  return summary;
}

StageSummary Pipeline::stage_forecast(std::optional<int> limit) {
  StageSummary summary;
  summary.stage = Stage::forecast;
  auto dossiers = load_dossiers();
  std::map<std::string, ResearchDossier> dossier_by_q;
  for (auto& d : dossiers) dossier_by_q[d.question_id] = d;

  auto questions = kept_questions();
  std::vector<Question> with_dossier;
  for (auto& q : questions)
    if (dossier_by_q.count(q.id)) with_dossier.push_back(std::move(q));
  if (limit && static_cast<int>(with_dossier.size()) > *limit)
    with_dossier.resize(static_cast<std::size_t>(*limit));

  const std::string backend = config_.role("forecaster");
  std::set<std::string> done;
  std::vector<json> rows;
  if (std::filesystem::exists(data("forecasts.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("forecasts.jsonl"))) {
      if (row.value("forecaster_backend", "") == backend &&
          row.value("strategy", "") == "direct")
        done.insert(row.at("question_id").get<std::string>());
      rows.push_back(row);
    }
  }

  ForecastHarness harness(*gateway_, config_.research_budget, config_.now());

  std::vector<Question> pending;
  for (auto& q : with_dossier) {
    if (done.count(q.id))
      ++summary.skipped;
    else
      pending.push_back(std::move(q));
  }

  std::mutex mu;
  parallel_for(pending, [&](const Question& q) {
    try {
      ForecastRecord r = harness.forecast(q, dossier_by_q.at(q.id), backend);
      std::lock_guard<std::mutex> lock(mu);
      ++summary.processed;
      rows.push_back(r.to_json());
    } catch (const Error& e) {
      // missing forecasts are excluded from scoring, never imputed
      std::lock_guard<std::mutex> lock(mu);
      ++summary.failed;
      append_failure("forecast", q.id, e.what());
    }
  });

  std::sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
    if (a.at("question_id") != b.at("question_id"))
      return a.at("question_id") < b.at("question_id");
    return a.value("forecaster_backend", "") < b.value("forecaster_backend", "");
  });
  jsonl::write_file(data("forecasts.jsonl"), rows);
  mark_stage(Stage::forecast, {"forecasts.jsonl"});
  return summary;
}

StageSummary Pipeline::stage_subq(std::optional<int> limit) {
  StageSummary summary;
  summary.stage = Stage::subq;
  auto dossiers = load_dossiers();
  std::map<std::string, ResearchDossier> dossier_by_q;
  for (auto& d : dossiers) dossier_by_q[d.question_id] = d;

  auto questions = kept_questions();
  std::vector<Question> eligible;
  for (auto& q : questions)
    if (dossier_by_q.count(q.id)) eligible.push_back(std::move(q));

  // seeded sample of the configured size, stable across reruns
  Rng rng(derive_seed(config_.root_seed, "subq_sample"));
  for (std::size_t i = eligible.size(); i > 1; --i)
    std::swap(eligible[i - 1], eligible[rng.next_below(i)]);
  std::size_t take = std::min<std::size_t>(eligible.size(),
                                           static_cast<std::size_t>(config_.subq_sample));
  eligible.resize(take);
  std::sort(eligible.begin(), eligible.end(),
            [](const Question& a, const Question& b) { return a.id < b.id; });
  if (limit && static_cast<int>(eligible.size()) > *limit)
    eligible.resize(static_cast<std::size_t>(*limit));

  std::set<std::string> done;
  std::vector<json> bundle_rows, forecast_rows;
  if (std::filesystem::exists(data("subq_bundles.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("subq_bundles.jsonl"))) {
      done.insert(row.at("parent_id").get<std::string>());
      bundle_rows.push_back(row);
    }
  }
  if (std::filesystem::exists(data("subq_forecasts.jsonl")))
    forecast_rows = jsonl::read_file(data("subq_forecasts.jsonl"));

  ForecastHarness harness(*gateway_, config_.research_budget, config_.now());
  const std::string researcher = config_.role("researcher");
  const std::string forecaster = config_.role("forecaster");
  const std::string decomposer = config_.role("subq_decomposer");

  std::vector<Question> pending;
  for (auto& q : eligible) {
    if (done.count(q.id))
      ++summary.skipped;
    else
      pending.push_back(std::move(q));
  }

  std::mutex mu;
  parallel_for(pending, [&](const Question& q) {
    try {
      DecomposeResult dec = harness.decompose(q, decomposer);
      SubquestionBundle bundle;
      bundle.parent_id = q.id;
      bundle.subquestions = dec.subquestions;
      for (const auto& sq : bundle.subquestions) {
        ResearchDossier sd = harness.research(sq, researcher, config_.research_date);
        bundle.subdossiers.push_back(sd);
        bundle.subforecasts.push_back(harness.forecast(sq, sd, forecaster));
      }
      const ResearchDossier& parent_dossier = dossier_by_q.at(q.id);
      if (!bundle.subquestions.empty())
        bundle.composed_dossier =
            ForecastHarness::compose_dossier(parent_dossier, bundle);
      ForecastRecord final_record = harness.forecast_with_subquestions(
          q, parent_dossier, bundle, forecaster);
      std::lock_guard<std::mutex> lock(mu);
      ++summary.processed;
      bundle_rows.push_back(bundle.to_json());
      forecast_rows.push_back(final_record.to_json());
    } catch (const Error& e) {
      std::lock_guard<std::mutex> lock(mu);
      ++summary.failed;
      append_failure("subq", q.id, e.what());
    }
  });

  auto by_parent = [](const json& a, const json& b) {
    const auto& ka = a.contains("parent_id") ? a.at("parent_id") : a.at("question_id");
    const auto& kb = b.contains("parent_id") ? b.at("parent_id") : b.at("question_id");
    return ka < kb;
  };
  std::sort(bundle_rows.begin(), bundle_rows.end(), by_parent);
  std::sort(forecast_rows.begin(), forecast_rows.end(), by_parent);
  jsonl::write_file(data("subq_bundles.jsonl"), bundle_rows);
  jsonl::write_file(data("subq_forecasts.jsonl"), forecast_rows);
  mark_stage(Stage::subq, {"subq_bundles.jsonl", "subq_forecasts.jsonl"});
  return summary;
}

StageSummary Pipeline::stage_resolve(std::optional<int> limit) {
  StageSummary summary;
  summary.stage = Stage::resolve;
  const UtcTime as_of = config_.resolution_date;

  std::vector<Question> due;
  for (auto& q : kept_questions())
    if (q.window_end <= as_of) due.push_back(std::move(q));
  if (limit && static_cast<int>(due.size()) > *limit)
    due.resize(static_cast<std::size_t>(*limit));

  std::set<std::string> done;
  std::vector<json> vote_rows, resolution_rows;
  if (std::filesystem::exists(data("resolutions.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("resolutions.jsonl"))) {
      done.insert(row.at("question_id").get<std::string>());
      resolution_rows.push_back(row);
    }
  }
  if (std::filesystem::exists(data("votes.jsonl")))
    vote_rows = jsonl::read_file(data("votes.jsonl"));
  std::vector<json> parked_rows;
  if (std::filesystem::exists(data("needs_attention.jsonl"))) {
    for (const auto& row : jsonl::read_file(data("needs_attention.jsonl"))) {
      parked_rows.push_back(row);
      if (row.value("stage", "") == "resolve") done.insert(row.value("id", ""));
    }
  }

  ResolverBackends backends;
  backends.primary_a = config_.role("resolver_a");
  backends.primary_b = config_.role("resolver_b");
  backends.primary_c = config_.role("resolver_c");
  backends.tiebreak = config_.role("resolver_tiebreak");
  EnsembleResolver resolver(*gateway_, backends,
                            adjudication_from_string(config_.adjudication),
                            config_.resolution_date, as_of,
                            config_.research_budget);

  std::vector<Question> pending;
  for (auto& q : due) {
    if (done.count(q.id))
      ++summary.skipped;
    else
      pending.push_back(std::move(q));
  }

  std::mutex mu;
  parallel_for(pending, [&](const Question& q) {
    try {
      FinalResolution final = resolver.resolve_ensemble(q);
      std::lock_guard<std::mutex> lock(mu);
      ++summary.processed;
      for (const auto& v : final.votes) vote_rows.push_back(v.to_json());
      resolution_rows.push_back(final.to_json());
    } catch (const Error& e) {
      std::lock_guard<std::mutex> lock(mu);
      ++summary.failed;
      json row;
      row["stage"] = "resolve";
      row["id"] = q.id;
      row["reason"] = e.what();
      parked_rows.push_back(row);
    }
  });

  std::sort(vote_rows.begin(), vote_rows.end(), [](const json& a, const json& b) {
    if (a.at("question_id") != b.at("question_id"))
      return a.at("question_id") < b.at("question_id");
    return a.value("agent_slot", "") < b.value("agent_slot", "");
  });
  std::sort(resolution_rows.begin(), resolution_rows.end(),
            [](const json& a, const json& b) {
              return a.at("question_id") < b.at("question_id");
            });
  std::sort(parked_rows.begin(), parked_rows.end(),
            [](const json& a, const json& b) {
              if (a.value("stage", "") != b.value("stage", ""))
                return a.value("stage", "") < b.value("stage", "");
              return a.value("id", "") < b.value("id", "");
            });
  jsonl::write_file(data("votes.jsonl"), vote_rows);
  jsonl::write_file(data("resolutions.jsonl"), resolution_rows);
  jsonl::write_file(data("needs_attention.jsonl"), parked_rows);
  mark_stage(Stage::resolve,
             {"votes.jsonl", "resolutions.jsonl", "needs_attention.jsonl"});
  return summary;
}

StageSummary Pipeline::stage_score(std::optional<int> limit) {
  (void)limit;
  StageSummary summary;
  summary.stage = Stage::score;
  write_scores(*this);
  mark_stage(Stage::score, {"scores.jsonl", "reliability.jsonl", "ranking.jsonl",
                            "distribution.jsonl"});
  summary.processed = static_cast<int>(jsonl::read_file(data("scores.jsonl")).size());
  return summary;
}

StageSummary Pipeline::stage_report(std::optional<int> limit) {
  (void)limit;
  StageSummary summary;
  summary.stage = Stage::report;
  if (!manifest_.stages.count("score"))
    throw Error(ErrorCode::IncompleteRun, "scoring has not run");
  write_report(*this);
  mark_stage(Stage::report,
             {"report/report.md", "report/funnel.jsonl", "report/topics.jsonl",
              "report/pair_audit.jsonl", "report/scores.jsonl",
              "report/resolution_stats.json"});
  summary.processed = 1;
  return summary;
}

}  // namespace ffoundry
