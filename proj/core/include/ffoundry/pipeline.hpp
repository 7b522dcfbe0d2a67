#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ffoundry/config.hpp"
#include "ffoundry/domain.hpp"
#include "ffoundry/forecast.hpp"
#include "ffoundry/gateway.hpp"
#include "ffoundry/mock_backend.hpp"
#include "ffoundry/resolution_types.hpp"
#include "ffoundry/verify.hpp"

namespace ffoundry {

enum class Stage {
  seed,
  generate,
  refine,
  verify,
  dedup,
  research,
  forecast,
  subq,
  resolve,
  score,
  report,
};

const char* to_string(Stage s);
std::optional<Stage> stage_from_string(const std::string& s);
std::vector<Stage> all_stages();

struct StageSummary {
  Stage stage = Stage::seed;
  int processed = 0;
  int skipped = 0;
  int failed = 0;
};

// manifest.json: config snapshot plus per-stage completion markers with the
// digests of that stage's outputs. A marker only counts when the recorded
// digests still match the files on disk.
struct RunManifest {
  std::string run_id;
  std::string created_at;
  json config_snapshot;
  struct Mark {
    std::string completed_at;
    std::map<std::string, std::string> output_digests;  // file -> sha256
    // upstream files as they looked when this stage ran; a mismatch later
    // means the stage is stale and must rerun
    std::map<std::string, std::string> input_digests;
  };
  std::map<std::string, Mark> stages;

  static RunManifest load(const std::filesystem::path& run_dir);
  void save(const std::filesystem::path& run_dir) const;
};

std::string file_sha256(const std::filesystem::path& path);

class Pipeline {
 public:
  Pipeline(RunConfig config, std::filesystem::path run_dir);

  // Runs one stage with resume semantics: items that already have outputs
  // are skipped; a completed stage with intact digests is a no-op.
  StageSummary run_stage(Stage stage, std::optional<int> limit = std::nullopt);

  // Convenience: every stage in order (subq only under the subq strategy).
  std::vector<StageSummary> run_all(std::optional<int> limit = std::nullopt);

  const RunConfig& config() const { return config_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }
  Gateway& gateway() { return *gateway_; }
  std::shared_ptr<MockBackend> mock_backend() { return mock_; }
  RunManifest& manifest() { return manifest_; }
  void mark_stage(Stage stage, const std::vector<std::string>& files);

  // Data accessors used by stages, tests, and the report writer.
  std::vector<Seed> load_seeds() const;
  std::vector<ProtoQuestion> load_protos() const;
  std::vector<Question> load_questions() const;
  std::vector<GateResult> load_gate_results() const;
  std::vector<Question> kept_questions() const;  // gate passed and dedup kept
  std::vector<ResearchDossier> load_dossiers() const;
  std::vector<ForecastRecord> load_forecasts(const std::string& file) const;
  std::vector<ResolutionVote> load_votes() const;
  std::vector<FinalResolution> load_resolutions() const;

 private:
  StageSummary stage_seed(std::optional<int> limit);
  StageSummary stage_generate(std::optional<int> limit);
  StageSummary stage_refine(std::optional<int> limit);
  StageSummary stage_verify(std::optional<int> limit);
  StageSummary stage_dedup(std::optional<int> limit);
  StageSummary stage_research(std::optional<int> limit);
  StageSummary stage_forecast(std::optional<int> limit);
  StageSummary stage_subq(std::optional<int> limit);
  StageSummary stage_resolve(std::optional<int> limit);
  StageSummary stage_score(std::optional<int> limit);
  StageSummary stage_report(std::optional<int> limit);

  void require_upstream(Stage stage) const;
  bool stage_complete(Stage stage) const;
  std::filesystem::path data(const std::string& name) const;
  void append_failure(const std::string& stage, const std::string& id,
                      const std::string& error);
  void rewrite_rejects(const std::string& stage, std::vector<json> new_rows);

  // Items run on a small pool; outputs are order-normalized afterwards.
  template <typename Item, typename Fn>
  void parallel_for(const std::vector<Item>& items, Fn&& fn);

  RunConfig config_;
  std::filesystem::path run_dir_;
  RunManifest manifest_;
  std::unique_ptr<Gateway> gateway_;
  std::shared_ptr<MockBackend> mock_;
};

}  // namespace ffoundry
