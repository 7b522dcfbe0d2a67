#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ffoundry/config.hpp"
#include "ffoundry/pipeline.hpp"

namespace {

using namespace ffoundry;

int run(const std::string& stage_name, const std::string& run_dir,
        const std::string& config_file, std::optional<int> limit,
        const std::string& backend_override, std::optional<std::uint64_t> seed,
        const std::string& as_of, const std::string& strategy,
        const std::string& forecaster, const std::string& researcher) {
  RunConfig cfg = config_file.empty() ? RunConfig::defaults_mock()
                                      : RunConfig::load(config_file);
  if (seed) cfg.root_seed = *seed;
  if (!strategy.empty()) {
    if (strategy != "direct" && strategy != "subq")
      throw Error(ErrorCode::ConfigInvalid, "--strategy must be direct or subq");
    cfg.forecast_strategy = strategy;
  }
  if (!as_of.empty()) cfg.resolution_date = UtcTime::parse_or_throw(as_of);
  if (!forecaster.empty()) {
    if (!cfg.backends.count(forecaster))
      throw Error(ErrorCode::ConfigInvalid, "unknown backend: " + forecaster);
    cfg.roles["forecaster"] = forecaster;
  }
  if (!researcher.empty()) {
    if (!cfg.backends.count(researcher))
      throw Error(ErrorCode::ConfigInvalid, "unknown backend: " + researcher);
    cfg.roles["researcher"] = researcher;
  }
  if (!backend_override.empty()) {
    if (backend_override == "mock") {
      for (auto& [id, b] : cfg.backends) b.kind = "mock";
      cfg.backend_profile = "mock";
    } else if (backend_override == "live") {
      cfg.backend_profile = "live";
      for (const auto& [id, b] : cfg.backends) {
        if (b.kind == "http" && b.endpoint.empty())
          throw Error(ErrorCode::ConfigInvalid,
                      "backend " + id + " has no endpoint for live mode");
      }
    } else {
      throw Error(ErrorCode::ConfigInvalid, "--backend must be mock or live");
    }
  }

  Pipeline pipeline(cfg, run_dir);
  std::vector<StageSummary> summaries;
  if (stage_name == "all") {
    summaries = pipeline.run_all(limit);
  } else {
    auto stage = stage_from_string(stage_name);
    if (!stage)
      throw Error(ErrorCode::ConfigInvalid, "unknown stage: " + stage_name);
    summaries.push_back(pipeline.run_stage(*stage, limit));
  }

  bool any_failed = false;
  for (const auto& s : summaries) {
    std::printf("stage %-9s processed=%d skipped=%d failed=%d\n",
                to_string(s.stage), s.processed, s.skipped, s.failed);
    any_failed = any_failed || s.failed > 0;
  }
  return any_failed ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ffoundry: generate, forecast, resolve and score binary "
               "forecasting questions"};
  app.require_subcommand(1);

  std::string run_dir = "runs/default";
  std::string config_file;
  std::string backend_override;
  std::string as_of;
  std::string strategy;
  std::string forecaster;
  std::string researcher;
  std::optional<int> limit;
  std::optional<std::uint64_t> seed;

  std::vector<std::string> names;
  for (Stage s : all_stages()) names.push_back(to_string(s));
  names.push_back("all");

  std::vector<CLI::App*> subs;
  for (const auto& name : names) {
    CLI::App* sub = app.add_subcommand(
        name, name == "all" ? "run every stage in order"
                            : std::string("run the ") + name + " stage");
    sub->add_option("--run-dir", run_dir, "run directory");
    sub->add_option("--config", config_file, "config JSON file");
    sub->add_option("--limit", limit, "process at most N items");
    sub->add_option("--backend", backend_override, "mock|live override");
    sub->add_option("--seed", seed, "root RNG seed override");
    sub->add_option("--as-of", as_of, "resolution cutoff date (resolve stage)");
    sub->add_option("--strategy", strategy, "direct|subq forecast strategy");
    sub->add_option("--forecaster", forecaster, "backend id for the forecaster role");
    sub->add_option("--researcher", researcher, "backend id for the researcher role");
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  const std::string chosen = app.get_subcommands().front()->get_name();
  try {
    return run(chosen, run_dir, config_file, limit, backend_override, seed,
               as_of, strategy, forecaster, researcher);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::ConfigInvalid: return 2;
      case ErrorCode::MissingUpstream: return 3;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
