#include "ffoundry/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "ffoundry/audit.hpp"
#include "ffoundry/dedup.hpp"
#include "ffoundry/jsonl.hpp"
#include "ffoundry/metrics.hpp"
#include "ffoundry/pipeline.hpp"
#include "ffoundry/rng.hpp"

namespace ffoundry {

namespace {

std::string f3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string pct1(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", fraction * 100.0);
  return buf;
}

struct ModelKey {
  std::string forecaster;
  ForecastStrategy strategy;
  std::string id() const {
    return strategy == ForecastStrategy::subquestions ? forecaster + "+subq"
                                                      : forecaster;
  }
  bool operator<(const ModelKey& o) const {
    if (forecaster != o.forecaster) return forecaster < o.forecaster;
    return static_cast<int>(strategy) < static_cast<int>(o.strategy);
  }
};

json score_row(const std::string& model_id, const std::string& forecaster,
               const std::string& researcher, ForecastStrategy strategy,
               const std::string& set_name,
               const std::map<std::string, double>& forecasts,
               const std::map<std::string, int>& outcome_by_id,
               std::int64_t eligible, int bins, int iterations, double mass,
               std::uint64_t seed) {
  std::vector<double> ps;
  std::vector<int> os;
  std::vector<metrics::ScoredQuestion> scores;
  for (const auto& [qid, p] : forecasts) {
    auto it = outcome_by_id.find(qid);
    if (it == outcome_by_id.end()) continue;
    ps.push_back(p);
    os.push_back(it->second);
    double d = p - it->second;
    scores.push_back({qid, d * d});
  }
  json row;
  row["model_id"] = model_id;
  row["forecaster"] = forecaster;
  row["researcher"] = researcher;
  row["strategy"] = to_string(strategy);
  row["set"] = set_name;
  row["n"] = ps.size();
  row["missing"] = eligible - static_cast<std::int64_t>(ps.size());
  if (ps.empty()) return row;

  auto [bins_table, decomp] = metrics::decompose(ps, os, bins);
  auto ci = metrics::bootstrap_ci(scores, iterations, mass, seed);
  row["brier"] = decomp.brier;
  row["ci_lo"] = ci.lo;
  row["ci_hi"] = ci.hi;
  row["calibration"] = decomp.calibration;
  row["refinement"] = decomp.refinement;
  row["uncertainty"] = decomp.uncertainty;
  row["base_rate"] = bins_table.base_rate;
  return row;
}

void append_reliability_rows(std::vector<json>& out, const std::string& model_id,
                             const std::string& set_name,
                             const std::vector<double>& ps,
                             const std::vector<int>& os, int bins) {
  if (ps.empty()) return;
  auto [table, decomp] = metrics::decompose(ps, os, bins);
  (void)decomp;
  for (int k = 0; k < table.bin_count; ++k) {
    json row;
    row["model_id"] = model_id;
    row["set"] = set_name;
    row["bin"] = k;
    row["bin_lo"] = static_cast<double>(k) / table.bin_count;
    row["bin_hi"] = static_cast<double>(k + 1) / table.bin_count;
    row["count"] = table.counts[k];
    row["mean_forecast"] = table.mean_forecast[k];
    row["observed_freq"] = table.observed_freq[k];
    out.push_back(row);
  }
}

}  // namespace

void write_scores(Pipeline& p) {
  const auto& cfg = p.config();
  auto resolutions = p.load_resolutions();
  auto outcomes = metrics::OutcomeSet::from_resolutions(resolutions);
  std::map<std::string, int> outcome_by_id;
  for (std::size_t i = 0; i < outcomes.question_ids.size(); ++i)
    outcome_by_id[outcomes.question_ids[i]] = outcomes.outcomes[i];

  auto direct = p.load_forecasts("forecasts.jsonl");
  auto subq = p.load_forecasts("subq_forecasts.jsonl");

  std::map<ModelKey, std::map<std::string, double>> by_model;
  for (const auto& f : direct)
    by_model[{f.forecaster_backend, ForecastStrategy::direct}][f.question_id] =
        f.probability;
  for (const auto& f : subq)
    by_model[{f.forecaster_backend, ForecastStrategy::subquestions}]
            [f.question_id] = f.probability;

  const std::string researcher = cfg.roles.count("researcher")
                                     ? cfg.roles.at("researcher")
                                     : std::string("unknown");
  const std::int64_t eligible = static_cast<std::int64_t>(outcome_by_id.size());

  std::vector<json> score_rows, reliability_rows, ranking_rows, distribution_rows;

  for (const auto& [key, forecasts] : by_model) {
    if (key.strategy == ForecastStrategy::subquestions) continue;
    score_rows.push_back(score_row(
        key.id(), key.forecaster, researcher, key.strategy, "full", forecasts,
        outcome_by_id, eligible, cfg.reliability_bins, cfg.bootstrap_iterations,
        cfg.ci_mass, derive_seed(cfg.root_seed, "bootstrap_full_" + key.id())));

    std::vector<double> ps;
    std::vector<int> os;
    for (const auto& [qid, prob] : forecasts) {
      auto it = outcome_by_id.find(qid);
      if (it == outcome_by_id.end()) continue;
      ps.push_back(prob);
      os.push_back(it->second);
    }
    append_reliability_rows(reliability_rows, key.id(), "full", ps, os,
                            cfg.reliability_bins);
    if (!ps.empty()) {
      auto dist = metrics::distribution_summary(ps, os, cfg.distribution_bins);
      json row;
      row["model_id"] = key.id();
      row["set"] = "full";
      row["bins"] = dist.bin_count;
      row["yes_hist"] = dist.yes_hist;
      row["no_hist"] = dist.no_hist;
      row["overall_mean"] = dist.overall_mean;
      row["base_rate"] = dist.base_rate;
      if (dist.mean_given_yes) row["mean_given_yes"] = *dist.mean_given_yes;
      if (dist.mean_given_no) row["mean_given_no"] = *dist.mean_given_no;
      distribution_rows.push_back(row);
    }
  }

  // Subquestion rows are always paired with a direct row on the same subset.
  for (const auto& [key, forecasts] : by_model) {
    if (key.strategy != ForecastStrategy::subquestions) continue;
    const ModelKey direct_key{key.forecaster, ForecastStrategy::direct};
    std::map<std::string, double> direct_subset;
    auto dit = by_model.find(direct_key);
    if (dit != by_model.end()) {
      for (const auto& [qid, prob] : forecasts) {
        auto f = dit->second.find(qid);
        if (f != dit->second.end()) direct_subset[qid] = f->second;
      }
    }
    const std::int64_t subset_eligible = static_cast<std::int64_t>(
        std::count_if(forecasts.begin(), forecasts.end(), [&](const auto& kv) {
          return outcome_by_id.count(kv.first) > 0;
        }));
    score_rows.push_back(score_row(
        key.id(), key.forecaster, researcher, key.strategy, "subset", forecasts,
        outcome_by_id, subset_eligible, cfg.reliability_bins,
        cfg.bootstrap_iterations, cfg.ci_mass,
        derive_seed(cfg.root_seed, "bootstrap_subset_" + key.id())));
    if (!direct_subset.empty()) {
      score_rows.push_back(score_row(
          direct_key.id(), key.forecaster, researcher, ForecastStrategy::direct,
          "subset", direct_subset, outcome_by_id, subset_eligible,
          cfg.reliability_bins, cfg.bootstrap_iterations, cfg.ci_mass,
          derive_seed(cfg.root_seed, "bootstrap_subset_" + direct_key.id())));

      // paired win fraction of the subquestion strategy over direct
      std::vector<metrics::ModelForecasts> pair;
      pair.push_back({key.id(), forecasts});
      pair.push_back({direct_key.id(), direct_subset});
      try {
        auto stability = metrics::ranking_stability(
            pair, outcomes, cfg.bootstrap_iterations,
            derive_seed(cfg.root_seed, "subq_vs_direct_" + key.forecaster));
        const std::size_t subq_idx =
            stability.model_ids[0] == key.id() ? 0 : 1;
        json row;
        row["type"] = "subq_win_fraction";
        row["model_id"] = key.id();
        row["baseline"] = direct_key.id();
        row["fraction"] = stability.win_fraction[subq_idx][1 - subq_idx];
        row["shared_questions"] = stability.shared_questions;
        ranking_rows.push_back(row);
      } catch (const Error&) {
        // no overlap: nothing to compare
      }
    }
  }

  // Full-set ranking stability across direct models.
  std::vector<metrics::ModelForecasts> full_models;
  for (const auto& [key, forecasts] : by_model) {
    if (key.strategy != ForecastStrategy::direct) continue;
    full_models.push_back({key.id(), forecasts});
  }
  if (full_models.size() >= 2) {
    try {
      auto stability = metrics::ranking_stability(
          full_models, outcomes, cfg.bootstrap_iterations,
          derive_seed(cfg.root_seed, "ranking_full"));
      std::size_t max_answered = 0;
      for (const auto& m : full_models)
        max_answered = std::max(max_answered, m.by_question.size());
      for (std::size_t a = 0; a < stability.model_ids.size(); ++a) {
        json row;
        row["type"] = "rank_fraction";
        row["model_id"] = stability.model_ids[a];
        row["fractions"] = stability.rank_fraction[a];
        row["shared_questions"] = stability.shared_questions;
        row["intersection_shrunk"] = stability.shared_questions < max_answered;
        ranking_rows.push_back(row);
        for (std::size_t b = 0; b < stability.model_ids.size(); ++b) {
          if (a == b) continue;
          json w;
          w["type"] = "win_fraction";
          w["model_a"] = stability.model_ids[a];
          w["model_b"] = stability.model_ids[b];
          w["fraction"] = stability.win_fraction[a][b];
          ranking_rows.push_back(w);
        }
      }
    } catch (const Error&) {
      // empty intersection: reported in the data-quality section instead
    }
  }

  auto sort_rows = [](std::vector<json>& rows) {
    std::sort(rows.begin(), rows.end(),
              [](const json& a, const json& b) { return a.dump() < b.dump(); });
  };
  sort_rows(score_rows);
  sort_rows(reliability_rows);
  sort_rows(ranking_rows);
  sort_rows(distribution_rows);
  jsonl::write_file(p.run_dir() / "scores.jsonl", score_rows);
  jsonl::write_file(p.run_dir() / "reliability.jsonl", reliability_rows);
  jsonl::write_file(p.run_dir() / "ranking.jsonl", ranking_rows);
  jsonl::write_file(p.run_dir() / "distribution.jsonl", distribution_rows);
}

void write_report(Pipeline& p) {
  const auto& cfg = p.config();
  const auto dir = p.run_dir() / "report";
  std::filesystem::create_directories(dir);

  // --- funnel ---
  auto count_lines = [&](const std::string& file) -> std::int64_t {
    if (!std::filesystem::exists(p.run_dir() / file)) return 0;
    return static_cast<std::int64_t>(jsonl::read_file(p.run_dir() / file).size());
  };
  const std::int64_t n_seeds = count_lines("seeds.jsonl");
  const std::int64_t n_protos = count_lines("protos.jsonl");
  const std::int64_t n_questions = count_lines("questions.jsonl");
  std::int64_t n_passed = 0;
  for (const auto& g : p.load_gate_results())
    if (g.passed) ++n_passed;
  std::int64_t n_trivial = 0;
  for (const auto& g : p.load_gate_results())
    if (g.passed && g.trivial_flag) ++n_trivial;
  std::int64_t n_kept = 0;
  for (const auto& row : jsonl::read_file(p.run_dir() / "dedup_report.jsonl"))
    if (row.value("kept", false)) ++n_kept;
  const std::int64_t n_dossiers = count_lines("dossiers.jsonl");
  const std::int64_t n_forecasts = count_lines("forecasts.jsonl");
  const std::int64_t n_resolutions = count_lines("resolutions.jsonl");

  std::vector<json> funnel;
  auto frow = [&](const char* stage, std::int64_t count) {
    json row;
    row["stage"] = stage;
    row["count"] = count;
    funnel.push_back(row);
  };
  frow("seeds", n_seeds);
  frow("proto_questions", n_protos);
  frow("refined_questions", n_questions);
  frow("passed_verifiers", n_passed);
  frow("after_dedup", n_kept);
  frow("researched", n_dossiers);
  frow("forecasted", n_forecasts);
  frow("resolved", n_resolutions);
  jsonl::write_file(dir / "funnel.jsonl", funnel);

  // --- verdict stats ---
  std::map<std::string, std::map<std::string, std::int64_t>> verdict_counts;
  if (std::filesystem::exists(p.run_dir() / "verdicts.jsonl")) {
    for (const auto& row : jsonl::read_file(p.run_dir() / "verdicts.jsonl")) {
      const std::string kind = row.value("kind", "");
      if (kind == "forecast") continue;
      ++verdict_counts[kind][row.value("rating", "")];
    }
  }

  // --- resolution statistics ---
  json res_stats_json;
  std::optional<metrics::ResolutionStats> stats;
  if (n_resolutions > 0) {
    auto st = metrics::resolution_stats(p.load_votes(), p.load_resolutions());
    stats = st;
    res_stats_json["total"] = st.total;
    res_stats_json["yes"] = st.yes;
    res_stats_json["no"] = st.no;
    res_stats_json["annulled"] = st.annulled;
    res_stats_json["non_unanimous"] = st.non_unanimous;
    res_stats_json["disagree_ab"] = st.disagree_ab;
    res_stats_json["disagree_ac"] = st.disagree_ac;
    res_stats_json["disagree_bc"] = st.disagree_bc;
    res_stats_json["tiebreak_calls"] = st.tiebreak_calls;
    res_stats_json["tiebreak_agreed_with_majority"] =
        st.tiebreak_agreed_with_majority;
    if (st.tiebreak_agreement_rate)
      res_stats_json["tiebreak_agreement_rate"] = *st.tiebreak_agreement_rate;
    res_stats_json["base_rate_of_total"] = st.base_rate_of_total;
    if (st.base_rate_of_resolved)
      res_stats_json["base_rate_of_resolved"] = *st.base_rate_of_resolved;
    json by_slot = json::object();
    for (const auto& [slot, count] : st.annulments_by_slot) by_slot[slot] = count;
    res_stats_json["annulments_by_slot"] = by_slot;
  }
  {
    std::ofstream out(dir / "resolution_stats.json", std::ios::trunc);
    out << res_stats_json.dump(2) << '\n';
  }

  // --- topics and intra-cluster diversity ---
  std::vector<json> topic_rows, audit_rows;
  double audit_mean_num = 0.0;
  std::int64_t audit_pairs = 0;
  auto kept = p.kept_questions();
  std::map<std::string, Question> by_id;
  for (const auto& q : kept) by_id[q.id] = q;
  std::vector<EmbeddingVector> embeddings;
  if (std::filesystem::exists(p.run_dir() / "embeddings_index.jsonl")) {
    auto all = read_embeddings(p.run_dir() / "embeddings.bin",
                               p.run_dir() / "embeddings_index.jsonl");
    for (auto& e : all)
      if (by_id.count(e.question_id)) embeddings.push_back(std::move(e));
  }
  const int k = std::min<int>(cfg.topic_k, static_cast<int>(embeddings.size()));
  if (k >= 2) {
    DiversityAuditor auditor(p.gateway(), cfg.role("topic_labeler"),
                             cfg.role("pair_scorer"), cfg.label_sample);
    auto clusters = auditor.topic_cluster(embeddings, by_id, k,
                                          derive_seed(cfg.root_seed, "topics"));
    std::vector<json> cluster_json;
    for (const auto& c : clusters) {
      json row;
      row["label"] = c.label;
      row["count"] = c.count;
      row["percentage"] = c.percentage;
      topic_rows.push_back(row);
      cluster_json.push_back(c.to_json());
    }
    for (const auto& c : clusters) {
      if (c.count < 2) continue;
      auto audit = auditor.pair_audit(
          c, by_id, cfg.pairs_per_cluster,
          derive_seed(cfg.root_seed, "pairs_" + std::to_string(c.cluster_id)));
      json row;
      row["label"] = c.label;
      row["n_questions"] = c.count;
      row["pairs"] = audit.pairs.size();
      row["mean"] = audit.mean;
      row["count_1"] = audit.histogram[0];
      row["count_2"] = audit.histogram[1];
      row["count_3"] = audit.histogram[2];
      row["count_4"] = audit.histogram[3];
      row["unscored"] = audit.unscored;
      audit_rows.push_back(row);
      const std::int64_t scored =
          static_cast<std::int64_t>(audit.pairs.size()) - audit.unscored;
      audit_mean_num += audit.mean * static_cast<double>(scored);
      audit_pairs += scored;
    }
  }
  jsonl::write_file(dir / "topics.jsonl", topic_rows);
  jsonl::write_file(dir / "pair_audit.jsonl", audit_rows);

  // --- score table ---
  std::vector<json> score_rows;
  if (std::filesystem::exists(p.run_dir() / "scores.jsonl"))
    score_rows = jsonl::read_file(p.run_dir() / "scores.jsonl");
  jsonl::write_file(dir / "scores.jsonl", score_rows);
  std::vector<json> ranking_rows;
  if (std::filesystem::exists(p.run_dir() / "ranking.jsonl"))
    ranking_rows = jsonl::read_file(p.run_dir() / "ranking.jsonl");

  // --- markdown ---
  std::string md;
  md += "# Run report\n\n";

  md += "## Question funnel\n\n";
  md += "| stage | count |\n|---|---|\n";
  for (const auto& row : funnel)
    md += "| " + row.at("stage").get<std::string>() + " | " +
          std::to_string(row.at("count").get<std::int64_t>()) + " |\n";
  md += "\nFunnel: " + std::to_string(n_seeds) + " -> " + std::to_string(n_protos) +
        " -> " + std::to_string(n_passed) + " -> " + std::to_string(n_kept) +
        " (seeds -> proto-questions -> passed verifiers -> final set)\n";
  md += "\nTrivial-but-retained questions (forecast < 2% or > 98%): " +
        std::to_string(n_trivial) + "\n";

  md += "\n## Verifier outcomes\n\n";
  if (verdict_counts.empty()) {
    md += "No verdicts recorded.\n";
  } else {
    md += "| verifier | rating | count |\n|---|---|---|\n";
    for (const auto& [kind, ratings] : verdict_counts)
      for (const auto& [rating, count] : ratings)
        md += "| " + kind + " | " + rating + " | " + std::to_string(count) + " |\n";
  }

  md += "\n## Resolution statistics\n\n";
  if (stats) {
    md += "- resolved " + std::to_string(stats->total) + " questions: " +
          std::to_string(stats->yes) + " yes / " + std::to_string(stats->no) +
          " no / " + std::to_string(stats->annulled) + " annulled\n";
    md += "- base rate " + pct1(stats->base_rate_of_total) + " of " +
          std::to_string(stats->total) + " (annulled included)";
    if (stats->base_rate_of_resolved)
      md += "; " + pct1(*stats->base_rate_of_resolved) + " of " +
            std::to_string(stats->yes + stats->no) + " resolved";
    md += "\n";
    md += "- non-unanimous primaries: " + std::to_string(stats->non_unanimous) +
          "\n";
    md += "- pairwise primary disagreements: a/b " +
          std::to_string(stats->disagree_ab) + ", a/c " +
          std::to_string(stats->disagree_ac) + ", b/c " +
          std::to_string(stats->disagree_bc) + "\n";
    md += "- tiebreak calls: " + std::to_string(stats->tiebreak_calls);
    if (stats->tiebreak_agreement_rate)
      md += " (agreed with primary majority " +
            pct1(*stats->tiebreak_agreement_rate) + " of the time)";
    md += "\n";
    if (!stats->annulments_by_slot.empty()) {
      md += "- annulments by deciding slot:";
      for (const auto& [slot, count] : stats->annulments_by_slot)
        md += " " + slot + "=" + std::to_string(count);
      md += "\n";
    }
  } else {
    md += "No resolutions recorded.\n";
  }

  md += "\n## Forecasting scores\n\n";
  if (score_rows.empty()) {
    md += "No scores recorded.\n";
  } else {
    md += "| Forecast | Research | Set | Brier | 95% CI | Calibration | "
          "Refinement |\n|---|---|---|---|---|---|---|\n";
    for (const auto& row : score_rows) {
      if (!row.contains("brier")) continue;
      md += "| " + row.value("model_id", "") + " | " +
            row.value("researcher", "") + " | " + row.value("set", "") + " | " +
            f3(row.at("brier").get<double>()) + " | [" +
            f3(row.at("ci_lo").get<double>()) + ", " +
            f3(row.at("ci_hi").get<double>()) + "] | " +
            f3(row.at("calibration").get<double>()) + " | " +
            f3(row.at("refinement").get<double>()) + " |\n";
    }
  }

  md += "\n## Ranking stability\n\n";
  bool any_rank = false;
  for (const auto& row : ranking_rows) {
    if (row.value("type", "") == "rank_fraction") {
      any_rank = true;
      const auto fractions = row.at("fractions").get<std::vector<double>>();
      md += "- " + row.value("model_id", "") + ": rank fractions [";
      for (std::size_t i = 0; i < fractions.size(); ++i)
        md += (i ? ", " : "") + pct1(fractions[i]);
      md += "]";
      if (row.value("intersection_shrunk", false))
        md += "  **WARNING: intersection smaller than some model's answered set**";
      md += "\n";
    }
  }
  for (const auto& row : ranking_rows) {
    if (row.value("type", "") == "win_fraction")
      md += "- " + row.value("model_a", "") + " beats " +
            row.value("model_b", "") + " in " +
            pct1(row.at("fraction").get<double>()) + " of resamples\n";
  }
  if (!any_rank) md += "Fewer than two models on the full set.\n";

  md += "\n## Reliability bins\n\nSee `reliability.jsonl` (plot-ready: bin, "
        "count, mean forecast, observed frequency per model).\n";

  md += "\n## Forecast distributions\n\n";
  if (std::filesystem::exists(p.run_dir() / "distribution.jsonl")) {
    for (const auto& row : jsonl::read_file(p.run_dir() / "distribution.jsonl")) {
      md += "- " + row.value("model_id", "") + ": overall mean " +
            pct1(row.value("overall_mean", 0.0));
      if (row.contains("mean_given_yes"))
        md += ", mean on yes-outcomes " + pct1(row.at("mean_given_yes").get<double>());
      if (row.contains("mean_given_no"))
        md += ", mean on no-outcomes " + pct1(row.at("mean_given_no").get<double>());
      md += ", base rate " + pct1(row.value("base_rate", 0.0)) + "\n";
    }
  }

  md += "\n## Topics\n\n";
  if (topic_rows.empty()) {
    md += "Topic clustering was not run (needs at least 2 questions).\n";
  } else {
    md += "| Topic | Count | % |\n|---|---|---|\n";
    for (const auto& row : topic_rows)
      md += "| " + row.value("label", "") + " | " +
            std::to_string(row.at("count").get<int>()) + " | " +
            pct1(row.at("percentage").get<double>() / 100.0) + " |\n";
  }

  md += "\n## Intra-cluster diversity\n\n";
  if (audit_rows.empty()) {
    md += "No cluster had two or more members.\n";
  } else {
    md += "| Topic | N | Mean | 1s | 2s | 3s | 4s |\n|---|---|---|---|---|---|---|\n";
    for (const auto& row : audit_rows) {
      char mean_buf[16];
      std::snprintf(mean_buf, sizeof(mean_buf), "%.2f", row.value("mean", 0.0));
      md += "| " + row.value("label", "") + " | " +
            std::to_string(row.at("n_questions").get<int>()) + " | " + mean_buf +
            " | " + std::to_string(row.at("count_1").get<int>()) + " | " +
            std::to_string(row.at("count_2").get<int>()) + " | " +
            std::to_string(row.at("count_3").get<int>()) + " | " +
            std::to_string(row.at("count_4").get<int>()) + " |\n";
    }
    if (audit_pairs > 0) {
      char mean_buf[16];
      std::snprintf(mean_buf, sizeof(mean_buf), "%.2f",
                    audit_mean_num / static_cast<double>(audit_pairs));
      md += "\nOverall mean similarity: " + std::string(mean_buf) + " over " +
            std::to_string(audit_pairs) + " scored pairs\n";
    }
  }

  md += "\n## Subquestion decomposition\n\n";
  const bool subq_ran =
      std::filesystem::exists(p.run_dir() / "subq_forecasts.jsonl") &&
      count_lines("subq_forecasts.jsonl") > 0;
  if (!subq_ran) {
    md += "not run\n";
  } else {
    md += "- final forecasts with subquestion context: " +
          std::to_string(count_lines("subq_forecasts.jsonl")) + "\n";
    for (const auto& row : ranking_rows) {
      if (row.value("type", "") == "subq_win_fraction")
        md += "- " + row.value("model_id", "") + " beats " +
              row.value("baseline", "") + " in " +
              pct1(row.at("fraction").get<double>()) +
              " of paired resamples (shared questions: " +
              std::to_string(row.value("shared_questions", 0)) + ")\n";
    }
  }

  // Optional imported files: human ground-truth resolutions and expert
  // question ratings are external data, compared here but never produced.
  md += "\n## Human verification\n\n";
  if (std::filesystem::exists(p.run_dir() / "ground_truth.jsonl") && stats) {
    std::map<std::string, VoteVerdict> truth;
    for (const auto& row : jsonl::read_file(p.run_dir() / "ground_truth.jsonl"))
      truth[row.at("question_id").get<std::string>()] =
          vote_verdict_from_string(row.at("verdict").get<std::string>());
    int compared = 0, wrong = 0, should_annul = 0;
    for (const auto& r : p.load_resolutions()) {
      auto it = truth.find(r.question_id);
      if (it == truth.end()) continue;
      ++compared;
      if (it->second == VoteVerdict::annul) ++should_annul;
      if (r.verdict != it->second) ++wrong;
    }
    if (compared > 0) {
      auto annul_ci = metrics::beta_interval(should_annul, compared, 0.95);
      auto error_ci = metrics::beta_interval(wrong, compared, 0.95);
      md += "- verified sample: " + std::to_string(compared) + " questions, " +
            std::to_string(wrong) + " resolver errors, " +
            std::to_string(should_annul) + " requiring annulment\n";
      md += "- annulment rate " + pct1(annul_ci.posterior_mean) + " (95% CI: [" +
            pct1(annul_ci.lo) + ", " + pct1(annul_ci.hi) + "])\n";
      md += "- resolver error rate " + pct1(error_ci.posterior_mean) +
            " (95% CI: [" + pct1(error_ci.lo) + ", " + pct1(error_ci.hi) + "])\n";
    } else {
      md += "ground_truth.jsonl shares no question ids with this run\n";
    }
  } else {
    md += "no ground_truth.jsonl provided\n";
  }

  md += "\n## Expert ratings\n\n";
  if (std::filesystem::exists(p.run_dir() / "expert_ratings.jsonl")) {
    std::map<std::string, std::int64_t> rating_counts;
    std::int64_t rated_and_gated = 0, accepted_and_passed = 0, gate_passed = 0;
    std::set<std::string> passed_ids;
    for (const auto& g : p.load_gate_results())
      if (g.passed) passed_ids.insert(g.question_id);
    for (const auto& row : jsonl::read_file(p.run_dir() / "expert_ratings.jsonl")) {
      const std::string rating = row.at("rating").get<std::string>();
      ++rating_counts[rating];
      const std::string qid = row.at("question_id").get<std::string>();
      ++rated_and_gated;
      if (passed_ids.count(qid)) {
        ++gate_passed;
        if (rating == "accept") ++accepted_and_passed;
      }
    }
    md += "| rating | count |\n|---|---|\n";
    for (const auto& [rating, count] : rating_counts)
      md += "| " + rating + " | " + std::to_string(count) + " |\n";
    if (gate_passed > 0)
      md += "\nOf the rated questions that passed the gate, " +
            pct1(static_cast<double>(accepted_and_passed) /
                 static_cast<double>(gate_passed)) +
            " were rated accept (" + std::to_string(accepted_and_passed) + "/" +
            std::to_string(gate_passed) + ").\n";
  } else {
    md += "no expert_ratings.jsonl provided\n";
  }

  md += "\n## Data quality\n\n";
  std::int64_t parked = 0;
  if (std::filesystem::exists(p.run_dir() / "needs_attention.jsonl"))
    parked = count_lines("needs_attention.jsonl");
  std::int64_t failures = 0;
  if (std::filesystem::exists(p.run_dir() / "failures.jsonl"))
    failures = count_lines("failures.jsonl");
  md += "- parked questions (needs attention): " + std::to_string(parked) + "\n";
  md += "- recorded stage failures (retryable): " + std::to_string(failures) + "\n";
  std::int64_t missing_total = 0;
  for (const auto& row : score_rows) missing_total += row.value("missing", 0LL);
  md += "- forecasts missing from scoring (excluded, never imputed): " +
        std::to_string(missing_total) + "\n";

  const auto tmp = dir / "report.md.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << md;
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "report write failed");
  }
  std::filesystem::rename(tmp, dir / "report.md");
}

}  // namespace ffoundry
