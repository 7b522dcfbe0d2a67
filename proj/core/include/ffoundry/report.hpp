#pragma once

namespace ffoundry {

class Pipeline;

// Score stage: scores.jsonl (Table-style rows per model and question set),
// reliability.jsonl (plot-ready bins), ranking.jsonl (rank and win
// fractions), distribution.jsonl (per-outcome forecast histograms).
void write_scores(Pipeline& pipeline);

// Report stage: report/report.md plus machine-readable tables (funnel,
// topics, pair audit, score table, resolution statistics).
void write_report(Pipeline& pipeline);

}  // namespace ffoundry
