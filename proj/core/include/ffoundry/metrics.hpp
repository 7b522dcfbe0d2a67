#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ffoundry/resolution_types.hpp"

namespace ffoundry::metrics {

// Binary outcomes aligned with question ids. Annulled questions never enter
// an OutcomeSet; they are excluded at construction.
struct OutcomeSet {
  std::vector<std::string> question_ids;
  std::vector<int> outcomes;  // 1 = yes, 0 = no

  static OutcomeSet from_resolutions(const std::vector<FinalResolution>& rs);
};

// Plot-ready reliability table: forecasts partitioned into K equal-width
// bins [k/K, (k+1)/K), last bin closed at 1.
struct ReliabilityBins {
  int bin_count = 0;
  std::vector<std::int64_t> counts;    // n_k
  std::vector<double> mean_forecast;   // f_k, 0 for empty bins
  std::vector<double> observed_freq;   // o_k, 0 for empty bins
  std::int64_t total = 0;              // N
  double base_rate = 0.0;              // mean outcome
};

struct BrierDecomposition {
  double brier = 0.0;  // mean squared error of the raw forecasts
  double calibration = 0.0;
  double refinement = 0.0;
  double uncertainty = 0.0;
};

struct CredibleInterval {
  double lo = 0.0;
  double hi = 1.0;
  double mass = 0.95;
  double posterior_mean = 0.5;
};

// Mean of (p_i - o_i)^2. Throws MisalignedInputs on size mismatch or empty.
double brier_score(std::span<const double> forecasts, std::span<const int> outcomes);

// Murphy decomposition over K equal-width bins:
//   calibration = (1/N) sum n_k (f_k - o_k)^2
//   refinement  = (1/N) sum n_k (o_k - obar)^2
//   uncertainty = obar (1 - obar)
// calibration - refinement + uncertainty equals the Brier score of the
// forecasts with each replaced by its bin mean; it equals the raw Brier
// exactly when forecasts are constant within bins.
std::pair<ReliabilityBins, BrierDecomposition> decompose(
    std::span<const double> forecasts, std::span<const int> outcomes,
    int bin_count = 10);

struct ScoredQuestion {
  std::string question_id;
  double score = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap interval for the mean score. Questions are
// canonically sorted by id before resampling, so input order never matters;
// each iteration draws from its own counter-derived stream, so parallel and
// sequential evaluation agree bit for bit.
Interval bootstrap_ci(std::vector<ScoredQuestion> scores, int iterations = 10000,
                      double mass = 0.95, std::uint64_t rng_seed = 0);

struct ModelForecasts {
  std::string model_id;
  std::map<std::string, double> by_question;  // question_id -> probability
};

struct RankingStability {
  std::vector<std::string> model_ids;  // stable lexicographic order
  // rank_fraction[m][r]: fraction of iterations model m attains rank r
  // (rank 0 = best Brier; ties broken by model-id order).
  std::vector<std::vector<double>> rank_fraction;
  // win_fraction[a][b]: fraction of iterations a's Brier beats b's
  // (ties count for the model earlier in id order).
  std::vector<std::vector<double>> win_fraction;
  std::size_t shared_questions = 0;
};

// Paired bootstrap: one shared resample per iteration applied to every
// model, over the intersection of questions all models answered.
RankingStability ranking_stability(const std::vector<ModelForecasts>& models,
                                   const OutcomeSet& outcomes,
                                   int iterations = 10000,
                                   std::uint64_t rng_seed = 0);

// Equal-tailed interval of the Beta(s+1, n-s+1) posterior under a uniform
// prior; posterior_mean = (s+1)/(n+2).
CredibleInterval beta_interval(int successes, int trials, double mass = 0.95);

struct DistributionSummary {
  int bin_count = 20;
  std::vector<std::int64_t> yes_hist;
  std::vector<std::int64_t> no_hist;
  std::optional<double> mean_given_yes;  // absent when no yes outcomes
  std::optional<double> mean_given_no;
  double overall_mean = 0.0;
  double base_rate = 0.0;
  std::int64_t n_yes = 0;
  std::int64_t n_no = 0;
};

DistributionSummary distribution_summary(std::span<const double> forecasts,
                                         std::span<const int> outcomes,
                                         int bins = 20);

struct ResolutionStats {
  std::int64_t total = 0;
  std::int64_t yes = 0;
  std::int64_t no = 0;
  std::int64_t annulled = 0;
  std::int64_t non_unanimous = 0;
  // Pairwise disagreement counts between primary slots.
  std::int64_t disagree_ab = 0;
  std::int64_t disagree_ac = 0;
  std::int64_t disagree_bc = 0;
  std::int64_t tiebreak_calls = 0;
  std::int64_t tiebreak_agreed_with_majority = 0;
  std::optional<double> tiebreak_agreement_rate;  // absent when no tiebreaks
  std::map<std::string, std::int64_t> annulments_by_slot;
  double base_rate_of_total = 0.0;                // yes / total, annulled in denominator
  std::optional<double> base_rate_of_resolved;    // yes / (yes + no)
};

// Recomputes ensemble statistics from the raw votes; resolutions must cover
// exactly the questions present in the votes (MisalignedInputs otherwise).
ResolutionStats resolution_stats(const std::vector<ResolutionVote>& votes,
                                 const std::vector<FinalResolution>& resolutions);

}  // namespace ffoundry::metrics
