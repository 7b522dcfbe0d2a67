#include "ffoundry/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/special_functions/beta.hpp>

#include "ffoundry/rng.hpp"

namespace ffoundry::metrics {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b || a == 0)
    throw Error(ErrorCode::MisalignedInputs,
                "forecasts/outcomes size " + std::to_string(a) + " vs " +
                    std::to_string(b));
}

int bin_of(double p, int bin_count) {
  int k = static_cast<int>(std::floor(p * bin_count));
  if (k < 0) k = 0;
  if (k >= bin_count) k = bin_count - 1;  // last bin closed at 1
  return k;
}

// Linear-interpolation empirical quantile over a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  double h = q * static_cast<double>(sorted.size() - 1);
  std::size_t i = static_cast<std::size_t>(std::floor(h));
  if (i + 1 >= sorted.size()) return sorted.back();
  double frac = h - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

}  // namespace

OutcomeSet OutcomeSet::from_resolutions(const std::vector<FinalResolution>& rs) {
  OutcomeSet out;
  std::set<std::string> seen;
  for (const auto& r : rs) {
    if (r.verdict == VoteVerdict::annul) continue;
    if (!seen.insert(r.question_id).second)
      throw Error(ErrorCode::MisalignedInputs,
                  "duplicate resolution for " + r.question_id);
    out.question_ids.push_back(r.question_id);
    out.outcomes.push_back(r.verdict == VoteVerdict::yes ? 1 : 0);
  }
  return out;
}

double brier_score(std::span<const double> forecasts,
                   std::span<const int> outcomes) {
  check_aligned(forecasts.size(), outcomes.size());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    long double d = static_cast<long double>(forecasts[i]) - outcomes[i];
    acc += d * d;
  }
  return static_cast<double>(acc / static_cast<long double>(forecasts.size()));
}

std::pair<ReliabilityBins, BrierDecomposition> decompose(
    std::span<const double> forecasts, std::span<const int> outcomes,
    int bin_count) {
  check_aligned(forecasts.size(), outcomes.size());
  if (bin_count < 2)
    throw Error(ErrorCode::PreconditionViolation, "bin_count must be >= 2");

  const std::size_t n = forecasts.size();
  std::vector<std::int64_t> counts(bin_count, 0);
  std::vector<long double> forecast_sum(bin_count, 0.0L);
  std::vector<std::int64_t> yes_count(bin_count, 0);
  std::int64_t total_yes = 0;

  for (std::size_t i = 0; i < n; ++i) {
    int k = bin_of(forecasts[i], bin_count);
    ++counts[k];
    forecast_sum[k] += forecasts[i];
    yes_count[k] += outcomes[i];
    total_yes += outcomes[i];
  }

  ReliabilityBins bins;
  bins.bin_count = bin_count;
  bins.total = static_cast<std::int64_t>(n);
  bins.base_rate = static_cast<double>(total_yes) / static_cast<double>(n);
  bins.counts = counts;
  bins.mean_forecast.assign(bin_count, 0.0);
  bins.observed_freq.assign(bin_count, 0.0);

  const long double obar = static_cast<long double>(bins.base_rate);
  long double cal = 0.0L, ref = 0.0L;
  for (int k = 0; k < bin_count; ++k) {
    if (counts[k] == 0) continue;  // empty bins contribute nothing
    long double fk = forecast_sum[k] / static_cast<long double>(counts[k]);
    long double ok = static_cast<long double>(yes_count[k]) /
                     static_cast<long double>(counts[k]);
    bins.mean_forecast[k] = static_cast<double>(fk);
    bins.observed_freq[k] = static_cast<double>(ok);
    cal += static_cast<long double>(counts[k]) * (fk - ok) * (fk - ok);
    ref += static_cast<long double>(counts[k]) * (ok - obar) * (ok - obar);
  }

  BrierDecomposition d;
  d.brier = brier_score(forecasts, outcomes);
  d.calibration = static_cast<double>(cal / static_cast<long double>(n));
  d.refinement = static_cast<double>(ref / static_cast<long double>(n));
  d.uncertainty = static_cast<double>(obar * (1.0L - obar));
  return {bins, d};
}

Interval bootstrap_ci(std::vector<ScoredQuestion> scores, int iterations,
                      double mass, std::uint64_t rng_seed) {
  if (scores.empty())
    throw Error(ErrorCode::PreconditionViolation, "no scores to resample");
  std::sort(scores.begin(), scores.end(),
            [](const ScoredQuestion& a, const ScoredQuestion& b) {
              return a.question_id < b.question_id;
            });
  const std::size_t n = scores.size();

  std::vector<double> means(iterations);
  for (int it = 0; it < iterations; ++it) {
    Rng rng(derive_seed(rng_seed, static_cast<std::uint64_t>(it)));
    long double acc = 0.0L;
    for (std::size_t j = 0; j < n; ++j)
      acc += scores[rng.next_below(n)].score;
    means[it] = static_cast<double>(acc / static_cast<long double>(n));
  }
  std::sort(means.begin(), means.end());

  const double alpha = (1.0 - mass) / 2.0;
  return {quantile_sorted(means, alpha), quantile_sorted(means, 1.0 - alpha)};
}

RankingStability ranking_stability(const std::vector<ModelForecasts>& models,
                                   const OutcomeSet& outcomes, int iterations,
                                   std::uint64_t rng_seed) {
  if (models.empty())
    throw Error(ErrorCode::PreconditionViolation, "no models");

  std::vector<const ModelForecasts*> order;
  for (const auto& m : models) order.push_back(&m);
  std::sort(order.begin(), order.end(),
            [](const ModelForecasts* a, const ModelForecasts* b) {
              return a->model_id < b->model_id;
            });

  // Intersection of answered questions, restricted to resolved outcomes.
  std::vector<std::string> shared;
  for (std::size_t i = 0; i < outcomes.question_ids.size(); ++i) {
    const std::string& qid = outcomes.question_ids[i];
    bool everywhere = true;
    for (const auto* m : order) {
      if (!m->by_question.count(qid)) {
        everywhere = false;
        break;
      }
    }
    if (everywhere) shared.push_back(qid);
  }
  std::sort(shared.begin(), shared.end());
  if (shared.empty())
    throw Error(ErrorCode::EmptyIntersection,
                "no question answered by every model");

  std::map<std::string, int> outcome_by_id;
  for (std::size_t i = 0; i < outcomes.question_ids.size(); ++i)
    outcome_by_id[outcomes.question_ids[i]] = outcomes.outcomes[i];

  const std::size_t n = shared.size();
  const std::size_t m = order.size();
  std::vector<std::vector<double>> sq_err(m, std::vector<double>(n));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t i = 0; i < n; ++i) {
      double d = order[a]->by_question.at(shared[i]) - outcome_by_id[shared[i]];
      sq_err[a][i] = d * d;
    }
  }

  std::vector<std::vector<std::int64_t>> rank_count(
      m, std::vector<std::int64_t>(m, 0));
  std::vector<std::vector<std::int64_t>> win_count(
      m, std::vector<std::int64_t>(m, 0));
  std::vector<std::size_t> idx(n);
  std::vector<double> brier(m);
  std::vector<std::size_t> ranking(m);

  for (int it = 0; it < iterations; ++it) {
    Rng rng(derive_seed(rng_seed, static_cast<std::uint64_t>(it)));
    for (std::size_t j = 0; j < n; ++j) idx[j] = rng.next_below(n);

    for (std::size_t a = 0; a < m; ++a) {
      long double acc = 0.0L;
      for (std::size_t j = 0; j < n; ++j) acc += sq_err[a][idx[j]];
      brier[a] = static_cast<double>(acc / static_cast<long double>(n));
    }

    for (std::size_t a = 0; a < m; ++a) ranking[a] = a;
    std::sort(ranking.begin(), ranking.end(),
              [&](std::size_t a, std::size_t b) {
                if (brier[a] != brier[b]) return brier[a] < brier[b];
                return a < b;  // model-id order (already sorted) breaks ties
              });
    for (std::size_t r = 0; r < m; ++r) ++rank_count[ranking[r]][r];

    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        if (a == b) continue;
        if (brier[a] < brier[b] || (brier[a] == brier[b] && a < b))
          ++win_count[a][b];
      }
    }
  }

  RankingStability out;
  out.shared_questions = n;
  for (const auto* mp : order) out.model_ids.push_back(mp->model_id);
  out.rank_fraction.assign(m, std::vector<double>(m, 0.0));
  out.win_fraction.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      out.rank_fraction[a][b] =
          static_cast<double>(rank_count[a][b]) / iterations;
      out.win_fraction[a][b] = static_cast<double>(win_count[a][b]) / iterations;
    }
  }
  return out;
}

CredibleInterval beta_interval(int successes, int trials, double mass) {
  if (trials < 1 || successes < 0 || successes > trials)
    throw Error(ErrorCode::DomainError,
                "beta_interval(" + std::to_string(successes) + ", " +
                    std::to_string(trials) + ")");
  if (!(mass > 0.0 && mass < 1.0))
    throw Error(ErrorCode::DomainError, "mass must be in (0,1)");

  const double a = successes + 1.0;
  const double b = trials - successes + 1.0;

  // Equal-tailed quantiles by bisection on the regularized incomplete beta.
  auto quantile = [&](double target) {
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-10) {
      double mid = 0.5 * (lo + hi);
      if (boost::math::ibeta(a, b, mid) < target)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  CredibleInterval ci;
  ci.mass = mass;
  const double alpha = (1.0 - mass) / 2.0;
  ci.lo = quantile(alpha);
  ci.hi = quantile(1.0 - alpha);
  ci.posterior_mean = a / (a + b);
  return ci;
}

DistributionSummary distribution_summary(std::span<const double> forecasts,
                                         std::span<const int> outcomes,
                                         int bins) {
  check_aligned(forecasts.size(), outcomes.size());
  DistributionSummary s;
  s.bin_count = bins;
  s.yes_hist.assign(bins, 0);
  s.no_hist.assign(bins, 0);

  long double sum_all = 0.0L, sum_yes = 0.0L, sum_no = 0.0L;
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    int k = bin_of(forecasts[i], bins);
    sum_all += forecasts[i];
    if (outcomes[i] == 1) {
      ++s.yes_hist[k];
      ++s.n_yes;
      sum_yes += forecasts[i];
    } else {
      ++s.no_hist[k];
      ++s.n_no;
      sum_no += forecasts[i];
    }
  }
  const auto n = static_cast<long double>(forecasts.size());
  s.overall_mean = static_cast<double>(sum_all / n);
  s.base_rate = static_cast<double>(s.n_yes) / static_cast<double>(forecasts.size());
  if (s.n_yes > 0)
    s.mean_given_yes = static_cast<double>(sum_yes / static_cast<long double>(s.n_yes));
  if (s.n_no > 0)
    s.mean_given_no = static_cast<double>(sum_no / static_cast<long double>(s.n_no));
  return s;
}

ResolutionStats resolution_stats(const std::vector<ResolutionVote>& votes,
                                 const std::vector<FinalResolution>& resolutions) {
  struct QuestionVotes {
    std::optional<VoteVerdict> a, b, c, tb;
  };
  std::map<std::string, QuestionVotes> by_question;
  for (const auto& v : votes) {
    auto& qv = by_question[v.question_id];
    switch (v.slot) {
      case AgentSlot::primary_a: qv.a = v.verdict; break;
      case AgentSlot::primary_b: qv.b = v.verdict; break;
      case AgentSlot::primary_c: qv.c = v.verdict; break;
      case AgentSlot::tiebreak: qv.tb = v.verdict; break;
    }
  }

  ResolutionStats st;
  st.total = static_cast<std::int64_t>(resolutions.size());
  std::set<std::string> vote_ids;
  for (const auto& [qid, _] : by_question) vote_ids.insert(qid);
  std::set<std::string> res_ids;
  for (const auto& r : resolutions) res_ids.insert(r.question_id);
  if (vote_ids != res_ids)
    throw Error(ErrorCode::MisalignedInputs,
                "votes and resolutions cover different question sets");

  for (const auto& r : resolutions) {
    switch (r.verdict) {
      case VoteVerdict::yes: ++st.yes; break;
      case VoteVerdict::no: ++st.no; break;
      case VoteVerdict::annul:
        ++st.annulled;
        ++st.annulments_by_slot[r.method == ResolutionMethod::tiebreak
                                    ? "tiebreak"
                                    : "primaries"];
        break;
    }
  }

  std::int64_t tiebreaks_with_majority = 0;
  for (const auto& [qid, qv] : by_question) {
    if (!qv.a || !qv.b || !qv.c)
      throw Error(ErrorCode::MisalignedInputs,
                  "incomplete primary votes for " + qid);
    const VoteVerdict a = *qv.a, b = *qv.b, c = *qv.c;
    if (a != b) ++st.disagree_ab;
    if (a != c) ++st.disagree_ac;
    if (b != c) ++st.disagree_bc;
    const bool unanimous = (a == b && b == c);
    if (!unanimous) ++st.non_unanimous;
    if (qv.tb) {
      ++st.tiebreak_calls;
      // Majority among the three primaries, when one exists.
      std::optional<VoteVerdict> majority;
      if (a == b || a == c)
        majority = a;
      else if (b == c)
        majority = b;
      if (majority) {
        ++tiebreaks_with_majority;
        if (*qv.tb == *majority) ++st.tiebreak_agreed_with_majority;
      }
    }
  }
  if (tiebreaks_with_majority > 0) {
    st.tiebreak_agreement_rate =
        static_cast<double>(st.tiebreak_agreed_with_majority) /
        static_cast<double>(tiebreaks_with_majority);
  }
  if (st.total > 0)
    st.base_rate_of_total = static_cast<double>(st.yes) / static_cast<double>(st.total);
  if (st.yes + st.no > 0)
    st.base_rate_of_resolved =
        static_cast<double>(st.yes) / static_cast<double>(st.yes + st.no);
  return st;
}

}  // namespace ffoundry::metrics
