#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ffoundry/metrics.hpp"
#include "ffoundry/rng.hpp"

using namespace ffoundry;
using namespace ffoundry::metrics;

namespace {

// Independent brute-force decomposition used as the oracle; plain loops,
// no shared code with the implementation.
struct OracleResult {
  double brier, cal, ref, unc;
};

OracleResult oracle_decompose(const std::vector<double>& p,
                              const std::vector<int>& o, int bins) {
  const std::size_t n = p.size();
  double brier = 0.0;
  for (std::size_t i = 0; i < n; ++i) brier += (p[i] - o[i]) * (p[i] - o[i]);
  brier /= static_cast<double>(n);

  std::vector<std::vector<std::size_t>> members(bins);
  for (std::size_t i = 0; i < n; ++i) {
    int k = static_cast<int>(p[i] * bins);
    if (k >= bins) k = bins - 1;
    members[k].push_back(i);
  }
  double obar = 0.0;
  for (int v : o) obar += v;
  obar /= static_cast<double>(n);
  double cal = 0.0, ref = 0.0;
  for (const auto& idx : members) {
    if (idx.empty()) continue;
    double fk = 0.0, ok = 0.0;
    for (std::size_t i : idx) {
      fk += p[i];
      ok += o[i];
    }
    fk /= idx.size();
    ok /= idx.size();
    cal += static_cast<double>(idx.size()) * (fk - ok) * (fk - ok);
    ref += static_cast<double>(idx.size()) * (ok - obar) * (ok - obar);
  }
  return {brier, cal / n, ref / n, obar * (1.0 - obar)};
}

// Random instance with forecasts constant within bins, so the binned
// decomposition identity applies to the raw Brier too.
void random_bin_aligned(Rng& rng, int bins, std::size_t n,
                        std::vector<double>& p, std::vector<int>& o) {
  std::vector<double> bin_value(bins);
  for (int k = 0; k < bins; ++k)
    bin_value[k] = (k + rng.next_double()) / bins;
  p.resize(n);
  o.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = bin_value[rng.next_below(bins)];
    o[i] = rng.next_double() < 0.5 ? 0 : 1;
  }
}

// Numerically integrates the Beta(a,b) density over [0, x] with composite
// Simpson; the quadrature path is independent of the incomplete-beta code.
double beta_cdf_numeric(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const int steps = 80000;  // even
  const double h = x / steps;
  auto log_density = [&](double t) {
    return (a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t);
  };
  const double log_norm = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  auto f = [&](double t) {
    if (t <= 0.0 || t >= 1.0) {
      if (t <= 0.0) return a > 1.0 ? 0.0 : (a == 1.0 ? std::exp(-log_norm + (b - 1.0) * std::log1p(-t)) : 0.0);
      return 0.0;
    }
    return std::exp(log_density(t) - log_norm);
  };
  double acc = f(1e-300 > x ? x : std::min(x, 1e-12)) * 0 + f(x) ;
  // standard Simpson over [eps, x] plus analytic handling of the left edge
  const double eps = std::min(1e-9, x / 2);
  double left_patch = 0.0;
  if (a >= 1.0) {
    // density bounded near 0; integral over [0,eps] is at most eps*max
    left_patch = 0.0;
  } else {
    // integrate t^(a-1) analytically near zero with (1-t)^(b-1) ~ 1
    left_patch = std::exp(-log_norm) * std::pow(eps, a) / a;
  }
  const double lo = a >= 1.0 ? 0.0 : eps;
  const int m = steps;
  const double span = x - lo;
  const double hh = span / m;
  double s = f(lo) + f(x);
  for (int i = 1; i < m; ++i) {
    const double t = lo + hh * i;
    s += f(t) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  acc = s * hh / 3.0 + left_patch;
  return acc;
}

}  // namespace

TEST_CASE("brier score worked examples") {
  std::vector<double> exact{1.0, 0.0, 1.0};
  std::vector<int> o{1, 0, 1};
  CHECK(brier_score(exact, o) == doctest::Approx(0.0));

  std::vector<double> p1{0.7};
  std::vector<int> o1{1};
  CHECK(brier_score(p1, o1) == doctest::Approx(0.09));

  std::vector<double> p2{0.8, 0.8, 0.3, 0.3};
  std::vector<int> o2{1, 1, 0, 1};
  // frozen from the brute-force oracle
  auto oracle = oracle_decompose(p2, o2, 10);
  CHECK(oracle.brier == doctest::Approx(0.165).epsilon(1e-12));
  CHECK(brier_score(p2, o2) == doctest::Approx(0.165).epsilon(1e-12));
}

TEST_CASE("brier score input checks") {
  std::vector<double> p{0.5};
  std::vector<int> o{1, 0};
  CHECK_THROWS_AS((void)brier_score(p, o), Error);
  CHECK_THROWS_AS((void)brier_score({}, {}), Error);
}

TEST_CASE("decomposition worked example matches the oracle") {
  std::vector<double> p{0.8, 0.8, 0.3, 0.3};
  std::vector<int> o{1, 1, 0, 1};
  auto [bins, d] = decompose(p, o, 10);
  CHECK(d.brier == doctest::Approx(0.165).epsilon(1e-12));
  CHECK(d.calibration == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(d.refinement == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(d.uncertainty == doctest::Approx(0.1875).epsilon(1e-12));

  auto oracle = oracle_decompose(p, o, 10);
  CHECK(d.calibration == doctest::Approx(oracle.cal).epsilon(1e-12));
  CHECK(d.refinement == doctest::Approx(oracle.ref).epsilon(1e-12));

  CHECK(bins.total == 4);
  CHECK(bins.counts[8] == 2);
  CHECK(bins.counts[3] == 2);
  CHECK(bins.mean_forecast[8] == doctest::Approx(0.8));
  CHECK(bins.observed_freq[3] == doctest::Approx(0.5));
  CHECK(bins.base_rate == doctest::Approx(0.75));
}

TEST_CASE("all forecasts at the base rate leave only uncertainty") {
  std::vector<double> p(40, 0.5);
  std::vector<int> o;
  for (int i = 0; i < 40; ++i) o.push_back(i % 2);
  auto [bins, d] = decompose(p, o, 10);
  (void)bins;
  CHECK(d.calibration == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.refinement == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.brier == doctest::Approx(d.uncertainty).epsilon(1e-12));
}

TEST_CASE("decomposition identity on random bin-aligned instances") {
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const int bins_choices[] = {2, 5, 10};
    const int bins = bins_choices[rng.next_below(3)];
    const std::size_t n = 1 + rng.next_below(500);
    std::vector<double> p;
    std::vector<int> o;
    random_bin_aligned(rng, bins, n, p, o);
    auto [table, d] = decompose(p, o, bins);
    CHECK(std::accumulate(table.counts.begin(), table.counts.end(),
                          std::int64_t{0}) == static_cast<std::int64_t>(n));
    const double identity = d.calibration - d.refinement + d.uncertainty;
    CHECK(std::abs(d.brier - identity) <= 1e-12);
  }
}

TEST_CASE("bins partition and permutation invariance") {
  Rng rng(77);
  std::vector<double> p;
  std::vector<int> o;
  for (int i = 0; i < 200; ++i) {
    p.push_back(rng.next_double());
    o.push_back(static_cast<int>(rng.next_below(2)));
  }
  const double direct = brier_score(p, o);
  // reversed order must give the same value
  std::vector<double> pr(p.rbegin(), p.rend());
  std::vector<int> orr(o.rbegin(), o.rend());
  CHECK(brier_score(pr, orr) == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("shrinking forecasts toward the mean cannot raise refinement") {
  // Shrinkage with 1/lambda integer toward a bin-grid point maps every new
  // bin onto a union of old bins, so between-bin outcome variance (the
  // refinement term) can only fall. Arbitrary lambda moves bin boundaries
  // and the monotonicity is only statistical, so the test pins the exact
  // coarsening form plus the total-shrink case.
  Rng rng(4242);
  const int bins = 10;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 50 + rng.next_below(250);
    std::vector<double> p;
    std::vector<int> o;
    for (std::size_t i = 0; i < n; ++i) {
      p.push_back(rng.next_double());
      o.push_back(static_cast<int>(rng.next_below(2)));
    }
    auto [t0, d0] = decompose(p, o, bins);
    // grid-aligned center nearest the base rate
    const double center =
        std::min<double>(bins - 1, std::floor(t0.base_rate * bins)) / bins;
    for (double lambda : {0.0, 0.5, 0.2, 0.1}) {
      std::vector<double> shrunk;
      for (double v : p) shrunk.push_back(center + lambda * (v - center));
      auto [t1, d1] = decompose(shrunk, o, bins);
      (void)t1;
      CHECK(d1.refinement <= d0.refinement + 1e-9);
    }
  }
}

TEST_CASE("bootstrap degenerate and deterministic") {
  std::vector<ScoredQuestion> one{{"q1", 0.17}};
  auto iv = bootstrap_ci(one, 1000, 0.95, 9);
  CHECK(iv.lo == doctest::Approx(0.17));
  CHECK(iv.hi == doctest::Approx(0.17));

  std::vector<ScoredQuestion> scores;
  Rng rng(5);
  for (int i = 0; i < 50; ++i)
    scores.push_back({"q" + std::to_string(i), rng.next_double()});
  auto a = bootstrap_ci(scores, 2000, 0.95, 31337);
  auto b = bootstrap_ci(scores, 2000, 0.95, 31337);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);

  // question order must not matter: resamples index canonical positions
  std::vector<ScoredQuestion> shuffled(scores.rbegin(), scores.rend());
  auto c = bootstrap_ci(shuffled, 2000, 0.95, 31337);
  CHECK(a.lo == c.lo);
  CHECK(a.hi == c.hi);
}

TEST_CASE("bootstrap interval brackets the analytic normal band") {
  // 1000 scores from a known distribution; the percentile interval should
  // sit near mean +/- 1.96 * SE.
  Rng rng(2024);
  std::vector<ScoredQuestion> scores;
  double sum = 0.0, sum2 = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const double v = 0.2 + 0.05 * rng.next_gaussian();
    scores.push_back({"q" + std::to_string(i), v});
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  const double se = sd / std::sqrt(static_cast<double>(n));
  auto iv = bootstrap_ci(scores, 4000, 0.95, 99);
  CHECK(iv.lo < mean);
  CHECK(iv.hi > mean);
  const double width = iv.hi - iv.lo;
  const double analytic = 2 * 1.96 * se;
  CHECK(std::abs(width - analytic) / analytic < 0.15);
}

TEST_CASE("ranking: perfect oracle beats a constant coin flipper always") {
  OutcomeSet outcomes;
  std::vector<ModelForecasts> models(2);
  models[0].model_id = "a_oracle";
  models[1].model_id = "b_coin";
  for (int i = 0; i < 10; ++i) {
    const std::string qid = "q" + std::to_string(i);
    const int y = i % 2;
    outcomes.question_ids.push_back(qid);
    outcomes.outcomes.push_back(y);
    models[0].by_question[qid] = static_cast<double>(y);
    models[1].by_question[qid] = 0.5;
  }
  auto r = ranking_stability(models, outcomes, 10000, 7);
  REQUIRE(r.model_ids.size() == 2);
  const std::size_t oracle_idx = r.model_ids[0] == "a_oracle" ? 0 : 1;
  CHECK(r.win_fraction[oracle_idx][1 - oracle_idx] == doctest::Approx(1.0));
  CHECK(r.rank_fraction[oracle_idx][0] == doctest::Approx(1.0));
}

TEST_CASE("ranking: identical models tie-break by id order") {
  OutcomeSet outcomes;
  std::vector<ModelForecasts> models(2);
  models[0].model_id = "zeta";
  models[1].model_id = "alpha";
  for (int i = 0; i < 6; ++i) {
    const std::string qid = "q" + std::to_string(i);
    outcomes.question_ids.push_back(qid);
    outcomes.outcomes.push_back(i % 2);
    models[0].by_question[qid] = 0.4;
    models[1].by_question[qid] = 0.4;
  }
  auto r = ranking_stability(models, outcomes, 500, 3);
  // alpha sorts first and wins every tie
  CHECK(r.model_ids[0] == "alpha");
  CHECK(r.win_fraction[0][1] == doctest::Approx(1.0));
  CHECK(r.win_fraction[1][0] == doctest::Approx(0.0));
  CHECK(r.rank_fraction[0][0] == doctest::Approx(1.0));
}

TEST_CASE("ranking: empty intersection raises") {
  OutcomeSet outcomes;
  outcomes.question_ids = {"q1", "q2"};
  outcomes.outcomes = {1, 0};
  std::vector<ModelForecasts> models(2);
  models[0].model_id = "a";
  models[0].by_question["q1"] = 0.5;
  models[1].model_id = "b";
  models[1].by_question["q2"] = 0.5;
  CHECK_THROWS_AS((void)ranking_stability(models, outcomes, 10, 1), Error);
}

TEST_CASE("ranking win fraction tracks exhaustive enumeration at n=12") {
  // Exact win probability by enumerating all multisets of resample draws,
  // weighted by multinomial coefficients.
  const std::size_t n = 12;
  Rng rng(606);
  std::vector<double> pa, pb;
  std::vector<int> outcome;
  OutcomeSet outcomes;
  std::vector<ModelForecasts> models(2);
  models[0].model_id = "a";
  models[1].model_id = "b";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string qid = "q" + std::to_string(static_cast<int>('a') + static_cast<int>(i));
    const int y = static_cast<int>(rng.next_below(2));
    outcomes.question_ids.push_back(qid);
    outcomes.outcomes.push_back(y);
    const double fa = rng.next_double();
    const double fb = std::min(1.0, std::max(0.0, fa + 0.1 * rng.next_gaussian()));
    models[0].by_question[qid] = fa;
    models[1].by_question[qid] = fb;
    pa.push_back(fa);
    pb.push_back(fb);
    outcome.push_back(y);
  }
  // per-question score difference; a wins a resample iff the mean diff < 0
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double da = pa[i] - outcome[i];
    const double db = pb[i] - outcome[i];
    diff[i] = da * da - db * db;
  }

  // enumerate multisets (m_0..m_{n-1}), sum m_i = n
  double win_prob = 0.0;
  std::vector<std::uint64_t> factorial(n + 1, 1);
  for (std::size_t i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * i;
  const double total = std::pow(static_cast<double>(n), static_cast<double>(n));
  std::vector<int> counts(n, 0);
  std::function<void(std::size_t, int, double)> recurse =
      [&](std::size_t idx, int remaining, double partial_sum) {
        if (idx == n - 1) {
          counts[idx] = remaining;
          const double s = partial_sum + remaining * diff[idx];
          bool a_wins = s < 0.0 || (s == 0.0);  // ties to the earlier id "a"
          if (a_wins) {
            double weight = static_cast<double>(factorial[n]);
            for (std::size_t i = 0; i < n; ++i)
              weight /= static_cast<double>(factorial[counts[i]]);
            win_prob += weight / total;
          }
          return;
        }
        for (int m = 0; m <= remaining; ++m) {
          counts[idx] = m;
          recurse(idx + 1, remaining - m, partial_sum + m * diff[idx]);
        }
      };
  recurse(0, static_cast<int>(n), 0.0);

  auto r = ranking_stability(models, outcomes, 10000, 2718);
  const std::size_t a_idx = r.model_ids[0] == "a" ? 0 : 1;
  CHECK(std::abs(r.win_fraction[a_idx][1 - a_idx] - win_prob) < 0.05);
}

TEST_CASE("beta interval reproduces the published error rates") {
  auto ci3 = beta_interval(3, 100, 0.95);
  CHECK(ci3.posterior_mean * 100 == doctest::Approx(3.9).epsilon(0.02));
  CHECK(ci3.lo * 100 == doctest::Approx(1.1).epsilon(0.1));
  CHECK(ci3.hi * 100 == doctest::Approx(8.4).epsilon(0.02));

  auto ci4 = beta_interval(4, 100, 0.95);
  CHECK(ci4.posterior_mean * 100 == doctest::Approx(4.9).epsilon(0.02));
  CHECK(ci4.lo * 100 == doctest::Approx(1.6).epsilon(0.1));
  CHECK(ci4.hi * 100 == doctest::Approx(9.8).epsilon(0.02));
}

TEST_CASE("beta interval closed form for (0,1)") {
  // Beta(1,2): CDF = 1 - (1-x)^2, quantile(q) = 1 - sqrt(1-q)
  auto ci = beta_interval(0, 1, 0.95);
  CHECK(ci.lo == doctest::Approx(1.0 - std::sqrt(0.975)).epsilon(1e-7));
  CHECK(ci.hi == doctest::Approx(1.0 - std::sqrt(0.025)).epsilon(1e-7));
  CHECK(ci.posterior_mean == doctest::Approx(1.0 / 3.0));
  CHECK(ci.lo <= ci.posterior_mean);
  CHECK(ci.posterior_mean <= ci.hi);
}

TEST_CASE("beta interval domain errors") {
  CHECK_THROWS_AS((void)beta_interval(-1, 10, 0.95), Error);
  CHECK_THROWS_AS((void)beta_interval(11, 10, 0.95), Error);
  CHECK_THROWS_AS((void)beta_interval(0, 0, 0.95), Error);
  CHECK_THROWS_AS((void)beta_interval(1, 10, 1.5), Error);
}

TEST_CASE("beta quantiles agree with Simpson integration of the density") {
  // quadrature oracle over a stratified sweep of (s, n) with n up to 200
  for (int n : {1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 200}) {
    for (int s = 0; s <= n; s += std::max(1, n / 7)) {
      auto ci = beta_interval(s, n, 0.95);
      const double a = s + 1.0, b = n - s + 1.0;
      CHECK(std::abs(beta_cdf_numeric(a, b, ci.lo) - 0.025) < 1e-6);
      CHECK(std::abs(beta_cdf_numeric(a, b, ci.hi) - 0.975) < 1e-6);
    }
  }
}

TEST_CASE("distribution summary splits by outcome") {
  std::vector<double> p{0.5, 0.5, 0.5};
  std::vector<int> o{1, 0, 1};
  auto s = distribution_summary(p, o, 20);
  CHECK(*s.mean_given_yes == doctest::Approx(0.5));
  CHECK(*s.mean_given_no == doctest::Approx(0.5));
  CHECK(s.overall_mean == doctest::Approx(0.5));
  CHECK(s.base_rate == doctest::Approx(2.0 / 3.0));

  std::vector<double> p2{0.2, 0.4};
  std::vector<int> o2{0, 0};
  auto s2 = distribution_summary(p2, o2, 20);
  CHECK_FALSE(s2.mean_given_yes.has_value());  // absent, not zero
  CHECK(*s2.mean_given_no == doctest::Approx(0.3));
}

namespace {

ResolutionVote vote(const std::string& qid, AgentSlot slot, VoteVerdict v) {
  ResolutionVote out;
  out.question_id = qid;
  out.slot = slot;
  out.verdict = v;
  out.derivation = "because";
  return out;
}

}  // namespace

TEST_CASE("resolution stats over a small synthetic vote file") {
  std::vector<ResolutionVote> votes;
  std::vector<FinalResolution> resolutions;

  // unanimous yes
  votes.push_back(vote("q1", AgentSlot::primary_a, VoteVerdict::yes));
  votes.push_back(vote("q1", AgentSlot::primary_b, VoteVerdict::yes));
  votes.push_back(vote("q1", AgentSlot::primary_c, VoteVerdict::yes));
  FinalResolution r1;
  r1.question_id = "q1";
  r1.verdict = VoteVerdict::yes;
  r1.method = ResolutionMethod::unanimous;
  resolutions.push_back(r1);

  // split with tiebreak agreeing with the majority
  votes.push_back(vote("q2", AgentSlot::primary_a, VoteVerdict::yes));
  votes.push_back(vote("q2", AgentSlot::primary_b, VoteVerdict::no));
  votes.push_back(vote("q2", AgentSlot::primary_c, VoteVerdict::yes));
  votes.push_back(vote("q2", AgentSlot::tiebreak, VoteVerdict::yes));
  FinalResolution r2;
  r2.question_id = "q2";
  r2.verdict = VoteVerdict::yes;
  r2.method = ResolutionMethod::tiebreak;
  resolutions.push_back(r2);

  auto st = resolution_stats(votes, resolutions);
  CHECK(st.total == 2);
  CHECK(st.yes == 2);
  CHECK(st.non_unanimous == 1);
  CHECK(st.tiebreak_calls == 1);
  REQUIRE(st.tiebreak_agreement_rate.has_value());
  CHECK(*st.tiebreak_agreement_rate == doctest::Approx(1.0));

  // all unanimous: rate is absent, not zero
  votes.erase(votes.begin() + 3, votes.end());
  resolutions.pop_back();
  auto st2 = resolution_stats(votes, resolutions);
  CHECK(st2.tiebreak_calls == 0);
  CHECK_FALSE(st2.tiebreak_agreement_rate.has_value());
}

TEST_CASE("resolution stats misalignment raises") {
  std::vector<ResolutionVote> votes;
  votes.push_back(vote("q1", AgentSlot::primary_a, VoteVerdict::yes));
  votes.push_back(vote("q1", AgentSlot::primary_b, VoteVerdict::yes));
  votes.push_back(vote("q1", AgentSlot::primary_c, VoteVerdict::yes));
  std::vector<FinalResolution> resolutions;
  FinalResolution r;
  r.question_id = "q_other";
  resolutions.push_back(r);
  CHECK_THROWS_AS((void)resolution_stats(votes, resolutions), Error);
}

TEST_CASE("outcome set excludes annulled questions") {
  std::vector<FinalResolution> rs(3);
  rs[0].question_id = "q1";
  rs[0].verdict = VoteVerdict::yes;
  rs[1].question_id = "q2";
  rs[1].verdict = VoteVerdict::annul;
  rs[2].question_id = "q3";
  rs[2].verdict = VoteVerdict::no;
  auto set = OutcomeSet::from_resolutions(rs);
  REQUIRE(set.question_ids.size() == 2);
  CHECK(set.question_ids[0] == "q1");
  CHECK(set.outcomes[0] == 1);
  CHECK(set.question_ids[1] == "q3");
  CHECK(set.outcomes[1] == 0);
}
