#include "ffoundry/audit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ffoundry/rng.hpp"

namespace ffoundry {

namespace {

std::vector<std::vector<double>> normalize(const std::vector<EmbeddingVector>& vs) {
  std::vector<std::vector<double>> out;
  out.reserve(vs.size());
  for (const auto& v : vs) {
    std::vector<double> u(v.values.begin(), v.values.end());
    double norm = 0.0;
    for (double x : u) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& x : u) x /= norm;
    out.push_back(std::move(u));
  }
  return out;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

}  // namespace

json TopicCluster::to_json() const {
  json j;
  j["cluster_id"] = cluster_id;
  j["label"] = label;
  j["member_ids"] = member_ids;
  j["count"] = count;
  j["percentage"] = percentage;
  return j;
}

TopicCluster TopicCluster::from_json(const json& j) {
  TopicCluster c;
  c.cluster_id = j.at("cluster_id").get<int>();
  c.label = j.value("label", "unlabeled");
  c.member_ids = j.at("member_ids").get<std::vector<std::string>>();
  c.count = j.at("count").get<int>();
  c.percentage = j.at("percentage").get<double>();
  return c;
}

json PairSimilarity::to_json() const {
  json j;
  j["a"] = a;
  j["b"] = b;
  if (scored) j["score"] = score;
  j["scored"] = scored;
  return j;
}

PairSimilarity PairSimilarity::from_json(const json& j) {
  PairSimilarity p;
  p.a = j.at("a").get<std::string>();
  p.b = j.at("b").get<std::string>();
  p.scored = j.value("scored", false);
  if (p.scored) p.score = j.at("score").get<int>();
  return p;
}

std::vector<int> kmeans_cluster(const std::vector<EmbeddingVector>& vectors,
                                int k, std::uint64_t rng_seed,
                                int max_iterations) {
  const std::size_t n = vectors.size();
  if (k < 2 || static_cast<std::size_t>(k) > n)
    throw Error(ErrorCode::PreconditionViolation,
                "k must satisfy 2 <= k <= N");
  auto points = normalize(vectors);
  const std::size_t dim = points.front().size();

  // k-means++ seeding
  Rng rng(rng_seed);
  std::vector<std::vector<double>> centers;
  centers.push_back(points[rng.next_below(n)]);
  std::vector<double> dist2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = sq_dist(points[i], centers[0]);
      for (std::size_t c = 1; c < centers.size(); ++c)
        best = std::min(best, sq_dist(points[i], centers[c]));
      dist2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // all remaining points coincide with a center; pick any unused point
      centers.push_back(points[centers.size() % n]);
      continue;
    }
    double target = rng.next_double() * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= dist2[i];
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(points[chosen]);
  }

  std::vector<int> assignment(n, 0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(points[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assignment[i]][d] += points[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // re-seed an empty cluster with the point farthest from its center
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = sq_dist(points[i], centers[assignment[i]]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers[c] = points[far];
        assignment[far] = c;
        changed = true;
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d)
        centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
    if (!changed) break;
  }
  return assignment;
}

std::vector<std::pair<std::size_t, std::size_t>> sample_distinct_pairs(
    std::size_t n, std::size_t max_pairs, std::uint64_t rng_seed) {
  if (n < 2)
    throw Error(ErrorCode::PreconditionViolation, "need at least 2 members");
  const std::size_t all = n * (n - 1) / 2;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (all <= max_pairs) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
    return out;
  }
  Rng rng(rng_seed);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (seen.size() < max_pairs) {
    std::size_t i = rng.next_below(n);
    std::size_t j = rng.next_below(n);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    seen.emplace(i, j);
  }
  out.assign(seen.begin(), seen.end());
  return out;
}

DiversityAuditor::DiversityAuditor(Gateway& gateway, std::string label_backend,
                                   std::string score_backend, int label_sample)
    : gateway_(gateway),
      label_backend_(std::move(label_backend)),
      score_backend_(std::move(score_backend)),
      label_sample_(label_sample) {}

std::vector<TopicCluster> DiversityAuditor::topic_cluster(
    const std::vector<EmbeddingVector>& embeddings,
    const std::map<std::string, Question>& questions, int k,
    std::uint64_t rng_seed) {
  auto assignment = kmeans_cluster(embeddings, k, rng_seed);

  std::vector<TopicCluster> clusters(k);
  for (int c = 0; c < k; ++c) clusters[c].cluster_id = c;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    clusters[assignment[i]].member_ids.push_back(embeddings[i].question_id);

  const double total = static_cast<double>(embeddings.size());
  for (auto& c : clusters) {
    std::sort(c.member_ids.begin(), c.member_ids.end());
    c.count = static_cast<int>(c.member_ids.size());
    c.percentage = 100.0 * static_cast<double>(c.count) / total;

    std::vector<std::string> titles;
    Rng rng(derive_seed(rng_seed, "label_sample_" + std::to_string(c.cluster_id)));
    std::vector<std::size_t> order(c.member_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(i)]);
    for (std::size_t i = 0;
         i < order.size() && static_cast<int>(i) < label_sample_; ++i) {
      auto it = questions.find(c.member_ids[order[i]]);
      if (it != questions.end()) titles.push_back(it->second.title);
    }
    std::string block;
    for (const auto& t : titles) block += "- " + t + "\n";

    try {
      AgentRequest req;
      req.backend_id = label_backend_;
      req.mode = AgentMode::completion;
      req.prompt_template_id = "topic_label";
      req.artifacts = {{"member question titles", block}};
      AgentResponse resp = gateway_.execute(req);
      c.label = resp.fields.at("final_answer_label");
    } catch (const Error&) {
      c.label = "unlabeled";  // clusters survive labeling failures
    }
  }

  // Largest first, matching the usual presentation of topic tables.
  std::sort(clusters.begin(), clusters.end(),
            [](const TopicCluster& a, const TopicCluster& b) {
              if (a.count != b.count) return a.count > b.count;
              return a.cluster_id < b.cluster_id;
            });
  return clusters;
}

PairAuditReport DiversityAuditor::pair_audit(
    const TopicCluster& cluster, const std::map<std::string, Question>& questions,
    int pairs_per_cluster, std::uint64_t rng_seed) {
  PairAuditReport report;
  report.cluster_id = cluster.cluster_id;
  const auto pairs =
      sample_distinct_pairs(cluster.member_ids.size(),
                            static_cast<std::size_t>(pairs_per_cluster), rng_seed);

  double sum = 0.0;
  int scored = 0;
  for (const auto& [i, j] : pairs) {
    PairSimilarity p;
    p.a = cluster.member_ids[i];
    p.b = cluster.member_ids[j];
    auto qa = questions.find(p.a);
    auto qb = questions.find(p.b);
    if (qa == questions.end() || qb == questions.end()) {
      report.pairs.push_back(p);
      ++report.unscored;
      continue;
    }
    try {
      AgentRequest req;
      req.backend_id = score_backend_;
      req.mode = AgentMode::completion;
      req.prompt_template_id = "pair_similarity";
      req.artifacts = {{"Question A", qa->second.title},
                       {"Question B", qb->second.title}};
      AgentResponse resp = gateway_.execute(req);
      std::string digit;
      for (char ch : resp.text) {
        if (ch >= '1' && ch <= '4') {
          digit = std::string(1, ch);
          break;
        }
        if (!std::isspace(static_cast<unsigned char>(ch))) break;
      }
      if (digit.empty()) throw Error(ErrorCode::ParseFailure, "no digit");
      p.score = digit[0] - '0';
      p.scored = true;
      sum += p.score;
      ++scored;
      ++report.histogram[p.score - 1];
    } catch (const Error&) {
      ++report.unscored;  // unscored pairs stay out of the mean
    }
    report.pairs.push_back(p);
  }
  report.mean = scored > 0 ? sum / scored : 0.0;
  return report;
}

}  // namespace ffoundry
