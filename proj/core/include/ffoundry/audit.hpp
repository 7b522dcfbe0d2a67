#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ffoundry/dedup.hpp"
#include "ffoundry/domain.hpp"
#include "ffoundry/gateway.hpp"

namespace ffoundry {

struct TopicCluster {
  int cluster_id = 0;
  std::string label;
  std::vector<std::string> member_ids;
  int count = 0;
  double percentage = 0.0;

  json to_json() const;
  static TopicCluster from_json(const json& j);
};

struct PairSimilarity {
  std::string a;
  std::string b;
  int score = 0;       // 1..4 when scored
  bool scored = false; // unparseable answers stay unscored

  json to_json() const;
  static PairSimilarity from_json(const json& j);
};

struct PairAuditReport {
  int cluster_id = 0;
  std::vector<PairSimilarity> pairs;
  double mean = 0.0;              // over scored pairs only
  std::array<int, 4> histogram{}; // counts of 1s..4s
  int unscored = 0;
};

// Seeded k-means over unit-normalized vectors (k-means++ init, Lloyd
// iterations); Euclidean on normalized vectors tracks cosine distance.
std::vector<int> kmeans_cluster(const std::vector<EmbeddingVector>& vectors,
                                int k, std::uint64_t rng_seed,
                                int max_iterations = 100);

// Distinct unordered index pairs, uniform without replacement.
std::vector<std::pair<std::size_t, std::size_t>> sample_distinct_pairs(
    std::size_t n, std::size_t max_pairs, std::uint64_t rng_seed);

class DiversityAuditor {
 public:
  DiversityAuditor(Gateway& gateway, std::string label_backend,
                   std::string score_backend, int label_sample = 20);

  // k clusters with LLM labels; labeling failures leave clusters
  // "unlabeled" rather than failing the clustering.
  std::vector<TopicCluster> topic_cluster(
      const std::vector<EmbeddingVector>& embeddings,
      const std::map<std::string, Question>& questions, int k,
      std::uint64_t rng_seed);

  PairAuditReport pair_audit(const TopicCluster& cluster,
                             const std::map<std::string, Question>& questions,
                             int pairs_per_cluster, std::uint64_t rng_seed);

 private:
  Gateway& gateway_;
  std::string label_backend_;
  std::string score_backend_;
  int label_sample_;
};

}  // namespace ffoundry
