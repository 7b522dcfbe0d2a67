#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ffoundry/domain.hpp"
#include "ffoundry/gateway.hpp"

namespace ffoundry {

struct EmbeddingVector {
  std::string question_id;
  std::vector<float> values;
  std::string model_id;
};

struct ClusterParams {
  double similarity_threshold = 0.85;  // cosine similarity, neighbors at >=
  int min_points = 2;

  void validate() const;
};

// DBSCAN over cosine similarity. Returns one assignment per vector:
// a cluster id (0..) or -1 for noise. With min_points = 2 this is exactly
// the connected components of the threshold graph.
std::vector<int> cluster(const std::vector<EmbeddingVector>& vectors,
                         const ClusterParams& params);

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);

struct DuplicatePair {
  std::string a;
  std::string b;
};

struct DedupOutcome {
  std::vector<std::string> kept;     // sorted question ids
  std::vector<std::string> removed;  // sorted question ids
  std::vector<DuplicatePair> confirmed_pairs;
  std::vector<int> assignments;  // cluster() output aligned with input order
  // question id -> kept representative of its duplicate group
  std::map<std::string, std::string> group_representative;
  std::int64_t pairs_checked = 0;
  std::int64_t pairs_skipped_by_cap = 0;
};

class Deduplicator {
 public:
  Deduplicator(Gateway& gateway, std::string embed_backend,
               std::string check_backend, ClusterParams params,
               int embed_batch_size = 32, int max_pairs_per_cluster = 200);

  // One vector per input text, batched in order.
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

  // Embeds title+background, clusters, confirms candidate pairs with the
  // dedup prompt, closes the duplicate relation transitively, and keeps the
  // lexicographically smallest id of each duplicate group.
  DedupOutcome dedup_set(const std::vector<Question>& questions);

 private:
  bool confirm_pair(const Question& a, const Question& b);

  Gateway& gateway_;
  std::string embed_backend_;
  std::string check_backend_;
  ClusterParams params_;
  int embed_batch_size_;
  int max_pairs_per_cluster_;
};

// embeddings.bin: per record a little-endian uint32 float count followed by
// that many little-endian 32-bit floats. The JSONL index carries
// question_id, model_id, byte offset and count per record.
void write_embeddings(const std::filesystem::path& bin_path,
                      const std::filesystem::path& index_path,
                      const std::vector<EmbeddingVector>& vectors);
std::vector<EmbeddingVector> read_embeddings(const std::filesystem::path& bin_path,
                                             const std::filesystem::path& index_path);

}  // namespace ffoundry
