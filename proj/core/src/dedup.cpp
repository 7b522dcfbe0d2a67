#include "ffoundry/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <functional>
#include <numeric>
#include <set>

namespace ffoundry {

void ClusterParams::validate() const {
  if (!(similarity_threshold > 0.0 && similarity_threshold < 1.0))
    throw Error(ErrorCode::PreconditionViolation,
                "similarity threshold must be in (0,1)");
  if (min_points < 2)
    throw Error(ErrorCode::PreconditionViolation, "min_points must be >= 2");
}

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::PreconditionViolation, "vector length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<int> cluster(const std::vector<EmbeddingVector>& vectors,
                         const ClusterParams& params) {
  params.validate();
  const std::size_t n = vectors.size();
  if (n == 0) return {};
  for (const auto& v : vectors) {
    if (v.values.size() != vectors.front().values.size())
      throw Error(ErrorCode::PreconditionViolation,
                  "vectors do not share one length");
    for (float x : v.values)
      if (!std::isfinite(x))
        throw Error(ErrorCode::PreconditionViolation, "non-finite embedding entry");
  }

  // Exact pairwise neighborhoods; corpus sizes here stay in the tens of
  // thousands so O(N^2) is fine.
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i].push_back(i);  // a point is in its own eps-neighborhood
    for (std::size_t j = i + 1; j < n; ++j) {
      if (cosine_similarity(vectors[i].values, vectors[j].values) >=
          params.similarity_threshold) {
        neighbors[i].push_back(j);
        neighbors[j].push_back(i);
      }
    }
  }

  const auto is_core = [&](std::size_t i) {
    return static_cast<int>(neighbors[i].size()) >= params.min_points;
  };

  std::vector<int> assignment(n, -1);
  int next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (assignment[i] != -1 || !is_core(i)) continue;
    const int cid = next_cluster++;
    std::deque<std::size_t> frontier{i};
    assignment[i] = cid;
    while (!frontier.empty()) {
      const std::size_t p = frontier.front();
      frontier.pop_front();
      if (!is_core(p)) continue;  // border points do not expand
      for (std::size_t q : neighbors[p]) {
        if (assignment[q] == -1) {
          assignment[q] = cid;
          frontier.push_back(q);
        }
      }
    }
  }
  return assignment;
}

Deduplicator::Deduplicator(Gateway& gateway, std::string embed_backend,
                           std::string check_backend, ClusterParams params,
                           int embed_batch_size, int max_pairs_per_cluster)
    : gateway_(gateway),
      embed_backend_(std::move(embed_backend)),
      check_backend_(std::move(check_backend)),
      params_(params),
      embed_batch_size_(embed_batch_size),
      max_pairs_per_cluster_(max_pairs_per_cluster) {
  params_.validate();
}

std::vector<EmbeddingVector> Deduplicator::embed(
    const std::vector<std::string>& texts) {
  if (texts.empty())
    throw Error(ErrorCode::PreconditionViolation, "no texts to embed");
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  const auto& cfg = gateway_.backend_config(embed_backend_);
  for (std::size_t start = 0; start < texts.size();
       start += static_cast<std::size_t>(embed_batch_size_)) {
    const std::size_t end =
        std::min(texts.size(), start + static_cast<std::size_t>(embed_batch_size_));
    std::vector<std::string> batch(texts.begin() + start, texts.begin() + end);
    auto vectors = gateway_.embed_texts(embed_backend_, batch);
    for (auto& v : vectors) {
      EmbeddingVector e;
      e.model_id = cfg.model.empty() ? cfg.backend_id : cfg.model;
      e.values = std::move(v);
      out.push_back(std::move(e));
    }
  }
  return out;
}

bool Deduplicator::confirm_pair(const Question& a, const Question& b) {
  AgentRequest req;
  req.backend_id = check_backend_;
  req.mode = AgentMode::completion;
  req.prompt_template_id = "dedup_check";
  req.artifacts = {
      {"Question 1 title", a.title},
      {"Question 1 description", a.background},
      {"Question 1 resolution criteria", a.resolution_criteria},
      {"Question 2 title", b.title},
      {"Question 2 description", b.background},
      {"Question 2 resolution criteria", b.resolution_criteria},
  };
  AgentResponse resp = gateway_.execute(req);
  const std::string label =
      parse_categorical(resp.fields.at("final_answer_duplicate"), {"yes", "no"});
  return label == "yes";
}

DedupOutcome Deduplicator::dedup_set(const std::vector<Question>& questions) {
  DedupOutcome outcome;
  if (questions.empty()) return outcome;

  std::vector<std::string> texts;
  texts.reserve(questions.size());
  for (const auto& q : questions) texts.push_back(q.title + "\n\n" + q.background);
  auto vectors = embed(texts);
  for (std::size_t i = 0; i < questions.size(); ++i)
    vectors[i].question_id = questions[i].id;

  outcome.assignments = cluster(vectors, params_);

  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < outcome.assignments.size(); ++i) {
    if (outcome.assignments[i] >= 0) members[outcome.assignments[i]].push_back(i);
  }

  // Union-find over confirmed duplicates; the relation closes transitively.
  std::vector<std::size_t> parent(questions.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };

  for (auto& [cid, idx] : members) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return questions[a].id < questions[b].id;
    });
    std::int64_t budget = max_pairs_per_cluster_;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = i + 1; j < idx.size(); ++j) {
        if (budget-- <= 0) {
          ++outcome.pairs_skipped_by_cap;
          continue;
        }
        ++outcome.pairs_checked;
        if (confirm_pair(questions[idx[i]], questions[idx[j]])) {
          outcome.confirmed_pairs.push_back(
              {questions[idx[i]].id, questions[idx[j]].id});
          parent[find(idx[i])] = find(idx[j]);
        }
      }
    }
  }

  // Keep the lexicographically smallest id per duplicate group.
  std::map<std::size_t, std::string> group_min;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const std::size_t root = find(i);
    auto it = group_min.find(root);
    if (it == group_min.end() || questions[i].id < it->second)
      group_min[root] = questions[i].id;
  }
  for (std::size_t i = 0; i < questions.size(); ++i) {
    outcome.group_representative[questions[i].id] = group_min[find(i)];
    if (group_min[find(i)] == questions[i].id)
      outcome.kept.push_back(questions[i].id);
    else
      outcome.removed.push_back(questions[i].id);
  }
  std::sort(outcome.kept.begin(), outcome.kept.end());
  std::sort(outcome.removed.begin(), outcome.removed.end());
  return outcome;
}

void write_embeddings(const std::filesystem::path& bin_path,
                      const std::filesystem::path& index_path,
                      const std::vector<EmbeddingVector>& vectors) {
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw Error(ErrorCode::IoFailure, "cannot write " + bin_path.string());
  std::vector<json> index;
  std::uint64_t offset = 0;
  for (const auto& v : vectors) {
    const std::uint32_t count = static_cast<std::uint32_t>(v.values.size());
    char header[4];
    header[0] = static_cast<char>(count & 0xff);
    header[1] = static_cast<char>((count >> 8) & 0xff);
    header[2] = static_cast<char>((count >> 16) & 0xff);
    header[3] = static_cast<char>((count >> 24) & 0xff);
    bin.write(header, 4);
    for (float x : v.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &x, 4);
      char b[4] = {static_cast<char>(bits & 0xff),
                   static_cast<char>((bits >> 8) & 0xff),
                   static_cast<char>((bits >> 16) & 0xff),
                   static_cast<char>((bits >> 24) & 0xff)};
      bin.write(b, 4);
    }
    json row;
    row["question_id"] = v.question_id;
    row["model_id"] = v.model_id;
    row["offset"] = offset;
    row["count"] = count;
    index.push_back(row);
    offset += 4 + 4ull * count;
  }
  bin.flush();
  if (!bin) throw Error(ErrorCode::IoFailure, "write failed: " + bin_path.string());
  bin.close();

  std::ofstream idx(index_path, std::ios::trunc);
  for (const auto& row : index) idx << row.dump() << '\n';
  if (!idx) throw Error(ErrorCode::IoFailure, "write failed: " + index_path.string());
}

std::vector<EmbeddingVector> read_embeddings(const std::filesystem::path& bin_path,
                                             const std::filesystem::path& index_path) {
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error(ErrorCode::IoFailure, "cannot read " + bin_path.string());
  std::ifstream idx(index_path);
  if (!idx) throw Error(ErrorCode::IoFailure, "cannot read " + index_path.string());

  std::vector<EmbeddingVector> out;
  std::string line;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    json row = json::parse(line);
    EmbeddingVector v;
    v.question_id = row.at("question_id").get<std::string>();
    v.model_id = row.value("model_id", "");
    const std::uint64_t offset = row.at("offset").get<std::uint64_t>();
    const std::uint32_t count = row.at("count").get<std::uint32_t>();
    bin.seekg(static_cast<std::streamoff>(offset));
    unsigned char header[4];
    bin.read(reinterpret_cast<char*>(header), 4);
    const std::uint32_t stored = static_cast<std::uint32_t>(header[0]) |
                                 (static_cast<std::uint32_t>(header[1]) << 8) |
                                 (static_cast<std::uint32_t>(header[2]) << 16) |
                                 (static_cast<std::uint32_t>(header[3]) << 24);
    if (!bin || stored != count)
      throw Error(ErrorCode::IoFailure,
                  "embedding record corrupt for " + v.question_id);
    v.values.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      unsigned char b[4];
      bin.read(reinterpret_cast<char*>(b), 4);
      std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                           (static_cast<std::uint32_t>(b[1]) << 8) |
                           (static_cast<std::uint32_t>(b[2]) << 16) |
                           (static_cast<std::uint32_t>(b[3]) << 24);
      float x;
      std::memcpy(&x, &bits, 4);
      v.values[i] = x;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace ffoundry
