#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <set>

#include "ffoundry/dedup.hpp"
#include "ffoundry/mock_backend.hpp"
#include "ffoundry/rng.hpp"

using namespace ffoundry;

namespace {

namespace fs = std::filesystem;

EmbeddingVector vec(const std::string& id, std::vector<float> values) {
  EmbeddingVector v;
  v.question_id = id;
  v.values = std::move(values);
  v.model_id = "test";
  return v;
}

// O(N^2) connected-components oracle on the >= threshold similarity graph.
std::vector<int> cc_oracle(const std::vector<EmbeddingVector>& vectors,
                           double threshold) {
  const std::size_t n = vectors.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (cosine_similarity(vectors[i].values, vectors[j].values) >= threshold)
        parent[find(i)] = find(j);

  // components with a single member are noise (no neighbor)
  std::vector<int> size_of(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++size_of[find(i)];
  std::vector<int> label(n, -1);
  int next = 0;
  std::vector<int> by_root(n, -1);
  std::vector<int> out(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    if (size_of[root] < 2) continue;
    if (by_root[root] == -1) by_root[root] = next++;
    out[i] = by_root[root];
  }
  (void)label;
  return out;
}

// same partition, ignoring label numbering; noise must match exactly
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, rev;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == -1) != (b[i] == -1)) return false;
    if (a[i] == -1) continue;
    auto f = fwd.find(a[i]);
    if (f == fwd.end()) {
      if (rev.count(b[i])) return false;
      fwd[a[i]] = b[i];
      rev[b[i]] = a[i];
    } else if (f->second != b[i]) {
      return false;
    }
  }
  return true;
}

Question make_q(const std::string& salt, const std::string& title) {
  return Question::make("p_" + salt, title, "Background for " + title,
                        "Resolves YES when confirmed.",
                        UtcTime::from_ymd(2025, 10, 15),
                        UtcTime::from_ymd(2025, 12, 31),
                        UtcTime::from_ymd(2025, 10, 2));
}

struct GatewayFixture {
  fs::path dir;
  std::map<std::string, BackendConfig> backends;
  TemplateStore templates;
  std::shared_ptr<MockBackend> mock;
  std::unique_ptr<Gateway> gateway;

  GatewayFixture() {
    dir = fs::temp_directory_path() /
          ("ffoundry_dedup_" + std::to_string(::getpid()) + "_" +
           std::to_string(rand()));
    BackendConfig b;
    b.backend_id = "mock";
    b.kind = "mock";
    b.retry_backoff_ms = {0, 0, 0};
    b.requests_per_minute = 1000000;
    b.max_in_flight = 8;
    backends["mock"] = b;
    templates =
        TemplateStore::load_dir(fs::path(FFOUNDRY_SOURCE_DIR) / "prompts");
    gateway = std::make_unique<Gateway>(backends, templates, dir / "transcripts");
    mock = std::make_shared<MockBackend>();
    gateway->register_backend("mock", mock);
  }
  ~GatewayFixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("cluster: orthogonal basis example") {
  // two identical unit vectors plus one orthogonal: pair clusters, the
  // orthogonal point is noise
  std::vector<EmbeddingVector> vs;
  vs.push_back(vec("a", {1, 0, 0}));
  vs.push_back(vec("b", {1, 0, 0}));
  vs.push_back(vec("c", {0, 1, 0}));
  ClusterParams params;
  auto assign = cluster(vs, params);
  CHECK(assign[0] == assign[1]);
  CHECK(assign[0] >= 0);
  CHECK(assign[2] == -1);
}

TEST_CASE("cluster: all identical vectors form one cluster") {
  std::vector<EmbeddingVector> vs;
  for (int i = 0; i < 7; ++i)
    vs.push_back(vec("q" + std::to_string(i), {0.5f, 0.5f, 0.1f}));
  auto assign = cluster(vs, ClusterParams{});
  for (int a : assign) CHECK(a == 0);
}

TEST_CASE("cluster equals connected components on random instances") {
  Rng rng(515);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.next_below(49);
    std::vector<EmbeddingVector> vs;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<float> v(8);
      double norm = 0.0;
      for (auto& x : v) {
        x = static_cast<float>(rng.next_gaussian());
        norm += static_cast<double>(x) * x;
      }
      for (auto& x : v) x = static_cast<float>(x / std::sqrt(norm));
      vs.push_back(vec("q" + std::to_string(i), v));
    }
    ClusterParams params;
    CHECK(same_partition(cluster(vs, params),
                         cc_oracle(vs, params.similarity_threshold)));
  }
}

TEST_CASE("cluster validates inputs") {
  std::vector<EmbeddingVector> vs;
  vs.push_back(vec("a", {1, 0}));
  vs.push_back(vec("b", {1, 0, 0}));
  CHECK_THROWS_AS((void)cluster(vs, ClusterParams{}), Error);

  std::vector<EmbeddingVector> nan_vs;
  nan_vs.push_back(vec("a", {std::numeric_limits<float>::quiet_NaN(), 0}));
  CHECK_THROWS_AS((void)cluster(nan_vs, ClusterParams{}), Error);

  ClusterParams bad;
  bad.min_points = 1;
  std::vector<EmbeddingVector> ok{vec("a", {1, 0})};
  CHECK_THROWS_AS((void)cluster(ok, bad), Error);
}

TEST_CASE("embed batches preserve order and batch boundaries") {
  GatewayFixture fx;
  Deduplicator dedup(*fx.gateway, "mock", "mock", ClusterParams{}, 32, 200);

  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i) texts.push_back("text " + std::to_string(i));
  auto vectors = dedup.embed(texts);
  REQUIRE(vectors.size() == 100);

  // identical inputs embed identically; order preserved under batching
  auto again = dedup.embed(texts);
  for (std::size_t i = 0; i < vectors.size(); ++i)
    CHECK(vectors[i].values == again[i].values);

  CHECK_THROWS_AS((void)dedup.embed({}), Error);
}

TEST_CASE("dedup_set removes a planted exact duplicate") {
  GatewayFixture fx;
  Deduplicator dedup(*fx.gateway, "mock", "mock", ClusterParams{}, 32, 200);

  std::vector<Question> qs;
  qs.push_back(make_q("aa", "Will the duplicated event occur by December 31, 2025?"));
  qs.push_back(make_q("bb", "Will the duplicated event occur by December 31, 2025?"));
  qs.push_back(make_q("cc", "Will something unrelated happen by November 3, 2025?"));

  auto outcome = dedup.dedup_set(qs);
  CHECK(outcome.kept.size() == 2);
  CHECK(outcome.removed.size() == 1);
  REQUIRE(outcome.confirmed_pairs.size() == 1);
  // the lexicographically smallest id of the pair is the keeper
  const std::string kept_dup =
      std::min(outcome.confirmed_pairs[0].a, outcome.confirmed_pairs[0].b);
  CHECK(std::count(outcome.kept.begin(), outcome.kept.end(), kept_dup) == 1);

  // kept and removed partition the input
  std::set<std::string> all;
  for (const auto& q : qs) all.insert(q.id);
  std::set<std::string> got(outcome.kept.begin(), outcome.kept.end());
  got.insert(outcome.removed.begin(), outcome.removed.end());
  CHECK(got == all);
}

TEST_CASE("dedup_set is idempotent over its kept set") {
  GatewayFixture fx;
  Deduplicator dedup(*fx.gateway, "mock", "mock", ClusterParams{}, 32, 200);
  std::vector<Question> qs;
  qs.push_back(make_q("aa", "Will twin question alpha resolve by December 1, 2025?"));
  qs.push_back(make_q("bb", "Will twin question alpha resolve by December 1, 2025?"));
  qs.push_back(make_q("cc", "Will an unrelated milestone pass by December 2, 2025?"));
  auto first = dedup.dedup_set(qs);

  std::vector<Question> kept_questions;
  for (const auto& q : qs)
    if (std::count(first.kept.begin(), first.kept.end(), q.id))
      kept_questions.push_back(q);
  auto second = dedup.dedup_set(kept_questions);
  CHECK(second.removed.empty());
  CHECK(second.kept.size() == kept_questions.size());
}

TEST_CASE("dedup_set with zero confirmed pairs keeps everything") {
  GatewayFixture fx;
  // scripted checker that never confirms
  fx.mock->add_response("dedup_check", "", "final_answer_duplicate: no\n");
  Deduplicator dedup(*fx.gateway, "mock", "mock", ClusterParams{}, 32, 200);
  std::vector<Question> qs;
  qs.push_back(make_q("aa", "Will twin question beta resolve by December 1, 2025?"));
  qs.push_back(make_q("bb", "Will twin question beta resolve by December 1, 2025?"));
  auto outcome = dedup.dedup_set(qs);
  CHECK(outcome.removed.empty());
  CHECK(outcome.kept.size() == 2);
  CHECK(outcome.pairs_checked == 1);
}

TEST_CASE("cluster of three with one confirmed pair keeps the odd one out") {
  GatewayFixture fx;
  // all three share an embedding directive so they land in one cluster,
  // but only the A/B pair is a confirmed duplicate
  auto qa = make_q("aa", "Will variant A of the event [[emb:3]] happen by 2025-12-01?");
  auto qb = make_q("bb", "Will variant B of the event [[emb:3]] happen by 2025-12-01?");
  auto qc = make_q("cc", "Will variant C of the event [[emb:3]] happen by 2025-12-01?");
  fx.mock->add_response("dedup_check", "variant A", "final_answer_duplicate: no\n");
  // order matters: the A-specific rule must come after more specific ones
  std::vector<Question> qs{qa, qb, qc};

  // script: pair (A,B) yes, any pair mentioning C no
  fx.mock = std::make_shared<MockBackend>();
  fx.gateway->register_backend("mock", fx.mock);
  fx.mock->add_response("dedup_check", "variant C", "final_answer_duplicate: no\n");
  fx.mock->add_response("dedup_check", "", "final_answer_duplicate: yes\n");

  Deduplicator dedup(*fx.gateway, "mock", "mock", ClusterParams{}, 32, 200);
  auto outcome = dedup.dedup_set(qs);
  CHECK(outcome.kept.size() == 2);
  CHECK(outcome.removed.size() == 1);
  CHECK(std::count(outcome.kept.begin(), outcome.kept.end(), qc.id) == 1);
  // A or B kept by the smallest-id rule
  const std::string kept_ab = std::min(qa.id, qb.id);
  CHECK(std::count(outcome.kept.begin(), outcome.kept.end(), kept_ab) == 1);
}

TEST_CASE("embeddings binary file round-trips") {
  const fs::path dir = fs::temp_directory_path() /
                       ("ffoundry_emb_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::vector<EmbeddingVector> vs;
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    std::vector<float> v(3 + i);
    for (auto& x : v) x = static_cast<float>(rng.next_gaussian());
    vs.push_back(vec("q" + std::to_string(i), v));
  }
  write_embeddings(dir / "e.bin", dir / "e_index.jsonl", vs);
  auto back = read_embeddings(dir / "e.bin", dir / "e_index.jsonl");
  REQUIRE(back.size() == vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    CHECK(back[i].question_id == vs[i].question_id);
    CHECK(back[i].values == vs[i].values);
  }
  fs::remove_all(dir);
}
