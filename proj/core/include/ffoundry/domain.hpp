#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ffoundry/time.hpp"

namespace ffoundry {

using json = nlohmann::json;

enum class SeedSource { gdelt, mediacloud, text };

const char* to_string(SeedSource s);
SeedSource seed_source_from_string(const std::string& s);

// Arbitrary source text (news article, report rationale) grounding question
// generation. id is a deterministic function of (source, content).
struct Seed {
  std::string id;
  SeedSource source = SeedSource::text;
  std::string content;
  std::string url;  // empty when the seed has no source link
  UtcTime retrieved_at;
  json extra = json::object();  // unknown fields, kept for round-trip

  static Seed make(SeedSource source, std::string content, std::string url,
                   UtcTime retrieved_at);

  json to_json() const;
  static Seed from_json(const json& j);
};

// A question about the future whose thrust is clear but whose resolution
// terms are not yet precise. Title must be question-form (ends with "?").
struct ProtoQuestion {
  std::string id;
  std::string seed_id;
  std::string title;
  std::string rationale;
  json extra = json::object();

  static ProtoQuestion make(const std::string& seed_id, std::string title,
                            std::string rationale);

  json to_json() const;
  static ProtoQuestion from_json(const json& j);
};

// A refined, resolvable binary forecasting question; the pipeline's central
// entity.
struct Question {
  std::string id;
  std::string proto_id;
  std::string title;
  std::string background;
  std::string resolution_criteria;
  UtcTime window_start;
  UtcTime window_end;
  UtcTime created_at;
  json extra = json::object();

  static Question make(const std::string& proto_id, std::string title,
                       std::string background, std::string resolution_criteria,
                       UtcTime window_start, UtcTime window_end,
                       UtcTime created_at);

  json to_json() const;
  static Question from_json(const json& j);
};

// Run-level configuration: every question's window must fall inside this.
struct ResolutionWindow {
  UtcTime start;
  UtcTime end;
};

enum class LifecycleState {
  seeded,
  proto,
  refined,
  verified,
  deduped,
  researched,
  forecasted,
  resolved,
  scored,
};

const char* to_string(LifecycleState s);
std::optional<LifecycleState> lifecycle_from_string(const std::string& s);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Structural validity plus the run-window constraint. Violations are data,
// not failures: an empty report means the question may proceed.
ValidationReport validate_question(const Question& q, const ResolutionWindow& w);

// Per-question lifecycle ledger. Transitions only advance one step at a time;
// advancing to the current state is a no-op. A rejection is terminal and
// keeps its reason.
class LifecycleStore {
 public:
  // Throws Error(IllegalTransition) on skips, reversals, or transitions out
  // of a rejected state. Returns the persisted state.
  LifecycleState advance(const std::string& id, LifecycleState from,
                         LifecycleState to);

  void start(const std::string& id, LifecycleState initial);
  void reject(const std::string& id, const std::string& stage,
              const std::string& reason);

  std::optional<LifecycleState> state_of(const std::string& id) const;
  bool rejected(const std::string& id) const;

  json to_json() const;
  static LifecycleStore from_json(const json& j);

 private:
  struct Entry {
    LifecycleState state;
    bool rejected = false;
    std::string reject_stage;
    std::string reject_reason;
  };
  // heap-held so the store stays movable
  mutable std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
  std::unordered_map<std::string, Entry> entries_;
};

}  // namespace ffoundry
