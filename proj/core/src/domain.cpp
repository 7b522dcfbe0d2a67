#include "ffoundry/domain.hpp"

#include <algorithm>

#include "ffoundry/error.hpp"
#include "ffoundry/ids.hpp"

namespace ffoundry {

namespace {

// Split a parsed record into (known fields consumed by the caller) and the
// remainder, which rides along in `extra` so unknown fields survive
// round-trips.
json take_extra(json j, std::initializer_list<const char*> known) {
  for (const char* k : known) j.erase(k);
  return j;
}

std::string require_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw Error(ErrorCode::IoFailure, std::string("missing field: ") + key);
  return j.at(key).get<std::string>();
}

UtcTime require_time(const json& j, const char* key) {
  return UtcTime::parse_or_throw(require_string(j, key));
}

}  // namespace

const char* to_string(SeedSource s) {
  switch (s) {
    case SeedSource::gdelt: return "gdelt";
    case SeedSource::mediacloud: return "mediacloud";
    case SeedSource::text: return "text";
  }
  return "text";
}

SeedSource seed_source_from_string(const std::string& s) {
  if (s == "gdelt") return SeedSource::gdelt;
  if (s == "mediacloud") return SeedSource::mediacloud;
  if (s == "text") return SeedSource::text;
  throw Error(ErrorCode::IoFailure, "unknown seed source: " + s);
}

Seed Seed::make(SeedSource source, std::string content, std::string url,
                UtcTime retrieved_at) {
  if (content.empty())
    throw Error(ErrorCode::PreconditionViolation, "seed content empty");
  Seed s;
  s.id = seed_id(to_string(source), content);
  s.source = source;
  s.content = std::move(content);
  s.url = std::move(url);
  s.retrieved_at = retrieved_at;
  return s;
}

json Seed::to_json() const {
  json j = extra;
  j["id"] = id;
  j["source"] = to_string(source);
  j["content"] = content;
  if (!url.empty()) j["url"] = url;
  j["retrieved_at"] = retrieved_at.to_iso8601();
  return j;
}

Seed Seed::from_json(const json& j) {
  Seed s;
  s.id = require_string(j, "id");
  s.source = seed_source_from_string(require_string(j, "source"));
  s.content = require_string(j, "content");
  s.url = j.value("url", "");
  s.retrieved_at = require_time(j, "retrieved_at");
  s.extra = take_extra(j, {"id", "source", "content", "url", "retrieved_at"});
  return s;
}

ProtoQuestion ProtoQuestion::make(const std::string& seed_id, std::string title,
                                  std::string rationale) {
  ProtoQuestion p;
  p.id = content_id("p_", seed_id + "\x1f" + title);
  p.seed_id = seed_id;
  p.title = std::move(title);
  p.rationale = std::move(rationale);
  return p;
}

json ProtoQuestion::to_json() const {
  json j = extra;
  j["id"] = id;
  j["seed_id"] = seed_id;
  j["title"] = title;
  j["rationale"] = rationale;
  return j;
}

ProtoQuestion ProtoQuestion::from_json(const json& j) {
  ProtoQuestion p;
  p.id = require_string(j, "id");
  p.seed_id = require_string(j, "seed_id");
  p.title = require_string(j, "title");
  p.rationale = require_string(j, "rationale");
  p.extra = take_extra(j, {"id", "seed_id", "title", "rationale"});
  return p;
}

Question Question::make(const std::string& proto_id, std::string title,
                        std::string background, std::string resolution_criteria,
                        UtcTime window_start, UtcTime window_end,
                        UtcTime created_at) {
  Question q;
  q.id = content_id("q_", proto_id + "\x1f" + title + "\x1f" + resolution_criteria);
  q.proto_id = proto_id;
  q.title = std::move(title);
  q.background = std::move(background);
  q.resolution_criteria = std::move(resolution_criteria);
  q.window_start = window_start;
  q.window_end = window_end;
  q.created_at = created_at;
  return q;
}

json Question::to_json() const {
  json j = extra;
  j["id"] = id;
  j["proto_id"] = proto_id;
  j["title"] = title;
  j["background"] = background;
  j["resolution_criteria"] = resolution_criteria;
  j["window_start"] = window_start.to_iso8601();
  j["window_end"] = window_end.to_iso8601();
  j["created_at"] = created_at.to_iso8601();
  return j;
}

Question Question::from_json(const json& j) {
  Question q;
  q.id = require_string(j, "id");
  q.proto_id = require_string(j, "proto_id");
  q.title = require_string(j, "title");
  q.background = require_string(j, "background");
  q.resolution_criteria = require_string(j, "resolution_criteria");
  q.window_start = require_time(j, "window_start");
  q.window_end = require_time(j, "window_end");
  q.created_at = require_time(j, "created_at");
  q.extra = take_extra(j, {"id", "proto_id", "title", "background",
                           "resolution_criteria", "window_start", "window_end",
                           "created_at"});
  return q;
}

const char* to_string(LifecycleState s) {
  switch (s) {
    case LifecycleState::seeded: return "seeded";
    case LifecycleState::proto: return "proto";
    case LifecycleState::refined: return "refined";
    case LifecycleState::verified: return "verified";
    case LifecycleState::deduped: return "deduped";
    case LifecycleState::researched: return "researched";
    case LifecycleState::forecasted: return "forecasted";
    case LifecycleState::resolved: return "resolved";
    case LifecycleState::scored: return "scored";
  }
  return "seeded";
}

std::optional<LifecycleState> lifecycle_from_string(const std::string& s) {
  static const std::pair<const char*, LifecycleState> table[] = {
      {"seeded", LifecycleState::seeded},
      {"proto", LifecycleState::proto},
      {"refined", LifecycleState::refined},
      {"verified", LifecycleState::verified},
      {"deduped", LifecycleState::deduped},
      {"researched", LifecycleState::researched},
      {"forecasted", LifecycleState::forecasted},
      {"resolved", LifecycleState::resolved},
      {"scored", LifecycleState::scored},
  };
  for (const auto& [name, v] : table)
    if (s == name) return v;
  return std::nullopt;
}

ValidationReport validate_question(const Question& q, const ResolutionWindow& w) {
  ValidationReport r;
  if (q.title.empty()) r.violations.push_back("empty title");
  if (q.background.empty()) r.violations.push_back("empty background");
  if (q.resolution_criteria.empty())
    r.violations.push_back("empty resolution criteria");
  if (!(q.window_start < q.window_end)) r.violations.push_back("empty window");
  if (q.window_start < w.start || q.window_end > w.end)
    r.violations.push_back("outside run window");
  return r;
}

LifecycleState LifecycleStore::advance(const std::string& id,
                                       LifecycleState from, LifecycleState to) {
  std::lock_guard<std::mutex> lock(*mu_);
  auto it = entries_.find(id);
  if (it != entries_.end() && it->second.rejected)
    throw Error(ErrorCode::IllegalTransition, id + " is rejected (terminal)");
  const LifecycleState current = it == entries_.end() ? from : it->second.state;
  if (current != from)
    throw Error(ErrorCode::IllegalTransition,
                id + ": expected " + to_string(from) + ", found " +
                    to_string(current));
  if (from == to) return to;  // idempotent re-apply
  if (static_cast<int>(to) != static_cast<int>(from) + 1)
    throw Error(ErrorCode::IllegalTransition,
                id + ": " + to_string(from) + " -> " + to_string(to));
  entries_[id].state = to;
  return to;
}

void LifecycleStore::start(const std::string& id, LifecycleState initial) {
  std::lock_guard<std::mutex> lock(*mu_);
  entries_.emplace(id, Entry{initial, false, {}, {}});
}

void LifecycleStore::reject(const std::string& id, const std::string& stage,
                            const std::string& reason) {
  std::lock_guard<std::mutex> lock(*mu_);
  auto& e = entries_[id];
  e.rejected = true;
  e.reject_stage = stage;
  e.reject_reason = reason;
}

std::optional<LifecycleState> LifecycleStore::state_of(const std::string& id) const {
  std::lock_guard<std::mutex> lock(*mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.state;
}

bool LifecycleStore::rejected(const std::string& id) const {
  std::lock_guard<std::mutex> lock(*mu_);
  auto it = entries_.find(id);
  return it != entries_.end() && it->second.rejected;
}

json LifecycleStore::to_json() const {
  std::lock_guard<std::mutex> lock(*mu_);
  json j = json::object();
  for (const auto& [id, e] : entries_) {
    json entry;
    entry["state"] = to_string(e.state);
    if (e.rejected) {
      entry["rejected"] = true;
      entry["reject_stage"] = e.reject_stage;
      entry["reject_reason"] = e.reject_reason;
    }
    j[id] = entry;
  }
  return j;
}

LifecycleStore LifecycleStore::from_json(const json& j) {
  LifecycleStore store;
  for (auto it = j.begin(); it != j.end(); ++it) {
    Entry e;
    auto st = lifecycle_from_string(it.value().at("state").get<std::string>());
    if (!st) throw Error(ErrorCode::IoFailure, "bad lifecycle state");
    e.state = *st;
    e.rejected = it.value().value("rejected", false);
    e.reject_stage = it.value().value("reject_stage", "");
    e.reject_reason = it.value().value("reject_reason", "");
    store.entries_[it.key()] = e;
  }
  return store;
}

}  // namespace ffoundry
