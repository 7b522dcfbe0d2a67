#include "ffoundry/resolution_types.hpp"

namespace ffoundry {

const char* to_string(AgentSlot s) {
  switch (s) {
    case AgentSlot::primary_a: return "primary_a";
    case AgentSlot::primary_b: return "primary_b";
    case AgentSlot::primary_c: return "primary_c";
    case AgentSlot::tiebreak: return "tiebreak";
  }
  return "primary_a";
}

const char* to_string(VoteVerdict v) {
  switch (v) {
    case VoteVerdict::yes: return "yes";
    case VoteVerdict::no: return "no";
    case VoteVerdict::annul: return "annul";
  }
  return "no";
}

const char* to_string(ResolutionMethod m) {
  return m == ResolutionMethod::unanimous ? "unanimous" : "tiebreak";
}

AgentSlot agent_slot_from_string(const std::string& s) {
  if (s == "primary_a") return AgentSlot::primary_a;
  if (s == "primary_b") return AgentSlot::primary_b;
  if (s == "primary_c") return AgentSlot::primary_c;
  if (s == "tiebreak") return AgentSlot::tiebreak;
  throw Error(ErrorCode::IoFailure, "unknown agent slot: " + s);
}

VoteVerdict vote_verdict_from_string(const std::string& s) {
  if (s == "yes") return VoteVerdict::yes;
  if (s == "no") return VoteVerdict::no;
  if (s == "annul" || s == "annulled") return VoteVerdict::annul;
  throw Error(ErrorCode::IoFailure, "unknown verdict: " + s);
}

ResolutionMethod resolution_method_from_string(const std::string& s) {
  if (s == "unanimous") return ResolutionMethod::unanimous;
  if (s == "tiebreak") return ResolutionMethod::tiebreak;
  throw Error(ErrorCode::IoFailure, "unknown resolution method: " + s);
}

nlohmann::json ResolutionVote::to_json() const {
  nlohmann::json j;
  j["question_id"] = question_id;
  j["agent_slot"] = to_string(slot);
  j["verdict"] = to_string(verdict);
  j["derivation"] = derivation;
  j["weaknesses"] = weaknesses;
  j["transcript_ref"] = transcript_ref;
  return j;
}

ResolutionVote ResolutionVote::from_json(const nlohmann::json& j) {
  ResolutionVote v;
  v.question_id = j.at("question_id").get<std::string>();
  v.slot = agent_slot_from_string(j.at("agent_slot").get<std::string>());
  v.verdict = vote_verdict_from_string(j.at("verdict").get<std::string>());
  v.derivation = j.value("derivation", "");
  v.weaknesses = j.value("weaknesses", "");
  v.transcript_ref = j.value("transcript_ref", "");
  return v;
}

nlohmann::json FinalResolution::to_json() const {
  nlohmann::json j;
  j["question_id"] = question_id;
  j["verdict"] = verdict == VoteVerdict::annul ? "annulled" : to_string(verdict);
  j["method"] = to_string(method);
  nlohmann::json votes_json = nlohmann::json::array();
  for (const auto& v : votes) votes_json.push_back(v.to_json());
  j["votes"] = votes_json;
  return j;
}

FinalResolution FinalResolution::from_json(const nlohmann::json& j) {
  FinalResolution r;
  r.question_id = j.at("question_id").get<std::string>();
  r.verdict = vote_verdict_from_string(j.at("verdict").get<std::string>());
  r.method = resolution_method_from_string(j.at("method").get<std::string>());
  if (j.contains("votes")) {
    for (const auto& v : j.at("votes")) {
      r.votes.push_back(ResolutionVote::from_json(v));
    }
  }
  return r;
}

}  // namespace ffoundry
