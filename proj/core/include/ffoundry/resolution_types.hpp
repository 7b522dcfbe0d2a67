#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ffoundry/error.hpp"

namespace ffoundry {

enum class AgentSlot { primary_a, primary_b, primary_c, tiebreak };
enum class VoteVerdict { yes, no, annul };
enum class ResolutionMethod { unanimous, tiebreak };

const char* to_string(AgentSlot s);
const char* to_string(VoteVerdict v);
const char* to_string(ResolutionMethod m);
AgentSlot agent_slot_from_string(const std::string& s);
VoteVerdict vote_verdict_from_string(const std::string& s);
ResolutionMethod resolution_method_from_string(const std::string& s);

// One resolver agent's vote on one question.
struct ResolutionVote {
  std::string question_id;
  AgentSlot slot = AgentSlot::primary_a;
  VoteVerdict verdict = VoteVerdict::no;
  std::string derivation;   // non-empty: the agent must argue its resolution
  std::string weaknesses;   // may be empty for the reduced prompt variant
  std::string transcript_ref;

  nlohmann::json to_json() const;
  static ResolutionVote from_json(const nlohmann::json& j);
};

// The ensemble's final answer: unanimous primaries, or the tiebreaker's word.
struct FinalResolution {
  std::string question_id;
  VoteVerdict verdict = VoteVerdict::no;  // "annul" means annulled
  ResolutionMethod method = ResolutionMethod::unanimous;
  std::vector<ResolutionVote> votes;

  nlohmann::json to_json() const;
  static FinalResolution from_json(const nlohmann::json& j);
};

}  // namespace ffoundry
