#include "ffoundry/resolve.hpp"

namespace ffoundry {

AdjudicationRule adjudication_from_string(const std::string& s) {
  if (s == "tiebreak_final") return AdjudicationRule::tiebreak_final;
  if (s == "plurality4") return AdjudicationRule::plurality4;
  throw Error(ErrorCode::ConfigInvalid, "unknown adjudication rule: " + s);
}

EnsembleResolver::EnsembleResolver(Gateway& gateway, ResolverBackends backends,
                                   AdjudicationRule rule, UtcTime resolution_date,
                                   UtcTime as_of, int research_budget)
    : gateway_(gateway),
      backends_(std::move(backends)),
      rule_(rule),
      resolution_date_(resolution_date),
      as_of_(as_of),
      research_budget_(research_budget) {}

ResolutionVote EnsembleResolver::cast(const Question& q, AgentSlot slot) {
  const bool full_variant =
      slot == AgentSlot::primary_c || slot == AgentSlot::tiebreak;
  AgentRequest req;
  switch (slot) {
    case AgentSlot::primary_a: req.backend_id = backends_.primary_a; break;
    case AgentSlot::primary_b: req.backend_id = backends_.primary_b; break;
    case AgentSlot::primary_c: req.backend_id = backends_.primary_c; break;
    case AgentSlot::tiebreak: req.backend_id = backends_.tiebreak; break;
  }
  req.mode = AgentMode::research_agent;
  req.budget = research_budget_;
  req.prompt_template_id =
      full_variant ? "resolve_question" : "resolve_question_brief";

  json question_json;
  question_json["question"] = q.title;
  question_json["description"] = q.background;
  question_json["resolution_criteria"] = q.resolution_criteria;
  question_json["window_start"] = q.window_start.to_iso8601();
  question_json["window_end"] = q.window_end.to_iso8601();
  req.artifacts = {{"Resolution date", resolution_date_.to_date()},
                   {"question", question_json.dump(2)}};

  AgentResponse resp = gateway_.execute(req);

  ResolutionVote vote;
  vote.question_id = q.id;
  vote.slot = slot;
  const std::string raw = parse_categorical(
      resp.fields.at("resolution"), {"true", "false", "yes", "no", "annul"});
  if (raw == "true" || raw == "yes")
    vote.verdict = VoteVerdict::yes;
  else if (raw == "false" || raw == "no")
    vote.verdict = VoteVerdict::no;
  else
    vote.verdict = VoteVerdict::annul;
  vote.derivation = resp.fields.at("resolution_derivation");
  if (resp.fields.count("resolution_weaknesses"))
    vote.weaknesses = resp.fields.at("resolution_weaknesses");
  vote.transcript_ref = resp.transcript_ref;
  if (vote.derivation.empty())
    throw Error(ErrorCode::ParseFailure, "vote without a derivation");
  return vote;
}

ResolutionVote EnsembleResolver::resolve_once(const Question& q, AgentSlot slot) {
  if (!(q.window_end < as_of_ || q.window_end == as_of_))
    throw Error(ErrorCode::PreconditionViolation,
                "question window has not closed yet: " + q.id);
  try {
    return cast(q, slot);
  } catch (const Error& e) {
    // Invalid vote: recast once, then let the failure park the question.
    if (e.code() != ErrorCode::ParseFailure && e.code() != ErrorCode::UnknownLabel)
      throw;
    return cast(q, slot);
  }
}

FinalResolution EnsembleResolver::resolve_ensemble(const Question& q) {
  FinalResolution final;
  final.question_id = q.id;
  final.votes.push_back(resolve_once(q, AgentSlot::primary_a));
  final.votes.push_back(resolve_once(q, AgentSlot::primary_b));
  final.votes.push_back(resolve_once(q, AgentSlot::primary_c));

  const VoteVerdict a = final.votes[0].verdict;
  const VoteVerdict b = final.votes[1].verdict;
  const VoteVerdict c = final.votes[2].verdict;
  if (a == b && b == c) {
    final.verdict = a;
    final.method = ResolutionMethod::unanimous;
    return final;
  }

  final.votes.push_back(resolve_once(q, AgentSlot::tiebreak));
  final.method = ResolutionMethod::tiebreak;
  const VoteVerdict tb = final.votes[3].verdict;

  if (rule_ == AdjudicationRule::tiebreak_final) {
    final.verdict = tb;
    return final;
  }

  // plurality4: count all four votes; the tiebreaker wins ties.
  std::map<VoteVerdict, int> counts;
  for (const auto& v : final.votes) ++counts[v.verdict];
  VoteVerdict best = tb;
  int best_count = counts[tb];
  for (const auto& [verdict, count] : counts) {
    if (count > best_count) {
      best = verdict;
      best_count = count;
    }
  }
  final.verdict = best;
  return final;
}

}  // namespace ffoundry
