#pragma once

#include <map>
#include <string>

#include "ffoundry/domain.hpp"
#include "ffoundry/gateway.hpp"
#include "ffoundry/resolution_types.hpp"

namespace ffoundry {

enum class AdjudicationRule {
  tiebreak_final,  // the tiebreaker's verdict decides any split
  plurality4,      // plurality of all four votes; ties go to the tiebreaker
};
AdjudicationRule adjudication_from_string(const std::string& s);

struct ResolverBackends {
  std::string primary_a;
  std::string primary_b;
  std::string primary_c;
  std::string tiebreak;
};

class EnsembleResolver {
 public:
  EnsembleResolver(Gateway& gateway, ResolverBackends backends,
                   AdjudicationRule rule, UtcTime resolution_date,
                   UtcTime as_of, int research_budget);

  // One agent's vote. Slots a and b share the reduced prompt variant; slot c
  // and the tiebreaker use the full prompt. An unparseable vote is recast
  // once before the failure propagates.
  ResolutionVote resolve_once(const Question& q, AgentSlot slot);

  // Three primary votes; the tiebreaker runs only when they split.
  FinalResolution resolve_ensemble(const Question& q);

 private:
  ResolutionVote cast(const Question& q, AgentSlot slot);

  Gateway& gateway_;
  ResolverBackends backends_;
  AdjudicationRule rule_;
  UtcTime resolution_date_;
  UtcTime as_of_;
  int research_budget_;
};

}  // namespace ffoundry
