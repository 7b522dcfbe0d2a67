#pragma once

#include <string>
#include <vector>

#include "ffoundry/domain.hpp"
#include "ffoundry/gateway.hpp"

namespace ffoundry {

enum class VerifierKind { quality, ambiguity, resolvability, forecast };

const char* to_string(VerifierKind k);
VerifierKind verifier_kind_from_string(const std::string& s);

const std::vector<std::string>& quality_labels();        // bad..great
const std::vector<std::string>& resolvability_labels();  // very certainly no..yes

struct Verdict {
  std::string question_id;
  VerifierKind kind = VerifierKind::quality;
  std::string rating_label;   // categorical kinds
  double rating_value = -1.0; // forecast kind, in [0,100]
  std::string rationale;
  std::string transcript_ref;

  json to_json() const;
  static Verdict from_json(const json& j);
};

struct GateResult {
  std::string question_id;
  bool passed = false;
  bool trivial_flag = false;
  std::vector<Verdict> verdicts;

  json to_json() const;
  static GateResult from_json(const json& j);
};

// Pure gate: passed iff quality and ambiguity are both "great" and
// resolvability is "very certainly yes"; trivial iff the forecast verifier
// gave < 2 or > 98. Trivial questions pass the gate but carry the flag.
GateResult apply_gate(const std::vector<Verdict>& verdicts);

class QuestionVerifier {
 public:
  QuestionVerifier(Gateway& gateway, std::string backend_id, int research_budget,
                   UtcTime now);

  // UnknownLabel and backend exhaustion propagate; callers park the
  // question instead of rejecting it.
  Verdict run_verifier(const Question& q, VerifierKind kind);

 private:
  Gateway& gateway_;
  std::string backend_id_;
  int research_budget_;
  UtcTime now_;
};

}  // namespace ffoundry
