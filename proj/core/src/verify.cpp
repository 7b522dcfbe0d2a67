#include "ffoundry/verify.hpp"

#include <algorithm>

namespace ffoundry {

const char* to_string(VerifierKind k) {
  switch (k) {
    case VerifierKind::quality: return "quality";
    case VerifierKind::ambiguity: return "ambiguity";
    case VerifierKind::resolvability: return "resolvability";
    case VerifierKind::forecast: return "forecast";
  }
  return "quality";
}

VerifierKind verifier_kind_from_string(const std::string& s) {
  if (s == "quality") return VerifierKind::quality;
  if (s == "ambiguity") return VerifierKind::ambiguity;
  if (s == "resolvability") return VerifierKind::resolvability;
  if (s == "forecast") return VerifierKind::forecast;
  throw Error(ErrorCode::IoFailure, "unknown verifier kind: " + s);
}

const std::vector<std::string>& quality_labels() {
  static const std::vector<std::string> labels = {"bad", "meh", "good", "great"};
  return labels;
}

const std::vector<std::string>& resolvability_labels() {
  static const std::vector<std::string> labels = {
      "very certainly no", "probably no", "probably yes", "very certainly yes"};
  return labels;
}

json Verdict::to_json() const {
  json j;
  j["question_id"] = question_id;
  j["kind"] = to_string(kind);
  if (kind == VerifierKind::forecast)
    j["rating"] = rating_value;
  else
    j["rating"] = rating_label;
  j["rationale"] = rationale;
  j["transcript_ref"] = transcript_ref;
  return j;
}

Verdict Verdict::from_json(const json& j) {
  Verdict v;
  v.question_id = j.at("question_id").get<std::string>();
  v.kind = verifier_kind_from_string(j.at("kind").get<std::string>());
  if (v.kind == VerifierKind::forecast)
    v.rating_value = j.at("rating").get<double>();
  else
    v.rating_label = j.at("rating").get<std::string>();
  v.rationale = j.value("rationale", "");
  v.transcript_ref = j.value("transcript_ref", "");
  return v;
}

json GateResult::to_json() const {
  json j;
  j["question_id"] = question_id;
  j["passed"] = passed;
  j["trivial_flag"] = trivial_flag;
  json vs = json::array();
  for (const auto& v : verdicts) vs.push_back(v.to_json());
  j["verdicts"] = vs;
  return j;
}

GateResult GateResult::from_json(const json& j) {
  GateResult g;
  g.question_id = j.at("question_id").get<std::string>();
  g.passed = j.at("passed").get<bool>();
  g.trivial_flag = j.at("trivial_flag").get<bool>();
  for (const auto& v : j.at("verdicts")) g.verdicts.push_back(Verdict::from_json(v));
  return g;
}

GateResult apply_gate(const std::vector<Verdict>& verdicts) {
  const Verdict* by_kind[4] = {nullptr, nullptr, nullptr, nullptr};
  for (const auto& v : verdicts) {
    auto& slot = by_kind[static_cast<int>(v.kind)];
    if (slot != nullptr)
      throw Error(ErrorCode::MissingVerdict,
                  std::string("duplicate verdict kind: ") + to_string(v.kind));
    slot = &v;
  }
  for (int k = 0; k < 4; ++k) {
    if (by_kind[k] == nullptr)
      throw Error(ErrorCode::MissingVerdict,
                  std::string("missing verdict kind: ") +
                      to_string(static_cast<VerifierKind>(k)));
  }
  const std::string qid = verdicts.front().question_id;
  for (const auto& v : verdicts) {
    if (v.question_id != qid)
      throw Error(ErrorCode::MissingVerdict,
                  "verdicts mix question ids: " + qid + " vs " + v.question_id);
  }

  const auto& quality = *by_kind[static_cast<int>(VerifierKind::quality)];
  const auto& ambiguity = *by_kind[static_cast<int>(VerifierKind::ambiguity)];
  const auto& resolvability = *by_kind[static_cast<int>(VerifierKind::resolvability)];
  const auto& forecast = *by_kind[static_cast<int>(VerifierKind::forecast)];

  GateResult g;
  g.question_id = qid;
  g.passed = quality.rating_label == "great" &&
             ambiguity.rating_label == "great" &&
             resolvability.rating_label == "very certainly yes";
  g.trivial_flag = forecast.rating_value < 2.0 || forecast.rating_value > 98.0;
  g.verdicts = verdicts;
  std::sort(g.verdicts.begin(), g.verdicts.end(),
            [](const Verdict& a, const Verdict& b) {
              return static_cast<int>(a.kind) < static_cast<int>(b.kind);
            });
  return g;
}

QuestionVerifier::QuestionVerifier(Gateway& gateway, std::string backend_id,
                                   int research_budget, UtcTime now)
    : gateway_(gateway),
      backend_id_(std::move(backend_id)),
      research_budget_(research_budget),
      now_(now) {}

Verdict QuestionVerifier::run_verifier(const Question& q, VerifierKind kind) {
  AgentRequest req;
  req.backend_id = backend_id_;
  req.mode = AgentMode::research_agent;
  req.budget = research_budget_;
  req.fake_now = now_;
  req.prompt_template_id = std::string("verify_") + to_string(kind);
  req.artifacts = {{"question title", q.title},
                   {"background", q.background},
                   {"resolution criteria", q.resolution_criteria}};

  AgentResponse resp = gateway_.execute(req);

  Verdict v;
  v.question_id = q.id;
  v.kind = kind;
  v.transcript_ref = resp.transcript_ref;
  const std::string field = std::string("final_answer_") + to_string(kind);
  const std::string raw = resp.fields.at(field);
  v.rationale = resp.fields.count("rationale_" + std::string(to_string(kind)))
                    ? resp.fields.at("rationale_" + std::string(to_string(kind)))
                    : "";
  switch (kind) {
    case VerifierKind::quality:
    case VerifierKind::ambiguity:
      v.rating_label = parse_categorical(raw, quality_labels());
      break;
    case VerifierKind::resolvability:
      v.rating_label = parse_categorical(raw, resolvability_labels());
      break;
    case VerifierKind::forecast:
      v.rating_value = parse_probability(raw) * 100.0;
      break;
  }
  return v;
}

}  // namespace ffoundry
