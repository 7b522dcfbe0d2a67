#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ffoundry/domain.hpp"
#include "ffoundry/gateway.hpp"

namespace ffoundry {

enum class ForecastStrategy { direct, subquestions };
const char* to_string(ForecastStrategy s);
ForecastStrategy forecast_strategy_from_string(const std::string& s);

struct ResearchDossier {
  std::string id;  // content-addressed
  std::string question_id;
  std::string researcher_backend;
  std::string dossier_text;
  UtcTime researched_at;  // real wall clock (or the run's fixed clock)
  UtcTime fake_now;       // the "today" injected while forecasting
  std::string transcript_ref;

  json to_json() const;
  static ResearchDossier from_json(const json& j);
};

struct ForecastRecord {
  std::string question_id;
  std::string forecaster_backend;
  std::string dossier_ref;
  double probability = 0.0;
  ForecastStrategy strategy = ForecastStrategy::direct;
  UtcTime made_at;
  UtcTime fake_now;
  std::vector<std::string> flags;

  json to_json() const;
  static ForecastRecord from_json(const json& j);
};

struct SubquestionBundle {
  std::string parent_id;
  std::vector<Question> subquestions;       // self-contained, 1..5
  std::vector<ResearchDossier> subdossiers; // aligned with subquestions
  std::vector<ForecastRecord> subforecasts; // aligned with subquestions
  std::string composed_dossier;

  bool complete() const {
    return !subquestions.empty() &&
           subquestions.size() == subdossiers.size() &&
           subquestions.size() == subforecasts.size();
  }

  json to_json() const;
  static SubquestionBundle from_json(const json& j);
};

struct DecomposeResult {
  std::vector<Question> subquestions;
  std::vector<std::string> warnings;
};

// Splits the decomposition answer into numbered blocks with title /
// background / resolution_criteria lines. Exposed for the parser tests.
DecomposeResult parse_subquestion_list(const Question& parent,
                                       const std::string& answer, UtcTime now);

class ForecastHarness {
 public:
  ForecastHarness(Gateway& gateway, int research_budget, UtcTime now);

  // Live-web evidence gathering with the simulated "today" pinned into the
  // system prompt. fake_now must not fall after the question window closes.
  ResearchDossier research(const Question& q, const std::string& backend,
                           UtcTime fake_now);

  // Single completion over the stored dossier. Never triggers research.
  ForecastRecord forecast(const Question& q, const ResearchDossier& dossier,
                          const std::string& backend);

  // 1..5 self-contained subquestions; anything echoing the parent title is
  // screened out.
  DecomposeResult decompose(const Question& q, const std::string& backend);

  // Final forecast with subforecasts and their research in context. An empty
  // bundle falls back to a direct forecast, flagged on the record.
  ForecastRecord forecast_with_subquestions(const Question& q,
                                            const ResearchDossier& dossier,
                                            const SubquestionBundle& bundle,
                                            const std::string& backend);

  static std::string compose_dossier(const ResearchDossier& parent,
                                     const SubquestionBundle& bundle);

 private:
  ForecastRecord forecast_with_template(const Question& q,
                                        const ResearchDossier& dossier,
                                        const std::string& backend,
                                        const std::string& template_id,
                                        const std::string& research_text,
                                        const std::string& subforecast_text,
                                        ForecastStrategy strategy);

  Gateway& gateway_;
  int research_budget_;
  UtcTime now_;
};

}  // namespace ffoundry
