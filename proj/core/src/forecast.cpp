#include "ffoundry/forecast.hpp"

#include <algorithm>
#include <sstream>

#include "ffoundry/ids.hpp"

namespace ffoundry {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

constexpr int kMaxSubquestions = 5;

}  // namespace

const char* to_string(ForecastStrategy s) {
  return s == ForecastStrategy::direct ? "direct" : "subquestions";
}

ForecastStrategy forecast_strategy_from_string(const std::string& s) {
  if (s == "direct") return ForecastStrategy::direct;
  if (s == "subquestions" || s == "subq") return ForecastStrategy::subquestions;
  throw Error(ErrorCode::IoFailure, "unknown strategy: " + s);
}

json ResearchDossier::to_json() const {
  json j;
  j["id"] = id;
  j["question_id"] = question_id;
  j["researcher_backend"] = researcher_backend;
  j["dossier_text"] = dossier_text;
  j["researched_at"] = researched_at.to_iso8601();
  j["fake_now"] = fake_now.to_iso8601();
  j["transcript_ref"] = transcript_ref;
  return j;
}

ResearchDossier ResearchDossier::from_json(const json& j) {
  ResearchDossier d;
  d.id = j.at("id").get<std::string>();
  d.question_id = j.at("question_id").get<std::string>();
  d.researcher_backend = j.value("researcher_backend", "");
  d.dossier_text = j.at("dossier_text").get<std::string>();
  d.researched_at = UtcTime::parse_or_throw(j.at("researched_at").get<std::string>());
  d.fake_now = UtcTime::parse_or_throw(j.at("fake_now").get<std::string>());
  d.transcript_ref = j.value("transcript_ref", "");
  return d;
}

json ForecastRecord::to_json() const {
  json j;
  j["question_id"] = question_id;
  j["forecaster_backend"] = forecaster_backend;
  j["dossier_ref"] = dossier_ref;
  j["probability"] = probability;
  j["strategy"] = to_string(strategy);
  j["made_at"] = made_at.to_iso8601();
  j["fake_now"] = fake_now.to_iso8601();
  if (!flags.empty()) j["flags"] = flags;
  return j;
}

ForecastRecord ForecastRecord::from_json(const json& j) {
  ForecastRecord r;
  r.question_id = j.at("question_id").get<std::string>();
  r.forecaster_backend = j.at("forecaster_backend").get<std::string>();
  r.dossier_ref = j.value("dossier_ref", "");
  r.probability = j.at("probability").get<double>();
  r.strategy = forecast_strategy_from_string(j.at("strategy").get<std::string>());
  r.made_at = UtcTime::parse_or_throw(j.at("made_at").get<std::string>());
  r.fake_now = UtcTime::parse_or_throw(j.at("fake_now").get<std::string>());
  if (j.contains("flags")) r.flags = j.at("flags").get<std::vector<std::string>>();
  return r;
}

json SubquestionBundle::to_json() const {
  json j;
  j["parent_id"] = parent_id;
  json subs = json::array();
  for (const auto& q : subquestions) subs.push_back(q.to_json());
  j["subquestions"] = subs;
  json doss = json::array();
  for (const auto& d : subdossiers) doss.push_back(d.to_json());
  j["subdossiers"] = doss;
  json fors = json::array();
  for (const auto& f : subforecasts) fors.push_back(f.to_json());
  j["subforecasts"] = fors;
  j["composed_dossier"] = composed_dossier;
  return j;
}

SubquestionBundle SubquestionBundle::from_json(const json& j) {
  SubquestionBundle b;
  b.parent_id = j.at("parent_id").get<std::string>();
  for (const auto& q : j.at("subquestions"))
    b.subquestions.push_back(Question::from_json(q));
  for (const auto& d : j.value("subdossiers", json::array()))
    b.subdossiers.push_back(ResearchDossier::from_json(d));
  for (const auto& f : j.at("subforecasts"))
    b.subforecasts.push_back(ForecastRecord::from_json(f));
  b.composed_dossier = j.value("composed_dossier", "");
  return b;
}

DecomposeResult parse_subquestion_list(const Question& parent,
                                       const std::string& answer, UtcTime now) {
  struct Block {
    std::string title, background, criteria;
  };
  std::vector<Block> blocks;
  {
    std::istringstream in(answer);
    std::string line;
    Block current;
    bool open = false;
    auto flush = [&] {
      if (open) blocks.push_back(current);
      current = {};
      open = false;
    };
    while (std::getline(in, line)) {
      std::string t = trim(line);
      size_t digits = 0;
      while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits])))
        ++digits;
      if (digits > 0 && digits < t.size() &&
          (t[digits] == '.' || t[digits] == ')')) {
        flush();
        open = true;
        t = trim(t.substr(digits + 1));
      }
      if (!open) continue;
      if (t.rfind("title:", 0) == 0)
        current.title = trim(t.substr(6));
      else if (t.rfind("background:", 0) == 0)
        current.background = trim(t.substr(11));
      else if (t.rfind("resolution_criteria:", 0) == 0)
        current.criteria = trim(t.substr(20));
      else if (t.rfind("resolution criteria:", 0) == 0)
        current.criteria = trim(t.substr(20));
      else if (!t.empty() && current.title.empty() && t.find('?') != std::string::npos)
        current.title = t;  // bare "1. Will ...?" form
    }
    flush();
  }

  const std::string low_answer = [&] {
    std::string l = answer;
    std::transform(l.begin(), l.end(), l.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return l;
  }();
  if (blocks.empty()) {
    if (low_answer.find("no subquestion") != std::string::npos ||
        trim(answer).empty())
      return {};
    throw Error(ErrorCode::MalformedList,
                "decomposition answer has no numbered subquestions");
  }

  DecomposeResult result;
  for (const auto& b : blocks) {
    if (b.title.empty()) {
      result.warnings.push_back("subquestion block without a title dropped");
      continue;
    }
    if (b.title.find(parent.title) != std::string::npos) {
      result.warnings.push_back(
          "subquestion quoting the parent title screened out: " +
          b.title.substr(0, 60));
      continue;
    }
    if (static_cast<int>(result.subquestions.size()) >= kMaxSubquestions) {
      result.warnings.push_back("more than 5 subquestions; extras dropped");
      break;
    }
    std::string background =
        b.background.empty() ? "Self-contained subquestion context." : b.background;
    std::string criteria = b.criteria.empty()
                               ? "Resolves YES if the stated condition is met."
                               : b.criteria;
    result.subquestions.push_back(Question::make(parent.id, b.title, background,
                                                 criteria, parent.window_start,
                                                 parent.window_end, now));
  }
  return result;
}

ForecastHarness::ForecastHarness(Gateway& gateway, int research_budget, UtcTime now)
    : gateway_(gateway), research_budget_(research_budget), now_(now) {}

ResearchDossier ForecastHarness::research(const Question& q,
                                          const std::string& backend,
                                          UtcTime fake_now) {
  if (fake_now > q.window_end)
    throw Error(ErrorCode::PreconditionViolation,
                "fake_now falls after the question window closes");
  AgentRequest req;
  req.backend_id = backend;
  req.mode = AgentMode::research_agent;
  req.budget = research_budget_;
  req.prompt_template_id = "forecast_research";
  req.fake_now = fake_now;
  req.artifacts = {{"Forecasting question title", q.title},
                   {"Background", q.background},
                   {"Resolution criteria", q.resolution_criteria},
                   {"Additional information", "(none)"}};
  AgentResponse resp = gateway_.execute(req);
  if (trim(resp.text).empty())
    throw Error(ErrorCode::ParseFailure, "research produced an empty dossier");

  ResearchDossier d;
  d.question_id = q.id;
  d.researcher_backend = backend;
  d.dossier_text = resp.text;
  d.researched_at = now_;
  d.fake_now = fake_now;
  d.transcript_ref = resp.transcript_ref;
  d.id = content_id("d_", q.id + "\x1f" + backend + "\x1f" + resp.text);
  return d;
}

ForecastRecord ForecastHarness::forecast_with_template(
    const Question& q, const ResearchDossier& dossier, const std::string& backend,
    const std::string& template_id, const std::string& research_text,
    const std::string& subforecast_text, ForecastStrategy strategy) {
  if (dossier.question_id != q.id)
    throw Error(ErrorCode::PreconditionViolation,
                "dossier " + dossier.id + " does not belong to question " + q.id);
  AgentRequest req;
  req.backend_id = backend;
  req.mode = AgentMode::completion;
  req.prompt_template_id = template_id;
  req.fake_now = dossier.fake_now;  // the anti-leak "today" rides with the dossier
  req.artifacts = {{"Forecasting question title", q.title},
                   {"Background", q.background},
                   {"Resolution criteria", q.resolution_criteria},
                   {"Additional information", "(none)"},
                   {"Research summary", research_text}};
  if (!subforecast_text.empty())
    req.artifacts.emplace_back("subforecasts", subforecast_text);

  AgentResponse resp = gateway_.execute(req);

  ForecastRecord r;
  r.question_id = q.id;
  r.forecaster_backend = backend;
  r.dossier_ref = dossier.id;
  r.probability = parse_probability(resp.fields.at("final_answer_forecast"));
  r.strategy = strategy;
  r.made_at = now_;
  r.fake_now = dossier.fake_now;
  return r;
}

ForecastRecord ForecastHarness::forecast(const Question& q,
                                         const ResearchDossier& dossier,
                                         const std::string& backend) {
  return forecast_with_template(q, dossier, backend, "forecast_probability",
                                dossier.dossier_text, "",
                                ForecastStrategy::direct);
}

DecomposeResult ForecastHarness::decompose(const Question& q,
                                           const std::string& backend) {
  AgentRequest req;
  req.backend_id = backend;
  req.mode = AgentMode::research_agent;
  req.budget = research_budget_;
  req.prompt_template_id = "subq_decompose";
  req.fake_now = now_;
  req.artifacts = {{"question", q.title + "\n\n" + q.background + "\n\n" +
                                    q.resolution_criteria}};
  AgentResponse resp = gateway_.execute(req);
  return parse_subquestion_list(q, resp.text, now_);
}

std::string ForecastHarness::compose_dossier(const ResearchDossier& parent,
                                             const SubquestionBundle& bundle) {
  std::string out = parent.dossier_text;
  for (std::size_t i = 0; i < bundle.subquestions.size(); ++i) {
    out += "\n\n## Subquestion " + std::to_string(i + 1) + ": " +
           bundle.subquestions[i].title + "\n";
    if (i < bundle.subdossiers.size())
      out += bundle.subdossiers[i].dossier_text + "\n";
  }
  return out;
}

ForecastRecord ForecastHarness::forecast_with_subquestions(
    const Question& q, const ResearchDossier& dossier,
    const SubquestionBundle& bundle, const std::string& backend) {
  if (bundle.subquestions.empty()) {
    ForecastRecord r = forecast(q, dossier, backend);
    r.flags.push_back("subq_fallback_direct");
    return r;
  }
  if (!bundle.complete())
    throw Error(ErrorCode::IncompleteBundle,
                "bundle for " + q.id + " is missing research or subforecasts");

  std::string subforecast_text;
  for (std::size_t i = 0; i < bundle.subquestions.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%",
                  bundle.subforecasts[i].probability * 100.0);
    subforecast_text += std::to_string(i + 1) + ". " +
                        bundle.subquestions[i].title + "\n   forecast: " + buf +
                        "\n";
  }
  return forecast_with_template(q, dossier, backend, "subq_forecast",
                                compose_dossier(dossier, bundle),
                                subforecast_text, ForecastStrategy::subquestions);
}

}  // namespace ffoundry
