#include "ffoundry/qgen.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace ffoundry {

namespace {

constexpr int kMaxProtos = 7;

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// "1. text", "2) text", "- text", "* text"
bool item_start(const std::string& line, std::string& rest) {
  size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  size_t digits = i;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits])))
    ++digits;
  if (digits > i && digits < line.size() &&
      (line[digits] == '.' || line[digits] == ')') && digits + 1 < line.size() &&
      line[digits + 1] == ' ') {
    rest = trim(line.substr(digits + 2));
    return true;
  }
  if (i < line.size() && (line[i] == '-' || line[i] == '*') &&
      i + 1 < line.size() && line[i + 1] == ' ') {
    rest = trim(line.substr(i + 2));
    return true;
  }
  return false;
}

bool declines_to_answer(const std::string& answer) {
  const std::string low = lower(answer);
  return low.find("no suitable question") != std::string::npos ||
         low.find("no questions") != std::string::npos ||
         low.find("0 proto-questions") != std::string::npos;
}

}  // namespace

ProtoGenResult parse_proto_list(const std::string& seed_id,
                                const std::string& answer) {
  std::vector<std::string> items;
  {
    std::istringstream in(answer);
    std::string line, current;
    while (std::getline(in, line)) {
      std::string rest;
      if (item_start(line, rest)) {
        if (!current.empty()) items.push_back(current);
        current = rest;
      } else if (!current.empty() && !trim(line).empty()) {
        current += " " + trim(line);
      } else if (!current.empty()) {
        items.push_back(current);
        current.clear();
      }
    }
    if (!current.empty()) items.push_back(current);
  }

  if (items.empty()) {
    if (declines_to_answer(answer) || trim(answer).empty()) return {};
    throw Error(ErrorCode::MalformedList,
                "answer has no numbered or bulleted questions");
  }

  ProtoGenResult result;
  for (const auto& item : items) {
    size_t qmark = item.find('?');
    if (qmark == std::string::npos) {
      result.warnings.push_back("item without a question mark dropped: " +
                                item.substr(0, 60));
      continue;
    }
    std::string title = trim(item.substr(0, qmark + 1));
    std::string rationale = trim(item.substr(qmark + 1));
    // common separators between title and rationale
    while (!rationale.empty() &&
           (rationale[0] == '|' || rationale[0] == '-' || rationale[0] == ':'))
      rationale = trim(rationale.substr(1));
    const std::string low = lower(rationale);
    if (low.rfind("rationale:", 0) == 0) rationale = trim(rationale.substr(10));
    if (rationale.empty()) rationale = "(no rationale given)";

    if (static_cast<int>(result.protos.size()) >= kMaxProtos) {
      result.warnings.push_back("answer listed more than " +
                                std::to_string(kMaxProtos) +
                                " items; extras dropped in document order");
      break;
    }
    result.protos.push_back(ProtoQuestion::make(seed_id, title, rationale));
  }
  return result;
}

QuestionGenerator::QuestionGenerator(Gateway& gateway, std::string proto_backend,
                                     std::string refine_backend,
                                     ResolutionWindow window, int research_budget,
                                     UtcTime now)
    : gateway_(gateway),
      proto_backend_(std::move(proto_backend)),
      refine_backend_(std::move(refine_backend)),
      window_(window),
      research_budget_(research_budget),
      now_(now) {}

ProtoGenResult QuestionGenerator::generate_protos(const Seed& seed) {
  if (seed.content.empty())
    throw Error(ErrorCode::PreconditionViolation, "seed has no content");
  AgentRequest req;
  req.backend_id = proto_backend_;
  req.mode = AgentMode::research_agent;
  req.prompt_template_id = "seed_to_protoquestions";
  req.budget = research_budget_;
  req.fake_now = now_;
  req.artifacts = {{"seed", seed.content}};
  AgentResponse resp = gateway_.execute(req);
  return parse_proto_list(seed.id, resp.text);
}

Question QuestionGenerator::refine(const ProtoQuestion& proto) {
  AgentRequest req;
  req.backend_id = refine_backend_;
  req.mode = AgentMode::research_agent;
  req.prompt_template_id = "refine_question";
  req.budget = research_budget_;
  req.fake_now = now_;
  req.artifacts = {
      {"original question", proto.title + "\nrationale: " + proto.rationale}};

  AgentResponse resp;
  try {
    resp = gateway_.execute(req);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseFailure)
      throw Error(ErrorCode::RefinementRejected,
                  std::string("missing answer fields: ") + e.what());
    throw;
  }

  RefineFields f;
  f.title = resp.fields.at("question_title");
  f.background = resp.fields.at("background");
  f.resolution_criteria = resp.fields.at("resolution_criteria");
  f.window_start_raw = resp.fields.at("window_start");
  f.window_end_raw = resp.fields.at("window_end");

  auto start = UtcTime::parse(f.window_start_raw);
  auto end = UtcTime::parse(f.window_end_raw);
  if (!start || !end)
    throw Error(ErrorCode::RefinementRejected,
                "window dates not parseable: \"" + f.window_start_raw +
                    "\" / \"" + f.window_end_raw + "\"");
  // An early start is clipped to the run window; an end past the run window
  // is a rejection, not a silent rewrite of what the agent committed to.
  if (*start < window_.start) start = window_.start;
  if (*end > window_.end)
    throw Error(ErrorCode::RefinementRejected, "outside run window");

  Question q = Question::make(proto.id, f.title, f.background,
                              f.resolution_criteria, *start, *end, now_);
  auto report = validate_question(q, window_);
  if (!report.ok()) {
    std::string reasons;
    for (const auto& v : report.violations)
      reasons += (reasons.empty() ? "" : "; ") + v;
    throw Error(ErrorCode::RefinementRejected, reasons);
  }
  return q;
}

}  // namespace ffoundry
