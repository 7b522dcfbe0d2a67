#include "ffoundry/mock_backend.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ffoundry/ids.hpp"
#include "ffoundry/rng.hpp"

namespace ffoundry {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // SplitMix finalizer: raw FNV low bits degenerate when content repeats
  return Rng(h).next_u64();
}

std::string short_hash(const std::string& s, int n = 8) {
  return sha256_hex(s).substr(0, n);
}

// Appended artifact block: "\n\n# <label>\n<content>" up to the next block.
std::optional<std::string> artifact_block(const std::string& prompt,
                                          const std::string& label) {
  const std::string marker = "\n\n# " + label + "\n";
  size_t pos = prompt.find(marker);
  if (pos == std::string::npos) return std::nullopt;
  size_t start = pos + marker.size();
  size_t end = prompt.find("\n\n# ", start);
  if (end == std::string::npos) end = prompt.size();
  return prompt.substr(start, end - start);
}

std::vector<std::string> find_directive_lines(const std::string& text,
                                              const std::string& prefix) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    size_t pos = line.find(prefix);
    if (pos != std::string::npos) out.push_back(line.substr(pos + prefix.size()));
  }
  return out;
}

std::string respond_protos(const std::string& prompt) {
  if (MockBackend::directive(prompt, "protos") == "none")
    return "I researched the seed and found no suitable questions.";
  if (MockBackend::directive(prompt, "protos") == "malformed")
    return "Here are some thoughts about the article without any questions "
           "in the requested list form.";
  auto lines = find_directive_lines(prompt, "PROTO:");
  if (lines.empty()) return "No suitable questions.";
  std::string out = "Based on my research, these are my proto-questions:\n\n";
  int n = 0;
  for (const auto& l : lines) {
    std::string item = l;
    if (item.find('|') == std::string::npos)
      item += " | rationale: grounded in the seed article.";
    out += std::to_string(++n) + ". " + item + "\n";
  }
  return out;
}

std::string respond_refine(const std::string& prompt) {
  std::string title = "Untitled question?";
  if (auto block = artifact_block(prompt, "original question")) {
    std::istringstream in(*block);
    std::getline(in, title);
  }
  std::string criteria =
      "Resolves YES if the stated condition is confirmed by the named "
      "source on or before the window end; otherwise NO.";
  if (MockBackend::directive(prompt, "refine") == "missing-criteria") criteria = "";
  std::string window_end = "2025-12-31T23:59:59Z";
  if (MockBackend::directive(prompt, "window") == "2026")
    window_end = "2026-01-05T00:00:00Z";

  std::string out;
  out += "question_title: " + title + "\n";
  out += "background: Status quo as of the generation date for \"" + title +
         "\". Current figures and recent developments are summarised here.\n";
  out += "resolution_criteria: " + criteria + "\n";
  if (MockBackend::directive(prompt, "refine") == "no-window") return out;
  out += "window_start: 2025-10-15T00:00:00Z\n";
  out += "window_end: " + window_end + "\n";
  return out;
}

std::string respond_verifier(const std::string& prompt, const std::string& key,
                             const std::string& field,
                             const std::string& default_answer) {
  std::string answer = default_answer;
  if (auto d = MockBackend::directive(prompt, key)) answer = *d;
  std::string out = "rationale_" + field +
                    ": Considered the checklist for this question.\n";
  out += "final_answer_" + field + ": " + answer + "\n";
  return out;
}

std::string respond_research(const std::string& prompt) {
  const std::string h = short_hash(prompt);
  std::string out;
  out += "# Background\n";
  out += "Status quo summary compiled for this question (dossier " + h + ").\n";
  out += "# Recent numbers and events\n";
  out += "Baseline values recorded as of the research date.\n";
  out += "# Trends\n";
  out += "Factors supporting YES and NO were collected and weighed.\n";
  return out;
}

std::string respond_forecast(const std::string& prompt, const std::string& key) {
  std::string value;
  if (auto d = MockBackend::directive(prompt, key)) {
    value = *d;
  } else {
    value = std::to_string(5 + static_cast<int>(fnv1a(prompt) % 91));
  }
  return "rationale_forecast: weighed the dossier evidence against the "
         "status quo.\nfinal_answer_forecast: " + value + "\n";
}

std::string respond_subq(const std::string& prompt) {
  int n = 3;
  if (auto d = MockBackend::directive(prompt, "subq")) n = std::stoi(*d);
  const std::string h = short_hash(prompt, 6);
  std::string out = "Here are my subquestions:\n\n";
  for (int i = 1; i <= n; ++i) {
    std::string title = "Will tracked indicator " + h + "-" + std::to_string(i) +
                        " exceed its reference level by December 31, 2025?";
    if (i == 1 && MockBackend::directive(prompt, "subq-echo-parent")) {
      if (auto block = artifact_block(prompt, "question")) {
        std::istringstream in(*block);
        std::string parent_title;
        std::getline(in, parent_title);
        title = "Regarding \"" + parent_title + "\", will it hold?";
      }
    }
    out += std::to_string(i) + ". title: " + title + "\n";
    out += "   background: Self-contained context for indicator " + h + "-" +
           std::to_string(i) + ".\n";
    out += "   resolution_criteria: Resolves YES if the named indicator's "
           "published value exceeds the reference level.\n";
  }
  return out;
}

std::string extract_tag(const std::string& text, const std::string& tag,
                        size_t from = 0) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  size_t a = text.find(open, from);
  if (a == std::string::npos) return "";
  a += open.size();
  size_t b = text.find(close, a);
  if (b == std::string::npos) return "";
  std::string v = text.substr(a, b - a);
  // collapse whitespace for comparison
  std::string out;
  bool space = false;
  for (char c : v) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

std::string respond_dedup(const std::string& prompt) {
  size_t q2 = prompt.find("<question2>");
  std::string t1 = extract_tag(prompt, "question");
  std::string t2 = q2 == std::string::npos ? "" : extract_tag(prompt, "question", q2);
  const bool dup = !t1.empty() && t1 == t2;
  return std::string("The two questions were compared for substance.\n") +
         "final_answer_duplicate: " + (dup ? "yes" : "no") + "\n";
}

std::string respond_resolve(const std::string& prompt, const BackendConfig& cfg,
                            bool full_variant) {
  const bool is_tiebreak = cfg.backend_id.find("tiebreak") != std::string::npos;
  std::string verdict;
  if (auto d = MockBackend::directive(prompt, "resolve")) {
    if (*d == "disagree") {
      // identically-prompted copies agree; the other variant dissents
      verdict = full_variant ? "False" : "True";
    } else if (*d == "yes") {
      verdict = "True";
    } else if (*d == "no") {
      verdict = "False";
    } else {
      verdict = *d;
    }
  } else {
    std::string key = prompt;
    if (auto block = artifact_block(prompt, "question")) key = *block;
    verdict = (fnv1a(key) % 2 == 0) ? "True" : "False";
  }
  if (is_tiebreak) {
    if (auto tb = MockBackend::directive(prompt, "tiebreak")) {
      if (*tb == "annul")
        verdict = "ANNUL";
      else
        verdict = (*tb == "yes") ? "True" : "False";
    }
  }
  std::string out;
  out += "resolution: " + verdict + "\n";
  out += "resolution_derivation: Checked the named resolution source and the "
         "criteria literally; searches and links recorded in this log.\n";
  if (full_variant)
    out += "resolution_weaknesses: The source could have updated after the "
           "check; noted as the main assumption.\n";
  return out;
}

std::string respond_topic_label(const std::string& prompt) {
  return "final_answer_label: News topic " + short_hash(prompt, 4) + "\n";
}

std::string respond_similarity(const std::string& prompt) {
  if (auto d = MockBackend::directive(prompt, "sim")) return *d;
  return "1";
}

}  // namespace

std::optional<std::string> MockBackend::directive(const std::string& text,
                                                  const std::string& key) {
  const std::string open = "[[" + key + ":";
  size_t a = text.find(open);
  if (a == std::string::npos) {
    // flag form without value
    const std::string flag = "[[" + key + "]]";
    if (text.find(flag) != std::string::npos) return std::string();
    return std::nullopt;
  }
  a += open.size();
  size_t b = text.find("]]", a);
  if (b == std::string::npos) return std::nullopt;
  return text.substr(a, b - a);
}

void MockBackend::add_response(const std::string& template_id,
                               const std::string& match,
                               const std::string& response) {
  std::lock_guard<std::mutex> lock(mu_);
  scripted_.push_back({template_id, match, response});
}

void MockBackend::fail_transport(const std::string& template_id,
                                 const std::string& match, int times) {
  std::lock_guard<std::mutex> lock(mu_);
  faults_.push_back({template_id, match, times});
}

std::int64_t MockBackend::calls_for_template(const std::string& template_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = calls_by_template_.find(template_id);
  return it == calls_by_template_.end() ? 0 : it->second;
}

std::string MockBackend::respond(const Call& call, const BackendConfig& cfg) const {
  const std::string& id = call.template_id;
  if (id == "seed_to_protoquestions") return respond_protos(call.prompt);
  if (id == "refine_question") return respond_refine(call.prompt);
  if (id == "verify_quality")
    return respond_verifier(call.prompt, "quality", "quality", "great");
  if (id == "verify_ambiguity")
    return respond_verifier(call.prompt, "ambiguity", "ambiguity", "great");
  if (id == "verify_resolvability")
    return respond_verifier(call.prompt, "resolvability", "resolvability",
                            "very certainly yes");
  if (id == "verify_forecast")
    return respond_verifier(call.prompt, "vforecast", "forecast", "50");
  if (id == "forecast_research" || id == "research_background")
    return respond_research(call.prompt);
  if (id == "forecast_probability") return respond_forecast(call.prompt, "p");
  if (id == "subq_decompose") return respond_subq(call.prompt);
  if (id == "subq_forecast") return respond_forecast(call.prompt, "subqp");
  if (id == "dedup_check") return respond_dedup(call.prompt);
  if (id == "resolve_question") return respond_resolve(call.prompt, cfg, true);
  if (id == "resolve_question_brief") return respond_resolve(call.prompt, cfg, false);
  if (id == "topic_label") return respond_topic_label(call.prompt);
  if (id == "pair_similarity") return respond_similarity(call.prompt);
  return "final_answer: none";
}

Backend::Reply MockBackend::run(const Call& call, const BackendConfig& cfg) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++calls_by_template_[call.template_id];
    for (auto& f : faults_) {
      if (f.remaining > 0 && f.template_id == call.template_id &&
          call.prompt.find(f.match) != std::string::npos) {
        --f.remaining;
        throw Error(ErrorCode::BackendUnavailable, "scripted transport fault");
      }
    }
  }
  total_calls_.fetch_add(1);
  const int cur = in_flight_.fetch_add(1) + 1;
  int prev = max_in_flight_seen_.load();
  while (cur > prev && !max_in_flight_seen_.compare_exchange_weak(prev, cur)) {
  }

  Reply reply;
  try {
    if (call.mode == AgentMode::research_agent &&
        directive(call.prompt, "budget") == "exhaust") {
      in_flight_.fetch_sub(1);
      throw Error(ErrorCode::BudgetExhausted,
                  "research agent spent its step budget without a final answer");
    }

    // scripted responses first
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (const auto& s : scripted_) {
        if (s.template_id == call.template_id &&
            (s.match.empty() || call.prompt.find(s.match) != std::string::npos)) {
          reply.text = s.response;
          break;
        }
      }
    }
    // then recorded fixtures keyed by (template id, prompt hash)
    if (reply.text.empty() && !fixtures_dir_.empty()) {
      const auto path = fixtures_dir_ / call.template_id /
                        (sha256_hex(call.prompt).substr(0, 16) + ".txt");
      std::ifstream in(path);
      if (in)
        reply.text.assign(std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>());
    }
    // finally the built-in responders
    if (reply.text.empty()) reply.text = respond(call, cfg);

    if (call.mode == AgentMode::research_agent) {
      reply.steps = std::min(3, call.budget);
      if (auto d = directive(call.prompt, "steps"))
        reply.steps = std::min(std::stoi(*d), call.budget);
      for (int s = 0; s < reply.steps; ++s)
        reply.transcript.push_back("step " + std::to_string(s + 1) +
                                   ": web_search (mock)");
    }
  } catch (...) {
    in_flight_.fetch_sub(1);
    throw;
  }
  in_flight_.fetch_sub(1);
  return reply;
}

std::vector<std::vector<float>> MockBackend::embed(
    const std::vector<std::string>& texts, const BackendConfig& cfg) {
  (void)cfg;
  constexpr int kDim = 64;
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<float> v(kDim, 0.0f);
    if (auto d = directive(t, "emb")) {
      int k = std::stoi(*d);
      v[static_cast<size_t>(k) % kDim] = 1.0f;
    } else {
      Rng rng(fnv1a(t));
      double norm2 = 0.0;
      for (int i = 0; i < kDim; ++i) {
        v[i] = static_cast<float>(rng.next_gaussian());
        norm2 += static_cast<double>(v[i]) * v[i];
      }
      const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
      for (auto& x : v) x *= inv;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace ffoundry
