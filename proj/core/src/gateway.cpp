#include "ffoundry/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <thread>

#include "ffoundry/ids.hpp"
#include "ffoundry/jsonl.hpp"

namespace ffoundry {

namespace {

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

bool is_edge_punct(unsigned char c) {
  return c == '"' || c == '\'' || c == '.' || c == ',' || c == ';' ||
         c == ':' || c == '*' || c == '`' || c == '(' || c == ')' ||
         c == '[' || c == ']' || c == '!';
}

std::string strip_edges(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && (std::isspace(static_cast<unsigned char>(s[b])) ||
                   is_edge_punct(static_cast<unsigned char>(s[b]))))
    ++b;
  while (e > b && (std::isspace(static_cast<unsigned char>(s[e - 1])) ||
                   is_edge_punct(static_cast<unsigned char>(s[e - 1]))))
    --e;
  return s.substr(b, e - b);
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

nlohmann::json BackendConfig::to_json() const {
  nlohmann::json j;
  j["backend_id"] = backend_id;
  j["kind"] = kind;
  j["endpoint"] = endpoint;
  j["auth_env"] = auth_env;
  j["model"] = model;
  j["reasoning"] = reasoning;
  j["temperature"] = temperature;
  j["max_retries"] = max_retries;
  j["retry_backoff_ms"] = retry_backoff_ms;
  j["requests_per_minute"] = requests_per_minute;
  j["max_in_flight"] = max_in_flight;
  return j;
}

BackendConfig BackendConfig::from_json(const nlohmann::json& j) {
  BackendConfig c;
  c.backend_id = j.value("backend_id", "");
  c.kind = j.value("kind", "mock");
  c.endpoint = j.value("endpoint", "");
  c.auth_env = j.value("auth_env", "");
  c.model = j.value("model", "");
  c.reasoning = j.value("reasoning", "");
  c.temperature = j.value("temperature", 1.0);
  c.max_retries = j.value("max_retries", 3);
  if (j.contains("retry_backoff_ms"))
    c.retry_backoff_ms = j.at("retry_backoff_ms").get<std::vector<int>>();
  c.requests_per_minute = j.value("requests_per_minute", 600);
  c.max_in_flight = j.value("max_in_flight", 4);
  if (c.requests_per_minute <= 0 || c.max_in_flight <= 0 || c.max_retries < 1)
    throw Error(ErrorCode::ConfigInvalid,
                "backend " + c.backend_id + ": caps must be positive");
  return c;
}

void TemplateStore::add(PromptTemplate t) { templates_[t.id] = std::move(t); }

TemplateStore TemplateStore::load_dir(const std::filesystem::path& dir) {
  TemplateStore store;
  const auto manifest_path = dir / "templates.json";
  std::ifstream in(manifest_path);
  if (!in)
    throw Error(ErrorCode::ConfigInvalid,
                "missing template manifest: " + manifest_path.string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  for (auto it = manifest.begin(); it != manifest.end(); ++it) {
    PromptTemplate t;
    t.id = it.key();
    const auto file = dir / it.value().at("file").get<std::string>();
    std::ifstream tf(file);
    if (!tf)
      throw Error(ErrorCode::ConfigInvalid, "missing template: " + file.string());
    t.text.assign(std::istreambuf_iterator<char>(tf),
                  std::istreambuf_iterator<char>());
    if (it.value().contains("fields"))
      t.answer_fields = it.value().at("fields").get<std::vector<std::string>>();
    store.add(std::move(t));
  }
  return store;
}

bool TemplateStore::contains(const std::string& id) const {
  return templates_.count(id) > 0;
}

const PromptTemplate& TemplateStore::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end())
    throw Error(ErrorCode::PreconditionViolation, "unknown template: " + id);
  return it->second;
}

std::vector<std::string> TemplateStore::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

BackendThrottle::BackendThrottle(int requests_per_minute, int max_in_flight)
    : max_in_flight_(max_in_flight), requests_per_minute_(requests_per_minute) {}

BackendThrottle::Slot::Slot(BackendThrottle& t) : throttle_(t) {
  throttle_.acquire();
}

BackendThrottle::Slot::~Slot() { throttle_.release(); }

void BackendThrottle::acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    const std::int64_t now = now_ms();
    while (!recent_ms_.empty() && now - recent_ms_.front() >= 60000)
      recent_ms_.pop_front();
    if (static_cast<int>(recent_ms_.size()) < requests_per_minute_) {
      recent_ms_.push_back(now);
      ++in_flight_;
      int prev = max_observed_.load();
      while (in_flight_ > prev &&
             !max_observed_.compare_exchange_weak(prev, in_flight_)) {
      }
      return;
    }
    const std::int64_t wait = 60000 - (now - recent_ms_.front());
    cv_.wait_for(lock, std::chrono::milliseconds(std::max<std::int64_t>(wait, 1)));
  }
}

void BackendThrottle::release() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    --in_flight_;
  }
  cv_.notify_all();
}

double parse_probability(const std::string& raw) {
  std::string s = trim(raw);
  if (!s.empty() && s.back() == '%') s = trim(s.substr(0, s.size() - 1));
  if (s.empty()) throw Error(ErrorCode::NotNumeric, "empty value");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw Error(ErrorCode::NotNumeric, "not a number: " + raw);
  if (v < 0.0 || v > 100.0)
    throw Error(ErrorCode::OutOfRange, "outside [0,100]: " + raw);
  return v / 100.0;
}

std::string parse_categorical(const std::string& raw,
                              const std::vector<std::string>& allowed) {
  if (allowed.empty())
    throw Error(ErrorCode::PreconditionViolation, "empty label set");
  const std::string needle = lower(strip_edges(raw));
  for (const auto& label : allowed) {
    if (needle == lower(strip_edges(label))) return label;
  }
  throw Error(ErrorCode::UnknownLabel, "no label matches: " + raw);
}

Gateway::Gateway(std::map<std::string, BackendConfig> backends,
                 TemplateStore templates, std::filesystem::path transcript_dir)
    : configs_(std::move(backends)),
      templates_(std::move(templates)),
      transcript_dir_(std::move(transcript_dir)) {
  std::filesystem::create_directories(transcript_dir_);
}

void Gateway::register_backend(const std::string& id,
                               std::shared_ptr<Backend> backend) {
  std::lock_guard<std::mutex> lock(mu_);
  backends_[id] = std::move(backend);
}

const BackendConfig& Gateway::backend_config(const std::string& id) const {
  auto it = configs_.find(id);
  if (it == configs_.end())
    throw Error(ErrorCode::ConfigInvalid, "backend not configured: " + id);
  return it->second;
}

BackendThrottle& Gateway::throttle(const std::string& id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = throttles_.find(id);
  if (it == throttles_.end()) {
    const auto& cfg = backend_config(id);
    it = throttles_
             .emplace(id, std::make_unique<BackendThrottle>(
                              cfg.requests_per_minute, cfg.max_in_flight))
             .first;
  }
  return *it->second;
}

std::string Gateway::render(
    const PromptTemplate& tmpl,
    const std::vector<std::pair<std::string, std::string>>& artifacts) {
  std::string out = tmpl.text;
  std::string appended;
  for (const auto& [label, content] : artifacts) {
    const std::string marker = "[" + label + "]";
    size_t pos = out.find(marker);
    if (pos != std::string::npos) {
      while (pos != std::string::npos) {
        out.replace(pos, marker.size(), content);
        pos = out.find(marker, pos + content.size());
      }
    } else {
      appended += "\n\n# " + label + "\n" + content;
    }
  }
  return out + appended;
}

std::string Gateway::system_prompt(const std::optional<UtcTime>& fake_now) {
  if (!fake_now) return "";
  return "Today's date is " + fake_now->to_date() + ".";
}

std::map<std::string, std::string> Gateway::extract_fields(
    const std::string& text, const std::vector<std::string>& declared) {
  // Last occurrence of each "label:" wins; a value runs until the next
  // declared label that appears after it, or end of text.
  struct Hit {
    std::string name;
    size_t label_pos;
    size_t value_pos;
  };
  std::vector<Hit> hits;
  for (const auto& name : declared) {
    const std::string marker = name + ":";
    size_t best = std::string::npos;
    size_t pos = text.find(marker);
    while (pos != std::string::npos) {
      // demand label at line start (or text start) to avoid prose matches
      if (pos == 0 || text[pos - 1] == '\n' || text[pos - 1] == ' ' ||
          text[pos - 1] == '*' || text[pos - 1] == '#') {
        best = pos;
      }
      pos = text.find(marker, pos + 1);
    }
    if (best != std::string::npos)
      hits.push_back({name, best, best + marker.size()});
  }
  std::sort(hits.begin(), hits.end(),
            [](const Hit& a, const Hit& b) { return a.label_pos < b.label_pos; });

  std::map<std::string, std::string> fields;
  for (size_t i = 0; i < hits.size(); ++i) {
    const size_t end = i + 1 < hits.size() ? hits[i + 1].label_pos : text.size();
    fields[hits[i].name] = trim(text.substr(hits[i].value_pos, end - hits[i].value_pos));
  }
  return fields;
}

std::string Gateway::persist_transcript(const std::string& rendered,
                                        const Backend::Reply& reply) {
  std::string content = "=== prompt ===\n" + rendered + "\n=== steps ===\n";
  for (const auto& line : reply.transcript) content += line + "\n";
  content += "=== answer ===\n" + reply.text + "\n";
  const std::string name = sha256_hex(content).substr(0, 40) + ".log";
  const auto path = transcript_dir_ / name;
  if (!std::filesystem::exists(path)) {
    // unique temp name: concurrent writers of the same content never collide
    static std::atomic<std::uint64_t> counter{0};
    const auto tmp = transcript_dir_ /
                     (name + ".tmp" + std::to_string(counter.fetch_add(1)));
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "transcript write failed");
    out.close();
    std::filesystem::rename(tmp, path);
  }
  // run-dir-relative ref: records stay byte-identical across run locations
  return (transcript_dir_.filename() / name).string();
}

AgentResponse Gateway::execute(const AgentRequest& req) {
  const PromptTemplate& tmpl = templates_.get(req.prompt_template_id);
  const BackendConfig& cfg = backend_config(req.backend_id);
  if (req.mode == AgentMode::research_agent && req.budget < 1)
    throw Error(ErrorCode::PreconditionViolation,
                "research mode requires budget >= 1");

  std::shared_ptr<Backend> backend;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = backends_.find(req.backend_id);
    if (it == backends_.end())
      throw Error(ErrorCode::ConfigInvalid,
                  "no transport registered for backend: " + req.backend_id);
    backend = it->second;
  }

  Backend::Call call;
  call.system = system_prompt(req.fake_now);
  call.prompt = render(tmpl, req.artifacts);
  call.mode = req.mode;
  call.budget = req.budget;
  call.template_id = tmpl.id;

  AgentUsage usage;

  auto attempt_call = [&](const Backend::Call& c) -> Backend::Reply {
    std::string last_error;
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
      if (attempt > 0) {
        const int idx = std::min<int>(attempt - 1,
                                      static_cast<int>(cfg.retry_backoff_ms.size()) - 1);
        const int delay = idx >= 0 && !cfg.retry_backoff_ms.empty()
                              ? cfg.retry_backoff_ms[idx]
                              : 0;
        if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      }
      ++usage.attempts;
      try {
        BackendThrottle::Slot slot(throttle(req.backend_id));
        return backend->run(c, cfg);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BackendUnavailable) throw;
        last_error = e.what();
      }
    }
    throw Error(ErrorCode::BackendUnavailable,
                "backend " + req.backend_id + " failed after " +
                    std::to_string(cfg.max_retries) + " attempts: " + last_error);
  };

  Backend::Reply reply = attempt_call(call);
  usage.steps = reply.steps;
  usage.prompt_chars = static_cast<std::int64_t>(call.prompt.size());
  std::string effective_prompt = call.prompt;

  auto fields = extract_fields(reply.text, tmpl.answer_fields);
  if (fields.size() < tmpl.answer_fields.size()) {
    // One reprompt, restating the required answer format literally.
    std::string reminder =
        "\n\nYour previous reply was missing required answer fields. "
        "Reply again, ending with each of the following fields on its own "
        "line, in this order:\n";
    for (const auto& f : tmpl.answer_fields) reminder += f + ": <value>\n";
    Backend::Call retry = call;
    retry.prompt = call.prompt + reminder;
    effective_prompt = retry.prompt;
    reply = attempt_call(retry);
    usage.steps += reply.steps;
    fields = extract_fields(reply.text, tmpl.answer_fields);
    if (fields.size() < tmpl.answer_fields.size()) {
      std::string missing;
      for (const auto& f : tmpl.answer_fields)
        if (!fields.count(f)) missing += (missing.empty() ? "" : ", ") + f;
      // Persist the failed transcript too; parked questions keep their logs.
      persist_transcript(retry.prompt, reply);
      throw Error(ErrorCode::ParseFailure,
                  "missing fields after reprompt: " + missing);
    }
  }

  usage.completion_chars = static_cast<std::int64_t>(reply.text.size());

  AgentResponse resp;
  resp.transcript_ref = persist_transcript(effective_prompt, reply);
  resp.text = reply.text;
  resp.fields = std::move(fields);
  resp.usage = usage;
  return resp;
}

std::vector<std::vector<float>> Gateway::embed_texts(
    const std::string& backend_id, const std::vector<std::string>& texts) {
  if (texts.empty())
    throw Error(ErrorCode::PreconditionViolation, "no texts to embed");
  const BackendConfig& cfg = backend_config(backend_id);
  std::shared_ptr<Backend> backend;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = backends_.find(backend_id);
    if (it == backends_.end())
      throw Error(ErrorCode::ConfigInvalid,
                  "no transport registered for backend: " + backend_id);
    backend = it->second;
  }
  BackendThrottle::Slot slot(throttle(backend_id));
  return backend->embed(texts, cfg);
}

}  // namespace ffoundry
