#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffoundry/error.hpp"
#include "ffoundry/time.hpp"

namespace ffoundry {

enum class AgentMode { completion, research_agent };

struct AgentRequest {
  std::string backend_id;
  AgentMode mode = AgentMode::completion;
  std::string prompt_template_id;
  // Ordered labeled text blocks. A block whose label matches a bracketed
  // placeholder in the template text replaces it; the rest are appended.
  std::vector<std::pair<std::string, std::string>> artifacts;
  std::optional<UtcTime> fake_now;  // injected as "today" in the system prompt
  int budget = 0;                   // max tool steps, research mode only
};

struct AgentUsage {
  std::int64_t prompt_chars = 0;
  std::int64_t completion_chars = 0;
  int steps = 0;
  int attempts = 0;
};

struct AgentResponse {
  std::string text;
  std::map<std::string, std::string> fields;  // declared answer fields
  std::string transcript_ref;                 // content-addressed log path
  AgentUsage usage;
};

struct BackendConfig {
  std::string backend_id;
  std::string kind = "mock";  // "mock" or "http"
  std::string endpoint;       // chat-completions URL for http backends
  std::string auth_env;       // env var holding the API key
  std::string model;          // upstream model identifier
  std::string reasoning;      // reasoning/thinking setting, passed through
  double temperature = 1.0;
  int max_retries = 3;
  std::vector<int> retry_backoff_ms = {1000, 4000, 16000};
  int requests_per_minute = 600;
  int max_in_flight = 4;

  nlohmann::json to_json() const;
  static BackendConfig from_json(const nlohmann::json& j);
};

struct PromptTemplate {
  std::string id;
  std::string text;
  std::vector<std::string> answer_fields;
};

// Prompt templates are plain text files; templates.json in the same
// directory maps template ids to files and their declared answer fields.
class TemplateStore {
 public:
  void add(PromptTemplate t);
  static TemplateStore load_dir(const std::filesystem::path& dir);

  bool contains(const std::string& id) const;
  const PromptTemplate& get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

// Transport abstraction: one chat-style call (or one research-agent episode).
// Implementations throw Error(BackendUnavailable) on transport failures,
// which the gateway retries, and Error(BudgetExhausted) when a research
// agent hits its step cap without a final answer.
class Backend {
 public:
  virtual ~Backend() = default;

  struct Call {
    std::string system;
    std::string prompt;
    AgentMode mode = AgentMode::completion;
    int budget = 0;
    std::string template_id;
  };
  struct Reply {
    std::string text;
    std::vector<std::string> transcript;  // tool/step log lines
    int steps = 0;
  };

  virtual Reply run(const Call& call, const BackendConfig& cfg) = 0;
  virtual std::vector<std::vector<float>> embed(
      const std::vector<std::string>& texts, const BackendConfig& cfg) = 0;
};

// Token-bucket limiter plus bounded in-flight slots for one backend.
class BackendThrottle {
 public:
  BackendThrottle(int requests_per_minute, int max_in_flight);

  class Slot {
   public:
    explicit Slot(BackendThrottle& t);
    ~Slot();
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    BackendThrottle& throttle_;
  };

  int max_observed_in_flight() const { return max_observed_.load(); }

 private:
  void acquire();
  void release();

  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  const int max_in_flight_;
  const int requests_per_minute_;
  std::deque<std::int64_t> recent_ms_;  // request start times for rpm cap
  std::atomic<int> max_observed_{0};
};

// probability in [0,1] from a "number between 0 and 100" answer; accepts
// decimals, strips "%" and whitespace.
double parse_probability(const std::string& raw);

// Case-insensitive, whitespace/punctuation-trimmed exact match; never
// guesses the nearest label.
std::string parse_categorical(const std::string& raw,
                              const std::vector<std::string>& allowed);

// Single entry point for all agent calls. Owns per-backend throttling,
// retries with exponential backoff, field extraction with a single
// format-reminder reprompt, and transcript persistence (always before a
// response becomes observable).
class Gateway {
 public:
  Gateway(std::map<std::string, BackendConfig> backends, TemplateStore templates,
          std::filesystem::path transcript_dir);

  void register_backend(const std::string& id, std::shared_ptr<Backend> backend);

  AgentResponse execute(const AgentRequest& req);

  std::vector<std::vector<float>> embed_texts(const std::string& backend_id,
                                              const std::vector<std::string>& texts);

  const TemplateStore& templates() const { return templates_; }
  const BackendConfig& backend_config(const std::string& id) const;
  BackendThrottle& throttle(const std::string& id);

  // Renders template text with artifacts; exposed for tests and for the
  // mock's fixture keys (which hash the rendered prompt).
  static std::string render(const PromptTemplate& tmpl,
                            const std::vector<std::pair<std::string, std::string>>& artifacts);
  static std::string system_prompt(const std::optional<UtcTime>& fake_now);

  // Extracts declared fields; each label's last occurrence wins and its value
  // runs until the next declared label or end of text.
  static std::map<std::string, std::string> extract_fields(
      const std::string& text, const std::vector<std::string>& declared);

 private:
  std::string persist_transcript(const std::string& rendered,
                                 const Backend::Reply& reply);

  std::map<std::string, BackendConfig> configs_;
  TemplateStore templates_;
  std::filesystem::path transcript_dir_;
  std::map<std::string, std::shared_ptr<Backend>> backends_;
  std::map<std::string, std::unique_ptr<BackendThrottle>> throttles_;
  std::mutex mu_;
};

}  // namespace ffoundry
