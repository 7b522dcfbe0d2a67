#pragma once

#include <functional>
#include <memory>
#include <string>

#include "ffoundry/gateway.hpp"

namespace ffoundry {

// Executes the research agent's declared tools: a web-search tool and a
// URL question-answering tool. Live implementations call configured HTTP
// endpoints; tests plug in fakes.
class ToolExecutor {
 public:
  virtual ~ToolExecutor() = default;
  virtual std::string web_search(const std::string& query) = 0;
  virtual std::string ask_url(const std::string& url, const std::string& question) = 0;
};

// OpenAI-style chat-completions transport. Completion mode is a single POST;
// research mode advertises the two tools and loops on tool calls up to the
// request budget, then demands a final answer. API keys come from the env
// var named in the backend config; they are never written to disk.
class HttpBackend : public Backend {
 public:
  HttpBackend();
  explicit HttpBackend(std::shared_ptr<ToolExecutor> tools);

  Reply run(const Call& call, const BackendConfig& cfg) override;
  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts,
                                        const BackendConfig& cfg) override;

 private:
  nlohmann::json post_json(const BackendConfig& cfg, const std::string& url,
                           const nlohmann::json& body);

  std::shared_ptr<ToolExecutor> tools_;
};

// web_search via a configurable GET endpoint (query appended); ask_url
// fetches the page and returns readable text. Both fail soft with an error
// string the agent can read.
class LiveToolExecutor : public ToolExecutor {
 public:
  explicit LiveToolExecutor(std::string search_endpoint)
      : search_endpoint_(std::move(search_endpoint)) {}

  std::string web_search(const std::string& query) override;
  std::string ask_url(const std::string& url, const std::string& question) override;

 private:
  std::string search_endpoint_;
};

// Shared plumbing for ingest and tools.
struct HttpResponse {
  int status = 0;
  std::string body;
};
HttpResponse http_get(const std::string& url, int timeout_seconds = 30);
HttpResponse http_post(const std::string& url, const std::string& body,
                       const std::string& content_type,
                       const std::string& bearer_token, int timeout_seconds = 120);

}  // namespace ffoundry
