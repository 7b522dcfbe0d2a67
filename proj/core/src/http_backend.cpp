#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "ffoundry/http_backend.hpp"

#include <cstdlib>

#include "ffoundry/ingest.hpp"

namespace ffoundry {

namespace {

struct ParsedUrl {
  std::string scheme_host;  // e.g. "https://api.example.com:443"
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  size_t scheme = url.find("://");
  if (scheme == std::string::npos)
    throw Error(ErrorCode::ConfigInvalid, "bad URL: " + url);
  size_t path_start = url.find('/', scheme + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string bearer_from_env(const BackendConfig& cfg) {
  if (cfg.auth_env.empty()) return "";
  const char* v = std::getenv(cfg.auth_env.c_str());
  if (!v || !*v)
    throw Error(ErrorCode::BackendUnavailable,
                "backend " + cfg.backend_id + ": env var " + cfg.auth_env +
                    " is not set");
  return v;
}

nlohmann::json tool_definitions() {
  return nlohmann::json::parse(R"([
    {"type":"function","function":{"name":"web_search",
      "description":"Search the web and return result titles, URLs and snippets.",
      "parameters":{"type":"object","properties":{"query":{"type":"string"}},
                    "required":["query"]}}},
    {"type":"function","function":{"name":"ask_url",
      "description":"Fetch the document at a URL and answer a question about it.",
      "parameters":{"type":"object","properties":{"url":{"type":"string"},
                    "question":{"type":"string"}},"required":["url","question"]}}}
  ])");
}

}  // namespace

HttpResponse http_get(const std::string& url, int timeout_seconds) {
  auto parts = split_url(url);
  httplib::Client client(parts.scheme_host);
  client.set_connection_timeout(timeout_seconds);
  client.set_read_timeout(timeout_seconds);
  client.set_follow_location(true);
  auto res = client.Get(parts.path);
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

HttpResponse http_post(const std::string& url, const std::string& body,
                       const std::string& content_type,
                       const std::string& bearer_token, int timeout_seconds) {
  auto parts = split_url(url);
  httplib::Client client(parts.scheme_host);
  client.set_connection_timeout(timeout_seconds);
  client.set_read_timeout(timeout_seconds);
  httplib::Headers headers;
  if (!bearer_token.empty())
    headers.emplace("Authorization", "Bearer " + bearer_token);
  auto res = client.Post(parts.path, headers, body, content_type);
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

HttpBackend::HttpBackend() = default;
HttpBackend::HttpBackend(std::shared_ptr<ToolExecutor> tools)
    : tools_(std::move(tools)) {}

nlohmann::json HttpBackend::post_json(const BackendConfig& cfg,
                                      const std::string& url,
                                      const nlohmann::json& body) {
  const auto resp =
      http_post(url, body.dump(), "application/json", bearer_from_env(cfg));
  if (resp.status == 0)
    throw Error(ErrorCode::BackendUnavailable,
                cfg.backend_id + ": transport error: " + resp.body);
  if (resp.status == 429 || resp.status >= 500)
    throw Error(ErrorCode::BackendUnavailable,
                cfg.backend_id + ": HTTP " + std::to_string(resp.status));
  if (resp.status != 200)
    throw Error(ErrorCode::BackendUnavailable,
                cfg.backend_id + ": HTTP " + std::to_string(resp.status) + ": " +
                    resp.body.substr(0, 200));
  nlohmann::json j = nlohmann::json::parse(resp.body, nullptr, false);
  if (j.is_discarded())
    throw Error(ErrorCode::BackendUnavailable,
                cfg.backend_id + ": invalid JSON response");
  return j;
}

Backend::Reply HttpBackend::run(const Call& call, const BackendConfig& cfg) {
  nlohmann::json messages = nlohmann::json::array();
  if (!call.system.empty())
    messages.push_back({{"role", "system"}, {"content", call.system}});
  messages.push_back({{"role", "user"}, {"content", call.prompt}});

  Reply reply;
  const bool research = call.mode == AgentMode::research_agent;
  const int max_steps = research ? call.budget : 1;

  for (int step = 0; step <= max_steps; ++step) {
    nlohmann::json body;
    body["model"] = cfg.model.empty() ? cfg.backend_id : cfg.model;
    body["messages"] = messages;
    body["temperature"] = cfg.temperature;
    if (!cfg.reasoning.empty()) body["reasoning_effort"] = cfg.reasoning;
    if (research && step < max_steps) body["tools"] = tool_definitions();

    nlohmann::json j = post_json(cfg, cfg.endpoint, body);
    const auto& message = j.at("choices").at(0).at("message");

    if (research && message.contains("tool_calls") &&
        !message.at("tool_calls").empty()) {
      if (step == max_steps - 1) {
        // Next round runs without tools; if the model still has no final
        // answer it exhausted its budget.
        messages.push_back(
            {{"role", "user"},
             {"content", "Tool budget exhausted; give your final answer now."}});
        continue;
      }
      messages.push_back(message);
      for (const auto& tc : message.at("tool_calls")) {
        ++reply.steps;
        const std::string name = tc.at("function").at("name");
        nlohmann::json args = nlohmann::json::parse(
            tc.at("function").at("arguments").get<std::string>(), nullptr, false);
        std::string result;
        if (!tools_) {
          result = "tool execution is not configured";
        } else if (args.is_discarded()) {
          result = "malformed tool arguments";
        } else if (name == "web_search") {
          result = tools_->web_search(args.value("query", ""));
        } else if (name == "ask_url") {
          result = tools_->ask_url(args.value("url", ""), args.value("question", ""));
        } else {
          result = "unknown tool: " + name;
        }
        reply.transcript.push_back("tool " + name + ": " +
                                   tc.at("function").at("arguments").get<std::string>());
        messages.push_back({{"role", "tool"},
                            {"tool_call_id", tc.value("id", "call")},
                            {"content", result}});
      }
      continue;
    }

    const std::string content =
        message.value("content", nlohmann::json()).is_string()
            ? message.at("content").get<std::string>()
            : "";
    if (research && content.empty() && step >= max_steps)
      throw Error(ErrorCode::BudgetExhausted,
                  cfg.backend_id + ": no final answer within " +
                      std::to_string(call.budget) + " steps");
    reply.text = content;
    return reply;
  }
  throw Error(ErrorCode::BudgetExhausted,
              cfg.backend_id + ": no final answer within " +
                  std::to_string(call.budget) + " steps");
}

std::vector<std::vector<float>> HttpBackend::embed(
    const std::vector<std::string>& texts, const BackendConfig& cfg) {
  nlohmann::json body;
  body["model"] = cfg.model.empty() ? cfg.backend_id : cfg.model;
  body["input"] = texts;
  nlohmann::json j = post_json(cfg, cfg.endpoint, body);
  std::vector<std::vector<float>> out;
  for (const auto& item : j.at("data"))
    out.push_back(item.at("embedding").get<std::vector<float>>());
  if (out.size() != texts.size())
    throw Error(ErrorCode::BackendUnavailable,
                cfg.backend_id + ": embedding count mismatch");
  return out;
}

std::string LiveToolExecutor::web_search(const std::string& query) {
  if (search_endpoint_.empty())
    return "search endpoint not configured; set ingest.search_endpoint";
  std::string url = search_endpoint_;
  const std::string placeholder = "{query}";
  size_t pos = url.find(placeholder);
  std::string encoded;
  for (unsigned char c : query) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
      encoded += static_cast<char>(c);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02X", c);
      encoded += buf;
    }
  }
  if (pos != std::string::npos)
    url.replace(pos, placeholder.size(), encoded);
  else
    url += encoded;
  auto resp = http_get(url);
  if (resp.status != 200)
    return "search failed: HTTP " + std::to_string(resp.status);
  return resp.body.substr(0, 20000);
}

std::string LiveToolExecutor::ask_url(const std::string& url,
                                      const std::string& question) {
  auto resp = http_get(url);
  if (resp.status != 200)
    return "fetch failed: HTTP " + std::to_string(resp.status);
  return "Question: " + question + "\nDocument text:\n" +
         extract_main_text(resp.body).substr(0, 20000);
}

}  // namespace ffoundry
