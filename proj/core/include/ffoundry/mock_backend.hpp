#pragma once

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ffoundry/gateway.hpp"

namespace ffoundry {

// Deterministic offline transport. Resolution order per call:
//   1. responses scripted by tests (template id + prompt substring),
//   2. recorded fixture files at <fixtures_dir>/<template_id>/<sha16>.txt,
//      keyed by the hash of the rendered prompt,
//   3. built-in per-template responders driven by [[key:value]] directives
//      embedded in the prompt's artifacts (fixture seeds are self-describing
//      test scripts).
// Identical prompts always produce identical replies.
class MockBackend : public Backend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::filesystem::path fixtures_dir)
      : fixtures_dir_(std::move(fixtures_dir)) {}

  Reply run(const Call& call, const BackendConfig& cfg) override;
  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts,
                                        const BackendConfig& cfg) override;

  // Test scripting.
  void add_response(const std::string& template_id, const std::string& match,
                    const std::string& response);
  // The next `times` matching calls fail with BackendUnavailable.
  void fail_transport(const std::string& template_id, const std::string& match,
                      int times);

  // Concurrency probe for throttle assertions.
  int max_observed_in_flight() const { return max_in_flight_seen_.load(); }
  std::int64_t calls_for_template(const std::string& template_id) const;
  std::int64_t total_calls() const { return total_calls_.load(); }

  // Directive lookup: first [[key:value]] in the text, if any.
  static std::optional<std::string> directive(const std::string& text,
                                              const std::string& key);

 private:
  std::string respond(const Call& call, const BackendConfig& cfg) const;

  struct Scripted {
    std::string template_id;
    std::string match;
    std::string response;
  };
  struct TransportFault {
    std::string template_id;
    std::string match;
    int remaining;
  };

  std::filesystem::path fixtures_dir_;
  mutable std::mutex mu_;
  std::vector<Scripted> scripted_;
  std::vector<TransportFault> faults_;
  mutable std::map<std::string, std::int64_t> calls_by_template_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_seen_{0};
  std::atomic<std::int64_t> total_calls_{0};
};

}  // namespace ffoundry
