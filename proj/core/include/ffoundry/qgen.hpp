#pragma once

#include <string>
#include <vector>

#include "ffoundry/domain.hpp"
#include "ffoundry/gateway.hpp"

namespace ffoundry {

struct ProtoGenResult {
  std::vector<ProtoQuestion> protos;
  std::vector<std::string> warnings;
};

// Splits a free-form numbered/bulleted answer into proto items. Items
// without a question mark are dropped with a warning; more than seven keeps
// the first seven in document order. Zero items is legal when the answer
// declines; otherwise an unsplittable answer is a MalformedList error.
ProtoGenResult parse_proto_list(const std::string& seed_id,
                                const std::string& answer);

struct RefineFields {
  std::string title;
  std::string background;
  std::string resolution_criteria;
  std::string window_start_raw;
  std::string window_end_raw;
};

class QuestionGenerator {
 public:
  QuestionGenerator(Gateway& gateway, std::string proto_backend,
                    std::string refine_backend, ResolutionWindow window,
                    int research_budget, UtcTime now);

  ProtoGenResult generate_protos(const Seed& seed);

  // Throws Error(RefinementRejected) with the validation reasons when the
  // refined answer cannot become a valid Question.
  Question refine(const ProtoQuestion& proto);

 private:
  Gateway& gateway_;
  std::string proto_backend_;
  std::string refine_backend_;
  ResolutionWindow window_;
  int research_budget_;
  UtcTime now_;
};

}  // namespace ffoundry
