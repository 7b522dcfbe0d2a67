#pragma once

#include <stdexcept>
#include <string>

namespace ffoundry {

enum class ErrorCode {
  // gateway
  BackendUnavailable,
  ParseFailure,
  BudgetExhausted,
  OutOfRange,
  NotNumeric,
  UnknownLabel,
  // ingest
  UpstreamUnavailable,
  EmptyHarvest,
  IoFailure,
  // generation
  MalformedList,
  RefinementRejected,
  // verify
  MissingVerdict,
  // forecast
  IncompleteBundle,
  // domain
  IllegalTransition,
  PreconditionViolation,
  // metrics
  MisalignedInputs,
  EmptyIntersection,
  DomainError,
  // pipeline
  MissingUpstream,
  ConfigInvalid,
  IncompleteRun,
};

const char* error_code_name(ErrorCode code);

// Single exception type for expected failures; the code drives handling
// (park vs reject vs retry), the message is for operators.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ffoundry
