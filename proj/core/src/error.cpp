#include "ffoundry/error.hpp"

namespace ffoundry {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NotNumeric: return "NotNumeric";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UpstreamUnavailable: return "UpstreamUnavailable";
    case ErrorCode::EmptyHarvest: return "EmptyHarvest";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MalformedList: return "MalformedList";
    case ErrorCode::RefinementRejected: return "RefinementRejected";
    case ErrorCode::MissingVerdict: return "MissingVerdict";
    case ErrorCode::IncompleteBundle: return "IncompleteBundle";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::MisalignedInputs: return "MisalignedInputs";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::MissingUpstream: return "MissingUpstream";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IncompleteRun: return "IncompleteRun";
  }
  return "UnknownError";
}

}  // namespace ffoundry
