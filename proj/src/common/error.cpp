#include "dikw/common/error.hpp"

namespace dikw {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidTopic: return "InvalidTopic";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::TypeCoercionFailure: return "TypeCoercionFailure";
    case ErrorCode::DuplicateHeaderName: return "DuplicateHeaderName";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::UnsupportedKind: return "UnsupportedKind";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::EmptySlice: return "EmptySlice";
    case ErrorCode::DegenerateGroup: return "DegenerateGroup";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::UnresolvableDescriptor: return "UnresolvableDescriptor";
    case ErrorCode::EvidenceResolutionFailure: return "EvidenceResolutionFailure";
    case ErrorCode::InsufficientClaims: return "InsufficientClaims";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::CassetteMiss: return "CassetteMiss";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

nlohmann::json Error::to_json() const {
  return {{"code", std::string(to_string(code_))}, {"message", what()}, {"detail", detail_}};
}

}  // namespace dikw
