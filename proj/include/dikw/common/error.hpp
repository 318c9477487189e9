#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace dikw {

enum class ErrorCode {
  InvalidTopic,
  MalformedInput,
  MissingColumn,
  TypeCoercionFailure,
  DuplicateHeaderName,
  DuplicateName,
  EmptyText,
  UnsupportedKind,
  EmptyTable,
  EmptySlice,
  DegenerateGroup,
  DomainError,
  UnresolvableDescriptor,
  EvidenceResolutionFailure,
  InsufficientClaims,
  UnknownTag,
  CassetteMiss,
  TransportError,
  SchemaViolation,
  InvalidState,
  NotFound,
  Io,
};

std::string_view to_string(ErrorCode code);

// Engine-wide exception. `detail` carries structured context such as a
// row/column location or the failing topic id.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nlohmann::json::object())
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace dikw
