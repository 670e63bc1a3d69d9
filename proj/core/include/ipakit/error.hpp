#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ipakit {

enum class ErrorCode {
  kInvalidUtf8,
  kUnknownSymbol,
  kDanglingDiacritic,
  kBlankInText,
  kOutOfVocabulary,
  kEmptyCorpus,
  kMalformedRow,
  kDuplicatePhone,
  kUnknownFeatureValue,
  kPhoneNotInTable,
  kDiacriticNotInTable,
  kEmptyInput,
  kInfeasibleLength,
  kShapeMismatch,
  kDivergence,
  kTotalTooShort,
  kInvalidArgument,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the toolkit. `position()` carries the index the
/// error refers to (code point, token, line, step or model index, depending
/// on the code) when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        position_(position) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> position_;
};

}  // namespace ipakit
