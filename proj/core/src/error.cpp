#include "ipakit/error.hpp"

namespace ipakit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidUtf8: return "InvalidUtf8";
    case ErrorCode::kUnknownSymbol: return "UnknownSymbol";
    case ErrorCode::kDanglingDiacritic: return "DanglingDiacritic";
    case ErrorCode::kBlankInText: return "BlankInText";
    case ErrorCode::kOutOfVocabulary: return "OutOfVocabulary";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kDuplicatePhone: return "DuplicatePhone";
    case ErrorCode::kUnknownFeatureValue: return "UnknownFeatureValue";
    case ErrorCode::kPhoneNotInTable: return "PhoneNotInTable";
    case ErrorCode::kDiacriticNotInTable: return "DiacriticNotInTable";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInfeasibleLength: return "InfeasibleLength";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kTotalTooShort: return "TotalTooShort";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ipakit
