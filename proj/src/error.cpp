#include "cfcscan/error.hpp"

namespace cfcscan {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotPe: return "NotPe";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::UnsupportedMachine: return "UnsupportedMachine";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidOpcode: return "InvalidOpcode";
    case ErrorCode::TruncatedInstruction: return "TruncatedInstruction";
    case ErrorCode::NoCfcFound: return "NoCfcFound";
    case ErrorCode::MismatchedN: return "MismatchedN";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::UntrainedModel: return "UntrainedModel";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::HashMismatch: return "HashMismatch";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::UnparsableLine: return "UnparsableLine";
    case ErrorCode::EmptyImport: return "EmptyImport";
    case ErrorCode::DuplicateSample: return "DuplicateSample";
    case ErrorCode::MixedLabels: return "MixedLabels";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
  }
  return "Unknown";
}

}  // namespace cfcscan
