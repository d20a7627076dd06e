#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfcscan {

enum class ErrorCode {
  // pe_loader
  NotPe,
  Truncated,
  UnsupportedMachine,
  // entropy / stats
  EmptyInput,
  InvalidArgument,
  // disasm
  InvalidOpcode,
  TruncatedInstruction,
  // features
  NoCfcFound,
  MismatchedN,
  // stats
  LengthMismatch,
  DegenerateInput,
  // bayes
  EmptyClass,
  UntrainedModel,
  // corpus_store
  IoError,
  FormatVersionMismatch,
  HashMismatch,
  Malformed,
  UnparsableLine,
  EmptyImport,
  DuplicateSample,
  MixedLabels,
  EmptyCorpus,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported with this exception; code() classifies them.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cfcscan
