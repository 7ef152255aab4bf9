#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace revbench {

/// Failure categories surfaced by the library. The CLI maps these onto exit
/// codes, so every category belongs to exactly one of input, transport or
/// internal.
enum class ErrorCode {
  // corpus
  MalformedItem,
  NonContiguousIndices,
  DuplicateIndex,
  InvalidEncoding,
  CascadeViolation,
  UnknownLabelString,
  DuplicateAnnotatorItem,
  SchemaError,
  IoError,
  ItemCapExceeded,
  // rubric / stats
  SameAnnotator,
  EmptyInput,
  DegenerateMarginals,
  SingleCategoryVocabulary,
  ZeroVariance,
  AllZeroDiffs,
  EmptyClusters,
  EmptyGroup,
  // similarity
  EmptyPositiveClass,
  EmptyNegativeClass,
  UninformativeJudge,
  EmptySideA,
  MissingVerdict,
  ConflictingVerdict,
  // bench
  MissingDualAnnotation,
  EmptyRubric,
  EmptyGenerated,
  PaperSetMismatch,
  // panelsim
  BadSpec,
  MissingMetaLabels,
  IncompletePaper,
  // judge
  TransportFailure,
  UnparseableResponse,
  ContextOverflow,
  InconsistentPrediction,
  // anything that indicates a bug rather than bad input
  InvariantViolation,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace revbench
