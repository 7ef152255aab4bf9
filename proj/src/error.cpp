#include "revbench/error.hpp"

namespace revbench {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedItem: return "MalformedItem";
    case ErrorCode::NonContiguousIndices: return "NonContiguousIndices";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::InvalidEncoding: return "InvalidEncoding";
    case ErrorCode::CascadeViolation: return "CascadeViolation";
    case ErrorCode::UnknownLabelString: return "UnknownLabelString";
    case ErrorCode::DuplicateAnnotatorItem: return "DuplicateAnnotatorItem";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ItemCapExceeded: return "ItemCapExceeded";
    case ErrorCode::SameAnnotator: return "SameAnnotator";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateMarginals: return "DegenerateMarginals";
    case ErrorCode::SingleCategoryVocabulary: return "SingleCategoryVocabulary";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::AllZeroDiffs: return "AllZeroDiffs";
    case ErrorCode::EmptyClusters: return "EmptyClusters";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::EmptyPositiveClass: return "EmptyPositiveClass";
    case ErrorCode::EmptyNegativeClass: return "EmptyNegativeClass";
    case ErrorCode::UninformativeJudge: return "UninformativeJudge";
    case ErrorCode::EmptySideA: return "EmptySideA";
    case ErrorCode::MissingVerdict: return "MissingVerdict";
    case ErrorCode::ConflictingVerdict: return "ConflictingVerdict";
    case ErrorCode::MissingDualAnnotation: return "MissingDualAnnotation";
    case ErrorCode::EmptyRubric: return "EmptyRubric";
    case ErrorCode::EmptyGenerated: return "EmptyGenerated";
    case ErrorCode::PaperSetMismatch: return "PaperSetMismatch";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::MissingMetaLabels: return "MissingMetaLabels";
    case ErrorCode::IncompletePaper: return "IncompletePaper";
    case ErrorCode::TransportFailure: return "TransportFailure";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::InconsistentPrediction: return "InconsistentPrediction";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace revbench
