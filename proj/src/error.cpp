#include "packedadt/error.hpp"

namespace packedadt {

const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DuplicateDatatype: return "DuplicateDatatype";
    case ErrorCode::UnknownDatatype: return "UnknownDatatype";
    case ErrorCode::TooManyConstructors: return "TooManyConstructors";
    case ErrorCode::FieldOrderViolation: return "FieldOrderViolation";
    case ErrorCode::UnsupportedFieldType: return "UnsupportedFieldType";
    case ErrorCode::FactoredInFlat: return "FactoredInFlat";
    case ErrorCode::InfiniteShape: return "InfiniteShape";
    case ErrorCode::InvalidChunkSize: return "InvalidChunkSize";
    case ErrorCode::NotAtFrontier: return "NotAtFrontier";
    case ErrorCode::OutOfMemory: return "OutOfMemory";
    case ErrorCode::UseAfterFree: return "UseAfterFree";
    case ErrorCode::OutlinkCycle: return "OutlinkCycle";
    case ErrorCode::WriteTwice: return "WriteTwice";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::CorruptTag: return "CorruptTag";
    case ErrorCode::TruncatedBuffer: return "TruncatedBuffer";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::FeatureDisabled: return "FeatureDisabled";
    case ErrorCode::DanglingPatch: return "DanglingPatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::SchemaHashMismatch: return "SchemaHashMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::StackDepthExceeded: return "StackDepthExceeded";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::UnknownSuite: return "UnknownSuite";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnboundName: return "UnboundName";
    case ErrorCode::Stuck: return "Stuck";
    case ErrorCode::IllFormedStore: return "IllFormedStore";
  }
  return "Unknown";
}

}  // namespace packedadt
