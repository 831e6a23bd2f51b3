#pragma once

#include <stdexcept>
#include <string>

namespace packedadt {

enum class ErrorCode {
  SyntaxError,
  DuplicateDatatype,
  UnknownDatatype,
  TooManyConstructors,
  FieldOrderViolation,
  UnsupportedFieldType,
  FactoredInFlat,
  InfiniteShape,
  InvalidChunkSize,
  NotAtFrontier,
  OutOfMemory,
  UseAfterFree,
  OutlinkCycle,
  WriteTwice,
  SchemaMismatch,
  CorruptTag,
  TruncatedBuffer,
  LayoutMismatch,
  FeatureDisabled,
  DanglingPatch,
  BadMagic,
  VersionMismatch,
  SchemaHashMismatch,
  TruncatedFile,
  StackDepthExceeded,
  NotFound,
  UnknownSuite,
  EmptyInput,
  InvalidArgument,
  UnboundName,
  Stuck,
  IllFormedStore,
};

const char* error_name(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg, int line = 0, int col = 0)
      : std::runtime_error(std::string(error_name(code)) + ": " + msg),
        code_(code), line_(line), col_(col) {}

  ErrorCode code() const { return code_; }
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  ErrorCode code_;
  int line_;
  int col_;
};

[[noreturn]] inline void fail(ErrorCode c, const std::string& msg) { throw Error(c, msg); }

}  // namespace packedadt
