#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "packedadt/layout.hpp"

namespace packedadt {

enum class PassKind { Fold, Map };
// Combine: post-order, clause sees scalars and child results.
// Accumulate: pre-order, clause threads one accumulator through the walk.
enum class FoldStyle { Combine, Accumulate };
enum class CursorMode { Immutable, Mutable };

const char* mode_name(CursorMode m);

// Scalars are indexed by field position (Int fields come first); child
// results by position among the non-Int fields. Dead entries read as 0.
using Ints = std::span<const int64_t>;

struct Clause {
  std::string ctor;
  std::vector<bool> used;  // one per field
  std::function<int64_t(Ints scalars, Ints kids)> combine;
  std::function<int64_t(int64_t acc, Ints scalars)> step;
  std::function<void(std::span<int64_t> scalars)> rewrite;  // null = copy
};

struct DatatypeClauses {
  std::string datatype;
  std::vector<Clause> clauses;
};

struct PassDef {
  std::string suite;
  std::string name;
  PassKind kind = PassKind::Fold;
  FoldStyle style = FoldStyle::Combine;
  std::string datatype;  // root datatype
  std::vector<DatatypeClauses> types;
  int64_t init = 0;  // accumulator seed

  const DatatypeClauses* find(std::string_view datatype) const;
  // Dead fields over all fields of all clauses.
  double dead_fraction() const;
};

struct TraverseOptions {
  uint64_t max_depth = uint64_t(1) << 20;
  bool instrument = true;
  uint32_t out_first_chunk = 64;  // map output regions
};

struct BufferCounters {
  std::string role;
  uint64_t bytes_read = 0;
  uint64_t bytes_written = 0;
};

struct TraversalReport {
  std::string pass;
  Layout layout = Layout::Flat;
  CursorMode mode = CursorMode::Mutable;
  uint64_t n = 0;  // tags consumed
  int64_t result = 0;
  std::optional<SerializedRoot> output;  // map passes
  std::vector<BufferCounters> buffers;
  uint64_t steps = 0;
  uint64_t bundle_copies = 0;
  uint64_t max_depth = 0;
  uint64_t wall_ns = 0;
  double dead_fraction = 0;
  // Input positions after the run; untracked buffers keep their start.
  CursorBundle end;
  std::vector<bool> tracked;

  std::string to_json() const;
};

TraversalReport run_fold(const AdtSchema& schema, const PassDef& pass, const SerializedRoot& root, CursorMode mode,
                         const TraverseOptions& opts = {});
TraversalReport run_map(const AdtSchema& schema, const PassDef& pass, const SerializedRoot& root,
                        RegionStore& out_store, CursorMode mode, const TraverseOptions& opts = {});

// Same passes evaluated directly over a Value.
int64_t reference_fold(const AdtSchema& schema, const PassDef& pass, const Value& v);
Value reference_map(const AdtSchema& schema, const PassDef& pass, const Value& v);

// ---- builtin suites ------------------------------------------------------

struct Suite {
  std::string name;
  std::string datatype;  // root datatype of the suite's passes
  std::string schema(Layout layout) const;
};

const std::vector<Suite>& builtin_suites();
const Suite& lookup_suite(std::string_view name);  // UnknownSuite
const std::vector<PassDef>& builtin_passes();
const PassDef& lookup_pass(std::string_view suite, std::string_view name);  // NotFound

// KDTree query constants used by the builtin passes.
inline constexpr int64_t kKdBoxLo = 0;
inline constexpr int64_t kKdBoxHi = int64_t(1) << 19;
inline constexpr int64_t kKdQuery = int64_t(1) << 19;

}  // namespace packedadt
