#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "packedadt/schema.hpp"
#include "packedadt/value.hpp"

namespace packedadt::socal {

// ---- syntax --------------------------------------------------------------

struct Key {
  std::string ctor;
  int field = 0;
  auto operator<=>(const Key&) const = default;
};

// Regions of a location: one region, or a tag region plus one entry per
// (constructor, field) of a factored datatype.
struct RegionTree {
  std::string region;
  bool is_factored = false;
  std::string datatype;  // resolved by the checker for nested entries
  std::vector<std::pair<Key, RegionTree>> entries;
  bool factored() const { return is_factored; }
};

struct LocExpr {
  enum Kind { Start, Next, After, ProjTag, ProjField, IntroLocVec };
  Kind kind = Start;
  RegionTree regions;     // Start
  std::string loc;        // source; IntroLocVec: tag location
  std::string datatype;   // After, IntroLocVec
  Key key;                // ProjField
  std::vector<std::pair<Key, std::string>> fields;  // IntroLocVec
};

struct Expr;
using ExprP = std::shared_ptr<const Expr>;

struct Bind {
  std::string var;
  std::string loc;  // empty for Int fields
};

struct Branch {
  std::string ctor;
  std::vector<Bind> binds;
  ExprP body;
  int line = 0, col = 0;
};

struct Expr {
  enum Kind { Int, Var, Let, LetRegion, LetLoc, Ctor, App, Case, If, Prim };
  Kind kind = Int;
  int line = 0, col = 0;
  int64_t n = 0;
  // Var: variable. Let: bound variable. LetRegion: region. LetLoc: location.
  // Ctor: constructor. App: function. Case: scrutinee. Prim: operator.
  std::string name;
  std::string annot;  // LetLoc region annotation
  LocExpr le;
  std::vector<std::string> locs;  // Ctor: destination. App: location arguments.
  // Ctor/App: atoms. Prim: operands. If: cond, then, else. Let: bound, body.
  // LetRegion/LetLoc: body.
  std::vector<ExprP> args;
  std::vector<Branch> branches;
};

struct LocParam {
  std::string name;
  std::string datatype;
  RegionTree regions;
};

struct Param {
  std::string name;
  std::string datatype;  // empty: Int
  std::string loc;
};

struct FunDef {
  std::string name;
  std::vector<LocParam> locs;
  std::vector<Param> params;
  Param ret;  // name unused
  ExprP body;
  int line = 0, col = 0;
};

struct Program {
  AdtSchema schema;
  std::vector<FunDef> funs;
  ExprP main;
  const FunDef* find(std::string_view name) const;
};

Program parse_socal(std::string_view text);
std::string to_text(const Program& p);
std::string to_text(const Expr& e);
// First line of an expression, for traces.
std::string head_text(const Expr& e);

// Builders used by the generators.
ExprP mk_int(int64_t n);
ExprP mk_var(std::string x);
ExprP mk_let(std::string x, ExprP bound, ExprP body);
ExprP mk_letregion(std::string r, ExprP body);
ExprP mk_letloc(std::string l, LocExpr le, ExprP body);
ExprP mk_ctor(std::string k, std::string loc, std::vector<ExprP> atoms);
ExprP mk_app(std::string f, std::vector<std::string> locs, std::vector<ExprP> atoms);
ExprP mk_case(std::string x, std::vector<Branch> branches);
ExprP mk_if(ExprP c, ExprP t, ExprP e);
ExprP mk_prim(std::string op, ExprP a, ExprP b);

// ---- static environments -------------------------------------------------

// Shape of a location with concrete region ids.
struct LocShape {
  int region = -1;    // single region, or the tag region
  int datatype = -1;  // >= 0 when factored
  std::vector<std::pair<Key, LocShape>> entries;
  bool factored() const { return datatype >= 0; }
  bool operator==(const LocShape&) const = default;
};

void shape_regions(const LocShape& s, std::vector<int>& out);

struct Constraint {
  enum Kind { Start, Next, After, ProjTag, ProjField, IntroLocVec };
  Kind kind = Start;
  int src = -1;  // Next/After/ProjTag/ProjField source; IntroLocVec tag location
  int datatype = -1;
  Key key;
  std::vector<std::pair<Key, int>> fields;
};

// Γ is held by the checker; these are Σ, C, A, N plus the registry that
// gives every location instance a name and a shape.
struct StaticEnvs {
  std::vector<std::string> loc_names;
  std::vector<LocShape> loc_shapes;
  std::vector<std::string> region_names;
  std::map<int, int> sigma;  // location -> datatype, -1 for an Int cell
  std::map<int, Constraint> C;
  std::map<int, int> A;      // region -> location, -1 for empty
  std::set<int> N;

  int add_loc(const std::string& name, LocShape shape);
  int add_region(const std::string& name);
  std::string constraint_text(const AdtSchema& s, int loc) const;
  std::string loc_text(int loc) const { return loc_names.at(loc); }
};

struct TraceStep {
  std::string rule;
  std::string expr;
  std::vector<std::pair<std::string, std::string>> A;
  std::vector<std::string> N;
  std::string c_delta;
  std::string to_json() const;
};

TraceStep snapshot(const AdtSchema& s, const StaticEnvs& env, std::string rule, std::string expr, int delta_loc);

struct CheckResult {
  bool ok = false;
  std::string function;  // where the rejection happened; empty for main
  std::string rule;
  std::string reason;
  std::string message;
  int line = 0, col = 0;
  std::vector<TraceStep> trace;       // main only
  StaticEnvs main_envs;               // environments after main
};

CheckResult typecheck(const Program& p);

// ---- runtime -------------------------------------------------------------

struct Cell {
  enum Kind : uint8_t { Empty, Tag, Int };
  Kind kind = Empty;
  int64_t value = 0;
  uint8_t writes = 0;
};

struct CLoc {
  int region = -1;
  int64_t index = 0;
  int datatype = -1;  // >= 0 when factored
  std::vector<std::pair<Key, CLoc>> entries;
  bool factored() const { return datatype >= 0; }
  bool operator==(const CLoc&) const = default;
};

std::string cloc_text(const CLoc& c, const std::vector<std::string>& region_names);

struct RtState {
  std::vector<std::vector<Cell>> S;
  std::vector<std::string> region_names;
  std::map<int, CLoc> M;
  int64_t frontier(int region) const;  // one past the highest written cell
};

struct WellFormedReport {
  bool ok = true;
  std::string clause;
  std::string location;
  std::string detail;
};

WellFormedReport check_well_formed(const AdtSchema& schema, const StaticEnvs& envs, const RtState& state);

// End witness in cells. IllFormedStore when the store does not hold a value.
CLoc end_witness(const AdtSchema& schema, const RtState& state, int datatype, const CLoc& root);
Value read_value(const AdtSchema& schema, const RtState& state, int datatype, const CLoc& root);

struct RunOptions {
  bool check_wf = false;
  bool trace = false;
  uint64_t fuel = 1'000'000;
};

struct RunResult {
  bool located = false;
  int64_t n = 0;
  int datatype = -1;
  int loc = -1;
  std::optional<Value> value;  // decoded from the store when located
  RtState state;
  StaticEnvs envs;
  uint64_t steps = 0;
  uint64_t wf_checks = 0;
  std::vector<TraceStep> trace;
  WellFormedReport violation;  // first failed check, if any
};

// Throws Error(Stuck) naming the rule that could not fire.
RunResult interpret(const Program& p, const RunOptions& opts = {});

struct PureResult {
  bool located = false;
  int64_t n = 0;
  std::optional<Value> value;
};

// Plain call-by-value evaluation with locations and regions erased.
PureResult evaluate_erased(const Program& p, uint64_t fuel = 1'000'000);

// Bytes of each buffer of the value rooted at `root` under the cell to byte
// mapping (tag cell = 1 byte, int cell = 8 bytes), in buffer_shape order.
std::vector<std::vector<uint8_t>> store_buffers(const AdtSchema& schema, const RtState& state, int datatype,
                                                const CLoc& root);
// Byte offset of cell `index` in `region`.
uint64_t cell_to_byte(const RtState& state, int region, int64_t index);

// ---- generators ----------------------------------------------------------

// Program whose main writes v at the start of fresh regions and returns it.
Program constructor_program(const AdtSchema& schema, int datatype, const Value& v);

struct FuzzSummary {
  uint64_t programs = 0;
  uint64_t passed = 0;
  uint64_t rejected = 0;  // generated programs the checker refused
  uint64_t stuck = 0;
  uint64_t wf_violations = 0;
  uint64_t erasure_mismatches = 0;
  uint64_t steps = 0;
  uint64_t wf_checks = 0;
  std::vector<std::string> counterexamples;
  bool ok() const { return passed == programs; }
};

Program random_program(uint64_t seed);
FuzzSummary fuzz_type_safety(uint64_t seed, uint64_t count);
// Programs with an `after` moved ahead of the write it depends on; returns
// how many the checker rejected with UnwrittenDependency.
uint64_t fuzz_negative_control(uint64_t seed, uint64_t count);

}  // namespace packedadt::socal
