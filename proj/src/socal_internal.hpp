#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "packedadt/socal.hpp"

namespace packedadt::socal::detail {

struct Reject {
  std::string rule;
  std::string reason;
  std::string msg;
};

struct ArgTy {
  int dt = -1;
  int loc = -1;  // < 0: Int
  bool located() const { return loc >= 0; }
};

struct EntryInfo {
  Key key;
  const FieldType* field;
};

// Non-self-recursive fields of a datatype in buffer order.
std::vector<EntryInfo> entries_of(const AdtSchema& s, int dt);

using RegionLookup = std::function<int(const std::string&)>;

// Environment effects of the typing rules. With strict set, a failed premise
// throws Reject; otherwise the effect is applied as far as it can be, which is
// what the instrumented interpreter needs.
class Statics {
 public:
  Statics(const AdtSchema& s, StaticEnvs& env, bool strict) : s_(s), env_(env), strict_(strict) {}

  LocShape shape_from(const RegionTree& t, int dt, const RegionLookup& region, const char* rule);

  int start(const std::string& name, LocShape shape, int annot);
  int next(const std::string& name, int src, int annot);
  int after(const std::string& name, int dt, int src, int annot);
  int proj_tag(const std::string& name, int src, int annot);
  int proj_field(const std::string& name, const Key& k, int src, int annot);
  int intro(const std::string& name, int dt, int tag, const std::vector<std::pair<Key, int>>& fields, int annot);
  void ctor(int dt, int ctor, int dest, const std::vector<ArgTy>& args);
  void call_out(int out);
  // One location per field of the constructor; hidden locations get C and Σ
  // entries too.
  std::vector<int> case_bind(int dt, int ctor, int src, const std::vector<std::string>& names);

  std::vector<int> regions_of(int loc) const;
  bool focus_is(int loc, const std::vector<int>& regions) const;
  std::string unique(const std::string& name);
  int region(const std::string& name);

 private:
  const AdtSchema& s_;
  StaticEnvs& env_;
  bool strict_;
  std::map<std::string, int> uses_;

  void reject(const char* rule, const char* reason, const std::string& msg) const;
  void annot_check(const char* rule, const LocShape& sh, int annot) const;
  void set_focus(const std::vector<int>& regions, int loc);
  int add(const std::string& name, LocShape shape, Constraint c);
  int find_proj(int src, Constraint::Kind kind, const Key* key) const;
  void ctor_flat(int dt, int ci, int dest, const std::vector<ArgTy>& args);
  void ctor_factored(int dt, int ci, int dest, const std::vector<ArgTy>& args);
};

bool match_regions(const AdtSchema& s, const RegionTree& t, int dt, const LocShape& sh,
                   std::map<std::string, int>& bind);

CLoc to_cloc(const LocShape& sh);

}  // namespace packedadt::socal::detail
