#include <algorithm>
#include <set>

#include "json.hpp"
#include "socal_internal.hpp"

namespace packedadt::socal {

using detail::ArgTy;
using detail::Reject;
using detail::Statics;

void shape_regions(const LocShape& s, std::vector<int>& out) {
  out.push_back(s.region);
  for (const auto& [k, sub] : s.entries) shape_regions(sub, out);
}

int StaticEnvs::add_loc(const std::string& name, LocShape shape) {
  loc_names.push_back(name);
  loc_shapes.push_back(std::move(shape));
  return int(loc_names.size()) - 1;
}

int StaticEnvs::add_region(const std::string& name) {
  region_names.push_back(name);
  return int(region_names.size()) - 1;
}

namespace {

std::string key_text(const Key& k) { return "(" + k.ctor + "," + std::to_string(k.field) + ")"; }

std::string shape_text(const StaticEnvs& env, const LocShape& sh) {
  std::string r = sh.region >= 0 ? env.region_names[sh.region] : "?";
  if (!sh.factored()) return r;
  std::string out = r + " [";
  for (size_t i = 0; i < sh.entries.size(); ++i) {
    if (i) out += ", ";
    out += key_text(sh.entries[i].first) + " " + shape_text(env, sh.entries[i].second);
  }
  return out + "]";
}

}  // namespace

std::string StaticEnvs::constraint_text(const AdtSchema& s, int loc) const {
  auto it = C.find(loc);
  if (it == C.end()) return "";
  const Constraint& c = it->second;
  std::string l = loc_names[loc] + " = ";
  auto dt = [&](int d) { return d >= 0 ? s[d].name : std::string("?"); };
  switch (c.kind) {
    case Constraint::Start:
      return l + "start " + shape_text(*this, loc_shapes[loc]);
    case Constraint::Next:
      return l + loc_names[c.src] + " + 1";
    case Constraint::After:
      return l + "after(" + dt(c.datatype) + " @ " + loc_names[c.src] + ")";
    case Constraint::ProjTag:
      return l + "projTagLoc " + loc_names[c.src];
    case Constraint::ProjField:
      return l + "projFieldLoc " + key_text(c.key) + " " + loc_names[c.src];
    case Constraint::IntroLocVec: {
      std::string out = l + "introLocVec(" + loc_names[c.src] + ", [";
      for (size_t i = 0; i < c.fields.size(); ++i) {
        if (i) out += ", ";
        out += key_text(c.fields[i].first) + " " + loc_names[c.fields[i].second];
      }
      return out + "])";
    }
  }
  return "";
}

TraceStep snapshot(const AdtSchema& s, const StaticEnvs& env, std::string rule, std::string expr, int delta_loc) {
  TraceStep t;
  t.rule = std::move(rule);
  t.expr = std::move(expr);
  for (const auto& [r, l] : env.A) t.A.push_back({env.region_names[r], l < 0 ? "empty" : env.loc_names[l]});
  for (int l : env.N) t.N.push_back(env.loc_names[l]);
  if (delta_loc >= 0) t.c_delta = env.constraint_text(s, delta_loc);
  return t;
}

std::string TraceStep::to_json() const {
  nlohmann::ordered_json j;
  j["rule"] = rule;
  j["e"] = expr;
  nlohmann::ordered_json a = nlohmann::ordered_json::object();
  for (const auto& [r, l] : A) a[r] = l;
  j["A"] = a;
  j["N"] = N;
  j["C_delta"] = c_delta;
  return j.dump();
}

namespace detail {

std::vector<EntryInfo> entries_of(const AdtSchema& s, int dt) {
  std::vector<EntryInfo> out;
  const auto& d = s[dt];
  for (const auto& c : d.ctors)
    for (size_t j = 0; j < c.fields.size(); ++j)
      if (c.fields[j].kind != FieldKind::SelfRec) out.push_back({{c.name, int(j)}, &c.fields[j]});
  return out;
}

CLoc to_cloc(const LocShape& sh) {
  CLoc c;
  c.region = sh.region;
  c.datatype = sh.datatype;
  for (const auto& [k, sub] : sh.entries) c.entries.push_back({k, to_cloc(sub)});
  return c;
}

bool match_regions(const AdtSchema& s, const RegionTree& t, int dt, const LocShape& sh,
                   std::map<std::string, int>& bind) {
  if (t.factored() != sh.factored()) return false;
  auto [it, fresh] = bind.emplace(t.region, sh.region);
  if (!fresh && it->second != sh.region) return false;
  if (!t.factored()) return true;
  if (dt != sh.datatype || t.entries.size() != sh.entries.size()) return false;
  for (size_t i = 0; i < t.entries.size(); ++i) {
    const Key& k = t.entries[i].first;
    if (k != sh.entries[i].first) return false;
    int c = s[dt].find_ctor(k.ctor);
    const FieldType& f = s[dt].ctors[c].fields[k.field];
    if (!match_regions(s, t.entries[i].second, f.kind == FieldKind::Int ? -1 : f.dt, sh.entries[i].second, bind))
      return false;
  }
  return true;
}

void Statics::reject(const char* rule, const char* reason, const std::string& msg) const {
  if (strict_) throw Reject{rule, reason, msg};
}

std::string Statics::unique(const std::string& name) {
  int n = uses_[name]++;
  return n == 0 ? name : name + "#" + std::to_string(n);
}

int Statics::region(const std::string& name) {
  int id = env_.add_region(unique(name));
  env_.A[id] = -1;
  return id;
}

std::vector<int> Statics::regions_of(int loc) const {
  std::vector<int> r;
  shape_regions(env_.loc_shapes[loc], r);
  return r;
}

bool Statics::focus_is(int loc, const std::vector<int>& regions) const {
  for (int r : regions) {
    auto it = env_.A.find(r);
    if (it == env_.A.end() || it->second != loc) return false;
  }
  return true;
}

void Statics::set_focus(const std::vector<int>& regions, int loc) {
  for (int r : regions) env_.A[r] = loc;
}

void Statics::annot_check(const char* rule, const LocShape& sh, int annot) const {
  if (annot < 0) return;
  if (sh.factored()) reject(rule, "ShapeMismatch", "a single location cannot follow a factored one");
  else if (sh.region != annot) reject(rule, "ShapeMismatch", "location is not in region " + env_.region_names[annot]);
}

int Statics::add(const std::string& name, LocShape shape, Constraint c) {
  int id = env_.add_loc(unique(name), std::move(shape));
  env_.C[id] = std::move(c);
  return id;
}

int Statics::find_proj(int src, Constraint::Kind kind, const Key* key) const {
  int found = -1;
  for (const auto& [l, c] : env_.C)
    if (c.kind == kind && c.src == src && (!key || c.key == *key)) {
      found = l;
      if (env_.N.count(l)) return l;
    }
  return found;
}

LocShape Statics::shape_from(const RegionTree& t, int dt, const RegionLookup& region, const char* rule) {
  LocShape sh;
  sh.region = region(t.region);
  bool want = dt >= 0 && s_[dt].layout == Layout::Factored;
  if (!t.factored()) {
    if (want) reject(rule, "ShapeMismatch", s_[dt].name + " is factored and needs a factored location");
    return sh;
  }
  if (!want) {
    reject(rule, "ShapeMismatch", "factored regions given for a datatype that is not factored");
    return sh;
  }
  sh.datatype = dt;
  const auto& d = s_[dt];
  std::map<Key, const RegionTree*> given;
  for (const auto& [k, sub] : t.entries) {
    int c = d.find_ctor(k.ctor);
    if (c < 0 || k.field < 0 || k.field >= int(d.ctors[c].fields.size())) {
      reject(rule, "BadProjectionKey", key_text(k) + " is not a field of " + d.name);
      continue;
    }
    if (d.ctors[c].fields[k.field].kind == FieldKind::SelfRec) {
      reject(rule, "SelfRecursiveFieldInVector", key_text(k) + " is self-recursive");
      continue;
    }
    if (!given.emplace(k, &sub).second) reject(rule, "ShapeMismatch", key_text(k) + " given twice");
  }
  for (const auto& e : entries_of(s_, dt)) {
    auto it = given.find(e.key);
    if (it == given.end()) {
      reject(rule, "ShapeMismatch", "missing region for " + key_text(e.key));
      continue;
    }
    int fdt = e.field->kind == FieldKind::Int ? -1 : e.field->dt;
    if (fdt < 0 && it->second->factored()) reject(rule, "ShapeMismatch", key_text(e.key) + " is an Int field");
    sh.entries.push_back({e.key, shape_from(*it->second, fdt, region, rule)});
  }
  std::vector<int> regs;
  shape_regions(sh, regs);
  std::set<int> uniq(regs.begin(), regs.end());
  if (uniq.size() != regs.size()) reject(rule, "ShapeMismatch", "a region appears twice in one location");
  return sh;
}

int Statics::start(const std::string& name, LocShape shape, int annot) {
  const char* R = "T-LetLoc-Start";
  std::vector<int> regs;
  shape_regions(shape, regs);
  for (int r : regs) {
    auto it = env_.A.find(r);
    if (it == env_.A.end()) reject(R, "WriteNotAtFocus", "region " + env_.region_names[r] + " is not allocatable here");
    else if (it->second >= 0) reject(R, "WriteNotAtFocus", "region " + env_.region_names[r] + " already has a start");
  }
  annot_check(R, shape, annot);
  Constraint c;
  c.kind = Constraint::Start;
  c.datatype = shape.datatype;
  int id = add(name, std::move(shape), c);
  set_focus(regs, id);
  env_.N.insert(id);
  return id;
}

int Statics::next(const std::string& name, int src, int annot) {
  const char* R = "T-LetLoc-Tag";
  const LocShape sh = env_.loc_shapes[src];
  if (sh.factored()) reject(R, "ShapeMismatch", env_.loc_names[src] + " is factored");
  if (!env_.N.count(src)) reject(R, "WriteToWrittenLocation", env_.loc_names[src] + " is not an unwritten location");
  if (!focus_is(src, {sh.region})) reject(R, "WriteNotAtFocus", env_.loc_names[src] + " is not the region focus");
  LocShape out;
  out.region = sh.region;
  annot_check(R, out, annot);
  Constraint c;
  c.kind = Constraint::Next;
  c.src = src;
  int id = add(name, out, c);
  env_.A[out.region] = id;
  env_.N.insert(id);
  return id;
}

int Statics::after(const std::string& name, int dt, int src, int annot) {
  const char* R = "T-LetLoc-After";
  LocShape sh = env_.loc_shapes[src];
  bool fac = s_[dt].layout == Layout::Factored;
  if (fac != sh.factored() || (fac && sh.datatype != dt))
    reject(R, "ShapeMismatch", env_.loc_names[src] + " does not have the shape of " + s_[dt].name);
  auto it = env_.sigma.find(src);
  if (it == env_.sigma.end()) reject(R, "UnwrittenDependency", env_.loc_names[src] + " has not been written");
  else if (it->second != dt) reject(R, "TypeMismatch", env_.loc_names[src] + " does not hold a " + s_[dt].name);
  auto regs = regions_of(src);
  if (!focus_is(src, regs)) reject(R, "WriteNotAtFocus", "the allocation focus has moved past " + env_.loc_names[src]);
  annot_check(R, sh, annot);
  Constraint c;
  c.kind = Constraint::After;
  c.src = src;
  c.datatype = dt;
  int id = add(name, sh, c);
  set_focus(regs, id);
  env_.N.insert(id);
  return id;
}

int Statics::proj_tag(const std::string& name, int src, int annot) {
  const char* R = "T-LetLoc-ProjTag";
  const LocShape sh = env_.loc_shapes[src];
  if (!sh.factored()) reject(R, "ShapeMismatch", env_.loc_names[src] + " is not factored");
  if (!env_.N.count(src)) reject(R, "WriteToWrittenLocation", env_.loc_names[src] + " is not an unwritten location");
  if (!focus_is(src, {sh.region})) reject(R, "WriteNotAtFocus", "tag region focus is not " + env_.loc_names[src]);
  LocShape out;
  out.region = sh.region;
  annot_check(R, out, annot);
  Constraint c;
  c.kind = Constraint::ProjTag;
  c.src = src;
  int id = add(name, out, c);
  env_.A[out.region] = id;
  env_.N.insert(id);
  return id;
}

int Statics::proj_field(const std::string& name, const Key& k, int src, int annot) {
  const char* R = "T-LetLoc-ProjField";
  const LocShape sh = env_.loc_shapes[src];
  LocShape comp;
  bool found = false;
  if (!sh.factored()) {
    reject(R, "ShapeMismatch", env_.loc_names[src] + " is not factored");
  } else {
    for (const auto& [key, sub] : sh.entries)
      if (key == k) {
        comp = sub;
        found = true;
      }
    if (!found) reject(R, "BadProjectionKey", key_text(k) + " is not a field entry of " + env_.loc_names[src]);
  }
  if (!env_.N.count(src)) reject(R, "WriteToWrittenLocation", env_.loc_names[src] + " is not an unwritten location");
  std::vector<int> regs;
  if (found) shape_regions(comp, regs);
  if (!focus_is(src, regs)) reject(R, "WriteNotAtFocus", "field region focus is not " + env_.loc_names[src]);
  annot_check(R, comp, annot);
  Constraint c;
  c.kind = Constraint::ProjField;
  c.src = src;
  c.key = k;
  int id = add(name, comp, c);
  set_focus(regs, id);
  env_.N.insert(id);
  return id;
}

int Statics::intro(const std::string& name, int dt, int tag, const std::vector<std::pair<Key, int>>& fields,
                   int annot) {
  const char* R = "T-LetLoc-IntroLocVec";
  LocShape sh;
  sh.region = env_.loc_shapes[tag].region;
  if (s_[dt].layout != Layout::Factored) reject(R, "ShapeMismatch", s_[dt].name + " is not factored");
  else sh.datatype = dt;
  if (env_.loc_shapes[tag].factored()) reject(R, "ShapeMismatch", "tag location " + env_.loc_names[tag] + " is factored");
  const auto& d = s_[dt];
  std::map<Key, int> given;
  for (const auto& [k, l] : fields) {
    int c = d.find_ctor(k.ctor);
    if (c < 0 || k.field < 0 || k.field >= int(d.ctors[c].fields.size())) {
      reject(R, "BadProjectionKey", key_text(k) + " is not a field of " + d.name);
      continue;
    }
    if (d.ctors[c].fields[k.field].kind == FieldKind::SelfRec) {
      reject(R, "SelfRecursiveFieldInVector", key_text(k) + " is self-recursive");
      continue;
    }
    if (!given.emplace(k, l).second) reject(R, "ShapeMismatch", key_text(k) + " given twice");
  }
  std::vector<std::pair<Key, int>> canon;
  if (sh.factored()) {
    for (const auto& e : entries_of(s_, dt)) {
      auto it = given.find(e.key);
      if (it == given.end()) {
        reject(R, "ShapeMismatch", "missing location for " + key_text(e.key));
        continue;
      }
      const LocShape cs = env_.loc_shapes[it->second];
      bool fac = e.field->kind == FieldKind::Packed && s_[e.field->dt].layout == Layout::Factored;
      if (fac != cs.factored() || (fac && cs.datatype != e.field->dt))
        reject(R, "ShapeMismatch", env_.loc_names[it->second] + " does not fit " + key_text(e.key));
      sh.entries.push_back({e.key, cs});
      canon.push_back({e.key, it->second});
    }
  }
  std::vector<int> regs;
  shape_regions(sh, regs);
  std::set<int> uniq(regs.begin(), regs.end());
  if (uniq.size() != regs.size()) reject(R, "ShapeMismatch", "a region appears twice in one location");
  if (!env_.N.count(tag)) reject(R, "WriteToWrittenLocation", env_.loc_names[tag] + " is not an unwritten location");
  if (!focus_is(tag, {sh.region})) reject(R, "WriteNotAtFocus", env_.loc_names[tag] + " is not the tag region focus");
  for (const auto& [k, l] : canon) {
    if (!env_.N.count(l)) reject(R, "WriteToWrittenLocation", env_.loc_names[l] + " is not an unwritten location");
    if (!focus_is(l, regions_of(l))) reject(R, "WriteNotAtFocus", env_.loc_names[l] + " is not its region focus");
  }
  annot_check(R, sh, annot);
  Constraint c;
  c.kind = Constraint::IntroLocVec;
  c.src = tag;
  c.datatype = dt;
  c.fields = canon;
  int id = add(name, sh, c);
  env_.N.erase(tag);
  for (const auto& [k, l] : canon) env_.N.erase(l);
  env_.N.insert(id);
  set_focus(regs, id);
  return id;
}

void Statics::ctor(int dt, int ci, int dest, const std::vector<ArgTy>& args) {
  if (s_[dt].layout == Layout::Factored) ctor_factored(dt, ci, dest, args);
  else ctor_flat(dt, ci, dest, args);
}

void Statics::ctor_flat(int dt, int ci, int dest, const std::vector<ArgTy>& args) {
  const char* R = "T-DataConstructor";
  const auto& K = s_[dt].ctors[ci];
  const LocShape sh = env_.loc_shapes[dest];
  if (sh.factored()) reject(R, "ShapeMismatch", env_.loc_names[dest] + " is factored but " + s_[dt].name + " is not");
  if (!env_.N.count(dest)) reject(R, "WriteToWrittenLocation", env_.loc_names[dest] + " is not an unwritten location");
  int s = K.scalar_count();
  std::vector<int> cells;
  bool shaped = args.size() == K.fields.size();
  if (!shaped) reject(R, "ArityMismatch", K.name + " takes " + std::to_string(K.fields.size()) + " arguments");
  if (shaped) {
    for (int i = 0; i < s; ++i)
      if (args[i].located()) reject(R, "TypeMismatch", "field " + std::to_string(i) + " of " + K.name + " is Int");
    std::vector<int> kids;
    for (size_t j = s; j < K.fields.size(); ++j) {
      if (!args[j].located() || args[j].dt != K.fields[j].dt) {
        reject(R, "TypeMismatch", "field " + std::to_string(j) + " of " + K.name + " is " + K.fields[j].datatype);
        kids.clear();
        break;
      }
      if (!env_.sigma.count(args[j].loc)) reject(R, "UnwrittenDependency", env_.loc_names[args[j].loc] + " is unwritten");
      kids.push_back(args[j].loc);
    }
    if (!kids.empty()) {
      int x = kids[0];
      bool chain = true;
      for (int step = 0; step <= s && chain; ++step) {
        auto it = env_.C.find(x);
        if (it == env_.C.end() || it->second.kind != Constraint::Next) {
          chain = false;
          break;
        }
        x = it->second.src;
        if (step < s) cells.push_back(x);
      }
      if (!chain || x != dest) {
        reject(R, "MissingConstraint",
               "first non-scalar field of " + K.name + " must sit " + std::to_string(s + 1) + " cells after the tag");
        cells.clear();
      }
      for (int c : cells)
        if (!env_.N.count(c)) reject(R, "WriteToWrittenLocation", env_.loc_names[c] + " is not an unwritten location");
      for (size_t j = 1; j < kids.size(); ++j) {
        auto it = env_.C.find(kids[j]);
        const FieldType& prev = K.fields[s + j - 1];
        if (it == env_.C.end() || it->second.kind != Constraint::After || it->second.src != kids[j - 1] ||
            it->second.datatype != prev.dt)
          reject(R, "MissingConstraint", env_.loc_names[kids[j]] + " must be after(" + prev.datatype + " @ " +
                                             env_.loc_names[kids[j - 1]] + ")");
      }
      if (!focus_is(kids.back(), {sh.region}))
        reject(R, "WriteNotAtFocus", "the focus must be at the last field " + env_.loc_names[kids.back()]);
    } else if (!focus_is(dest, {sh.region})) {
      reject(R, "WriteNotAtFocus", env_.loc_names[dest] + " is not the region focus");
    }
  }
  env_.N.erase(dest);
  for (int c : cells) env_.N.erase(c);
  env_.A[sh.region] = dest;
}

void Statics::ctor_factored(int dt, int ci, int dest, const std::vector<ArgTy>& args) {
  const char* R = "T-DataConstructor-FullyFactored";
  const auto& K = s_[dt].ctors[ci];
  const LocShape sh = env_.loc_shapes[dest];
  auto regs = regions_of(dest);
  if (!sh.factored() || sh.datatype != dt) {
    reject(R, "ShapeMismatch", env_.loc_names[dest] + " is not a factored " + s_[dt].name + " location");
    env_.N.erase(dest);
    return;
  }
  if (!env_.N.count(dest)) reject(R, "WriteToWrittenLocation", env_.loc_names[dest] + " is not an unwritten location");
  bool shaped = args.size() == K.fields.size();
  if (!shaped) reject(R, "ArityMismatch", K.name + " takes " + std::to_string(K.fields.size()) + " arguments");
  int m = K.scalar_count() + K.packed_count();
  int n = int(K.fields.size());

  int ld = find_proj(dest, Constraint::ProjTag, nullptr);
  if (ld < 0) reject(R, "MissingConstraint", "no projTagLoc of " + env_.loc_names[dest] + " in scope");
  else if (!env_.N.count(ld)) reject(R, "WriteToWrittenLocation", env_.loc_names[ld] + " is not an unwritten location");
  std::vector<int> fl(m, -1);
  std::vector<int> scalars;
  for (int j = 0; j < m; ++j) {
    Key k{K.name, j};
    fl[j] = find_proj(dest, Constraint::ProjField, &k);
    if (fl[j] < 0) {
      reject(R, "MissingConstraint", "no projFieldLoc " + key_text(k) + " of " + env_.loc_names[dest] + " in scope");
      continue;
    }
    if (K.fields[j].kind == FieldKind::Int) {
      scalars.push_back(fl[j]);
      if (!env_.N.count(fl[j])) reject(R, "WriteToWrittenLocation", env_.loc_names[fl[j]] + " is not an unwritten location");
      if (shaped && args[j].located()) reject(R, "TypeMismatch", "field " + std::to_string(j) + " of " + K.name + " is Int");
    } else if (shaped) {
      if (!args[j].located() || args[j].dt != K.fields[j].dt)
        reject(R, "TypeMismatch", "field " + std::to_string(j) + " of " + K.name + " is " + K.fields[j].datatype);
      else if (args[j].loc != fl[j] || !env_.sigma.count(fl[j]))
        reject(R, "UnwrittenDependency", "field " + std::to_string(j) + " of " + K.name + " must already be written at " +
                                             env_.loc_names[fl[j]]);
    }
  }
  if (shaped && m < n) {
    std::vector<int> kids;
    for (int j = m; j < n; ++j) {
      if (!args[j].located() || args[j].dt != dt) {
        reject(R, "TypeMismatch", "field " + std::to_string(j) + " of " + K.name + " is " + s_[dt].name);
        kids.clear();
        break;
      }
      if (!env_.sigma.count(args[j].loc)) reject(R, "UnwrittenDependency", env_.loc_names[args[j].loc] + " is unwritten");
      kids.push_back(args[j].loc);
    }
    if (!kids.empty()) {
      auto bad = [&](const std::string& why) { reject(R, "MissingConstraint", why); };
      auto it = env_.C.find(kids[0]);
      if (it == env_.C.end() || it->second.kind != Constraint::IntroLocVec) {
        bad("first recursive field " + env_.loc_names[kids[0]] + " must come from introLocVec");
      } else {
        const Constraint& iv = it->second;
        auto tc = env_.C.find(iv.src);
        if (tc == env_.C.end() || tc->second.kind != Constraint::Next || tc->second.src != ld)
          bad("tag of " + env_.loc_names[kids[0]] + " must be the projected tag + 1");
        for (const auto& [key, l] : iv.fields) {
          auto fc = env_.C.find(l);
          bool ok = fc != env_.C.end();
          if (ok && key.ctor == K.name) {
            int j = key.field;
            int want = K.fields[j].kind == FieldKind::Int ? Constraint::Next : Constraint::After;
            ok = fc->second.kind == want && fc->second.src == fl[j] && fl[j] >= 0;
          } else if (ok) {
            ok = fc->second.kind == Constraint::ProjField && fc->second.src == dest && fc->second.key == key;
          }
          if (!ok) bad(key_text(key) + " of " + env_.loc_names[kids[0]] + " is not the updated field location");
        }
      }
      for (size_t i = 1; i < kids.size(); ++i) {
        auto c = env_.C.find(kids[i]);
        if (c == env_.C.end() || c->second.kind != Constraint::After || c->second.src != kids[i - 1] ||
            c->second.datatype != dt)
          bad(env_.loc_names[kids[i]] + " must be after(" + s_[dt].name + " @ " + env_.loc_names[kids[i - 1]] + ")");
      }
      if (!focus_is(kids.back(), regs))
        reject(R, "WriteNotAtFocus", "the focus must be at the last field " + env_.loc_names[kids.back()]);
    }
  } else if (shaped) {
    bool ok = ld < 0 || focus_is(ld, {sh.region});
    for (const auto& [key, comp] : sh.entries) {
      std::vector<int> cr;
      shape_regions(comp, cr);
      int want = dest;
      if (key.ctor == K.name && key.field < m && fl[key.field] >= 0) want = fl[key.field];
      ok = ok && focus_is(want, cr);
    }
    if (!ok) reject(R, "WriteNotAtFocus", "allocation focus does not match the fields of " + K.name);
  }
  env_.N.erase(dest);
  if (ld >= 0) env_.N.erase(ld);
  for (int l : scalars) env_.N.erase(l);
  set_focus(regs, dest);
}

void Statics::call_out(int out) {
  const char* R = "T-App";
  auto regs = regions_of(out);
  if (!env_.N.count(out)) reject(R, "WriteToWrittenLocation", env_.loc_names[out] + " is not an unwritten location");
  if (!focus_is(out, regs)) reject(R, "WriteNotAtFocus", env_.loc_names[out] + " is not the region focus");
  env_.N.erase(out);
  set_focus(regs, out);
}

std::vector<int> Statics::case_bind(int dt, int ci, int src, const std::vector<std::string>& names) {
  const auto& K = s_[dt].ctors[ci];
  const LocShape sh = env_.loc_shapes[src];
  std::string base = env_.loc_names[src];
  auto nm = [&](size_t j, const std::string& hidden) {
    return j < names.size() && !names[j].empty() ? names[j] : base + hidden;
  };
  int n = int(K.fields.size());
  std::vector<int> out(n, -1);
  auto mk = [&](const std::string& name, LocShape shape, Constraint::Kind kind, int from, int d, Key key = {}) {
    Constraint c;
    c.kind = kind;
    c.src = from;
    c.datatype = d;
    c.key = std::move(key);
    return add(name, std::move(shape), c);
  };
  if (!sh.factored()) {
    LocShape single;
    single.region = sh.region;
    int prev = src;
    for (int j = 0; j < n; ++j) {
      const FieldType& f = K.fields[j];
      bool first_kid = j == K.scalar_count();
      if (f.kind == FieldKind::Int || first_kid) {
        out[j] = mk(nm(j, ".s" + std::to_string(j)), single, Constraint::Next, prev, -1);
      } else {
        out[j] = mk(nm(j, ".f" + std::to_string(j)), single, Constraint::After, prev, K.fields[j - 1].dt);
      }
      env_.sigma[out[j]] = f.kind == FieldKind::Int ? -1 : f.dt;
      prev = out[j];
    }
    return out;
  }
  int m = K.scalar_count() + K.packed_count();
  LocShape tag;
  tag.region = sh.region;
  int ld = mk(base + ".tag", tag, Constraint::ProjTag, src, -1);
  std::map<Key, int> comp;
  for (const auto& [key, cs] : sh.entries) {
    if (key.ctor != K.name) continue;
    int j = key.field;
    out[j] = mk(nm(j, ".f" + std::to_string(j)), cs, Constraint::ProjField, src, -1, key);
    env_.sigma[out[j]] = K.fields[j].kind == FieldKind::Int ? -1 : K.fields[j].dt;
  }
  if (m == n) return out;
  int ld2 = mk(base + ".tag'", tag, Constraint::Next, ld, -1);
  Constraint iv;
  iv.kind = Constraint::IntroLocVec;
  iv.src = ld2;
  iv.datatype = dt;
  for (const auto& [key, cs] : sh.entries) {
    int l;
    if (key.ctor == K.name) {
      int j = key.field;
      if (K.fields[j].kind == FieldKind::Int) l = mk(base + ".f" + std::to_string(j) + "'", cs, Constraint::Next, out[j], -1);
      else l = mk(base + ".f" + std::to_string(j) + "'", cs, Constraint::After, out[j], K.fields[j].dt);
    } else {
      l = mk(base + "." + key.ctor + std::to_string(key.field), cs, Constraint::ProjField, src, -1, key);
    }
    iv.fields.push_back({key, l});
  }
  int prev = -1;
  for (int j = m; j < n; ++j) {
    if (j == m) {
      out[j] = add(nm(j, ".f" + std::to_string(j)), sh, iv);
    } else {
      Constraint c;
      c.kind = Constraint::After;
      c.src = prev;
      c.datatype = dt;
      out[j] = add(nm(j, ".f" + std::to_string(j)), sh, c);
    }
    env_.sigma[out[j]] = dt;
    prev = out[j];
  }
  return out;
}

}  // namespace detail

namespace {

struct Checker {
  const Program& p;
  const AdtSchema& s;
  StaticEnvs& env;
  Statics st;
  bool tracing;
  std::vector<TraceStep>* trace;
  const Expr* cur = nullptr;

  std::vector<std::pair<std::string, ArgTy>> vars;
  std::vector<std::pair<std::string, int>> locs;
  std::vector<std::pair<std::string, int>> regions;

  Checker(const Program& p_, StaticEnvs& env_, bool tracing_, std::vector<TraceStep>* trace_)
      : p(p_), s(p_.schema), env(env_), st(p_.schema, env_, true), tracing(tracing_), trace(trace_) {}

  [[noreturn]] void reject(const char* rule, const char* reason, const std::string& msg) {
    throw Reject{rule, reason, msg};
  }

  template <class V>
  static auto lookup(const V& v, const std::string& x) -> const typename V::value_type::second_type* {
    for (auto it = v.rbegin(); it != v.rend(); ++it)
      if (it->first == x) return &it->second;
    return nullptr;
  }

  int loc(const std::string& name) {
    auto* l = lookup(locs, name);
    if (!l) reject("T-Var", "UnboundName", "location " + name);
    return *l;
  }

  int region(const std::string& name) {
    auto* r = lookup(regions, name);
    if (!r) reject("T-Var", "UnboundName", "region " + name);
    return *r;
  }

  int datatype(const std::string& name, const char* rule) {
    int d = s.find(name);
    if (d < 0) reject(rule, "TypeMismatch", "unknown datatype " + name);
    return d;
  }

  void step(const char* rule, const Expr& e, int delta = -1) {
    if (tracing) trace->push_back(snapshot(s, env, rule, head_text(e), delta));
  }

  ArgTy atom(const Expr& e) {
    if (e.kind == Expr::Int) return {};
    auto* t = lookup(vars, e.name);
    if (!t) reject("T-Var", "UnboundName", "variable " + e.name);
    return *t;
  }

  // Types each arm from the same input environments; the arms must agree on
  // the result and on A and N over everything in scope before the split.
  ArgTy arms(const char* rule, std::vector<std::function<ArgTy()>> fs) {
    StaticEnvs pre = env;
    size_t nloc = pre.loc_names.size(), nreg = pre.region_names.size();
    StaticEnvs first;
    ArgTy res;
    for (size_t i = 0; i < fs.size(); ++i) {
      if (i > 0) {
        StaticEnvs next = pre;
        next.loc_names = env.loc_names;
        next.loc_shapes = env.loc_shapes;
        next.region_names = env.region_names;
        env = std::move(next);
      }
      ArgTy t = fs[i]();
      if (i == 0) {
        res = t;
        first = env;
        continue;
      }
      if (t.dt != res.dt || t.loc != res.loc) reject(rule, "BranchMismatch", "branches return different types");
      for (size_t l = 0; l < nloc; ++l)
        if (first.N.count(int(l)) != env.N.count(int(l)))
          reject(rule, "BranchMismatch", "branches disagree on whether " + env.loc_names[l] + " is written");
      for (size_t r = 0; r < nreg; ++r) {
        auto a = first.A.find(int(r)), b = env.A.find(int(r));
        int va = a == first.A.end() ? -2 : a->second, vb = b == env.A.end() ? -2 : b->second;
        if (va != vb) reject(rule, "BranchMismatch", "branches leave region " + env.region_names[r] + " with different foci");
      }
    }
    first.loc_names = env.loc_names;
    first.loc_shapes = env.loc_shapes;
    first.region_names = env.region_names;
    env = std::move(first);
    return res;
  }

  ArgTy type(const Expr& e) {
    cur = &e;
    switch (e.kind) {
      case Expr::Int:
        step("T-Int", e);
        return {};
      case Expr::Var: {
        ArgTy t = atom(e);
        step("T-Var", e);
        return t;
      }
      case Expr::Prim: {
        for (int i = 0; i < 2; ++i) {
          ArgTy t = type(*e.args[i]);
          cur = &e;
          if (t.located()) reject("T-Prim", "TypeMismatch", "operands of " + e.name + " must be Int");
        }
        step("T-Prim", e);
        return {};
      }
      case Expr::If: {
        ArgTy c = type(*e.args[0]);
        cur = &e;
        if (c.located()) reject("T-If", "TypeMismatch", "condition must be Int");
        step("T-If", e);
        return arms("T-If", {[&] { return type(*e.args[1]); }, [&] { return type(*e.args[2]); }});
      }
      case Expr::Let: {
        ArgTy t = type(*e.args[0]);
        cur = &e;
        if (t.located()) {
          if (env.N.count(t.loc)) reject("T-Let", "UnwrittenDependency", env.loc_names[t.loc] + " was not written");
          env.sigma[t.loc] = t.dt;
        }
        vars.push_back({e.name, t});
        step("T-Let", e);
        ArgTy r = type(*e.args[1]);
        vars.pop_back();
        return r;
      }
      case Expr::LetRegion: {
        int id = st.region(e.name);
        regions.push_back({e.name, id});
        step("T-LetRegion", e);
        ArgTy r = type(*e.args[0]);
        regions.pop_back();
        return r;
      }
      case Expr::LetLoc:
        return letloc(e);
      case Expr::Ctor:
        return ctor(e);
      case Expr::App:
        return app(e);
      case Expr::Case:
        return kase(e);
    }
    return {};
  }

  ArgTy letloc(const Expr& e) {
    const LocExpr& le = e.le;
    int annot = e.annot.empty() ? -1 : region(e.annot);
    int id = -1;
    const char* rule = "";
    switch (le.kind) {
      case LocExpr::Start: {
        rule = "T-LetLoc-Start";
        int dt = -1;
        if (le.regions.factored()) dt = datatype(le.datatype, rule);
        LocShape sh = st.shape_from(le.regions, dt, [&](const std::string& r) { return region(r); }, rule);
        id = st.start(e.name, std::move(sh), annot);
        break;
      }
      case LocExpr::Next:
        rule = "T-LetLoc-Tag";
        id = st.next(e.name, loc(le.loc), annot);
        break;
      case LocExpr::After:
        rule = "T-LetLoc-After";
        id = st.after(e.name, datatype(le.datatype, rule), loc(le.loc), annot);
        break;
      case LocExpr::ProjTag:
        rule = "T-LetLoc-ProjTag";
        id = st.proj_tag(e.name, loc(le.loc), annot);
        break;
      case LocExpr::ProjField:
        rule = "T-LetLoc-ProjField";
        id = st.proj_field(e.name, le.key, loc(le.loc), annot);
        break;
      case LocExpr::IntroLocVec: {
        rule = "T-LetLoc-IntroLocVec";
        std::vector<std::pair<Key, int>> fs;
        for (const auto& [k, l] : le.fields) fs.push_back({k, loc(l)});
        id = st.intro(e.name, datatype(le.datatype, rule), loc(le.loc), fs, annot);
        break;
      }
    }
    locs.push_back({e.name, id});
    step(rule, e, id);
    ArgTy r = type(*e.args[0]);
    locs.pop_back();
    return r;
  }

  ArgTy ctor(const Expr& e) {
    int dt = -1, ci = -1;
    for (size_t d = 0; d < s.datatypes.size() && ci < 0; ++d) {
      ci = s[int(d)].find_ctor(e.name);
      if (ci >= 0) dt = int(d);
    }
    int dest = loc(e.locs[0]);
    std::vector<ArgTy> args;
    for (const auto& a : e.args) args.push_back(atom(*a));
    cur = &e;
    st.ctor(dt, ci, dest, args);
    step(s[dt].layout == Layout::Factored ? "T-DataConstructor-FullyFactored" : "T-DataConstructor", e);
    return {dt, dest};
  }

  ArgTy app(const Expr& e) {
    const char* R = "T-App";
    const FunDef* f = p.find(e.name);
    if (!f) reject(R, "UnboundName", "function " + e.name);
    if (e.locs.size() != f->locs.size())
      reject(R, "ArityMismatch", e.name + " takes " + std::to_string(f->locs.size()) + " location arguments");
    if (e.args.size() != f->params.size())
      reject(R, "ArityMismatch", e.name + " takes " + std::to_string(f->params.size()) + " arguments");
    std::map<std::string, int> bind;
    std::map<std::string, int> locarg;
    for (size_t i = 0; i < f->locs.size(); ++i) {
      int a = loc(e.locs[i]);
      int dt = datatype(f->locs[i].datatype, R);
      if (!detail::match_regions(s, f->locs[i].regions, dt, env.loc_shapes[a], bind))
        reject(R, "ShapeMismatch", env.loc_names[a] + " does not match parameter " + f->locs[i].name);
      locarg[f->locs[i].name] = a;
    }
    for (size_t i = 0; i < f->params.size(); ++i) {
      ArgTy t = atom(*e.args[i]);
      const Param& q = f->params[i];
      if (q.datatype.empty()) {
        if (t.located()) reject(R, "TypeMismatch", "argument " + std::to_string(i) + " of " + e.name + " is Int");
        continue;
      }
      int dt = datatype(q.datatype, R);
      if (!t.located() || t.dt != dt)
        reject(R, "TypeMismatch", "argument " + std::to_string(i) + " of " + e.name + " is " + q.datatype);
      if (t.loc != locarg[q.loc])
        reject(R, "ShapeMismatch", "argument " + std::to_string(i) + " of " + e.name + " is not at " + q.loc);
      if (!env.sigma.count(t.loc)) reject(R, "UnwrittenDependency", env.loc_names[t.loc] + " is unwritten");
    }
    cur = &e;
    ArgTy res;
    if (!f->ret.datatype.empty()) {
      int out = locarg[f->ret.loc];
      st.call_out(out);
      res = {datatype(f->ret.datatype, R), out};
    }
    step(R, e);
    return res;
  }

  ArgTy kase(const Expr& e) {
    const char* R = "T-Case";
    ArgTy x = atom(*mk_var(e.name));
    cur = &e;
    if (!x.located()) reject(R, "TypeMismatch", e.name + " is not a packed value");
    if (!env.sigma.count(x.loc)) reject(R, "UnwrittenDependency", env.loc_names[x.loc] + " is unwritten");
    const auto& d = s[x.dt];
    for (const auto& b : e.branches)
      if (d.find_ctor(b.ctor) < 0) reject(R, "TypeMismatch", b.ctor + " is not a constructor of " + d.name);
    for (const auto& c : d.ctors) {
      bool has = false;
      for (const auto& b : e.branches) has = has || b.ctor == c.name;
      if (!has) reject(R, "MissingBranch", "no branch for " + c.name);
    }
    step(R, e);
    std::vector<std::function<ArgTy()>> fs;
    for (const auto& b : e.branches) {
      fs.push_back([&, x]() -> ArgTy {
        int ci = d.find_ctor(b.ctor);
        const auto& K = d.ctors[ci];
        if (b.binds.size() != K.fields.size())
          reject("T-Pat", "ArityMismatch", b.ctor + " has " + std::to_string(K.fields.size()) + " fields");
        std::vector<std::string> names;
        for (size_t j = 0; j < K.fields.size(); ++j) {
          bool isint = K.fields[j].kind == FieldKind::Int;
          if (isint != b.binds[j].loc.empty())
            reject("T-Pat", "ShapeMismatch", isint ? "Int fields bind no location" : "packed fields bind a location");
          names.push_back(b.binds[j].loc);
        }
        auto ls = st.case_bind(x.dt, ci, x.loc, names);
        size_t nv = vars.size(), nl = locs.size();
        for (size_t j = 0; j < K.fields.size(); ++j) {
          if (K.fields[j].kind == FieldKind::Int) {
            vars.push_back({b.binds[j].var, {}});
          } else {
            vars.push_back({b.binds[j].var, {K.fields[j].dt, ls[j]}});
            locs.push_back({b.binds[j].loc, ls[j]});
          }
        }
        ArgTy r = type(*b.body);
        vars.resize(nv);
        locs.resize(nl);
        return r;
      });
    }
    return arms(R, std::move(fs));
  }
};

void check_function(const Program& p, const FunDef& f, const Expr*& where) {
  const char* R = "T-FunctionDef";
  StaticEnvs env;
  Checker c(p, env, false, nullptr);
  std::map<std::string, int> regs;
  auto region = [&](const std::string& r) {
    auto it = regs.find(r);
    if (it != regs.end()) return it->second;
    int id = env.add_region(r);
    regs[r] = id;
    return id;
  };
  std::map<std::string, int> locid;
  std::map<std::string, int> locdt;
  for (const auto& lp : f.locs) {
    int dt = c.datatype(lp.datatype, R);
    LocShape sh = c.st.shape_from(lp.regions, dt, region, R);
    int id = env.add_loc(lp.name, std::move(sh));
    locid[lp.name] = id;
    locdt[lp.name] = dt;
    c.locs.push_back({lp.name, id});
  }
  int out = -1;
  if (!f.ret.datatype.empty()) {
    out = locid[f.ret.loc];
    if (c.datatype(f.ret.datatype, R) != locdt[f.ret.loc])
      throw Reject{R, "TypeMismatch", "result location " + f.ret.loc + " is declared for another datatype"};
    env.N.insert(out);
    for (int r : c.st.regions_of(out)) env.A[r] = out;
  }
  std::set<std::string> used;
  if (out >= 0) used.insert(f.ret.loc);
  for (const auto& q : f.params) {
    if (q.datatype.empty()) {
      c.vars.push_back({q.name, {}});
      continue;
    }
    int dt = c.datatype(q.datatype, R);
    if (dt != locdt[q.loc]) throw Reject{R, "TypeMismatch", q.loc + " is declared for another datatype"};
    if (q.loc == f.ret.loc) throw Reject{R, "ShapeMismatch", "the result location cannot hold an input"};
    env.sigma[locid[q.loc]] = dt;
    c.vars.push_back({q.name, {dt, locid[q.loc]}});
    used.insert(q.loc);
  }
  for (const auto& lp : f.locs)
    if (!used.count(lp.name)) throw Reject{R, "ShapeMismatch", "location parameter " + lp.name + " is unused"};
  ArgTy t;
  try {
    t = c.type(*f.body);
  } catch (const Reject&) {
    if (c.cur) where = c.cur;
    throw;
  }
  if (out < 0 ? t.located() : (t.loc != out || t.dt != locdt[f.ret.loc]))
    throw Reject{R, "TypeMismatch", "body does not produce the declared result"};
  if (out >= 0 && !c.st.focus_is(out, c.st.regions_of(out)))
    throw Reject{R, "WriteNotAtFocus", "allocation continued past the result"};
}

}  // namespace

CheckResult typecheck(const Program& p) {
  CheckResult res;
  const Expr* where = nullptr;
  try {
    for (const auto& f : p.funs) {
      res.function = f.name;
      where = f.body.get();
      check_function(p, f, where);
    }
    res.function.clear();
    StaticEnvs env;
    Checker c(p, env, true, &res.trace);
    try {
      c.type(*p.main);
    } catch (const Reject&) {
      where = c.cur;
      throw;
    }
    res.main_envs = env;
    res.ok = true;
  } catch (const Reject& r) {
    res.ok = false;
    res.rule = r.rule;
    res.reason = r.reason;
    res.message = r.msg;
    if (where) {
      res.line = where->line;
      res.col = where->col;
    }
  }
  return res;
}

}  // namespace packedadt::socal
