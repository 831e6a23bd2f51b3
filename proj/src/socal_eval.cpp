#include <algorithm>
#include <functional>

#include "socal_internal.hpp"

namespace packedadt::socal {

using detail::ArgTy;
using detail::Statics;

namespace {

[[noreturn]] void ill(const std::string& msg) { fail(ErrorCode::IllFormedStore, msg); }

const Cell& cell_at(const RtState& st, int region, int64_t index) {
  if (region < 0 || region >= int(st.S.size())) ill("no region " + std::to_string(region));
  const auto& cells = st.S[region];
  if (index < 0 || index >= int64_t(cells.size()) || cells[index].kind == Cell::Empty)
    ill("cell " + std::to_string(index) + " of " + st.region_names[region] + " is unwritten");
  return cells[index];
}

int tag_of(const AdtSchema& s, const RtState& st, int dt, int region, int64_t index) {
  const Cell& c = cell_at(st, region, index);
  if (c.kind != Cell::Tag || c.value < 0 || c.value >= int64_t(s[dt].ctors.size()))
    ill("cell " + std::to_string(index) + " of " + st.region_names[region] + " is not a " + s[dt].name + " tag");
  return int(c.value);
}

int64_t int_at(const RtState& st, int region, int64_t index) {
  const Cell& c = cell_at(st, region, index);
  if (c.kind != Cell::Int) ill("cell " + std::to_string(index) + " of " + st.region_names[region] + " is not an Int");
  return c.value;
}

CLoc* entry(CLoc& c, const Key& k) {
  for (auto& [key, sub] : c.entries)
    if (key == k) return &sub;
  return nullptr;
}

const CLoc* entry(const CLoc& c, const Key& k) {
  for (const auto& [key, sub] : c.entries)
    if (key == k) return &sub;
  return nullptr;
}

int64_t flat_end(const AdtSchema& s, const RtState& st, int dt, int region, int64_t pos) {
  std::vector<int> todo = {dt};
  while (!todo.empty()) {
    int d = todo.back();
    todo.pop_back();
    const auto& K = s[d].ctors[tag_of(s, st, d, region, pos)];
    ++pos;
    for (size_t j = K.fields.size(); j-- > 0;)
      if (K.fields[j].kind != FieldKind::Int) todo.push_back(K.fields[j].dt);
    for (const auto& f : K.fields)
      if (f.kind == FieldKind::Int) int_at(st, region, pos++);
  }
  return pos;
}

CLoc fac_end(const AdtSchema& s, const RtState& st, int dt, CLoc cur) {
  if (!cur.factored() || cur.datatype != dt) ill("location does not have the shape of " + s[dt].name);
  const auto& K = s[dt].ctors[tag_of(s, st, dt, cur.region, cur.index)];
  cur.index += 1;
  for (size_t j = 0; j < K.fields.size(); ++j) {
    const FieldType& f = K.fields[j];
    if (f.kind == FieldKind::SelfRec) continue;
    CLoc* c = entry(cur, {K.name, int(j)});
    if (!c) ill("location has no entry for " + K.name + "." + std::to_string(j));
    if (f.kind == FieldKind::Int) {
      int_at(st, c->region, c->index);
      c->index += 1;
    } else {
      *c = end_witness(s, st, f.dt, *c);
    }
  }
  for (const auto& f : K.fields)
    if (f.kind == FieldKind::SelfRec) cur = fac_end(s, st, dt, std::move(cur));
  return cur;
}

Value read_flat(const AdtSchema& s, const RtState& st, int dt, int region, int64_t& pos) {
  const auto& K = s[dt].ctors[tag_of(s, st, dt, region, pos)];
  ++pos;
  Value v(K.name);
  for (const auto& f : K.fields) {
    if (f.kind == FieldKind::Int) v.add(int_at(st, region, pos++));
    else v.add(read_flat(s, st, f.dt, region, pos));
  }
  return v;
}

Value read_fac(const AdtSchema& s, const RtState& st, int dt, CLoc& cur) {
  const auto& K = s[dt].ctors[tag_of(s, st, dt, cur.region, cur.index)];
  cur.index += 1;
  Value v(K.name);
  std::vector<Value> parts(K.fields.size());
  std::vector<int64_t> ints(K.fields.size());
  for (size_t j = 0; j < K.fields.size(); ++j) {
    const FieldType& f = K.fields[j];
    if (f.kind == FieldKind::SelfRec) continue;
    CLoc* c = entry(cur, {K.name, int(j)});
    if (!c) ill("location has no entry for " + K.name + "." + std::to_string(j));
    if (f.kind == FieldKind::Int) {
      ints[j] = int_at(st, c->region, c->index);
      c->index += 1;
    } else {
      parts[j] = read_value(s, st, f.dt, *c);
      *c = end_witness(s, st, f.dt, *c);
    }
  }
  for (size_t j = 0; j < K.fields.size(); ++j)
    if (K.fields[j].kind == FieldKind::SelfRec) parts[j] = read_fac(s, st, dt, cur);
  for (size_t j = 0; j < K.fields.size(); ++j) {
    if (K.fields[j].kind == FieldKind::Int) v.add(ints[j]);
    else v.add(std::move(parts[j]));
  }
  return v;
}

const CLoc* component_in(const CLoc& c, int region) {
  if (c.region == region) return &c;
  for (const auto& [k, sub] : c.entries)
    if (const CLoc* r = component_in(sub, region)) return r;
  return nullptr;
}

std::optional<CLoc> eval_constraint(const AdtSchema& s, const StaticEnvs& env, const RtState& st, int loc) {
  const Constraint& c = env.C.at(loc);
  auto m = [&](int l) -> const CLoc* {
    auto it = st.M.find(l);
    return it == st.M.end() ? nullptr : &it->second;
  };
  switch (c.kind) {
    case Constraint::Start:
      return detail::to_cloc(env.loc_shapes[loc]);
    case Constraint::Next: {
      const CLoc* p = m(c.src);
      if (!p || p->factored()) return std::nullopt;
      CLoc r = *p;
      r.index += 1;
      return r;
    }
    case Constraint::After: {
      const CLoc* p = m(c.src);
      if (!p) return std::nullopt;
      try {
        return end_witness(s, st, c.datatype, *p);
      } catch (const Error&) {
        return std::nullopt;
      }
    }
    case Constraint::ProjTag: {
      const CLoc* p = m(c.src);
      if (!p || !p->factored()) return std::nullopt;
      CLoc r;
      r.region = p->region;
      r.index = p->index;
      return r;
    }
    case Constraint::ProjField: {
      const CLoc* p = m(c.src);
      if (!p || !p->factored()) return std::nullopt;
      const CLoc* e = entry(*p, c.key);
      if (!e) return std::nullopt;
      return *e;
    }
    case Constraint::IntroLocVec: {
      const CLoc* t = m(c.src);
      if (!t || t->factored()) return std::nullopt;
      CLoc r;
      r.region = t->region;
      r.index = t->index;
      r.datatype = c.datatype;
      for (const auto& [k, l] : c.fields) {
        const CLoc* f = m(l);
        if (!f) return std::nullopt;
        r.entries.push_back({k, *f});
      }
      return r;
    }
  }
  return std::nullopt;
}

const char* constraint_clause(Constraint::Kind k) {
  switch (k) {
    case Constraint::Start: return "wfconstr:start";
    case Constraint::Next: return "wfconstr:tag";
    case Constraint::After: return "wfconstr:after";
    case Constraint::ProjTag: return "wfconstr:projtag";
    case Constraint::ProjField: return "wfconstr:projfield";
    case Constraint::IntroLocVec: return "wfconstr:introlocvec";
  }
  return "";
}

}  // namespace

std::string cloc_text(const CLoc& c, const std::vector<std::string>& names) {
  std::string r = (c.region >= 0 && c.region < int(names.size()) ? names[c.region] : "?") + ":" +
                  std::to_string(c.index);
  if (!c.factored()) return r;
  r += " [";
  for (size_t i = 0; i < c.entries.size(); ++i) {
    if (i) r += ", ";
    r += "(" + c.entries[i].first.ctor + "," + std::to_string(c.entries[i].first.field) + ") " +
         cloc_text(c.entries[i].second, names);
  }
  return r + "]";
}

int64_t RtState::frontier(int region) const {
  const auto& cells = S.at(region);
  for (size_t i = cells.size(); i-- > 0;)
    if (cells[i].kind != Cell::Empty) return int64_t(i) + 1;
  return 0;
}

CLoc end_witness(const AdtSchema& s, const RtState& st, int dt, const CLoc& root) {
  if (dt < 0) {
    if (root.factored()) ill("Int at a factored location");
    int_at(st, root.region, root.index);
    CLoc r = root;
    r.index += 1;
    return r;
  }
  if (s[dt].layout == Layout::Flat) {
    if (root.factored()) ill("flat value at a factored location");
    CLoc r = root;
    r.index = flat_end(s, st, dt, root.region, root.index);
    return r;
  }
  return fac_end(s, st, dt, root);
}

Value read_value(const AdtSchema& s, const RtState& st, int dt, const CLoc& root) {
  if (s[dt].layout == Layout::Flat) {
    if (root.factored()) ill("flat value at a factored location");
    int64_t pos = root.index;
    return read_flat(s, st, dt, root.region, pos);
  }
  if (!root.factored() || root.datatype != dt) ill("location does not have the shape of " + s[dt].name);
  CLoc cur = root;
  return read_fac(s, st, dt, cur);
}

WellFormedReport check_well_formed(const AdtSchema& s, const StaticEnvs& env, const RtState& st) {
  auto bad = [&](const char* clause, int loc, std::string detail) {
    WellFormedReport r;
    r.ok = false;
    r.clause = clause;
    r.location = loc >= 0 ? env.loc_names[loc] : "";
    r.detail = std::move(detail);
    return r;
  };
  auto mapped = [&](int l) -> const CLoc* {
    auto it = st.M.find(l);
    return it == st.M.end() ? nullptr : &it->second;
  };
  for (size_t r = 0; r < st.S.size(); ++r)
    for (size_t i = 0; i < st.S[r].size(); ++i)
      if (st.S[r][i].writes > 1)
        return bad("wfalloc:write-once", -1, "cell " + std::to_string(i) + " of " + st.region_names[r] + " written twice");
  for (const auto& [l, dt] : env.sigma) {
    bool fac = dt >= 0 && s[dt].layout == Layout::Factored;
    const char* clause = fac ? "2" : "1";
    const CLoc* c = mapped(l);
    if (!c) return bad(clause, l, "written location has no concrete location");
    try {
      if (dt < 0) int_at(st, c->region, c->index);
      else end_witness(s, st, dt, *c);
    } catch (const Error& e) {
      return bad(clause, l, e.what());
    }
  }
  for (const auto& [l, c] : env.C) {
    const CLoc* have = mapped(l);
    auto want = eval_constraint(s, env, st, l);
    if (!have || !want || !(*have == *want))
      return bad(constraint_clause(c.kind), l,
                 env.constraint_text(s, l) + " but M gives " + (have ? cloc_text(*have, st.region_names) : "nothing"));
  }
  for (int l : env.N) {
    const CLoc* c = mapped(l);
    if (!c) return bad("wfalloc:nursery", l, "nursery location has no concrete location");
    const auto& cells = st.S.at(c->region);
    if (c->index < int64_t(cells.size()) && cells[c->index].kind != Cell::Empty)
      return bad("wfalloc:nursery", l, "nursery location " + cloc_text(*c, st.region_names) + " was written");
  }
  for (const auto& [r, l] : env.A) {
    if (l < 0) {
      if (st.frontier(r) != 0) return bad("wfalloc:empty", -1, "region " + st.region_names[r] + " has no focus but holds data");
      continue;
    }
    const CLoc* c = mapped(l);
    if (!c) return bad(env.N.count(l) ? "wfalloc:linear" : "wfalloc:linear-finished", l, "focus has no concrete location");
    int64_t fr = st.frontier(r);
    if (env.N.count(l)) {
      const CLoc* comp = component_in(*c, r);
      if (!comp || comp->index < fr)
        return bad("wfalloc:linear", l, "focus of " + st.region_names[r] + " is behind the written frontier");
      continue;
    }
    auto it = env.sigma.find(l);
    if (it == env.sigma.end()) continue;
    try {
      CLoc end = it->second < 0 ? *c : end_witness(s, st, it->second, *c);
      if (it->second < 0) end.index += 1;
      const CLoc* comp = component_in(end, r);
      if (!comp || comp->index < fr)
        return bad("wfalloc:linear-finished", l, "data was written in " + st.region_names[r] + " past the focus value");
    } catch (const Error& e) {
      return bad("wfalloc:linear-finished", l, e.what());
    }
  }
  for (const auto& [l, dt] : env.sigma)
    if (env.N.count(l)) return bad("5", l, "location is both written and in the nursery");
  return {};
}

std::vector<std::vector<uint8_t>> store_buffers(const AdtSchema& s, const RtState& st, int dt, const CLoc& root) {
  CLoc end = end_witness(s, st, dt, root);
  std::vector<std::vector<uint8_t>> out;
  std::function<void(const CLoc&, const CLoc&)> walk = [&](const CLoc& a, const CLoc& b) {
    std::vector<uint8_t> buf;
    for (int64_t i = a.index; i < b.index; ++i) {
      const Cell& c = cell_at(st, a.region, i);
      if (c.kind == Cell::Tag) {
        buf.push_back(uint8_t(c.value));
      } else {
        for (int k = 0; k < 8; ++k) buf.push_back(uint8_t(uint64_t(c.value) >> (8 * k)));
      }
    }
    out.push_back(std::move(buf));
    for (size_t i = 0; i < a.entries.size(); ++i) walk(a.entries[i].second, b.entries[i].second);
  };
  walk(root, end);
  return out;
}

uint64_t cell_to_byte(const RtState& st, int region, int64_t index) {
  uint64_t b = 0;
  for (int64_t i = 0; i < index; ++i) b += cell_at(st, region, i).kind == Cell::Tag ? 1 : 8;
  return b;
}

// ---- interpreter -----------------------------------------------------------

namespace {

struct RVal {
  int dt = -1;
  int loc = -1;
  int64_t n = 0;
  bool located() const { return loc >= 0; }
};

template <class T>
struct Chain {
  std::string name;
  T val;
  std::shared_ptr<const Chain> next;
};

template <class T>
using ChainP = std::shared_ptr<const Chain<T>>;

template <class T>
ChainP<T> push(ChainP<T> c, std::string name, T v) {
  return std::make_shared<const Chain<T>>(Chain<T>{std::move(name), std::move(v), std::move(c)});
}

template <class T>
const T* find(const ChainP<T>& c, const std::string& name) {
  for (const Chain<T>* p = c.get(); p; p = p->next.get())
    if (p->name == name) return &p->val;
  return nullptr;
}

struct Env {
  ChainP<RVal> vars;
  ChainP<int> locs;
  ChainP<int> regions;
};

int64_t wrap(uint64_t x) { return int64_t(x); }

int64_t prim(const std::string& op, int64_t a, int64_t b) {
  if (op == "+") return wrap(uint64_t(a) + uint64_t(b));
  if (op == "-") return wrap(uint64_t(a) - uint64_t(b));
  if (op == "*") return wrap(uint64_t(a) * uint64_t(b));
  if (op == "<=") return a <= b;
  if (op == "<") return a < b;
  return a == b;
}

class Machine {
 public:
  Machine(const Program& p, const RunOptions& o) : p_(p), s_(p.schema), o_(o), st_(s_, env_, false) {}

  RunResult run() {
    const Expr* ctl = p_.main.get();
    Env env;
    RVal val;
    bool ret = false;
    for (;;) {
      if (ret) {
        if (stack_.empty()) break;
        Frame f = std::move(stack_.back());
        stack_.pop_back();
        if (f.kind == Frame::Let) {
          if (val.located()) env_.sigma[val.loc] = val.dt;
          env = f.env;
          env.vars = push(env.vars, f.e->name, val);
          ctl = f.e->args[1].get();
          ret = false;
          step("D-Let", *f.e);
        } else if (f.kind == Frame::PrimA) {
          Frame g{Frame::PrimB, f.e, f.env, int_of(val, *f.e, "D-Prim")};
          stack_.push_back(std::move(g));
          env = f.env;
          ctl = f.e->args[1].get();
          ret = false;
        } else if (f.kind == Frame::PrimB) {
          val = RVal{-1, -1, prim(f.e->name, f.left, int_of(val, *f.e, "D-Prim"))};
          step("D-Prim", *f.e);
        } else {
          bool c = int_of(val, *f.e, "D-If") != 0;
          env = f.env;
          ctl = f.e->args[c ? 1 : 2].get();
          ret = false;
          step("D-If", *f.e);
        }
        continue;
      }
      const Expr& e = *ctl;
      switch (e.kind) {
        case Expr::Int:
          val = RVal{-1, -1, e.n};
          ret = true;
          break;
        case Expr::Var:
          val = var(env, e, "D-Var");
          ret = true;
          break;
        case Expr::Let:
          stack_.push_back({Frame::Let, &e, env, 0});
          ctl = e.args[0].get();
          break;
        case Expr::Prim:
          stack_.push_back({Frame::PrimA, &e, env, 0});
          ctl = e.args[0].get();
          break;
        case Expr::If:
          stack_.push_back({Frame::If, &e, env, 0});
          ctl = e.args[0].get();
          break;
        case Expr::LetRegion: {
          int id = st_.region(e.name);
          rt_.S.emplace_back();
          rt_.region_names.push_back(env_.region_names[id]);
          env.regions = push(env.regions, e.name, id);
          ctl = e.args[0].get();
          step("D-LetRegion", e);
          break;
        }
        case Expr::LetLoc: {
          auto [rule, id] = letloc(env, e);
          env.locs = push(env.locs, e.name, id);
          ctl = e.args[0].get();
          step(rule, e, id);
          break;
        }
        case Expr::Ctor:
          val = ctor(env, e);
          ret = true;
          step(s_[val.dt].layout == Layout::Factored ? "D-DataConstructor-FullyFactored" : "D-DataConstructor", e);
          break;
        case Expr::App:
          ctl = app(env, e);
          step("D-App", e);
          break;
        case Expr::Case:
          ctl = kase(env, e);
          step("D-Case", e);
          break;
      }
    }
    RunResult r;
    r.located = val.located();
    r.n = val.n;
    r.datatype = val.dt;
    r.loc = val.loc;
    if (val.located()) r.value = read_value(s_, rt_, val.dt, rt_.M.at(val.loc));
    r.steps = steps_;
    r.wf_checks = checks_;
    r.trace = std::move(trace_);
    r.violation = violation_;
    r.state = std::move(rt_);
    r.envs = std::move(env_);
    return r;
  }

 private:
  struct Frame {
    enum Kind { Let, PrimA, PrimB, If } kind;
    const Expr* e;
    Env env;
    int64_t left;
  };

  const Program& p_;
  const AdtSchema& s_;
  RunOptions o_;
  StaticEnvs env_;
  Statics st_;
  RtState rt_;
  std::vector<Frame> stack_;
  uint64_t steps_ = 0, checks_ = 0;
  std::vector<TraceStep> trace_;
  WellFormedReport violation_;

  [[noreturn]] void stuck(const char* rule, const Expr& e, const std::string& why) {
    throw Error(ErrorCode::Stuck, std::string(rule) + ": " + why + " in " + head_text(e), e.line, e.col);
  }

  void step(const char* rule, const Expr& e, int delta = -1) {
    if (++steps_ > o_.fuel) fail(ErrorCode::InvalidArgument, "step limit of " + std::to_string(o_.fuel) + " reached");
    if (o_.trace) trace_.push_back(snapshot(s_, env_, rule, head_text(e), delta));
    if (o_.check_wf && violation_.ok) {
      ++checks_;
      WellFormedReport w = check_well_formed(s_, env_, rt_);
      if (!w.ok) {
        w.detail = std::string(rule) + " step " + std::to_string(steps_) + ": " + w.detail;
        violation_ = w;
      }
    }
  }

  RVal var(const Env& env, const Expr& e, const char* rule) {
    if (e.kind == Expr::Int) return RVal{-1, -1, e.n};
    const RVal* v = find(env.vars, e.name);
    if (!v) stuck(rule, e, "unbound variable " + e.name);
    return *v;
  }

  int64_t int_of(const RVal& v, const Expr& e, const char* rule) {
    if (v.located()) stuck(rule, e, "expected an Int");
    return v.n;
  }

  int loc(const Env& env, const Expr& e, const std::string& name, const char* rule) {
    const int* l = find(env.locs, name);
    if (!l) stuck(rule, e, "unbound location " + name);
    return *l;
  }

  int region(const Env& env, const Expr& e, const std::string& name, const char* rule) {
    const int* r = find(env.regions, name);
    if (!r) stuck(rule, e, "unbound region " + name);
    return *r;
  }

  void realize(const char* rule, const Expr& e, int first) {
    for (int l = first; l < int(env_.loc_names.size()); ++l) {
      auto c = eval_constraint(s_, env_, rt_, l);
      if (!c) stuck(rule, e, "cannot compute " + env_.constraint_text(s_, l));
      rt_.M[l] = std::move(*c);
    }
  }

  std::pair<const char*, int> letloc(const Env& env, const Expr& e) {
    const LocExpr& le = e.le;
    int first = int(env_.loc_names.size());
    const char* rule = "";
    int id = -1;
    switch (le.kind) {
      case LocExpr::Start: {
        rule = "D-LetLoc-Start";
        int dt = le.regions.factored() ? s_.find(le.datatype) : -1;
        if (le.regions.factored() && dt < 0) stuck(rule, e, "unknown datatype " + le.datatype);
        LocShape sh = st_.shape_from(le.regions, dt, [&](const std::string& r) { return region(env, e, r, rule); }, rule);
        if (dt >= 0 && sh.entries.size() != detail::entries_of(s_, dt).size())
          stuck(rule, e, "regions do not cover every field of " + le.datatype);
        id = st_.start(e.name, std::move(sh), -1);
        break;
      }
      case LocExpr::Next:
        rule = "D-LetLoc-Tag";
        id = st_.next(e.name, loc(env, e, le.loc, rule), -1);
        break;
      case LocExpr::After: {
        rule = "D-LetLoc-After";
        int dt = s_.find(le.datatype);
        if (dt < 0) stuck(rule, e, "unknown datatype " + le.datatype);
        id = st_.after(e.name, dt, loc(env, e, le.loc, rule), -1);
        break;
      }
      case LocExpr::ProjTag:
        rule = "D-LetLoc-ProjTag";
        id = st_.proj_tag(e.name, loc(env, e, le.loc, rule), -1);
        break;
      case LocExpr::ProjField:
        rule = "D-LetLoc-ProjField";
        id = st_.proj_field(e.name, le.key, loc(env, e, le.loc, rule), -1);
        break;
      case LocExpr::IntroLocVec: {
        rule = "D-LetLoc-IntroLocVec";
        int dt = s_.find(le.datatype);
        if (dt < 0 || s_[dt].layout != Layout::Factored) stuck(rule, e, le.datatype + " is not factored");
        std::vector<std::pair<Key, int>> fs;
        for (const auto& [k, l] : le.fields) fs.push_back({k, loc(env, e, l, rule)});
        id = st_.intro(e.name, dt, loc(env, e, le.loc, rule), fs, -1);
        if (env_.C.at(id).fields.size() != detail::entries_of(s_, dt).size())
          stuck(rule, e, "fields do not cover every entry of " + le.datatype);
        break;
      }
    }
    realize(rule, e, first);
    return {rule, id};
  }

  void write(const char* rule, const Expr& e, int region, int64_t index, Cell::Kind kind, int64_t v) {
    if (region < 0 || region >= int(rt_.S.size()) || index < 0) stuck(rule, e, "no such cell");
    auto& cells = rt_.S[region];
    if (index >= int64_t(cells.size())) cells.resize(size_t(index) + 1);
    Cell& c = cells[index];
    if (c.kind != Cell::Empty) stuck(rule, e, "cell " + std::to_string(index) + " of " + rt_.region_names[region] + " is already written");
    c.kind = kind;
    c.value = v;
    c.writes += 1;
  }

  RVal ctor(const Env& env, const Expr& e) {
    int dt = -1, ci = -1;
    for (size_t d = 0; d < s_.datatypes.size() && ci < 0; ++d) {
      ci = s_[int(d)].find_ctor(e.name);
      if (ci >= 0) dt = int(d);
    }
    bool fac = s_[dt].layout == Layout::Factored;
    const char* rule = fac ? "D-DataConstructor-FullyFactored" : "D-DataConstructor";
    const auto& K = s_[dt].ctors[ci];
    int dest = loc(env, e, e.locs[0], rule);
    if (e.args.size() != K.fields.size()) stuck(rule, e, "wrong number of arguments");
    std::vector<RVal> vals;
    std::vector<ArgTy> tys;
    for (size_t j = 0; j < e.args.size(); ++j) {
      RVal v = var(env, *e.args[j], rule);
      if ((K.fields[j].kind == FieldKind::Int) == v.located()) stuck(rule, e, "argument " + std::to_string(j) + " has the wrong kind");
      vals.push_back(v);
      tys.push_back({v.dt, v.loc});
    }
    auto mit = rt_.M.find(dest);
    if (mit == rt_.M.end()) stuck(rule, e, "destination has no concrete location");
    const CLoc& c = mit->second;
    if (fac != c.factored() || (fac && c.datatype != dt)) stuck(rule, e, "destination does not fit " + s_[dt].name);
    std::vector<std::tuple<int, int64_t, Cell::Kind, int64_t>> writes;
    writes.push_back({c.region, c.index, Cell::Tag, int64_t(ci)});
    for (size_t j = 0; j < K.fields.size(); ++j) {
      if (K.fields[j].kind != FieldKind::Int) continue;
      if (!fac) {
        writes.push_back({c.region, c.index + 1 + int64_t(j), Cell::Int, vals[j].n});
        continue;
      }
      const CLoc* f = entry(c, {K.name, int(j)});
      if (!f || f->factored()) stuck(rule, e, "no scalar entry for field " + std::to_string(j));
      writes.push_back({f->region, f->index, Cell::Int, vals[j].n});
    }
    for (const auto& [r, i, k, v] : writes) {
      if (r < 0 || r >= int(rt_.S.size())) stuck(rule, e, "no such region");
      const auto& cells = rt_.S[r];
      if (i < int64_t(cells.size()) && cells[i].kind != Cell::Empty)
        stuck(rule, e, "cell " + std::to_string(i) + " of " + rt_.region_names[r] + " is already written");
    }
    for (const auto& [r, i, k, v] : writes) write(rule, e, r, i, k, v);
    st_.ctor(dt, ci, dest, tys);
    env_.sigma[dest] = dt;
    return RVal{dt, dest, 0};
  }

  const Expr* app(Env& env, const Expr& e) {
    const char* rule = "D-App";
    const FunDef* f = p_.find(e.name);
    if (!f) stuck(rule, e, "unknown function " + e.name);
    if (f->locs.size() != e.locs.size() || f->params.size() != e.args.size()) stuck(rule, e, "wrong number of arguments");
    Env body;
    std::map<std::string, int> bind;
    for (size_t i = 0; i < f->locs.size(); ++i) {
      int a = loc(env, e, e.locs[i], rule);
      int dt = s_.find(f->locs[i].datatype);
      if (dt < 0 || !detail::match_regions(s_, f->locs[i].regions, dt, env_.loc_shapes[a], bind))
        stuck(rule, e, env_.loc_names[a] + " does not fit parameter " + f->locs[i].name);
      body.locs = push(body.locs, f->locs[i].name, a);
    }
    for (const auto& [name, r] : bind) body.regions = push(body.regions, name, r);
    for (size_t i = 0; i < f->params.size(); ++i) {
      RVal v = var(env, *e.args[i], rule);
      if (f->params[i].datatype.empty() == v.located()) stuck(rule, e, "argument " + std::to_string(i) + " has the wrong kind");
      // A packed argument is passed as its location argument.
      for (size_t j = 0; j < f->locs.size(); ++j)
        if (v.located() && f->locs[j].name == f->params[i].loc) v.loc = *find(body.locs, f->locs[j].name);
      body.vars = push(body.vars, f->params[i].name, v);
    }
    env = std::move(body);
    return f->body.get();
  }

  const Expr* kase(Env& env, const Expr& e) {
    const char* rule = "D-Case";
    RVal x = var(env, *mk_var(e.name), rule);
    if (!x.located()) stuck(rule, e, e.name + " is not a packed value");
    auto mit = rt_.M.find(x.loc);
    if (mit == rt_.M.end()) stuck(rule, e, "scrutinee has no concrete location");
    const CLoc& c = mit->second;
    int ci = -1;
    try {
      ci = tag_of(s_, rt_, x.dt, c.region, c.index);
    } catch (const Error& err) {
      stuck(rule, e, err.what());
    }
    const auto& K = s_[x.dt].ctors[ci];
    const Branch* br = nullptr;
    for (const auto& b : e.branches)
      if (b.ctor == K.name) br = &b;
    if (!br) stuck(rule, e, "no branch for " + K.name);
    if (br->binds.size() != K.fields.size()) stuck(rule, e, "pattern arity");
    std::vector<std::string> names;
    for (const auto& b : br->binds) names.push_back(b.loc);
    int first = int(env_.loc_names.size());
    auto ls = st_.case_bind(x.dt, ci, x.loc, names);
    realize(rule, e, first);
    for (size_t j = 0; j < K.fields.size(); ++j) {
      if (K.fields[j].kind == FieldKind::Int) {
        const CLoc& fc = rt_.M.at(ls[j]);
        int64_t v = 0;
        try {
          v = int_at(rt_, fc.region, fc.index);
        } catch (const Error& err) {
          stuck(rule, e, err.what());
        }
        env.vars = push(env.vars, br->binds[j].var, RVal{-1, -1, v});
      } else {
        env.vars = push(env.vars, br->binds[j].var, RVal{K.fields[j].dt, ls[j], 0});
        env.locs = push(env.locs, br->binds[j].loc, ls[j]);
      }
    }
    return br->body.get();
  }
};

// ---- erased evaluation ----------------------------------------------------

struct PVal {
  int64_t n = 0;
  std::shared_ptr<const Value> v;
};

struct Erased {
  const Program& p;
  uint64_t fuel;
  uint64_t used = 0;

  void tick() {
    if (++used > fuel) fail(ErrorCode::InvalidArgument, "step limit reached");
  }

  PVal eval(const Expr& e, const ChainP<PVal>& env) {
    tick();
    switch (e.kind) {
      case Expr::Int:
        return {e.n, nullptr};
      case Expr::Var: {
        const PVal* v = find(env, e.name);
        if (!v) fail(ErrorCode::UnboundName, e.name);
        return *v;
      }
      case Expr::Let: {
        PVal b = eval(*e.args[0], env);
        return eval(*e.args[1], push(env, e.name, b));
      }
      case Expr::LetRegion:
      case Expr::LetLoc:
        return eval(*e.args[0], env);
      case Expr::Prim: {
        int64_t a = eval(*e.args[0], env).n;
        int64_t b = eval(*e.args[1], env).n;
        return {prim(e.name, a, b), nullptr};
      }
      case Expr::If:
        return eval(*e.args[eval(*e.args[0], env).n != 0 ? 1 : 2], env);
      case Expr::Ctor: {
        Value v(e.name);
        for (const auto& a : e.args) {
          PVal x = eval(*a, env);
          if (x.v) v.add(x.v->clone());
          else v.add(x.n);
        }
        return {0, std::make_shared<const Value>(std::move(v))};
      }
      case Expr::App: {
        const FunDef* f = p.find(e.name);
        if (!f) fail(ErrorCode::UnboundName, e.name);
        ChainP<PVal> body;
        for (size_t i = 0; i < f->params.size(); ++i) body = push(body, f->params[i].name, eval(*e.args[i], env));
        return eval(*f->body, body);
      }
      case Expr::Case: {
        const PVal* x = find(env, e.name);
        if (!x || !x->v) fail(ErrorCode::Stuck, "case on a non-packed value");
        for (const auto& b : e.branches) {
          if (b.ctor != x->v->ctor) continue;
          ChainP<PVal> ext = env;
          for (size_t j = 0; j < b.binds.size() && j < x->v->args.size(); ++j) {
            const Arg& a = x->v->args[j];
            if (auto* n = std::get_if<int64_t>(&a)) ext = push(ext, b.binds[j].var, PVal{*n, nullptr});
            else ext = push(ext, b.binds[j].var, PVal{0, std::make_shared<const Value>(std::get<1>(a)->clone())});
          }
          return eval(*b.body, ext);
        }
        fail(ErrorCode::Stuck, "no branch for " + x->v->ctor);
      }
    }
    return {};
  }
};

}  // namespace

RunResult interpret(const Program& p, const RunOptions& opts) {
  Machine m(p, opts);
  return m.run();
}

PureResult evaluate_erased(const Program& p, uint64_t fuel) {
  Erased ev{p, fuel};
  PVal v = ev.eval(*p.main, nullptr);
  PureResult r;
  r.located = v.v != nullptr;
  r.n = v.n;
  if (v.v) r.value = v.v->clone();
  return r;
}

}  // namespace packedadt::socal
