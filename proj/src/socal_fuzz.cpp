#include <functional>
#include <random>

#include "socal_internal.hpp"

namespace packedadt::socal {

namespace {

using K = std::function<ExprP(ExprP)>;
// Writes a value of the datatype at the location, then continues with the
// variable bound to it.
using Child = std::function<ExprP(int, const std::string&, const K&)>;

struct Emitter {
  const AdtSchema& s;
  std::mt19937_64 rng;
  int fresh = 0;
  std::vector<std::string> ints;  // Int variables in scope
  bool bad_after = false;         // place one after ahead of its dependency

  Emitter(const AdtSchema& schema, uint64_t seed) : s(schema), rng(seed) {}

  std::string name(const char* p) { return p + std::to_string(fresh++); }
  int64_t pick(int64_t lo, int64_t hi) { return std::uniform_int_distribution<int64_t>(lo, hi)(rng); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng); }

  ExprP int_atom() {
    if (!ints.empty() && coin(0.5)) return mk_var(ints[size_t(pick(0, int64_t(ints.size()) - 1))]);
    return mk_int(pick(-20, 99));
  }

  ExprP int_expr(int depth) {
    if (depth <= 0 || coin(0.4)) return int_atom();
    static const char* ops[] = {"+", "-", "*", "<=", "<", "="};
    const char* op = ops[pick(0, 5)];
    if (coin(0.15)) return mk_if(int_expr(depth - 1), int_expr(depth - 1), int_expr(depth - 1));
    return mk_prim(op, int_expr(depth - 1), int_expr(depth - 1));
  }

  // Scalar atoms for a constructor; compound ones are let-bound around the
  // write so the constructor only sees atoms.
  std::vector<std::pair<std::string, ExprP>> lets;
  ExprP scalar(bool literal_only) {
    if (literal_only) return mk_int(pick(-1000, 1000));
    if (coin(0.4)) return int_atom();
    std::string v = name("s");
    lets.push_back({v, int_expr(2)});
    return mk_var(v);
  }

  ExprP wrap_lets(std::vector<std::pair<std::string, ExprP>> ls, ExprP body) {
    for (size_t i = ls.size(); i-- > 0;) body = mk_let(ls[i].first, ls[i].second, body);
    return body;
  }

  LocExpr next(const std::string& l) {
    LocExpr le;
    le.kind = LocExpr::Next;
    le.loc = l;
    return le;
  }

  LocExpr after(int dt, const std::string& l) {
    LocExpr le;
    le.kind = LocExpr::After;
    le.datatype = s[dt].name;
    le.loc = l;
    return le;
  }

  // Writes a chain of self-recursive children at c1, after(c1), ...
  ExprP kids(int dt, std::vector<int> kdts, size_t i, const std::string& prev, std::vector<ExprP>& out,
             const Child& child, const std::function<ExprP()>& last, bool bad) {
    if (i == kdts.size()) return last();
    if (i == 0) {
      if (bad && kdts.size() >= 2) {
        // The second child's location is taken before the first is written.
        std::string l2 = name("l");
        return mk_letloc(l2, after(kdts[0], prev),
                         child(kdts[0], prev, [=, &out, this](ExprP a) {
                           out.push_back(a);
                           return child(kdts[1], l2, [=, &out, this](ExprP b) {
                             out.push_back(b);
                             return kids(dt, kdts, 2, l2, out, child, last, false);
                           });
                         }));
      }
      return child(kdts[0], prev, [=, &out, this](ExprP a) {
        out.push_back(a);
        return kids(dt, kdts, 1, prev, out, child, last, false);
      });
    }
    std::string l = name("l");
    return mk_letloc(l, after(kdts[i - 1], prev), child(kdts[i], l, [=, &out, this](ExprP a) {
                       out.push_back(a);
                       return kids(dt, kdts, i + 1, l, out, child, last, false);
                     }));
  }

  ExprP ctor(int dt, int ci, const std::string& loc, const Child& child, const K& k, bool literal_scalars) {
    const auto& C = s[dt].ctors[ci];
    size_t n = C.fields.size();
    auto args = std::make_shared<std::vector<ExprP>>(n);
    lets.clear();
    for (size_t j = 0; j < n; ++j)
      if (C.fields[j].kind == FieldKind::Int) (*args)[j] = scalar(literal_scalars);
    auto ls = lets;
    lets.clear();
    bool bad = bad_after;
    if (bad) bad_after = false;
    auto finish = [=, this]() {
      std::string x = name("x");
      return mk_let(x, mk_ctor(C.name, loc, *args), k(mk_var(x)));
    };
    std::vector<int> kidx;
    for (size_t j = 0; j < n; ++j)
      if (C.fields[j].kind != FieldKind::Int) kidx.push_back(int(j));

    if (s[dt].layout == Layout::Flat) {
      if (kidx.empty()) return wrap_lets(ls, finish());
      std::vector<std::string> chain = {loc};
      for (int i = 0; i < C.scalar_count() + 1; ++i) chain.push_back(name("l"));
      std::vector<int> kdts;
      for (int j : kidx) kdts.push_back(C.fields[j].dt);
      auto out = std::make_shared<std::vector<ExprP>>();
      ExprP body = kids(dt, kdts, 0, chain.back(), *out, child,
                        [=]() {
                          for (size_t i = 0; i < kidx.size(); ++i) (*args)[kidx[i]] = (*out)[i];
                          return finish();
                        },
                        bad);
      for (size_t i = chain.size() - 1; i > 0; --i) body = mk_letloc(chain[i], next(chain[i - 1]), body);
      return wrap_lets(ls, body);
    }

    int m = C.scalar_count() + C.packed_count();
    bool self = m < int(n);
    auto ents = detail::entries_of(s, dt);
    std::string ld = name("l");
    std::map<Key, std::string> proj;
    std::vector<std::pair<Key, std::string>> order;
    for (const auto& e : ents)
      if (self || e.key.ctor == C.name) {
        std::string l = name("l");
        proj[e.key] = l;
        order.push_back({e.key, l});
      }
    std::vector<int> packed, selfs;
    for (int j : kidx) (C.fields[j].kind == FieldKind::Packed ? packed : selfs).push_back(j);
    auto out = std::make_shared<std::vector<ExprP>>();

    std::function<ExprP(size_t)> packed_step = [=, this, &packed_step](size_t i) -> ExprP {
      if (i < packed.size()) {
        int j = packed[i];
        return child(C.fields[j].dt, proj.at({C.name, j}), [=, &packed_step](ExprP a) {
          (*args)[j] = a;
          return packed_step(i + 1);
        });
      }
      if (!self) return finish();
      std::string ld2 = name("l");
      std::vector<std::pair<std::string, LocExpr>> succ;
      LocExpr iv;
      iv.kind = LocExpr::IntroLocVec;
      iv.datatype = s[dt].name;
      iv.loc = ld2;
      for (const auto& e : ents) {
        if (e.key.ctor != C.name) {
          iv.fields.push_back({e.key, proj.at(e.key)});
          continue;
        }
        std::string sl = name("l");
        const std::string& src = proj.at(e.key);
        succ.push_back({sl, e.field->kind == FieldKind::Int ? next(src) : after(e.field->dt, src)});
        iv.fields.push_back({e.key, sl});
      }
      std::string c1 = name("l");
      std::vector<int> kdts(selfs.size(), dt);
      ExprP body = kids(dt, kdts, 0, c1, *out, child,
                        [=]() {
                          for (size_t q = 0; q < selfs.size(); ++q) (*args)[selfs[q]] = (*out)[q];
                          return finish();
                        },
                        bad);
      body = mk_letloc(c1, iv, body);
      for (size_t q = succ.size(); q-- > 0;) body = mk_letloc(succ[q].first, succ[q].second, body);
      return mk_letloc(ld2, next(ld), body);
    };
    // packed_step refers to itself by reference, so it must run before this
    // frame returns.
    ExprP body = packed_step(0);
    for (size_t q = order.size(); q-- > 0;) {
      LocExpr pf;
      pf.kind = LocExpr::ProjField;
      pf.key = order[q].first;
      pf.loc = loc;
      body = mk_letloc(order[q].second, pf, body);
    }
    LocExpr pt;
    pt.kind = LocExpr::ProjTag;
    pt.loc = loc;
    body = mk_letloc(ld, pt, body);
    return wrap_lets(ls, body);
  }

  // Writes a given value.
  ExprP value(int dt, const std::string& loc, const Value& v, const K& k) {
    int ci = s[dt].find_ctor(v.ctor);
    const auto& C = s[dt].ctors[ci];
    std::vector<const Value*> subs;
    for (const auto& a : v.args)
      if (auto* p = std::get_if<1>(&a)) subs.push_back(p->get());
    // Scalars are taken from the value, kids in field order.
    auto idx = std::make_shared<size_t>(0);
    Child child = [=, this](int d, const std::string& l, const K& kk) { return value(d, l, *subs[(*idx)++], kk); };
    size_t before = fresh;
    (void)before;
    ExprP body = ctor(dt, ci, loc, child, k, true);
    // Replace the generated literals with the value's scalars.
    return patch_scalars(body, C.name, loc, v);
  }

  // The scalar literals were drawn at random; overwrite the matching
  // constructor's arguments with the real ones.
  static ExprP patch_scalars(const ExprP& body, const std::string& ctor, const std::string& loc, const Value& v) {
    std::function<ExprP(const ExprP&)> go = [&](const ExprP& e) -> ExprP {
      if (e->kind == Expr::Ctor && e->name == ctor && e->locs[0] == loc) {
        auto c = std::make_shared<Expr>(*e);
        for (size_t j = 0; j < v.args.size(); ++j)
          if (auto* n = std::get_if<int64_t>(&v.args[j])) c->args[j] = mk_int(*n);
        return c;
      }
      if (e->args.empty()) return e;
      auto c = std::make_shared<Expr>(*e);
      bool changed = false;
      for (auto& a : c->args) {
        ExprP na = go(a);
        changed = changed || na != a;
        a = na;
      }
      return changed ? ExprP(c) : e;
    };
    return go(body);
  }
};

RegionTree region_tree(const AdtSchema& s, const BufferShape& sh, const std::string& prefix, int& next,
                       std::vector<std::string>& names) {
  RegionTree t;
  t.region = prefix + std::to_string(next++);
  names.push_back(t.region);
  if (sh.layout == Layout::Flat) return t;
  t.is_factored = true;
  t.datatype = s[sh.datatype].name;
  for (const auto& e : sh.entries) {
    Key k{s[sh.datatype].ctors[e.ctor].name, e.field};
    if (e.nested) {
      t.entries.push_back({k, region_tree(s, *e.nested, prefix, next, names)});
    } else {
      RegionTree leaf;
      leaf.region = prefix + std::to_string(next++);
      names.push_back(leaf.region);
      t.entries.push_back({k, leaf});
    }
  }
  return t;
}

LocExpr start_of(const AdtSchema& s, int dt, const RegionTree& t) {
  LocExpr le;
  le.kind = LocExpr::Start;
  le.regions = t;
  if (t.factored()) le.datatype = s[dt].name;
  return le;
}

// letregion for every region, a start location, then the body.
ExprP with_root(const AdtSchema& s, int dt, const std::string& prefix, int& next, const std::string& root,
                const std::function<ExprP()>& body) {
  std::vector<std::string> names;
  RegionTree t = region_tree(s, buffer_shape(s, dt), prefix, next, names);
  ExprP e = mk_letloc(root, start_of(s, dt, t), body());
  for (size_t i = names.size(); i-- > 0;) e = mk_letregion(names[i], e);
  return e;
}

// ---- random programs ------------------------------------------------------

struct ProgGen {
  Program p;
  Emitter em;
  int tree = -1, list = -1, forest = -1;
  int next_region = 0;

  ProgGen(AdtSchema s, uint64_t seed) : em(p.schema, seed) { p.schema = std::move(s); }

  std::string build_name(int dt) { return "build" + p.schema[dt].name; }
  std::string sum_name(int dt) { return "sum" + p.schema[dt].name; }

  LocParam loc_param(int dt, const std::string& l) {
    int n = 0;
    std::vector<std::string> names;
    return {l, p.schema[dt].name, region_tree(p.schema, buffer_shape(p.schema, dt), "r", n, names)};
  }

  // Constructors without and with self-recursive fields.
  std::pair<std::vector<int>, std::vector<int>> split(int dt) {
    std::vector<int> base, rec;
    const auto& d = p.schema[dt];
    for (size_t c = 0; c < d.ctors.size(); ++c) (d.ctors[c].selfrec_count() ? rec : base).push_back(int(c));
    return {base, rec};
  }

  int pick_of(const std::vector<int>& v) { return v[size_t(em.pick(0, int64_t(v.size()) - 1))]; }

  // A call writing a value of dt at loc with size argument from `size`.
  ExprP call(int dt, const std::string& loc, ExprP size, const K& k) {
    std::string n = em.name("n");
    std::string x = em.name("x");
    return mk_let(n, size, mk_let(x, mk_app(build_name(dt), {loc}, {mk_var(n)}), k(mk_var(x))));
  }

  void builder(int dt) {
    FunDef f;
    f.name = build_name(dt);
    f.locs = {loc_param(dt, "out")};
    f.params = {{"n", "", ""}};
    f.ret = {"", p.schema[dt].name, "out"};
    auto [base, rec] = split(dt);
    em.ints = {"n"};
    Child packed_child = [this](int d, const std::string& l, const K& k) {
      return call(d, l, mk_prim("-", mk_var("n"), mk_int(em.pick(0, 1))), k);
    };
    Child rec_child = [this, dt, packed_child](int d, const std::string& l, const K& k) {
      if (d != dt) return packed_child(d, l, k);
      return call(d, l, mk_prim("-", mk_var("n"), mk_int(em.pick(1, 2))), k);
    };
    auto done = [](ExprP x) { return x; };
    ExprP b = em.ctor(dt, pick_of(base), "out", packed_child, done, false);
    ExprP r = em.ctor(dt, pick_of(rec), "out", rec_child, done, false);
    f.body = mk_if(mk_prim("<=", mk_var("n"), mk_int(0)), b, r);
    p.funs.push_back(std::move(f));
  }

  void reader(int dt) {
    FunDef f;
    f.name = sum_name(dt);
    f.locs = {loc_param(dt, "in")};
    f.params = {{"t", p.schema[dt].name, "in"}};
    f.ret = {"", "", ""};
    std::vector<Branch> bs;
    for (const auto& C : p.schema[dt].ctors) {
      Branch b;
      b.ctor = C.name;
      ExprP acc = mk_int(em.pick(0, 3));
      for (const auto& fld : C.fields) {
        std::string v = em.name("v");
        ExprP term;
        if (fld.kind == FieldKind::Int) {
          b.binds.push_back({v, ""});
          term = mk_var(v);
        } else {
          std::string l = em.name("c");
          b.binds.push_back({v, l});
          term = mk_app(sum_name(fld.dt), {l}, {mk_var(v)});
        }
        const char* op = em.coin(0.8) ? "+" : "-";
        acc = mk_prim(op, acc, term);
      }
      if (em.coin(0.2)) acc = mk_if(mk_prim("<=", acc, mk_int(0)), mk_prim("-", mk_int(0), acc), acc);
      b.body = acc;
      bs.push_back(std::move(b));
    }
    f.body = mk_case("t", std::move(bs));
    p.funs.push_back(std::move(f));
  }

  // Main part writing a value of dt at loc: direct constructors near the top,
  // builder calls below.
  ExprP mixed(int dt, const std::string& loc, int depth, const K& k) {
    if (depth <= 0 || em.coin(0.35)) return call(dt, loc, mk_int(em.pick(0, dt == list ? 6 : 3)), k);
    auto [base, rec] = split(dt);
    int ci = em.coin(0.75) ? pick_of(rec) : pick_of(base);
    Child child = [this, depth](int d, const std::string& l, const K& kk) { return mixed(d, l, depth - 1, kk); };
    return em.ctor(dt, ci, loc, child, k, false);
  }

  // Reads a written value in main with a case, summing its parts.
  ExprP inspect(int dt, ExprP t) {
    std::vector<Branch> bs;
    for (const auto& C : p.schema[dt].ctors) {
      Branch b;
      b.ctor = C.name;
      ExprP acc = mk_int(em.pick(0, 9));
      for (const auto& fld : C.fields) {
        std::string v = em.name("v");
        if (fld.kind == FieldKind::Int) {
          b.binds.push_back({v, ""});
          acc = mk_prim("+", acc, mk_var(v));
        } else {
          std::string l = em.name("c");
          b.binds.push_back({v, l});
          acc = mk_prim("+", acc, mk_app(sum_name(fld.dt), {l}, {mk_var(v)}));
        }
      }
      b.body = acc;
      bs.push_back(std::move(b));
    }
    return mk_case(t->name, std::move(bs));
  }

  ExprP main_for(int dt, int variant) {
    std::string root = em.name("root");
    return with_root(p.schema, dt, "g", next_region, root, [&]() -> ExprP {
      em.ints.clear();
      return mixed(dt, root, 2, [&, dt, variant, root](ExprP t) -> ExprP {
        switch (variant) {
          case 0:
            return t;
          case 1:
            return mk_app(sum_name(dt), {root}, {t});
          default:
            return inspect(dt, t);
        }
      });
    });
  }
};

AdtSchema fuzz_schema(std::mt19937_64& rng) {
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  bool tf = coin(0.6), lf = coin(0.4);
  static const char* trees[] = {"data Tree = Node Tree Tree | Leaf Int\n", "data Tree = Node Int Tree Tree | Leaf Int\n",
                                "data Tree = Node Int Int Tree Tree | Leaf Int | Empty\n"};
  std::string t = trees[std::uniform_int_distribution<int>(0, 2)(rng)];
  t += std::string("layout Tree = ") + (tf ? "Factored" : "Flat") + "\n";
  t += std::string("data List = Cons Int List | Nil\nlayout List = ") + (lf ? "Factored" : "Flat") + "\n";
  bool ff = tf || lf || coin(0.5);
  t += "data Forest = FCons Tree List Forest | FNil\nlayout Forest = " + std::string(ff ? "Factored" : "Flat") + "\n";
  return parse_schema(t);
}

}  // namespace

Program constructor_program(const AdtSchema& schema, int dt, const Value& v) {
  check_value(schema, dt, v);
  Program p;
  p.schema = schema;
  Emitter em(p.schema, 1);
  int next = 0;
  p.main = with_root(p.schema, dt, "r", next, "root",
                     [&]() { return em.value(dt, "root", v, [](ExprP x) { return x; }); });
  return p;
}

Program random_program(uint64_t seed) {
  std::mt19937_64 rng(seed);
  ProgGen g(fuzz_schema(rng), seed * 0x9E3779B97F4A7C15ull + 1);
  g.tree = g.p.schema.find("Tree");
  g.list = g.p.schema.find("List");
  g.forest = g.p.schema.find("Forest");
  for (int d : {g.tree, g.list, g.forest}) {
    g.builder(d);
    g.reader(d);
  }
  int roots[] = {g.tree, g.list, g.forest};
  int dt = roots[std::uniform_int_distribution<int>(0, 2)(rng)];
  g.p.main = g.main_for(dt, std::uniform_int_distribution<int>(0, 2)(rng));
  return std::move(g.p);
}

FuzzSummary fuzz_type_safety(uint64_t seed, uint64_t count) {
  if (count == 0) fail(ErrorCode::InvalidArgument, "fuzz count must be positive");
  FuzzSummary sum;
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t ps = seed + i;
    sum.programs++;
    auto note = [&](const std::string& why) {
      if (sum.counterexamples.size() < 5) sum.counterexamples.push_back("seed " + std::to_string(ps) + ": " + why);
    };
    Program p = random_program(ps);
    try {
      Program again = parse_socal(to_text(p));
      if (to_text(again) != to_text(p)) {
        note("printer round trip differs");
        continue;
      }
    } catch (const Error& e) {
      note(std::string("generated program does not parse: ") + e.what());
      continue;
    }
    CheckResult chk = typecheck(p);
    if (!chk.ok) {
      sum.rejected++;
      note("checker rejected a generated program: " + chk.rule + " " + chk.reason + " " + chk.message);
      continue;
    }
    RunOptions o;
    o.check_wf = true;
    RunResult r;
    try {
      r = interpret(p, o);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Stuck) sum.stuck++;
      note(e.what());
      continue;
    }
    sum.steps += r.steps;
    sum.wf_checks += r.wf_checks;
    if (!r.violation.ok) {
      sum.wf_violations++;
      note("clause " + r.violation.clause + " failed at " + r.violation.location + ": " + r.violation.detail);
      continue;
    }
    PureResult pr = evaluate_erased(p);
    bool same = pr.located == r.located && (r.located ? (r.value && pr.value && *r.value == *pr.value) : r.n == pr.n);
    if (!same) {
      sum.erasure_mismatches++;
      note("store result differs from erased evaluation");
      continue;
    }
    sum.passed++;
  }
  return sum;
}

uint64_t fuzz_negative_control(uint64_t seed, uint64_t count) {
  if (count == 0) fail(ErrorCode::InvalidArgument, "count must be positive");
  uint64_t rejected = 0;
  for (uint64_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed + i);
    ProgGen g(fuzz_schema(rng), (seed + i) * 31 + 7);
    g.tree = g.p.schema.find("Tree");
    g.list = g.p.schema.find("List");
    g.forest = g.p.schema.find("Forest");
    for (int d : {g.tree, g.list, g.forest}) {
      g.builder(d);
      g.reader(d);
    }
    // A Node written directly in main, its second child's location taken
    // before the first child exists.
    auto [base, rec] = g.split(g.tree);
    std::string root = g.em.name("root");
    g.p.main = with_root(g.p.schema, g.tree, "g", g.next_region, root, [&]() -> ExprP {
      Child child = [&g](int d, const std::string& l, const K& k) { return g.call(d, l, mk_int(2), k); };
      g.em.ints.clear();
      g.em.bad_after = true;
      return g.em.ctor(g.tree, rec[0], root, child, [](ExprP x) { return x; }, false);
    });
    CheckResult r = typecheck(g.p);
    if (!r.ok && r.reason == "UnwrittenDependency") ++rejected;
  }
  return rejected;
}

}  // namespace packedadt::socal
