#include <charconv>
#include <set>
#include <sstream>

#include "packedadt/socal.hpp"

namespace packedadt::socal {

namespace {

struct Sx {
  bool list = false;
  std::string atom;
  std::vector<Sx> items;
  int line = 0, col = 0;
};

[[noreturn]] void syntax(const Sx& at, const std::string& msg) {
  throw Error(ErrorCode::SyntaxError, msg + " at " + std::to_string(at.line) + ":" + std::to_string(at.col), at.line,
              at.col);
}

[[noreturn]] void unbound(int line, int col, const std::string& what) {
  throw Error(ErrorCode::UnboundName, what + " at " + std::to_string(line) + ":" + std::to_string(col), line, col);
}

class Reader {
 public:
  explicit Reader(std::string_view t) : t_(t) {}

  std::vector<Sx> all() {
    std::vector<Sx> out;
    for (;;) {
      skip();
      if (i_ >= t_.size()) return out;
      out.push_back(read());
    }
  }

 private:
  std::string_view t_;
  size_t i_ = 0;
  int line_ = 1, col_ = 1;

  void adv() {
    if (t_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void skip() {
    while (i_ < t_.size()) {
      char c = t_[i_];
      if (c == ';') {
        while (i_ < t_.size() && t_[i_] != '\n') adv();
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        adv();
      } else {
        break;
      }
    }
  }

  Sx read() {
    Sx s;
    s.line = line_;
    s.col = col_;
    char c = t_[i_];
    if (c == '(' || c == '[') {
      char close = c == '(' ? ')' : ']';
      adv();
      s.list = true;
      for (;;) {
        skip();
        if (i_ >= t_.size()) syntax(s, "unclosed list");
        if (t_[i_] == ')' || t_[i_] == ']') {
          if (t_[i_] != close) {
            Sx at;
            at.line = line_;
            at.col = col_;
            syntax(at, "mismatched bracket");
          }
          adv();
          return s;
        }
        s.items.push_back(read());
      }
    }
    if (c == ')' || c == ']') syntax(s, "unexpected close bracket");
    size_t b = i_;
    while (i_ < t_.size()) {
      char d = t_[i_];
      if (d == '(' || d == ')' || d == '[' || d == ']' || d == ';' || d == ' ' || d == '\t' || d == '\n' ||
          d == '\r')
        break;
      adv();
    }
    s.atom = std::string(t_.substr(b, i_ - b));
    return s;
  }
};

bool is_int(const std::string& a) {
  size_t k = (!a.empty() && a[0] == '-') ? 1 : 0;
  if (k >= a.size()) return false;
  for (size_t i = k; i < a.size(); ++i)
    if (a[i] < '0' || a[i] > '9') return false;
  return true;
}

int64_t to_int(const Sx& s) {
  int64_t v = 0;
  auto r = std::from_chars(s.atom.data(), s.atom.data() + s.atom.size(), v);
  if (r.ec != std::errc() || r.ptr != s.atom.data() + s.atom.size()) syntax(s, "integer out of range");
  return v;
}

bool reserved(const std::string& a) {
  static const std::set<std::string> kw = {"let", "letregion", "letloc", "case", "if", "data", "layout", "define",
                                           "main", "loc", "Int", "start", "+1", "after", "projTagLoc",
                                           "projFieldLoc", "introLocVec", "+", "-", "*", "<=", "<", "="};
  return kw.count(a) > 0;
}

const std::string& sym(const Sx& s, const char* what) {
  if (s.list || s.atom.empty() || is_int(s.atom)) syntax(s, std::string("expected ") + what);
  if (reserved(s.atom)) syntax(s, "reserved word '" + s.atom + "' used as " + what);
  return s.atom;
}

bool is_head(const Sx& s, const char* h) { return s.list && !s.items.empty() && !s.items[0].list && s.items[0].atom == h; }

void arity(const Sx& s, size_t n) {
  if (s.items.size() != n) syntax(s, "'" + s.items[0].atom + "' expects " + std::to_string(n - 1) + " operands");
}

const std::set<std::string> kPrims = {"+", "-", "*", "<=", "<", "="};

class Parser {
 public:
  Program p;
  std::set<std::string> ctors;

  void schema(const std::vector<Sx>& forms) {
    std::string text;
    for (const auto& f : forms) {
      if (is_head(f, "data")) {
        if (f.items.size() < 3) syntax(f, "data needs a name and constructors");
        text += "data " + sym(f.items[1], "datatype name") + " =";
        for (size_t i = 2; i < f.items.size(); ++i) {
          const Sx& c = f.items[i];
          if (i > 2) text += " |";
          if (!c.list) {
            text += " " + sym(c, "constructor name");
            continue;
          }
          if (c.items.empty()) syntax(c, "empty constructor");
          text += " " + sym(c.items[0], "constructor name");
          for (size_t j = 1; j < c.items.size(); ++j) {
            if (c.items[j].list) syntax(c.items[j], "expected field type");
            text += " " + c.items[j].atom;
          }
        }
        text += "\n";
      } else if (is_head(f, "layout")) {
        arity(f, 3);
        text += "layout " + sym(f.items[1], "datatype name") + " = " + f.items[2].atom + "\n";
      }
    }
    p.schema = parse_schema(text);
    for (const auto& d : p.schema.datatypes)
      for (const auto& c : d.ctors)
        if (!ctors.insert(c.name).second) throw Error(ErrorCode::SyntaxError, "constructor " + c.name + " is defined twice");
  }

  RegionTree regions(const Sx& s) {
    RegionTree t;
    if (!s.list) {
      t.region = sym(s, "region");
      return t;
    }
    if (s.items.empty()) syntax(s, "empty region tree");
    t.is_factored = true;
    t.region = sym(s.items[0], "region");
    for (size_t i = 1; i < s.items.size(); ++i) {
      const Sx& e = s.items[i];
      if (!e.list || e.items.size() != 2) syntax(e, "expected ((K j) regions)");
      t.entries.push_back({key(e.items[0]), regions(e.items[1])});
    }
    return t;
  }

  Key key(const Sx& s) {
    if (!s.list || s.items.size() != 2 || s.items[0].list || s.items[1].list || !is_int(s.items[1].atom))
      syntax(s, "expected (Constructor field)");
    return {sym(s.items[0], "constructor"), int(to_int(s.items[1]))};
  }

  LocExpr locexpr(const Sx& s) {
    if (!s.list || s.items.empty() || s.items[0].list) syntax(s, "expected a location expression");
    const std::string& h = s.items[0].atom;
    LocExpr le;
    if (h == "start") {
      le.kind = LocExpr::Start;
      if (s.items.size() == 2) {
        le.regions = regions(s.items[1]);
        if (le.regions.factored()) syntax(s, "factored start needs a datatype");
      } else {
        arity(s, 3);
        le.datatype = sym(s.items[1], "datatype");
        le.regions = regions(s.items[2]);
        le.regions.datatype = le.datatype;
      }
    } else if (h == "+1") {
      arity(s, 2);
      le.kind = LocExpr::Next;
      le.loc = sym(s.items[1], "location");
    } else if (h == "after") {
      arity(s, 3);
      le.kind = LocExpr::After;
      le.datatype = sym(s.items[1], "datatype");
      le.loc = sym(s.items[2], "location");
    } else if (h == "projTagLoc") {
      arity(s, 2);
      le.kind = LocExpr::ProjTag;
      le.loc = sym(s.items[1], "location");
    } else if (h == "projFieldLoc") {
      arity(s, 4);
      le.kind = LocExpr::ProjField;
      if (s.items[2].list || !is_int(s.items[2].atom)) syntax(s.items[2], "expected field index");
      le.key = {sym(s.items[1], "constructor"), int(to_int(s.items[2]))};
      le.loc = sym(s.items[3], "location");
    } else if (h == "introLocVec") {
      if (s.items.size() < 3) syntax(s, "introLocVec needs a datatype and a tag location");
      le.kind = LocExpr::IntroLocVec;
      le.datatype = sym(s.items[1], "datatype");
      le.loc = sym(s.items[2], "location");
      for (size_t i = 3; i < s.items.size(); ++i) {
        const Sx& e = s.items[i];
        if (!e.list || e.items.size() != 2) syntax(e, "expected ((K j) location)");
        le.fields.push_back({key(e.items[0]), sym(e.items[1], "location")});
      }
    } else {
      syntax(s, "unknown location form '" + h + "'");
    }
    return le;
  }

  ExprP atom(const Sx& s) {
    if (s.list) syntax(s, "constructor and call arguments must be integers or variables");
    return expr(s);
  }

  ExprP expr(const Sx& s) {
    auto e = std::make_shared<Expr>();
    e->line = s.line;
    e->col = s.col;
    if (!s.list) {
      if (is_int(s.atom)) {
        e->kind = Expr::Int;
        e->n = to_int(s);
      } else {
        e->kind = Expr::Var;
        e->name = sym(s, "variable");
      }
      return e;
    }
    if (s.items.empty()) syntax(s, "empty expression");
    if (s.items[0].list) syntax(s, "expected an operator");
    const std::string& h = s.items[0].atom;
    if (h == "let") {
      arity(s, 4);
      e->kind = Expr::Let;
      e->name = sym(s.items[1], "variable");
      e->args = {expr(s.items[2]), expr(s.items[3])};
    } else if (h == "letregion") {
      arity(s, 3);
      e->kind = Expr::LetRegion;
      e->name = sym(s.items[1], "region");
      e->args = {expr(s.items[2])};
    } else if (h == "letloc") {
      arity(s, 4);
      e->kind = Expr::LetLoc;
      const Sx& b = s.items[1];
      if (b.list) {
        if (b.items.size() != 2) syntax(b, "expected (location region)");
        e->name = sym(b.items[0], "location");
        e->annot = sym(b.items[1], "region");
      } else {
        e->name = sym(b, "location");
      }
      e->le = locexpr(s.items[2]);
      e->args = {expr(s.items[3])};
    } else if (h == "case") {
      if (s.items.size() < 3) syntax(s, "case needs a scrutinee and branches");
      e->kind = Expr::Case;
      e->name = sym(s.items[1], "variable");
      for (size_t i = 2; i < s.items.size(); ++i) {
        const Sx& b = s.items[i];
        if (!b.list || b.items.size() != 3 || !b.items[1].list) syntax(b, "expected (Constructor (binders) body)");
        Branch br;
        br.line = b.line;
        br.col = b.col;
        br.ctor = sym(b.items[0], "constructor");
        for (const auto& v : b.items[1].items) {
          if (v.list) {
            if (v.items.size() != 2) syntax(v, "expected (variable location)");
            br.binds.push_back({sym(v.items[0], "variable"), sym(v.items[1], "location")});
          } else {
            br.binds.push_back({sym(v, "variable"), ""});
          }
        }
        for (const auto& o : e->branches)
          if (o.ctor == br.ctor) syntax(b, "duplicate branch for " + br.ctor);
        br.body = expr(b.items[2]);
        e->branches.push_back(std::move(br));
      }
    } else if (h == "if") {
      arity(s, 4);
      e->kind = Expr::If;
      e->args = {expr(s.items[1]), expr(s.items[2]), expr(s.items[3])};
    } else if (kPrims.count(h)) {
      arity(s, 3);
      e->kind = Expr::Prim;
      e->name = h;
      e->args = {expr(s.items[1]), expr(s.items[2])};
    } else if (ctors.count(h)) {
      if (s.items.size() < 2) syntax(s, "constructor needs a destination location");
      e->kind = Expr::Ctor;
      e->name = h;
      e->locs = {sym(s.items[1], "location")};
      for (size_t i = 2; i < s.items.size(); ++i) e->args.push_back(atom(s.items[i]));
    } else {
      if (s.items.size() < 2 || !s.items[1].list) syntax(s, "call needs a location argument list");
      e->kind = Expr::App;
      e->name = sym(s.items[0], "function");
      for (const auto& l : s.items[1].items) e->locs.push_back(sym(l, "location"));
      for (size_t i = 2; i < s.items.size(); ++i) e->args.push_back(atom(s.items[i]));
    }
    return e;
  }

  FunDef fundef(const Sx& s) {
    arity(s, 4);
    const Sx& sig = s.items[1];
    if (!sig.list || sig.items.empty()) syntax(sig, "expected (name params...)");
    FunDef f;
    f.line = s.line;
    f.col = s.col;
    f.name = sym(sig.items[0], "function name");
    if (ctors.count(f.name)) syntax(sig, "function name clashes with a constructor");
    for (size_t i = 1; i < sig.items.size(); ++i) {
      const Sx& q = sig.items[i];
      if (!q.list || q.items.size() < 2) syntax(q, "expected a parameter");
      if (is_head(q, "loc")) {
        arity(q, 4);
        LocParam lp{sym(q.items[1], "location"), sym(q.items[2], "datatype"), regions(q.items[3])};
        if (lp.regions.factored()) lp.regions.datatype = lp.datatype;
        f.locs.push_back(std::move(lp));
      } else if (q.items.size() == 2) {
        if (q.items[1].list || q.items[1].atom != "Int") syntax(q, "expected (x Int)");
        f.params.push_back({sym(q.items[0], "parameter"), "", ""});
      } else {
        arity(q, 3);
        f.params.push_back({sym(q.items[0], "parameter"), sym(q.items[1], "datatype"), sym(q.items[2], "location")});
      }
    }
    const Sx& r = s.items[2];
    if (!r.list && r.atom == "Int") {
      f.ret = {"", "", ""};
    } else if (r.list && r.items.size() == 2) {
      f.ret = {"", sym(r.items[0], "datatype"), sym(r.items[1], "location")};
    } else {
      syntax(r, "expected Int or (Datatype location)");
    }
    f.body = expr(s.items[3]);
    return f;
  }
};

// Scope check for variables, locations, regions and functions.
struct Scope {
  const Program& p;
  std::vector<std::string> vars, locs, regions;

  static bool has(const std::vector<std::string>& v, const std::string& x) {
    for (auto it = v.rbegin(); it != v.rend(); ++it)
      if (*it == x) return true;
    return false;
  }

  void loc(const Expr& e, const std::string& l) {
    if (!has(locs, l)) unbound(e.line, e.col, "location " + l);
  }

  void region_tree(const Expr& e, const RegionTree& t) {
    if (!has(regions, t.region)) unbound(e.line, e.col, "region " + t.region);
    for (const auto& [k, sub] : t.entries) region_tree(e, sub);
  }

  void check(const Expr& e) {
    switch (e.kind) {
      case Expr::Int:
        return;
      case Expr::Var:
        if (!has(vars, e.name)) unbound(e.line, e.col, "variable " + e.name);
        return;
      case Expr::Let:
        check(*e.args[0]);
        vars.push_back(e.name);
        check(*e.args[1]);
        vars.pop_back();
        return;
      case Expr::LetRegion:
        regions.push_back(e.name);
        check(*e.args[0]);
        regions.pop_back();
        return;
      case Expr::LetLoc: {
        const LocExpr& le = e.le;
        if (le.kind == LocExpr::Start) region_tree(e, le.regions);
        else loc(e, le.loc);
        for (const auto& [k, l] : le.fields) loc(e, l);
        if (!e.annot.empty() && !has(regions, e.annot)) unbound(e.line, e.col, "region " + e.annot);
        locs.push_back(e.name);
        check(*e.args[0]);
        locs.pop_back();
        return;
      }
      case Expr::Ctor:
        loc(e, e.locs[0]);
        for (const auto& a : e.args) check(*a);
        return;
      case Expr::App:
        if (!p.find(e.name)) unbound(e.line, e.col, "function " + e.name);
        for (const auto& l : e.locs) loc(e, l);
        for (const auto& a : e.args) check(*a);
        return;
      case Expr::Case:
        if (!has(vars, e.name)) unbound(e.line, e.col, "variable " + e.name);
        for (const auto& b : e.branches) {
          bool known = false;
          for (const auto& d : p.schema.datatypes) known = known || d.find_ctor(b.ctor) >= 0;
          if (!known) unbound(b.line, b.col, "constructor " + b.ctor);
          size_t nv = vars.size(), nl = locs.size();
          for (const auto& bd : b.binds) {
            vars.push_back(bd.var);
            if (!bd.loc.empty()) locs.push_back(bd.loc);
          }
          check(*b.body);
          vars.resize(nv);
          locs.resize(nl);
        }
        return;
      case Expr::If:
      case Expr::Prim:
        for (const auto& a : e.args) check(*a);
        return;
    }
  }
};

void print_regions(std::ostream& o, const RegionTree& t) {
  if (!t.factored()) {
    o << t.region;
    return;
  }
  o << "(" << t.region;
  for (const auto& [k, sub] : t.entries) {
    o << " ((" << k.ctor << " " << k.field << ") ";
    print_regions(o, sub);
    o << ")";
  }
  o << ")";
}

void print_le(std::ostream& o, const LocExpr& le) {
  switch (le.kind) {
    case LocExpr::Start:
      o << "(start ";
      if (le.regions.factored()) o << le.datatype << " ";
      print_regions(o, le.regions);
      o << ")";
      return;
    case LocExpr::Next:
      o << "(+1 " << le.loc << ")";
      return;
    case LocExpr::After:
      o << "(after " << le.datatype << " " << le.loc << ")";
      return;
    case LocExpr::ProjTag:
      o << "(projTagLoc " << le.loc << ")";
      return;
    case LocExpr::ProjField:
      o << "(projFieldLoc " << le.key.ctor << " " << le.key.field << " " << le.loc << ")";
      return;
    case LocExpr::IntroLocVec:
      o << "(introLocVec " << le.datatype << " " << le.loc;
      for (const auto& [k, l] : le.fields) o << " ((" << k.ctor << " " << k.field << ") " << l << ")";
      o << ")";
      return;
  }
}

void print(std::ostream& o, const Expr& e, int ind, bool head_only) {
  auto nl = [&](int d) {
    o << "\n" << std::string(size_t(d) * 2, ' ');
  };
  auto body = [&](const Expr& b) {
    if (head_only) {
      o << " ...";
      return;
    }
    nl(ind + 1);
    print(o, b, ind + 1, false);
  };
  switch (e.kind) {
    case Expr::Int:
      o << e.n;
      return;
    case Expr::Var:
      o << e.name;
      return;
    case Expr::Let:
      o << "(let " << e.name << " ";
      if (head_only) o << "...";
      else print(o, *e.args[0], ind + 1, false);
      body(*e.args[1]);
      o << ")";
      return;
    case Expr::LetRegion:
      o << "(letregion " << e.name;
      body(*e.args[0]);
      o << ")";
      return;
    case Expr::LetLoc:
      o << "(letloc ";
      if (e.annot.empty()) o << e.name;
      else o << "(" << e.name << " " << e.annot << ")";
      o << " ";
      print_le(o, e.le);
      body(*e.args[0]);
      o << ")";
      return;
    case Expr::Ctor:
      o << "(" << e.name << " " << e.locs[0];
      for (const auto& a : e.args) {
        o << " ";
        print(o, *a, ind, false);
      }
      o << ")";
      return;
    case Expr::App:
      o << "(" << e.name << " (";
      for (size_t i = 0; i < e.locs.size(); ++i) o << (i ? " " : "") << e.locs[i];
      o << ")";
      for (const auto& a : e.args) {
        o << " ";
        print(o, *a, ind, false);
      }
      o << ")";
      return;
    case Expr::Case:
      o << "(case " << e.name;
      if (head_only) {
        o << " ...)";
        return;
      }
      for (const auto& b : e.branches) {
        nl(ind + 1);
        o << "(" << b.ctor << " (";
        for (size_t i = 0; i < b.binds.size(); ++i) {
          o << (i ? " " : "");
          if (b.binds[i].loc.empty()) o << b.binds[i].var;
          else o << "(" << b.binds[i].var << " " << b.binds[i].loc << ")";
        }
        o << ")";
        nl(ind + 2);
        print(o, *b.body, ind + 2, false);
        o << ")";
      }
      o << ")";
      return;
    case Expr::If:
      o << "(if ";
      print(o, *e.args[0], ind + 1, false);
      if (head_only) {
        o << " ...)";
        return;
      }
      nl(ind + 1);
      print(o, *e.args[1], ind + 1, false);
      nl(ind + 1);
      print(o, *e.args[2], ind + 1, false);
      o << ")";
      return;
    case Expr::Prim:
      o << "(" << e.name << " ";
      print(o, *e.args[0], ind, head_only);
      o << " ";
      print(o, *e.args[1], ind, head_only);
      o << ")";
      return;
  }
}

}  // namespace

const FunDef* Program::find(std::string_view name) const {
  for (const auto& f : funs)
    if (f.name == name) return &f;
  return nullptr;
}

Program parse_socal(std::string_view text) {
  Reader r(text);
  auto forms = r.all();
  Parser ps;
  for (const auto& f : forms)
    if (!is_head(f, "data") && !is_head(f, "layout") && !is_head(f, "define") && !is_head(f, "main"))
      syntax(f, "expected data, layout, define or main");
  ps.schema(forms);
  for (const auto& f : forms) {
    if (is_head(f, "define")) {
      FunDef d = ps.fundef(f);
      if (ps.p.find(d.name)) syntax(f, "function " + d.name + " is defined twice");
      ps.p.funs.push_back(std::move(d));
    } else if (is_head(f, "main")) {
      arity(f, 2);
      if (ps.p.main) syntax(f, "main is defined twice");
      ps.p.main = ps.expr(f.items[1]);
    }
  }
  if (!ps.p.main) throw Error(ErrorCode::SyntaxError, "program has no main");
  for (const auto& f : ps.p.funs) {
    Scope sc{ps.p, {}, {}, {}};
    for (const auto& lp : f.locs) {
      sc.locs.push_back(lp.name);
      std::vector<const RegionTree*> st = {&lp.regions};
      while (!st.empty()) {
        const RegionTree* t = st.back();
        st.pop_back();
        sc.regions.push_back(t->region);
        for (const auto& [k, sub] : t->entries) st.push_back(&sub);
      }
    }
    for (const auto& q : f.params) {
      sc.vars.push_back(q.name);
      if (!q.loc.empty() && !Scope::has(sc.locs, q.loc)) unbound(f.line, f.col, "location " + q.loc);
    }
    if (!f.ret.loc.empty() && !Scope::has(sc.locs, f.ret.loc)) unbound(f.line, f.col, "location " + f.ret.loc);
    sc.check(*f.body);
  }
  Scope sc{ps.p, {}, {}, {}};
  sc.check(*ps.p.main);
  return std::move(ps.p);
}

std::string to_text(const Expr& e) {
  std::ostringstream o;
  print(o, e, 0, false);
  return o.str();
}

std::string head_text(const Expr& e) {
  std::ostringstream o;
  print(o, e, 0, true);
  std::string s = o.str();
  for (auto& c : s)
    if (c == '\n') c = ' ';
  return s;
}

std::string to_text(const Program& p) {
  std::ostringstream o;
  for (const auto& d : p.schema.datatypes) {
    o << "(data " << d.name;
    for (const auto& c : d.ctors) {
      o << " (" << c.name;
      for (const auto& f : c.fields) o << " " << (f.kind == FieldKind::Int ? "Int" : f.datatype);
      o << ")";
    }
    o << ")\n(layout " << d.name << " " << (d.layout == Layout::Flat ? "Flat" : "Factored") << ")\n";
  }
  for (const auto& f : p.funs) {
    o << "\n(define (" << f.name;
    for (const auto& lp : f.locs) {
      o << " (loc " << lp.name << " " << lp.datatype << " ";
      print_regions(o, lp.regions);
      o << ")";
    }
    for (const auto& q : f.params) {
      if (q.datatype.empty()) o << " (" << q.name << " Int)";
      else o << " (" << q.name << " " << q.datatype << " " << q.loc << ")";
    }
    o << ") ";
    if (f.ret.datatype.empty()) o << "Int";
    else o << "(" << f.ret.datatype << " " << f.ret.loc << ")";
    o << "\n  ";
    print(o, *f.body, 1, false);
    o << ")\n";
  }
  o << "\n(main\n  ";
  print(o, *p.main, 1, false);
  o << ")\n";
  return o.str();
}

ExprP mk_int(int64_t n) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Int;
  e->n = n;
  return e;
}

ExprP mk_var(std::string x) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Var;
  e->name = std::move(x);
  return e;
}

ExprP mk_let(std::string x, ExprP bound, ExprP body) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Let;
  e->name = std::move(x);
  e->args = {std::move(bound), std::move(body)};
  return e;
}

ExprP mk_letregion(std::string r, ExprP body) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::LetRegion;
  e->name = std::move(r);
  e->args = {std::move(body)};
  return e;
}

ExprP mk_letloc(std::string l, LocExpr le, ExprP body) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::LetLoc;
  e->name = std::move(l);
  e->le = std::move(le);
  e->args = {std::move(body)};
  return e;
}

ExprP mk_ctor(std::string k, std::string loc, std::vector<ExprP> atoms) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Ctor;
  e->name = std::move(k);
  e->locs = {std::move(loc)};
  e->args = std::move(atoms);
  return e;
}

ExprP mk_app(std::string f, std::vector<std::string> locs, std::vector<ExprP> atoms) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::App;
  e->name = std::move(f);
  e->locs = std::move(locs);
  e->args = std::move(atoms);
  return e;
}

ExprP mk_case(std::string x, std::vector<Branch> branches) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Case;
  e->name = std::move(x);
  e->branches = std::move(branches);
  return e;
}

ExprP mk_if(ExprP c, ExprP t, ExprP f) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::If;
  e->args = {std::move(c), std::move(t), std::move(f)};
  return e;
}

ExprP mk_prim(std::string op, ExprP a, ExprP b) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Prim;
  e->name = std::move(op);
  e->args = {std::move(a), std::move(b)};
  return e;
}

}  // namespace packedadt::socal
