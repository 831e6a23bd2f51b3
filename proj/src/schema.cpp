#include "packedadt/schema.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace packedadt {

const char* layout_name(Layout l) { return l == Layout::Flat ? "flat" : "factored"; }

int ConstructorDef::scalar_count() const {
  return int(std::count_if(fields.begin(), fields.end(),
                           [](const FieldType& f) { return f.kind == FieldKind::Int; }));
}
int ConstructorDef::packed_count() const {
  return int(std::count_if(fields.begin(), fields.end(),
                           [](const FieldType& f) { return f.kind == FieldKind::Packed; }));
}
int ConstructorDef::selfrec_count() const {
  return int(std::count_if(fields.begin(), fields.end(),
                           [](const FieldType& f) { return f.kind == FieldKind::SelfRec; }));
}

int DatatypeDef::find_ctor(std::string_view n) const {
  for (size_t i = 0; i < ctors.size(); ++i)
    if (ctors[i].name == n) return int(i);
  return -1;
}

int AdtSchema::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? -1 : it->second;
}

const DatatypeDef& AdtSchema::at(std::string_view name) const {
  int i = find(name);
  if (i < 0) fail(ErrorCode::UnknownDatatype, std::string(name));
  return datatypes[i];
}

void AdtSchema::index_names() {
  index_.clear();
  for (size_t i = 0; i < datatypes.size(); ++i) index_[datatypes[i].name] = int(i);
}

std::string AdtSchema::canonical_text() const {
  std::string out;
  for (const auto& d : datatypes) {
    out += "data " + d.name + " =";
    for (size_t c = 0; c < d.ctors.size(); ++c) {
      if (c) out += " |";
      out += " " + d.ctors[c].name;
      for (const auto& f : d.ctors[c].fields) out += " " + (f.kind == FieldKind::Int ? "Int" : f.datatype);
    }
    out += "\nlayout " + d.name + " = " + (d.layout == Layout::Flat ? "Flat" : "Factored") + "\n";
  }
  return out;
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t AdtSchema::hash() const { return fnv1a64(canonical_text()); }

namespace {

struct Tok {
  std::string text;
  int line, col;
  bool at_line_start;
};

[[noreturn]] void fail_at(ErrorCode c, const std::string& msg, const Tok& t) {
  throw Error(c, msg + " at " + std::to_string(t.line) + ":" + std::to_string(t.col), t.line, t.col);
}

bool is_ident_start(char c) { return std::isalpha((unsigned char)c) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum((unsigned char)c) || c == '_' || c == '\''; }

// Statements are split on newlines and ';'. A line starting with '|' continues
// the previous statement.
std::vector<std::vector<Tok>> tokenize(std::string_view s) {
  std::vector<std::vector<Tok>> stmts(1);
  int line = 1, col = 1;
  bool line_start = true;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k, ++i) {
      if (s[i] == '\n') { ++line; col = 1; } else { ++col; }
    }
  };
  while (i < s.size()) {
    char c = s[i];
    if (c == '#') {
      while (i < s.size() && s[i] != '\n') advance(1);
    } else if (c == '\n' || c == ';') {
      if (!stmts.back().empty()) stmts.emplace_back();
      advance(1);
      if (c == '\n') line_start = true;
    } else if (std::isspace((unsigned char)c)) {
      advance(1);
    } else if (c == '=' || c == '|') {
      if (c == '|' && line_start && stmts.back().empty() && stmts.size() > 1) stmts.pop_back();
      stmts.back().push_back({std::string(1, c), line, col, line_start});
      line_start = false;
      advance(1);
    } else if (is_ident_start(c)) {
      size_t j = i;
      while (j < s.size() && is_ident_char(s[j])) ++j;
      stmts.back().push_back({std::string(s.substr(i, j - i)), line, col, line_start});
      line_start = false;
      advance(j - i);
    } else {
      Tok t{std::string(1, c), line, col, false};
      fail_at(ErrorCode::SyntaxError, "unexpected character '" + t.text + "'", t);
    }
  }
  if (stmts.back().empty()) stmts.pop_back();
  return stmts;
}

bool is_ident(const std::string& s) { return !s.empty() && is_ident_start(s[0]); }

const char* kUnsupportedPrims[] = {"Float", "Double", "String", "Bool", "Char", "Word",
                                   "Word8", "Int8", "Int16", "Int32", "Int64", "Sym"};

struct Pending {
  DatatypeDef def;
  std::vector<std::vector<Tok>> field_toks;  // per ctor, per field token
  Tok name_tok;
};

}  // namespace

AdtSchema parse_schema(std::string_view text) {
  AdtSchema schema;
  std::vector<Pending> pending;
  std::vector<std::pair<Tok, Tok>> layouts;  // (name, value)

  for (const auto& st : tokenize(text)) {
    const Tok& kw = st[0];
    if (kw.text == "data") {
      if (st.size() < 4 || !is_ident(st[1].text) || st[2].text != "=")
        fail_at(ErrorCode::SyntaxError, "expected 'data <Name> = <Ctor> ...'", st.size() > 1 ? st[1] : kw);
      Pending p;
      p.def.name = st[1].text;
      p.name_tok = st[1];
      bool expect_ctor = true;
      for (size_t k = 3; k < st.size(); ++k) {
        const Tok& t = st[k];
        if (t.text == "|") {
          if (expect_ctor) fail_at(ErrorCode::SyntaxError, "expected constructor", t);
          expect_ctor = true;
        } else if (t.text == "=") {
          fail_at(ErrorCode::SyntaxError, "unexpected '='", t);
        } else if (expect_ctor) {
          if (!std::isupper((unsigned char)t.text[0]))
            fail_at(ErrorCode::SyntaxError, "constructor names start uppercase", t);
          ConstructorDef c;
          c.name = t.text;
          p.def.ctors.push_back(std::move(c));
          p.field_toks.emplace_back();
          expect_ctor = false;
        } else {
          FieldType f;
          f.datatype = t.text;
          p.def.ctors.back().fields.push_back(f);
          p.field_toks.back().push_back(t);
        }
      }
      if (expect_ctor) fail_at(ErrorCode::SyntaxError, "expected constructor", st.back());
      pending.push_back(std::move(p));
    } else if (kw.text == "layout") {
      if (st.size() != 4 || !is_ident(st[1].text) || st[2].text != "=")
        fail_at(ErrorCode::SyntaxError, "expected 'layout <Name> = Flat|Factored'", kw);
      if (st[3].text != "Flat" && st[3].text != "Factored")
        fail_at(ErrorCode::SyntaxError, "layout must be Flat or Factored", st[3]);
      layouts.emplace_back(st[1], st[3]);
    } else {
      fail_at(ErrorCode::SyntaxError, "expected 'data' or 'layout'", kw);
    }
  }

  for (auto& p : pending) {
    if (schema.find(p.def.name) >= 0) fail_at(ErrorCode::DuplicateDatatype, p.def.name, p.name_tok);
    schema.datatypes.push_back(p.def);
    schema.index_names();
  }

  std::vector<bool> layout_seen(schema.datatypes.size(), false);
  for (auto& [n, v] : layouts) {
    int i = schema.find(n.text);
    if (i < 0) fail_at(ErrorCode::UnknownDatatype, n.text, n);
    if (layout_seen[i]) fail_at(ErrorCode::SyntaxError, "duplicate layout for " + n.text, n);
    layout_seen[i] = true;
    schema.datatypes[i].layout = v.text == "Flat" ? Layout::Flat : Layout::Factored;
  }

  for (size_t d = 0; d < schema.datatypes.size(); ++d) {
    auto& def = schema.datatypes[d];
    const auto& p = pending[d];
    if (def.ctors.size() > size_t(kMaxConstructors))
      fail_at(ErrorCode::TooManyConstructors, def.name + " has " + std::to_string(def.ctors.size()), p.name_tok);
    for (size_t c = 0; c < def.ctors.size(); ++c) {
      auto& ctor = def.ctors[c];
      ctor.tag = uint8_t(c);
      for (size_t c2 = 0; c2 < c; ++c2)
        if (def.ctors[c2].name == ctor.name)
          fail_at(ErrorCode::SyntaxError, "duplicate constructor " + ctor.name, p.name_tok);
      FieldKind prev = FieldKind::Int;
      for (size_t k = 0; k < ctor.fields.size(); ++k) {
        auto& f = ctor.fields[k];
        const Tok& t = p.field_toks[c][k];
        if (f.datatype == "Int") {
          f.kind = FieldKind::Int;
          f.datatype.clear();
        } else {
          bool prim = std::any_of(std::begin(kUnsupportedPrims), std::end(kUnsupportedPrims),
                                  [&](const char* s) { return f.datatype == s; });
          if (prim || !std::isupper((unsigned char)f.datatype[0]))
            fail_at(ErrorCode::UnsupportedFieldType, f.datatype, t);
          f.dt = schema.find(f.datatype);
          if (f.dt < 0) fail_at(ErrorCode::UnknownDatatype, f.datatype, t);
          f.kind = f.dt == int(d) ? FieldKind::SelfRec : FieldKind::Packed;
          if (def.layout == Layout::Flat && schema.datatypes[f.dt].layout == Layout::Factored)
            fail_at(ErrorCode::FactoredInFlat, f.datatype + " is Factored inside Flat " + def.name, t);
        }
        if (f.kind < prev)
          fail_at(ErrorCode::FieldOrderViolation,
                  ctor.name + ": scalars, then packed fields, then self-recursive fields", t);
        prev = f.kind;
      }
    }
  }

  // A Factored datatype reaching itself through non-self packed Factored fields
  // would need infinitely many buffers.
  int n = int(schema.datatypes.size());
  std::vector<int> state(n, 0);
  std::function<void(int)> visit = [&](int d) {
    state[d] = 1;
    for (const auto& c : schema.datatypes[d].ctors)
      for (const auto& f : c.fields) {
        if (f.kind != FieldKind::Packed || schema.datatypes[f.dt].layout != Layout::Factored) continue;
        if (state[f.dt] == 1)
          fail_at(ErrorCode::InfiniteShape, "factored cycle through " + schema.datatypes[f.dt].name,
                  pending[d].name_tok);
        if (state[f.dt] == 0) visit(f.dt);
      }
    state[d] = 2;
  };
  for (int d = 0; d < n; ++d)
    if (schema.datatypes[d].layout == Layout::Factored && state[d] == 0) visit(d);

  return schema;
}

const ShapeEntry* BufferShape::entry(int ctor, int field) const {
  for (const auto& e : entries)
    if (e.ctor == ctor && e.field == field) return &e;
  return nullptr;
}

bool operator==(const BufferShape& a, const BufferShape& b) {
  if (a.datatype != b.datatype || a.layout != b.layout || a.base != b.base ||
      a.buffer_count != b.buffer_count || a.entries.size() != b.entries.size() || a.roles != b.roles)
    return false;
  for (size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    if (x.ctor != y.ctor || x.field != y.field || x.buffer != y.buffer) return false;
    if (bool(x.nested) != bool(y.nested)) return false;
    if (x.nested && !(*x.nested == *y.nested)) return false;
  }
  return true;
}

namespace {

BufferShape build_shape(const AdtSchema& schema, int d, int base, std::vector<int>& on_path) {
  const auto& def = schema[d];
  BufferShape s;
  s.datatype = d;
  s.layout = def.layout;
  s.base = base;
  s.buffer_count = 1;
  s.roles.push_back("tags");
  if (def.layout == Layout::Flat) {
    s.roles[0] = def.name;
    return s;
  }
  if (std::find(on_path.begin(), on_path.end(), d) != on_path.end())
    fail(ErrorCode::InfiniteShape, def.name);
  on_path.push_back(d);
  for (size_t c = 0; c < def.ctors.size(); ++c) {
    const auto& ctor = def.ctors[c];
    for (size_t j = 0; j < ctor.fields.size(); ++j) {
      const auto& f = ctor.fields[j];
      if (f.kind == FieldKind::SelfRec) continue;
      ShapeEntry e;
      e.ctor = int(c);
      e.field = int(j);
      std::string key = ctor.name + "." + std::to_string(j);
      if (f.kind == FieldKind::Int) {
        e.buffer = base + s.buffer_count;
        s.buffer_count += 1;
        s.roles.push_back(key + ":Int");
      } else {
        auto nested = std::make_shared<BufferShape>(build_shape(schema, f.dt, base + s.buffer_count, on_path));
        s.buffer_count += nested->buffer_count;
        for (const auto& r : nested->roles) s.roles.push_back(key + ":" + schema[f.dt].name + (nested->layout == Layout::Flat ? "" : "/" + r));
        e.nested = std::move(nested);
      }
      s.entries.push_back(std::move(e));
    }
  }
  on_path.pop_back();
  return s;
}

}  // namespace

BufferShape buffer_shape(const AdtSchema& schema, int datatype, int base) {
  if (datatype < 0 || datatype >= int(schema.datatypes.size()))
    fail(ErrorCode::UnknownDatatype, "datatype index " + std::to_string(datatype));
  std::vector<int> path;
  return build_shape(schema, datatype, base, path);
}

BufferShape buffer_shape(const AdtSchema& schema, std::string_view datatype) {
  int d = schema.find(datatype);
  if (d < 0) fail(ErrorCode::UnknownDatatype, std::string(datatype));
  return buffer_shape(schema, d, 0);
}

int cursor_count(const BufferShape& shape) {
  int n = 1;
  for (const auto& e : shape.entries) n += e.nested ? cursor_count(*e.nested) : 1;
  return n;
}

}  // namespace packedadt
