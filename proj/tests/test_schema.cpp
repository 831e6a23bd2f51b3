#include <functional>

#include "common.hpp"
#include "doctest.h"

using namespace packedadt;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_schema(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a parse error for: " << text);
  return ErrorCode::InvalidArgument;
}

// Counts shape leaves straight from the definitions.
int leaves(const AdtSchema& s, int d) {
  if (s[d].layout == Layout::Flat) return 1;
  int n = 1;
  for (const auto& c : s[d].ctors)
    for (const auto& f : c.fields)
      if (f.kind == FieldKind::Int) n += 1;
      else if (f.kind == FieldKind::Packed) n += leaves(s, f.dt);
  return n;
}

const char* kNested =
    "data List = Cons Int List | Nil\n"
    "layout List = Flat\n"
    "data NestedList = NCons Int List NestedList | End\n"
    "layout NestedList = Factored\n";

}  // namespace

TEST_CASE("list schema on one line with declaration-order tags") {
  auto s = parse_schema("data List = Cons Int List | Nil; layout List = Factored");
  const auto& l = s.at("List");
  CHECK(l.layout == Layout::Factored);
  REQUIRE(l.ctors.size() == 2);
  CHECK(l.ctors[0].name == "Cons");
  CHECK(l.ctors[0].tag == 0);
  CHECK(l.ctors[1].name == "Nil");
  CHECK(l.ctors[1].tag == 1);
  CHECK(l.ctors[0].fields[1].kind == FieldKind::SelfRec);
}

TEST_CASE("tree schema: Leaf Int is field (Leaf, 0)") {
  auto s = parse_schema(fx::kTreeFactored);
  const auto& t = s.at("Tree");
  CHECK(t.ctors[1].name == "Leaf");
  CHECK(t.ctors[1].fields.size() == 1);
  CHECK(t.ctors[1].fields[0].kind == FieldKind::Int);
  auto sh = buffer_shape(s, "Tree");
  REQUIRE(sh.entries.size() == 1);
  CHECK(sh.entries[0].ctor == 1);
  CHECK(sh.entries[0].field == 0);
}

TEST_CASE("parse errors") {
  CHECK(code_of("data Bad = K Bad Int") == ErrorCode::FieldOrderViolation);
  CHECK(code_of("data A = X Int\ndata A = Y") == ErrorCode::DuplicateDatatype);
  CHECK(code_of("data A = X B") == ErrorCode::UnknownDatatype);
  CHECK(code_of("data A = X Float") == ErrorCode::UnsupportedFieldType);
  CHECK(code_of("data A = X a") == ErrorCode::UnsupportedFieldType);
  CHECK(code_of("layout Q = Flat") == ErrorCode::UnknownDatatype);
  CHECK(code_of("data A = X | ") == ErrorCode::SyntaxError);
  CHECK(code_of("data A = X\nlayout A = Sideways") == ErrorCode::SyntaxError);
  CHECK(code_of("data = X") == ErrorCode::SyntaxError);
  // Packed field after a self-recursive one.
  CHECK(code_of("data L = C Int L | N\ndata B = K B L | E") == ErrorCode::FieldOrderViolation);
  // A flat buffer cannot embed a multi-buffer value.
  CHECK(code_of("data F = A Int F | B\nlayout F = Factored\ndata G = K F | E") == ErrorCode::FactoredInFlat);
  CHECK(code_of("data A = X B | Y\nlayout A = Factored\ndata B = P A | Q\nlayout B = Factored") ==
        ErrorCode::InfiniteShape);
}

TEST_CASE("too many constructors") {
  std::string s = "data Big =";
  for (int i = 0; i < 251; ++i) s += (i ? " | C" : " C") + std::to_string(i);
  CHECK(code_of(s) == ErrorCode::TooManyConstructors);
  std::string ok = "data Big =";
  for (int i = 0; i < 250; ++i) ok += (i ? " | C" : " C") + std::to_string(i);
  CHECK(parse_schema(ok).at("Big").ctors.back().tag == 249);
}

TEST_CASE("diagnostics carry line and column") {
  try {
    parse_schema("data A = X Int\n\ndata B = Y Zed\n");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownDatatype);
    CHECK(e.line() == 3);
    CHECK(e.col() == 12);
  }
}

TEST_CASE("comments, continuation lines and default layout") {
  auto s = parse_schema("# trees\ndata T = N T T  # node\n  | L Int\n");
  CHECK(s.at("T").ctors.size() == 2);
  CHECK(s.at("T").layout == Layout::Flat);
}

TEST_CASE("buffer shapes") {
  auto tf = parse_schema(fx::kTreeFactored);
  auto tree = buffer_shape(tf, "Tree");
  CHECK(tree.buffer_count == 2);
  CHECK(tree.entries[0].buffer == 1);
  CHECK(tree.roles == std::vector<std::string>{"tags", "Leaf.0:Int"});
  CHECK(cursor_count(tree) == 2);

  auto lf = parse_schema("data List = Cons Int List | Nil");
  auto list = buffer_shape(lf, "List");
  CHECK(list.buffer_count == 1);
  CHECK(list.entries.empty());
  CHECK(cursor_count(list) == 1);

  auto ns = parse_schema(kNested);
  auto nl = buffer_shape(ns, "NestedList");
  CHECK(nl.buffer_count == 3);
  CHECK(nl.buffer_count == leaves(ns, ns.find("NestedList")));
  REQUIRE(nl.entries.size() == 2);
  CHECK(nl.entries[0].ctor == 0);
  CHECK(nl.entries[0].field == 0);
  CHECK(nl.entries[0].buffer == 1);
  CHECK(nl.entries[1].field == 1);
  REQUIRE(nl.entries[1].nested);
  CHECK(nl.entries[1].nested->layout == Layout::Flat);
  CHECK(nl.entries[1].nested->base == 2);
  CHECK(cursor_count(nl) == 3);
}

TEST_CASE("nested factored shapes get absolute buffer indices") {
  auto s = parse_schema(
      "data P = PC Int Int P | PN\nlayout P = Factored\n"
      "data Q = QC Int P Q | QN Int\nlayout Q = Factored\n");
  auto q = buffer_shape(s, "Q");
  CHECK(q.buffer_count == leaves(s, s.find("Q")));
  CHECK(q.buffer_count == 1 + 1 + 3 + 1);
  CHECK(cursor_count(q) == 6);
  const auto* e = q.entry(0, 1);
  REQUIRE(e);
  REQUIRE(e->nested);
  CHECK(e->nested->base == 2);
  CHECK(e->nested->entries[0].buffer == 3);
  CHECK(e->nested->entries[1].buffer == 4);
  CHECK(q.entry(1, 0)->buffer == 5);
  CHECK(q.roles[2] == "QC.1:P/tags");
}

TEST_CASE("shape properties over many schemas") {
  const char* schemas[] = {fx::kTreeFlat, fx::kTreeFactored, kNested};
  for (const char* text : schemas) {
    auto s = parse_schema(text);
    for (int d = 0; d < int(s.datatypes.size()); ++d) {
      auto a = buffer_shape(s, d);
      auto b = buffer_shape(parse_schema(text), d);
      CHECK(a == b);
      CHECK(cursor_count(a) >= 1);
      CHECK((cursor_count(a) == 1) == (s[d].layout == Layout::Flat));
      // Every (ctor, non-self field) appears exactly once.
      if (s[d].layout == Layout::Factored)
        for (size_t c = 0; c < s[d].ctors.size(); ++c)
          for (size_t j = 0; j < s[d].ctors[c].fields.size(); ++j) {
            int hits = 0;
            for (const auto& e : a.entries) hits += e.ctor == int(c) && e.field == int(j);
            CHECK(hits == (s[d].ctors[c].fields[j].kind == FieldKind::SelfRec ? 0 : 1));
          }
    }
  }
}

TEST_CASE("canonical text and hash") {
  auto a = parse_schema("data List = Cons Int List | Nil; layout List = Factored");
  auto b = parse_schema("# same\ndata List = Cons Int List\n  | Nil\nlayout List = Factored\n");
  CHECK(a.canonical_text() == "data List = Cons Int List | Nil\nlayout List = Factored\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != parse_schema("data List = Cons Int List | Nil").hash());
  // Reference FNV-1a vectors.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
