#include <algorithm>

#include "packedadt/traversal.hpp"

namespace packedadt {

namespace {

// Wrapping arithmetic keeps long sums well defined.
inline int64_t wadd(int64_t a, int64_t b) { return int64_t(uint64_t(a) + uint64_t(b)); }
inline int64_t wsub(int64_t a, int64_t b) { return int64_t(uint64_t(a) - uint64_t(b)); }
inline int64_t wmul(int64_t a, int64_t b) { return int64_t(uint64_t(a) * uint64_t(b)); }

int64_t sum(Ints xs) {
  int64_t s = 0;
  for (int64_t x : xs) s = wadd(s, x);
  return s;
}

std::vector<bool> mask(std::initializer_list<int> bits) { return std::vector<bool>(bits.begin(), bits.end()); }

std::vector<bool> mask_n(size_t n, std::initializer_list<size_t> on) {
  std::vector<bool> m(n, false);
  for (size_t i : on) m[i] = true;
  return m;
}

Clause combine(std::string ctor, std::vector<bool> used, std::function<int64_t(Ints, Ints)> f) {
  Clause c;
  c.ctor = std::move(ctor);
  c.used = std::move(used);
  c.combine = std::move(f);
  return c;
}

Clause step(std::string ctor, std::vector<bool> used, std::function<int64_t(int64_t, Ints)> f) {
  Clause c;
  c.ctor = std::move(ctor);
  c.used = std::move(used);
  c.step = std::move(f);
  return c;
}

Clause rewrite(std::string ctor, size_t arity, std::function<void(std::span<int64_t>)> f) {
  Clause c;
  c.ctor = std::move(ctor);
  c.used.assign(arity, true);
  c.rewrite = std::move(f);
  return c;
}

PassDef pass(std::string suite, std::string name, PassKind kind, FoldStyle style, std::string dt,
             std::vector<Clause> clauses) {
  PassDef p;
  p.suite = std::move(suite);
  p.name = std::move(name);
  p.kind = kind;
  p.style = style;
  p.datatype = dt;
  p.types.push_back({std::move(dt), std::move(clauses)});
  return p;
}

void add1_all(std::span<int64_t> s) {
  for (auto& x : s) x = wadd(x, 1);
}

bool in_box(int64_t x, int64_t y, int64_t z) {
  auto in = [](int64_t v) { return v >= kKdBoxLo && v <= kKdBoxHi; };
  return in(x) && in(y) && in(z);
}

// Bounding box [min, max] per axis disjoint from the query box.
bool box_disjoint(Ints s) {
  for (int a = 0; a < 3; ++a)
    if (s[2 + 3 + a] < kKdBoxLo || s[2 + a] > kKdBoxHi) return true;
  return false;
}

int64_t dist2(Ints s) {
  int64_t d = 0;
  for (int a = 0; a < 3; ++a) {
    int64_t e = wsub(s[a], kKdQuery);
    d = wadd(d, wmul(e, e));
  }
  return d;
}

std::vector<PassDef> make_passes() {
  std::vector<PassDef> ps;
  const auto F = PassKind::Fold;
  const auto M = PassKind::Map;
  const auto C = FoldStyle::Combine;
  const auto A = FoldStyle::Accumulate;

  // List
  ps.push_back(pass("List", "add1", M, C, "List", {rewrite("Cons", 2, add1_all)}));
  ps.push_back(pass("List", "length", F, C, "List",
                    {combine("Cons", mask({0, 1}), [](Ints, Ints k) { return wadd(1, k[0]); }),
                     combine("Nil", {}, [](Ints, Ints) { return int64_t(0); })}));
  ps.push_back(pass("List", "sumList", F, C, "List",
                    {combine("Cons", mask({1, 1}), [](Ints s, Ints k) { return wadd(s[0], k[0]); }),
                     combine("Nil", {}, [](Ints, Ints) { return int64_t(0); })}));
  ps.push_back(pass("List", "sumListAcc", F, A, "List",
                    {step("Cons", mask({1, 1}), [](int64_t a, Ints s) { return wadd(a, s[0]); }),
                     step("Nil", {}, [](int64_t a, Ints) { return a; })}));

  // MonoTree
  ps.push_back(pass("MonoTree", "add1Tree", M, C, "Tree", {rewrite("Leaf", 1, add1_all)}));
  ps.push_back(pass("MonoTree", "sumTree", F, C, "Tree",
                    {combine("Node", mask({1, 1}), [](Ints, Ints k) { return wadd(k[0], k[1]); }),
                     combine("Leaf", mask({1}), [](Ints s, Ints) { return s[0]; })}));
  ps.push_back(pass("MonoTree", "sumTreeAcc", F, A, "Tree",
                    {step("Node", mask({1, 1}), [](int64_t a, Ints) { return a; }),
                     step("Leaf", mask({1}), [](int64_t a, Ints s) { return wadd(a, s[0]); })}));

  // TernaryTree
  ps.push_back(pass("TernaryTree", "add1Tree", M, C, "TernaryTree", {rewrite("TLeaf", 1, add1_all)}));
  ps.push_back(pass("TernaryTree", "sumTree", F, C, "TernaryTree",
                    {combine("TNode", mask({1, 1, 1}), [](Ints, Ints k) { return sum(k); }),
                     combine("TLeaf", mask({1}), [](Ints s, Ints) { return s[0]; })}));

  // LinearListReduction: twelve fields, the pass reads the first scalar.
  ps.push_back(pass("LinearListReduction", "reduce", F, A, "Wide",
                    {step("WCons", mask_n(12, {0, 11}), [](int64_t a, Ints s) { return wadd(a, s[0]); }),
                     step("WNil", {}, [](int64_t a, Ints) { return a; })}));

  // ReduceNestedList: the inner list is dead.
  ps.push_back(pass("ReduceNestedList", "reduce", F, A, "NestedList",
                    {step("NCons", mask({1, 0, 1}), [](int64_t a, Ints s) { return wadd(a, s[0]); }),
                     step("End", {}, [](int64_t a, Ints) { return a; })}));

  // KDTree. KNode: dim split minx miny minz maxx maxy maxz mass left right.
  // KLeaf: x y z mass.
  ps.push_back(pass("KDTree", "countInRange", F, C, "KDTree",
                    {combine("KNode", mask_n(11, {2, 3, 4, 5, 6, 7, 9, 10}),
                             [](Ints s, Ints k) { return box_disjoint(s) ? int64_t(0) : wadd(k[0], k[1]); }),
                     combine("KLeaf", mask({1, 1, 1, 0}),
                             [](Ints s, Ints) { return int64_t(in_box(s[0], s[1], s[2])); }),
                     combine("KEmpty", {}, [](Ints, Ints) { return int64_t(0); })}));
  ps.push_back(pass("KDTree", "sumMassInRange", F, C, "KDTree",
                    {combine("KNode", mask_n(11, {2, 3, 4, 5, 6, 7, 9, 10}),
                             [](Ints s, Ints k) { return box_disjoint(s) ? int64_t(0) : wadd(k[0], k[1]); }),
                     combine("KLeaf", mask({1, 1, 1, 1}),
                             [](Ints s, Ints) { return in_box(s[0], s[1], s[2]) ? s[3] : int64_t(0); }),
                     combine("KEmpty", {}, [](Ints, Ints) { return int64_t(0); })}));
  ps.push_back(pass("KDTree", "nearestDist", F, C, "KDTree",
                    {combine("KNode", mask_n(11, {9, 10}), [](Ints, Ints k) { return std::min(k[0], k[1]); }),
                     combine("KLeaf", mask({1, 1, 1, 0}), [](Ints s, Ints) { return dist2(s); }),
                     combine("KEmpty", {}, [](Ints, Ints) { return INT64_MAX; })}));
  return ps;
}

std::string wide_schema(const char* layout) {
  std::string s = "data Wide = WCons";
  for (int i = 0; i < 11; ++i) s += " Int";
  s += " Wide | WNil\nlayout Wide = ";
  return s + layout + "\n";
}

}  // namespace

std::string Suite::schema(Layout layout) const {
  const char* L = layout == Layout::Flat ? "Flat" : "Factored";
  std::string l = L;
  if (name == "List") return "data List = Cons Int List | Nil\nlayout List = " + l + "\n";
  if (name == "MonoTree") return "data Tree = Node Tree Tree | Leaf Int\nlayout Tree = " + l + "\n";
  if (name == "TernaryTree")
    return "data TernaryTree = TNode TernaryTree TernaryTree TernaryTree | TLeaf Int\nlayout TernaryTree = " + l +
           "\n";
  if (name == "LinearListReduction") return wide_schema(L);
  if (name == "ReduceNestedList")
    return "data List = Cons Int List | Nil\nlayout List = Flat\n"
           "data NestedList = NCons Int List NestedList | End\nlayout NestedList = " + l + "\n";
  if (name == "KDTree")
    return "data KDTree = KNode Int Int Int Int Int Int Int Int Int KDTree KDTree | KLeaf Int Int Int Int | KEmpty\n"
           "layout KDTree = " + l + "\n";
  fail(ErrorCode::UnknownSuite, name);
}

const std::vector<Suite>& builtin_suites() {
  static const std::vector<Suite> s = {
      {"List", "List"},
      {"MonoTree", "Tree"},
      {"TernaryTree", "TernaryTree"},
      {"LinearListReduction", "Wide"},
      {"ReduceNestedList", "NestedList"},
      {"KDTree", "KDTree"},
  };
  return s;
}

const Suite& lookup_suite(std::string_view name) {
  for (const auto& s : builtin_suites())
    if (s.name == name) return s;
  fail(ErrorCode::UnknownSuite, std::string(name));
}

const std::vector<PassDef>& builtin_passes() {
  static const std::vector<PassDef> ps = make_passes();
  return ps;
}

const PassDef& lookup_pass(std::string_view suite, std::string_view name) {
  for (const auto& p : builtin_passes())
    if (p.suite == suite && p.name == name) return p;
  fail(ErrorCode::NotFound, std::string(suite) + "/" + std::string(name));
}

}  // namespace packedadt
