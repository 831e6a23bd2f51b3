#include <map>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "packedadt/bench.hpp"

using namespace packedadt;
using namespace packedadt::bench;

namespace {

// Shape of a value with the integers dropped.
std::string shape(const Value& v) {
  std::string s = "(" + v.ctor;
  for (const auto& a : v.args)
    if (auto* p = std::get_if<std::unique_ptr<Value>>(&a)) s += " " + shape(**p);
  return s + ")";
}

const Value& kid(const Value& v, size_t i) { return *std::get<std::unique_ptr<Value>>(v.args[i]); }

BenchSpec spec_of(const char* suite, const char* pass, std::vector<uint64_t> sizes) {
  BenchSpec s;
  s.suite = suite;
  s.pass = pass;
  s.sizes = std::move(sizes);
  s.repetitions = 3;
  return s;
}

const BenchRow& row_of(const std::vector<BenchRow>& rows, Layout l, CursorMode m, uint64_t size = 0) {
  for (const auto& r : rows)
    if (r.layout == l && r.mode == m && (size == 0 || r.size == size)) return r;
  FAIL("row missing");
  return rows.front();
}

// Minimal RFC 4180 reader for the test.
std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> out(1);
  std::string f;
  bool q = false;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (q) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        f += '"';
        ++i;
      } else if (c == '"') {
        q = false;
      } else {
        f += c;
      }
    } else if (c == '"') {
      q = true;
    } else if (c == ',') {
      out.back().push_back(f);
      f.clear();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      out.back().push_back(f);
      f.clear();
      out.emplace_back();
      ++i;
    } else {
      f += c;
    }
  }
  if (out.back().empty()) out.pop_back();
  return out;
}

}  // namespace

TEST_CASE("generate is deterministic") {
  for (const char* s : {"List", "MonoTree", "TernaryTree", "LinearListReduction", "ReduceNestedList", "KDTree"}) {
    Value a = generate(s, 500, 7), b = generate(s, 500, 7);
    CHECK(a == b);
    CHECK_FALSE(a == generate(s, 500, 8));
  }
  CHECK_THROWS_AS(generate("Nope", 10, 1), Error);
}

TEST_CASE("generate sizes and shapes") {
  CHECK(shape(generate("MonoTree", 7, 1)) == "(Node (Node (Leaf) (Leaf)) (Node (Leaf) (Leaf)))");
  CHECK(generate("MonoTree", 14, 1).node_count() == 7);
  CHECK(generate("MonoTree", 15, 1).node_count() == 15);
  CHECK(generate("TernaryTree", 13, 1).node_count() == 13);
  CHECK(generate("List", 10, 1).node_count() == 11);

  Value l = generate("LinearListReduction", 3, 1);
  const Value* c = &l;
  for (int i = 0; i < 3; ++i) {
    REQUIRE(c->ctor == "WCons");
    REQUIRE(c->args.size() == 12);
    for (int k = 0; k < 11; ++k) CHECK(std::holds_alternative<int64_t>(c->args[k]));
    c = &kid(*c, 11);
  }
  CHECK(c->ctor == "WNil");
  CHECK(c->args.empty());

  Value n = generate("ReduceNestedList", 200, 3);
  c = &n;
  int outer = 0;
  while (c->ctor == "NCons") {
    size_t inner = kid(*c, 1).node_count() - 1;
    CHECK(inner >= 4);
    CHECK(inner <= 32);
    c = &kid(*c, 2);
    ++outer;
  }
  CHECK(outer == 200);

  Value kd = generate("KDTree", 100, 1);
  size_t leaves = 0;
  std::vector<const Value*> todo = {&kd};
  while (!todo.empty()) {
    const Value* v = todo.back();
    todo.pop_back();
    if (v->ctor == "KLeaf") ++leaves;
    if (v->ctor == "KNode") {
      todo.push_back(&kid(*v, 9));
      todo.push_back(&kid(*v, 10));
    }
  }
  CHECK(leaves == 100);
}

TEST_CASE("grid shape and speedup columns") {
  auto rows = run_experiment(spec_of("MonoTree", "sumTree", {255}));
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.ok());
    REQUIRE(r.s_fo.has_value());
    CHECK(*r.s_fo > 0);
    CHECK_FALSE(r.s_fb.has_value());
    CHECK(r.min_ns <= r.median_ns);
  }
  CHECK(row_of(rows, Layout::Flat, CursorMode::Mutable).s_fo == doctest::Approx(1.0));
  CHECK(rows[0].result == rows[1].result);

  BenchSpec s = spec_of("MonoTree", "sumTree", {255, 63, 255});
  s.modes = {CursorMode::Mutable, CursorMode::Immutable};
  rows = run_experiment(s);
  REQUIRE(rows.size() == 8);
  CHECK(rows.front().size == 63);
  CHECK(rows.back().size == 255);
  for (const auto& r : rows) {
    const auto& gm = row_of(rows, Layout::Flat, CursorMode::Mutable, r.size);
    const auto& gi = row_of(rows, Layout::Flat, CursorMode::Immutable, r.size);
    CHECK(*r.s_fo == doctest::Approx(double(gm.median_ns) / double(r.median_ns)));
    CHECK(*r.s_fb == doctest::Approx(double(gi.median_ns) / double(r.median_ns)));
    CHECK(*r.s_gm == doctest::Approx(double(gi.median_ns) / double(gm.median_ns)));
  }
}

TEST_CASE("spec validation") {
  BenchSpec s = spec_of("MonoTree", "sumTree", {7});
  s.repetitions = 2;
  CHECK_THROWS_AS(run_experiment(s), Error);
  s.repetitions = 3;
  s.sizes.clear();
  CHECK_THROWS_AS(run_experiment(s), Error);
  CHECK_THROWS_AS(run_experiment(spec_of("Nope", "sumTree", {7})), Error);
  CHECK_THROWS_AS(run_experiment(spec_of("MonoTree", "nope", {7})), Error);
}

TEST_CASE("linear list reduction counters") {
  const uint64_t n = 10000;
  auto rows = run_experiment(spec_of("LinearListReduction", "reduce", {n}));
  const auto& flat = row_of(rows, Layout::Flat, CursorMode::Mutable);
  const auto& fac = row_of(rows, Layout::Factored, CursorMode::Mutable);
  // One tag per cell plus the terminator; 1 used Int vs 11 skipped inline.
  CHECK(fac.bytes_read_total == 9 * n + 1);
  CHECK(flat.bytes_read_total == 89 * n + 1);
  CHECK(flat.result == fac.result);
  REQUIRE(fac.buffers.size() == 12);
  int zero = 0;
  for (const auto& b : fac.buffers) zero += b.bytes_read == 0;
  CHECK(zero == 10);
  // Dead fraction recomputed from the counters.
  CHECK(fac.dead_fraction == doctest::Approx(double(zero) / double(fac.buffers.size())));

  int64_t sum = 0;
  Value v = generate("LinearListReduction", n, 1);
  for (const Value* c = &v; c->ctor == "WCons"; c = &kid(*c, 11)) sum += std::get<int64_t>(c->args[0]);
  CHECK(fac.result == sum);
}

TEST_CASE("counters are identical across runs") {
  BenchSpec s = spec_of("ReduceNestedList", "reduce", {300});
  auto a = run_experiment(s), b = run_experiment(s);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].bytes_read_total == b[i].bytes_read_total);
    CHECK(a[i].steps == b[i].steps);
    CHECK(a[i].result == b[i].result);
    REQUIRE(a[i].buffers.size() == b[i].buffers.size());
    for (size_t k = 0; k < a[i].buffers.size(); ++k) CHECK(a[i].buffers[k].bytes_read == b[i].buffers[k].bytes_read);
  }
}

TEST_CASE("factored folds read no more than flat") {
  for (const auto& p : builtin_passes()) {
    if (p.kind != PassKind::Fold) continue;
    CAPTURE(p.suite);
    CAPTURE(p.name);
    auto rows = run_experiment(spec_of(p.suite.c_str(), p.name.c_str(), {200}));
    const auto& flat = row_of(rows, Layout::Flat, CursorMode::Mutable);
    const auto& fac = row_of(rows, Layout::Factored, CursorMode::Mutable);
    REQUIRE(flat.ok());
    REQUIRE(fac.ok());
    CHECK(flat.result == fac.result);
    if (fac.dead_fraction > 0) CHECK(fac.bytes_read_total < flat.bytes_read_total);
    else CHECK(fac.bytes_read_total <= flat.bytes_read_total);
  }
}

TEST_CASE("immutable mode past the depth cap") {
  BenchSpec s = spec_of("List", "sumListAcc", {500});
  s.modes = {CursorMode::Mutable, CursorMode::Immutable};
  s.max_depth = 100;
  auto rows = run_experiment(s);
  CHECK(row_of(rows, Layout::Flat, CursorMode::Mutable).ok());
  const auto& bad = row_of(rows, Layout::Flat, CursorMode::Immutable);
  CHECK(bad.status == "StackDepthExceeded");
  CHECK_FALSE(bad.message.empty());
  CHECK_FALSE(row_of(rows, Layout::Flat, CursorMode::Mutable).s_fb.has_value());
  std::string csv = emit_report(rows, ReportFormat::Csv);
  CHECK(csv.find("StackDepthExceeded") != std::string::npos);
}

TEST_CASE("report formats") {
  auto rows = run_experiment(spec_of("LinearListReduction", "reduce", {50}));
  rows.resize(1);
  std::string csv = emit_report(rows, ReportFormat::Csv);
  auto t = read_csv(csv);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == report_columns());
  const std::vector<std::string> lead = {"suite", "pass",  "size",  "layout", "mode",         "median_ns",
                                         "S_fo",  "S_fb",  "S_gm",  "dead_fraction", "bytes_read_total"};
  CHECK(std::vector<std::string>(t[0].begin(), t[0].begin() + 11) == lead);
  CHECK(csv.find("\r\n") != std::string::npos);

  // Quoting: a field with a comma, a quote and a newline survives.
  auto odd = rows;
  odd[0].suite = "a,\"b\"\nc";
  auto back = read_csv(emit_report(odd, ReportFormat::Csv));
  REQUIRE(back.size() == 2);
  CHECK(back[1][0] == odd[0].suite);

  // JSON and CSV agree key by key.
  auto j = nlohmann::json::parse(emit_report(rows, ReportFormat::Json));
  REQUIRE(j.size() == 1);
  for (size_t i = 0; i < t[0].size(); ++i) {
    CAPTURE(t[0][i]);
    const auto& v = j[0][t[0][i]];
    std::string s;
    if (v.is_null()) s = "";
    else if (v.is_string()) s = v.get<std::string>();
    else if (v.is_number_float()) s = "";
    else s = v.dump();
    if (v.is_number_float()) CHECK(v.get<double>() == doctest::Approx(std::stod(t[1][i])).epsilon(1e-6));
    else CHECK(s == t[1][i]);
  }

  std::string table = emit_report(rows, ReportFormat::Table);
  std::istringstream in(table);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 2);
  CHECK(table.rfind("suite", 0) == 0);

  CHECK_THROWS_AS(emit_report({}, ReportFormat::Csv), Error);
  CHECK(parse_format("csv") == ReportFormat::Csv);
  CHECK_THROWS_AS(parse_format("xml"), Error);
}

TEST_CASE("geomean") {
  CHECK(geomean({2, 8}) == doctest::Approx(4));
  CHECK(geomean({1.46}) == doctest::Approx(1.46));
  CHECK_THROWS_AS(geomean({}), Error);
  CHECK_THROWS_AS(geomean({1, 0}), Error);
}
