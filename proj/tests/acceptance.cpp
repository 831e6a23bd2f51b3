// Acceptance run: one PASS/FAIL/WARN line per criterion. Exits non-zero when
// any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "common.hpp"
#include "packedadt/bench.hpp"
#include "packedadt/region.hpp"
#include "packedadt/socal.hpp"
#include "packedadt/traversal.hpp"
#include "socal_fixtures.hpp"

using namespace packedadt;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;
bool printed[9] = {};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int n, const char* verdict, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", n, verdict, detail.c_str());
  std::fflush(stdout);
  printed[n] = true;
  if (std::string(verdict) == "FAIL") ++failures;
}

std::string fmt(const char* f, double x) {
  char b[64];
  std::snprintf(b, sizeof b, f, x);
  return b;
}

// Runs f, turning an escaped exception into a FAIL line.
void guarded(int n, const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(n, "FAIL", std::string("exception: ") + e.what());
  }
}

// ---- 1: round trips ------------------------------------------------------

// Random value whose depth is at most `target` (a leaf has depth 1). Below the
// target, recursive constructors are preferred so values are not mostly leaves.
struct DeepGen {
  const AdtSchema& s;
  std::mt19937_64 rng;

  Value make(int d, int depth, int target) {
    const auto& def = s[d];
    std::vector<int> leaves, rec;
    for (size_t c = 0; c < def.ctors.size(); ++c) {
      bool r = false;
      for (const auto& f : def.ctors[c].fields) r = r || f.kind != FieldKind::Int;
      (r ? rec : leaves).push_back(int(c));
    }
    bool stop = depth + 1 >= target || rec.empty() || rng() % 10 == 0;
    const auto& use = stop ? leaves : rec;
    const auto& ct = def.ctors[use[rng() % use.size()]];
    Value v(ct.name);
    for (const auto& f : ct.fields)
      if (f.kind == FieldKind::Int) v.add(std::uniform_int_distribution<int64_t>(-(1 << 30), 1 << 30)(rng));
      else v.add(make(f.dt, depth + 1, target));
    return v;
  }
};

void round_trips() {
  auto t0 = Clock::now();
  const int total = 10000;
  int ok = 0, ran = 0;
  size_t nodes = 0, deepest = 0;
  std::string first_bad;
  for (bool factored : {false, true}) {
    AdtSchema s = parse_schema(fx::mixed_schema(factored));
    DeepGen g{s, std::mt19937_64(factored ? 101 : 100)};
    for (int i = 0; i < total / 2; ++i) {
      int dt = i % int(s.datatypes.size());
      Value v = g.make(dt, 0, 1 + int(g.rng() % 12));
      nodes += v.node_count();
      deepest = std::max(deepest, v.depth());
      SerializeOptions o;
      o.first_chunk_size = 32;
      o.random_access = (i & 1) != 0;
      o.indirection_every = (i & 2) ? 2 : 0;
      StoreOptions so;
      so.track_writes = true;
      RegionStore st(so);
      ++ran;
      try {
        SerializedRoot root = serialize(s, dt, v, st, o);
        if (deserialize(root) == v) ++ok;
        else if (first_bad.empty()) first_bad = to_string(v);
      } catch (const Error& e) {
        if (first_bad.empty()) first_bad = e.what();
      }
    }
  }
  double secs = seconds_since(t0);
  std::string d = std::to_string(ok) + "/" + std::to_string(ran) + " values round-trip (chunk 32, plain/RA/indirection/both; " +
                  std::to_string(nodes) + " nodes, depth <= " + std::to_string(deepest) + ") in " + fmt("%.1f s", secs);
  if (!first_bad.empty()) d += "; first failure: " + first_bad.substr(0, 200);
  report(1, ok == ran && ran == total && deepest <= 12 && secs < 60 ? "PASS" : "FAIL", d);
}

// ---- 2 and 3: counters and timing ------------------------------------------

bench::BenchRow find_row(const std::vector<bench::BenchRow>& rows, Layout l, CursorMode m) {
  for (const auto& r : rows)
    if (r.layout == l && r.mode == m) return r;
  fail(ErrorCode::NotFound, "missing bench row");
}

std::vector<bench::BenchRow> grid(const char* suite, const char* pass, uint64_t size, std::vector<CursorMode> modes) {
  bench::BenchSpec s;
  s.suite = suite;
  s.pass = pass;
  s.sizes = {size};
  s.modes = std::move(modes);
  s.repetitions = 5;
  return bench::run_experiment(s);
}

bool counters_ok = false;

void counters_and_timing() {
  const uint64_t n = 1000000;
  auto llr = grid("LinearListReduction", "reduce", n, {CursorMode::Mutable});
  auto rnl = grid("ReduceNestedList", "reduce", n, {CursorMode::Mutable});
  auto lf = find_row(llr, Layout::Flat, CursorMode::Mutable);
  auto lc = find_row(llr, Layout::Factored, CursorMode::Mutable);
  auto rf = find_row(rnl, Layout::Flat, CursorMode::Mutable);
  auto rc = find_row(rnl, Layout::Factored, CursorMode::Mutable);

  // Criterion 2. Buffer 0 is the tag stream; scalar k of WCons is buffer k+1.
  std::string d;
  bool ok = lc.ok() && lf.ok() && rc.ok() && rf.ok() && lc.buffers.size() == 12;
  int silent = 0;
  if (ok) {
    for (size_t b = 2; b < lc.buffers.size(); ++b) silent += lc.buffers[b].bytes_read == 0;
    ok = silent == 10 && lc.buffers[0].bytes_read == n + 1 && lc.buffers[1].bytes_read == 8 * n;
  }
  // Per cell: 1 tag + 88 scalar bytes flat vs 1 tag + 8 scalar bytes factored.
  // The terminating WNil tag is one byte on both sides.
  bool ratio = ok && (lf.bytes_read_total - 1) * 9 == (lc.bytes_read_total - 1) * 89;
  uint64_t nested = UINT64_MAX;
  for (const auto& b : rc.buffers)
    if (b.role.find(":List") != std::string::npos) nested = b.bytes_read;
  bool rnl_ok = nested == 0;
  counters_ok = ok && ratio && rnl_ok;
  d = "LLR factored: " + std::to_string(silent) + "/10 unused scalar buffers silent; bytes flat " +
      std::to_string(lf.bytes_read_total) + " vs factored " + std::to_string(lc.bytes_read_total) +
      " (per cell 89:9 " + (ratio ? "exact" : "MISMATCH") + ", total " +
      fmt("%.6f", double(lf.bytes_read_total) / double(lc.bytes_read_total)) + "); RNL nested List buffer read " +
      (nested == UINT64_MAX ? std::string("missing") : std::to_string(nested)) + " bytes";
  report(2, counters_ok ? "PASS" : "FAIL", d);

  // Criterion 3.
  auto mono = grid("MonoTree", "sumTree", (uint64_t(1) << 21) - 1, {CursorMode::Mutable, CursorMode::Immutable});
  auto mm = find_row(mono, Layout::Flat, CursorMode::Mutable);
  auto mi = find_row(mono, Layout::Flat, CursorMode::Immutable);
  double s_llr = double(lf.median_ns) / double(lc.median_ns);
  double s_rnl = double(rf.median_ns) / double(rc.median_ns);
  double s_gm = double(mi.median_ns) / double(mm.median_ns);
  bool timing = s_llr >= 3 && s_rnl >= 4 && s_gm >= 1.1;

  // Informational geomean of factored over flat (both mutable) across suites.
  std::vector<double> sp = {s_llr, s_rnl};
  std::string per = "LLR " + fmt("%.2f", s_llr) + ", RNL " + fmt("%.2f", s_rnl);
  const std::pair<const char*, const char*> more[] = {
      {"List", "sumListAcc"}, {"MonoTree", "sumTree"}, {"TernaryTree", "sumTree"}, {"KDTree", "countInRange"}};
  for (const auto& [suite, pass] : more) {
    auto rows = suite == std::string("MonoTree") ? mono : grid(suite, pass, n, {CursorMode::Mutable});
    auto f = find_row(rows, Layout::Flat, CursorMode::Mutable);
    auto c = find_row(rows, Layout::Factored, CursorMode::Mutable);
    if (!f.ok() || !c.ok()) continue;
    double x = double(f.median_ns) / double(c.median_ns);
    sp.push_back(x);
    per += std::string(", ") + suite + " " + fmt("%.2f", x);
  }
  d = "factored/flat mutable: LLR " + fmt("%.2fx", s_llr) + " (need 3), RNL " + fmt("%.2fx", s_rnl) +
      " (need 4); MonoTree flat mutable/immutable " + fmt("%.2fx", s_gm) + " (need 1.1); geomean " +
      fmt("%.2fx", bench::geomean(sp)) + " over " + std::to_string(sp.size()) + " suites [" + per +
      "] (reference 1.46x)";
  report(3, timing ? "PASS" : (counters_ok ? "WARN" : "FAIL"), d);
}

// ---- 4: fuzzing --------------------------------------------------------------

void fuzz() {
  auto t0 = Clock::now();
  auto f = socal::fuzz_type_safety(2026, 10000);
  double secs = seconds_since(t0);
  bool ok = f.programs == 10000 && f.passed == f.programs && f.stuck == 0 && f.wf_violations == 0 &&
            f.erasure_mismatches == 0 && f.rejected == 0 && secs < 300;
  std::string d = std::to_string(f.passed) + "/" + std::to_string(f.programs) + " programs; stuck " +
                  std::to_string(f.stuck) + ", wf violations " + std::to_string(f.wf_violations) + " over " +
                  std::to_string(f.wf_checks) + " checks, erasure mismatches " +
                  std::to_string(f.erasure_mismatches) + ", rejected " + std::to_string(f.rejected) + "; " +
                  std::to_string(f.steps) + " steps in " + fmt("%.1f s", secs);
  report(4, ok ? "PASS" : "FAIL", d);
}

// ---- 5: trace ----------------------------------------------------------------

void trace() {
  socal::Program p = socal::parse_socal(fx::build_tree_program());
  socal::CheckResult c = socal::typecheck(p);
  if (!c.ok) return report(5, "FAIL", "buildtree rejected: " + c.reason + " " + c.message);
  const std::vector<std::string> rules = {
      "T-LetRegion",     "T-LetRegion",          "T-LetLoc-Start", "T-LetLoc-ProjTag",     "T-LetLoc-ProjField",
      "T-LetLoc-Tag",    "T-LetLoc-IntroLocVec", "T-App",          "T-Let",                "T-LetLoc-After",
      "T-App",           "T-Let",                "T-DataConstructor-FullyFactored"};
  bool rows_ok = c.trace.size() == rules.size();
  for (size_t i = 0; rows_ok && i < rules.size(); ++i) rows_ok = c.trace[i].rule == rules[i];
  // Nursery ends empty; both regions end focused on lt.
  const auto& last = c.trace.back();
  rows_ok = rows_ok && last.N.empty() && last.A.size() == 2 && last.A[0].second == "lt" && last.A[1].second == "lt";

  const socal::StaticEnvs& e = c.main_envs;
  auto loc_named = [&](const std::string& n) {
    for (size_t i = 0; i < e.loc_names.size(); ++i)
      if (e.loc_names[i] == n) return int(i);
    return -1;
  };
  std::map<int, int> starts_per_region;
  int next = 0, intro = 0, after = 0;
  bool next_ok = false, after_ok = false;
  for (const auto& [l, k] : e.C) {
    if (k.kind == socal::Constraint::Start) {
      std::vector<int> rs;
      socal::shape_regions(e.loc_shapes[l], rs);
      for (int r : rs) ++starts_per_region[r];
    } else if (k.kind == socal::Constraint::Next) {
      ++next;
      next_ok = e.loc_names[l] == "lda" && k.src == loc_named("ld");
    } else if (k.kind == socal::Constraint::IntroLocVec) {
      ++intro;
    } else if (k.kind == socal::Constraint::After) {
      ++after;
      after_ok = e.loc_names[l] == "lb" && k.src == loc_named("la");
    }
  }
  bool starts_ok = starts_per_region.size() == e.region_names.size();
  for (const auto& [r, n] : starts_per_region) starts_ok = starts_ok && n == 1;
  bool ok = rows_ok && starts_ok && next == 1 && next_ok && intro == 1 && after == 1 && after_ok;
  std::string d = std::to_string(c.trace.size()) + " trace rows " + (rows_ok ? "match" : "DIFFER") +
                  "; final C: start per region " + (starts_ok ? "1" : "WRONG") + ", +1 " + std::to_string(next) +
                  (next_ok ? " (lda = ld + 1)" : "") + ", introLocVec " + std::to_string(intro) + ", after " +
                  std::to_string(after) + (after_ok ? " (lb = after la)" : "");
  report(5, ok ? "PASS" : "FAIL", d);
}

// ---- 6: bridge ---------------------------------------------------------------

void bridge() {
  int ok = 0, ran = 0;
  for (bool factored : {false, true}) {
    AdtSchema s = parse_schema(fx::mixed_schema(factored));
    fx::Gen g{s, std::mt19937_64(factored ? 61 : 60), 6};
    for (int i = 0; i < 500; ++i) {
      int dt = i % int(s.datatypes.size());
      Value v = g.make(dt, 0);
      socal::Program p = socal::constructor_program(s, dt, v);
      ++ran;
      if (!socal::typecheck(p).ok) continue;
      socal::RunResult r = socal::interpret(p);
      if (r.value && *r.value == v &&
          socal::store_buffers(s, r.state, dt, r.state.M.at(r.loc)) == canonical_buffers(s, dt, v))
        ++ok;
    }
  }
  report(6, ok == ran && ran == 1000 ? "PASS" : "FAIL",
         std::to_string(ok) + "/" + std::to_string(ran) + " constructor programs: store bytes equal serialize output");
}

// ---- 7: region runtime -------------------------------------------------------

void regions() {
  std::mt19937 rng(77);
  int geometric = 0, clean = 0, reclaim = 0;
  const int scripts = 1000;
  for (int script = 0; script < scripts; ++script) {
    StoreOptions o;
    o.track_writes = true;
    RegionStore st(o);
    std::vector<uint16_t> ids;
    std::map<uint16_t, int> ext;
    std::set<std::pair<uint16_t, uint16_t>> edges;
    std::map<uint16_t, uint32_t> first;
    bool writes_ok = true, live_ok = true;

    auto reach_from = [&](std::vector<uint16_t> w) {
      std::set<uint16_t> seen;
      while (!w.empty()) {
        auto x = w.back();
        w.pop_back();
        if (!seen.insert(x).second) continue;
        for (const auto& e : edges)
          if (e.first == x) w.push_back(e.second);
      }
      return seen;
    };

    for (int step = 0; step < 60; ++step) {
      std::vector<uint16_t> alive;
      for (auto r : ids)
        if (st.alive(r)) alive.push_back(r);
      int op = alive.empty() ? 0 : int(rng() % 6);
      if (op == 0) {
        uint32_t f = 32u << (rng() % 3);
        auto r = st.new_region(f);
        ids.push_back(r);
        ext[r] = 1;
        first[r] = f;
      } else if (op <= 2) {
        // Bump-allocate and write a few payloads.
        auto r = alive[rng() % alive.size()];
        for (int k = 0; k < 8; ++k) {
          uint32_t n = 1 + rng() % 60;
          Address a = st.reserve(st.frontier(r), n);
          for (uint32_t i = 0; i < n; ++i)
            if (st.written(Address{a.region, a.chunk, a.offset + i})) writes_ok = false;
          std::vector<uint8_t> b(n, uint8_t(step));
          st.write(a, b.data(), n);
        }
      } else if (op == 3 && alive.size() >= 2) {
        auto f = alive[rng() % alive.size()];
        auto t = alive[rng() % alive.size()];
        if (f == t || reach_from({t}).count(f)) continue;
        st.record_outlink(st.frontier(f), t);
        edges.insert({f, t});
      } else if (op == 4) {
        std::vector<uint16_t> held;
        for (auto r : alive)
          if (ext[r] > 0) held.push_back(r);
        if (held.empty()) continue;
        auto r = held[rng() % held.size()];
        --ext[r];
        st.decref(r);
      } else {
        auto r = alive[rng() % alive.size()];
        ++ext[r];
        st.incref(r);
      }
      std::vector<uint16_t> roots;
      for (const auto& [r, c] : ext)
        if (c > 0) roots.push_back(r);
      auto live = reach_from(roots);
      for (auto r : ids) live_ok = live_ok && st.alive(r) == (live.count(r) > 0);
    }
    bool geo = true;
    for (auto r : ids) {
      if (!st.alive(r)) continue;
      auto sz = st.chunk_sizes(r);
      geo = geo && sz[0] == first[r];
      for (size_t i = 1; i < sz.size(); ++i) geo = geo && sz[i] == 2 * sz[i - 1];
    }
    geometric += geo;
    clean += writes_ok;
    reclaim += live_ok;
  }
  bool ok = geometric == scripts && clean == scripts && reclaim == scripts;
  report(7, ok ? "PASS" : "FAIL",
         std::to_string(scripts) + " scripts: geometric chunks " + std::to_string(geometric) + ", write-once " +
             std::to_string(clean) + ", reclamation = reachability " + std::to_string(reclaim));
}

// ---- 8: end witness vs skip_value --------------------------------------------

// Byte offset of every component of `c`, indexed by buffer.
void component_bytes(const AdtSchema& s, const socal::RtState& st, int dt, const BufferShape& sh,
                     const socal::CLoc& c, std::map<int, uint64_t>& out) {
  out[sh.base] = socal::cell_to_byte(st, c.region, c.index);
  for (const auto& [key, sub] : c.entries) {
    const ShapeEntry* e = sh.entry(s[dt].find_ctor(key.ctor), key.field);
    if (!e) fail(ErrorCode::NotFound, "no buffer for " + key.ctor);
    if (e->buffer >= 0) out[e->buffer] = socal::cell_to_byte(st, sub.region, sub.index);
    else component_bytes(s, st, e->nested->datatype, *e->nested, sub, out);
  }
}

void end_witness() {
  int ok = 0, ran = 0;
  for (bool factored : {false, true}) {
    AdtSchema s = parse_schema(fx::mixed_schema(factored));
    fx::Gen g{s, std::mt19937_64(factored ? 81 : 80), 7};
    for (int i = 0; i < 500; ++i) {
      int dt = i % int(s.datatypes.size());
      Value v = g.make(dt, 0);
      ++ran;
      socal::Program p = socal::constructor_program(s, dt, v);
      socal::RunResult r = socal::interpret(p);
      const socal::CLoc& root = r.state.M.at(r.loc);
      socal::CLoc end = socal::end_witness(s, r.state, dt, root);
      BufferShape sh = buffer_shape(s, dt);
      std::map<int, uint64_t> b0, b1;
      component_bytes(s, r.state, dt, sh, root, b0);
      component_bytes(s, r.state, dt, sh, end, b1);

      RegionStore st;
      SerializeOptions o;
      o.first_chunk_size = 1u << 20;  // one chunk, so offsets are byte counts
      SerializedRoot sr = serialize(s, dt, v, st, o);
      CursorBundle e = skip_value(sr, sr.bundle);
      bool same = b0.size() == sr.bundle.size();
      for (size_t k = 0; same && k < sr.bundle.size(); ++k)
        same = e[k].chunk == 0 && b1.at(int(k)) - b0.at(int(k)) == uint64_t(e[k].offset - sr.bundle[k].offset);
      ok += same;
    }
  }
  report(8, ok == ran && ran == 1000 ? "PASS" : "FAIL",
         std::to_string(ok) + "/" + std::to_string(ran) + " values: end_witness (cells to bytes) = skip_value");
}

}  // namespace

int main() {
  guarded(1, round_trips);
  guarded(2, counters_and_timing);
  guarded(4, fuzz);
  guarded(5, trace);
  guarded(6, bridge);
  guarded(7, regions);
  guarded(8, end_witness);
  for (int n = 1; n <= 8; ++n)
    if (!printed[n]) report(n, "FAIL", "not reached");
  std::printf("%s\n", failures ? "acceptance: FAIL" : "acceptance: PASS");
  return failures ? 1 : 0;
}
