#include "packedadt/bench.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "json.hpp"

namespace packedadt::bench {

namespace {

struct Rng {
  std::mt19937_64 g;
  int64_t num(int64_t lo, int64_t hi) { return std::uniform_int_distribution<int64_t>(lo, hi)(g); }
};

Value list(Rng& r, uint64_t n) {
  Value v("Nil");
  for (uint64_t i = 0; i < n; ++i) {
    Value c("Cons");
    c.add(r.num(-1000, 1000)).add(std::move(v));
    v = std::move(c);
  }
  return v;
}

Value perfect(Rng& r, int depth, int arity, const char* node, const char* leaf) {
  if (depth == 0) return std::move(Value(leaf).add(r.num(-1000, 1000)));
  Value v(node);
  for (int k = 0; k < arity; ++k) v.add(perfect(r, depth - 1, arity, node, leaf));
  return v;
}

// Largest depth whose perfect tree has at most n nodes.
int perfect_depth(uint64_t n, int arity) {
  int d = 0;
  uint64_t level = 1, total = 1;
  while (true) {
    level *= uint64_t(arity);
    if (total + level > n) return d;
    total += level;
    ++d;
  }
}

using Point = std::array<int64_t, 4>;  // x y z mass

Value kd_build(std::vector<Point>& pts, size_t lo, size_t hi, int depth, std::array<int64_t, 6>& box, int64_t& mass) {
  if (lo == hi) {
    box = {INT64_MAX, INT64_MAX, INT64_MAX, INT64_MIN, INT64_MIN, INT64_MIN};
    mass = 0;
    return Value("KEmpty");
  }
  if (hi - lo == 1) {
    const Point& p = pts[lo];
    for (int a = 0; a < 3; ++a) box[a] = box[3 + a] = p[a];
    mass = p[3];
    return std::move(Value("KLeaf").add(p[0]).add(p[1]).add(p[2]).add(p[3]));
  }
  int dim = depth % 3;
  size_t mid = lo + (hi - lo) / 2;
  std::nth_element(pts.begin() + lo, pts.begin() + mid, pts.begin() + hi,
                   [dim](const Point& a, const Point& b) { return a[dim] < b[dim]; });
  int64_t split = pts[mid][dim];
  std::array<int64_t, 6> a, b;
  int64_t ma, mb;
  Value l = kd_build(pts, lo, mid, depth + 1, a, ma);
  Value r = kd_build(pts, mid, hi, depth + 1, b, mb);
  for (int i = 0; i < 3; ++i) {
    box[i] = std::min(a[i], b[i]);
    box[3 + i] = std::max(a[3 + i], b[3 + i]);
  }
  mass = ma + mb;
  Value v("KNode");
  v.add(int64_t(dim)).add(split);
  for (int i = 0; i < 6; ++i) v.add(box[i]);
  v.add(mass).add(std::move(l)).add(std::move(r));
  return v;
}

uint64_t median(std::vector<uint64_t> xs) {
  std::sort(xs.begin(), xs.end());
  size_t n = xs.size();
  return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2;
}

std::string fmt_ratio(const std::optional<double>& d) {
  if (!d) return "";
  char b[32];
  std::snprintf(b, sizeof b, "%.4f", *d);
  return b;
}

std::string fmt_frac(double d) {
  char b[32];
  std::snprintf(b, sizeof b, "%.6f", d);
  return b;
}

std::string joined_reads(const BenchRow& r) {
  std::string s;
  for (size_t i = 0; i < r.buffers.size(); ++i) {
    if (i) s += ";";
    s += std::to_string(r.buffers[i].bytes_read);
  }
  return s;
}

// Column values as text; empty means absent.
std::vector<std::string> cells(const BenchRow& r) {
  return {r.suite,
          r.pass,
          std::to_string(r.size),
          layout_name(r.layout),
          mode_name(r.mode),
          r.ok() ? std::to_string(r.median_ns) : "",
          fmt_ratio(r.s_fo),
          fmt_ratio(r.s_fb),
          fmt_ratio(r.s_gm),
          fmt_frac(r.dead_fraction),
          r.ok() ? std::to_string(r.bytes_read_total) : "",
          r.ok() ? std::to_string(r.min_ns) : "",
          r.ok() ? std::to_string(r.steps) : "",
          r.ok() ? std::to_string(r.result) : "",
          joined_reads(r),
          r.status};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c;
  }
  return o + "\"";
}

}  // namespace

Value generate(std::string_view suite, uint64_t size, uint64_t seed) {
  lookup_suite(suite);
  Rng r{std::mt19937_64(seed)};
  if (suite == "List") return list(r, size);
  if (suite == "MonoTree") return perfect(r, perfect_depth(size, 2), 2, "Node", "Leaf");
  if (suite == "TernaryTree") return perfect(r, perfect_depth(size, 3), 3, "TNode", "TLeaf");
  if (suite == "LinearListReduction") {
    Value v("WNil");
    for (uint64_t i = 0; i < size; ++i) {
      Value c("WCons");
      for (int k = 0; k < 11; ++k) c.add(r.num(-1000, 1000));
      c.add(std::move(v));
      v = std::move(c);
    }
    return v;
  }
  if (suite == "ReduceNestedList") {
    Value v("End");
    for (uint64_t i = 0; i < size; ++i) {
      Value c("NCons");
      c.add(r.num(-1000, 1000));
      c.add(list(r, uint64_t(r.num(4, 32))));
      c.add(std::move(v));
      v = std::move(c);
    }
    return v;
  }
  // KDTree: points spread a little past the query box on every axis.
  std::vector<Point> pts(size);
  const int64_t lo = -(int64_t(1) << 18), hi = (int64_t(1) << 19) + (int64_t(1) << 18);
  for (auto& p : pts) p = {r.num(lo, hi), r.num(lo, hi), r.num(lo, hi), r.num(1, 100)};
  std::array<int64_t, 6> box;
  int64_t mass;
  return kd_build(pts, 0, pts.size(), 0, box, mass);
}

std::vector<BenchRow> run_experiment(const BenchSpec& spec) {
  const Suite& suite = lookup_suite(spec.suite);
  const PassDef& pass = lookup_pass(spec.suite, spec.pass);
  if (spec.repetitions < 3) fail(ErrorCode::InvalidArgument, "at least 3 repetitions are needed for timing");
  if (spec.sizes.empty() || spec.layouts.empty() || spec.modes.empty())
    fail(ErrorCode::InvalidArgument, "empty benchmark grid");
  std::vector<uint64_t> sizes = spec.sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  std::vector<BenchRow> rows;
  TraverseOptions timed;
  timed.instrument = false;
  timed.max_depth = spec.max_depth;
  TraverseOptions counted = timed;
  counted.instrument = true;

  for (uint64_t size : sizes) {
    Value v = generate(spec.suite, size, spec.seed);
    size_t first = rows.size();
    for (Layout layout : spec.layouts) {
      AdtSchema schema = parse_schema(suite.schema(layout));
      RegionStore store;
      SerializeOptions so;
      so.first_chunk_size = spec.first_chunk_size;
      SerializedRoot root = serialize(schema, suite.datatype, v, store, so);
      for (CursorMode mode : spec.modes) {
        BenchRow row;
        row.suite = spec.suite;
        row.pass = spec.pass;
        row.size = size;
        row.layout = layout;
        row.mode = mode;
        row.dead_fraction = pass.dead_fraction();
        auto once = [&](const TraverseOptions& o) {
          if (pass.kind == PassKind::Fold) return run_fold(schema, pass, root, mode, o);
          RegionStore out;
          TraversalReport rep = run_map(schema, pass, root, out, mode, o);
          rep.output.reset();
          return rep;
        };
        try {
          // The instrumented run doubles as warmup.
          TraversalReport c = once(counted);
          row.result = c.result;
          row.buffers = c.buffers;
          for (const auto& b : c.buffers) row.bytes_read_total += b.bytes_read;
          row.steps = c.steps;
          row.bundle_copies = c.bundle_copies;
          std::vector<uint64_t> ns;
          for (int i = 0; i < spec.repetitions; ++i) ns.push_back(once(timed).wall_ns);
          row.median_ns = median(ns);
          row.min_ns = *std::min_element(ns.begin(), ns.end());
        } catch (const Error& e) {
          row.status = error_name(e.code());
          row.message = e.what();
        }
        rows.push_back(std::move(row));
      }
    }
    auto ref = [&](Layout l, CursorMode m) -> const BenchRow* {
      for (size_t i = first; i < rows.size(); ++i)
        if (rows[i].layout == l && rows[i].mode == m && rows[i].ok() && rows[i].median_ns > 0) return &rows[i];
      return nullptr;
    };
    const BenchRow* gm = ref(Layout::Flat, CursorMode::Mutable);
    const BenchRow* gi = ref(Layout::Flat, CursorMode::Immutable);
    for (size_t i = first; i < rows.size(); ++i) {
      BenchRow& r = rows[i];
      if (!r.ok() || r.median_ns == 0) continue;
      if (gm) r.s_fo = double(gm->median_ns) / double(r.median_ns);
      if (gi) r.s_fb = double(gi->median_ns) / double(r.median_ns);
      if (gm && gi) r.s_gm = double(gi->median_ns) / double(gm->median_ns);
    }
  }
  return rows;
}

ReportFormat parse_format(std::string_view s) {
  if (s == "table") return ReportFormat::Table;
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  fail(ErrorCode::InvalidArgument, "unknown report format " + std::string(s));
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> c = {"suite",        "pass",          "size",     "layout",
                                             "mode",         "median_ns",     "S_fo",     "S_fb",
                                             "S_gm",         "dead_fraction", "bytes_read_total", "min_ns",
                                             "steps",        "result",        "buffer_bytes_read", "status"};
  return c;
}

std::string emit_report(const std::vector<BenchRow>& rows, ReportFormat format) {
  if (rows.empty()) fail(ErrorCode::EmptyInput, "no rows to report");
  const auto& cols = report_columns();
  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows) table.push_back(cells(r));

  if (format == ReportFormat::Csv) {
    std::string out;
    for (size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + csv_field(cols[i]);
    out += "\r\n";
    for (const auto& t : table) {
      for (size_t i = 0; i < t.size(); ++i) out += (i ? "," : "") + csv_field(t[i]);
      out += "\r\n";
    }
    return out;
  }

  if (format == ReportFormat::Json) {
    // Same keys and values as the CSV columns; numeric columns as numbers.
    static const std::set<std::string> text = {"suite", "pass", "layout", "mode", "buffer_bytes_read", "status"};
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (size_t k = 0; k < rows.size(); ++k) {
      nlohmann::ordered_json o;
      for (size_t i = 0; i < cols.size(); ++i) {
        const std::string& v = table[k][i];
        if (text.count(cols[i])) o[cols[i]] = v;
        else if (v.empty()) o[cols[i]] = nullptr;
        else if (v.find('.') != std::string::npos) o[cols[i]] = std::stod(v);
        else if (v[0] == '-') o[cols[i]] = std::stoll(v);
        else o[cols[i]] = std::stoull(v);
      }
      if (!rows[k].message.empty()) o["message"] = rows[k].message;
      arr.push_back(std::move(o));
    }
    return arr.dump(2) + "\n";
  }

  // Table: the leading columns, aligned.
  const size_t shown = 11;
  std::vector<size_t> w(shown + 1, 0);
  auto col = [&](size_t i) { return i < shown ? i : cols.size() - 1; };
  for (size_t i = 0; i <= shown; ++i) {
    w[i] = cols[col(i)].size();
    for (const auto& t : table) w[i] = std::max(w[i], t[col(i)].size());
  }
  auto line = [&](auto get) {
    std::string s;
    for (size_t i = 0; i <= shown; ++i) {
      std::string v = get(col(i));
      if (i) s += "  ";
      s += v + std::string(w[i] - v.size(), ' ');
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line([&](size_t i) { return cols[i]; });
  for (const auto& t : table) out += line([&](size_t i) { return t[i]; });
  return out;
}

double geomean(const std::vector<double>& xs) {
  if (xs.empty()) fail(ErrorCode::EmptyInput, "geomean of nothing");
  double s = 0;
  for (double x : xs) {
    if (!(x > 0)) fail(ErrorCode::InvalidArgument, "geomean needs positive values");
    s += std::log(x);
  }
  return std::exp(s / double(xs.size()));
}

}  // namespace packedadt::bench
