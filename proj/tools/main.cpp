// packedadt command-line tool.
//
// Exit codes: 0 ok, 1 usage, 2 validation or typecheck failure, 3 runtime
// error, 4 fuzz counterexample.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "packedadt/bench.hpp"
#include "packedadt/layout.hpp"
#include "packedadt/socal.hpp"
#include "packedadt/traversal.hpp"

using namespace packedadt;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kRuntime = 3, kCounterexample = 4 };

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownSuite:
    case ErrorCode::NotFound:
      return kUsage;
    case ErrorCode::SyntaxError:
    case ErrorCode::DuplicateDatatype:
    case ErrorCode::UnknownDatatype:
    case ErrorCode::TooManyConstructors:
    case ErrorCode::FieldOrderViolation:
    case ErrorCode::UnsupportedFieldType:
    case ErrorCode::FactoredInFlat:
    case ErrorCode::InfiniteShape:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::LayoutMismatch:
    case ErrorCode::BadMagic:
    case ErrorCode::VersionMismatch:
    case ErrorCode::SchemaHashMismatch:
    case ErrorCode::TruncatedFile:
    case ErrorCode::UnboundName:
      return kInvalid;
    default:
      return kRuntime;
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Usage("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(data.data(), std::streamsize(data.size()))) throw Usage("cannot write " + path);
}

uint32_t first_chunk() {
  const char* e = std::getenv("PACKEDADT_FIRST_CHUNK");
  if (!e || !*e) return 64;
  char* end = nullptr;
  unsigned long v = std::strtoul(e, &end, 10);
  if (*end || v < kMinFirstChunk || v > (1ul << 30)) throw Usage(std::string("PACKEDADT_FIRST_CHUNK is not a byte count: ") + e);
  return uint32_t(v);
}

Layout parse_layout(const std::string& s) {
  if (s == "flat") return Layout::Flat;
  if (s == "factored") return Layout::Factored;
  throw Usage("unknown layout " + s);
}

CursorMode parse_mode(const std::string& s) {
  if (s == "mutable") return CursorMode::Mutable;
  if (s == "immutable") return CursorMode::Immutable;
  throw Usage("unknown mode " + s);
}

// The whole schema takes the requested layout, so pack and unpack agree on
// the schema hash.
AdtSchema schema_with_layout(const std::string& path, std::optional<Layout> layout) {
  AdtSchema s = parse_schema(slurp(path));
  if (!layout) return s;
  for (auto& d : s.datatypes) d.layout = *layout;
  return parse_schema(s.canonical_text());
}

// ---- values.json ----------------------------------------------------------

constexpr int64_t kJsonIntMax = (int64_t(1) << 53) - 1;

Value from_json(const json& j) {
  if (!j.is_object() || !j.contains("ctor") || !j["ctor"].is_string())
    fail(ErrorCode::SchemaMismatch, "value must be an object with a \"ctor\" string");
  Value v(j["ctor"].get<std::string>());
  if (j.contains("args")) {
    const json& a = j["args"];
    if (!a.is_array()) fail(ErrorCode::SchemaMismatch, "\"args\" must be an array");
    for (const auto& x : a) {
      if (x.is_number_integer()) {
        int64_t n = x.is_number_unsigned() && x.get<uint64_t>() > uint64_t(INT64_MAX) ? INT64_MAX : x.get<int64_t>();
        if (n > kJsonIntMax || n < -kJsonIntMax)
          fail(ErrorCode::SchemaMismatch, "integer " + x.dump() + " does not fit in 53 bits");
        v.add(n);
      } else if (x.is_object()) {
        v.add(from_json(x));
      } else {
        fail(ErrorCode::SchemaMismatch, "argument " + x.dump() + " is neither an integer nor a value");
      }
    }
  }
  return v;
}

json to_json(const Value& v) {
  json j;
  j["ctor"] = v.ctor;
  json a = json::array();
  for (const auto& x : v.args) {
    if (auto* n = std::get_if<int64_t>(&x)) a.push_back(*n);
    else a.push_back(to_json(*std::get<std::unique_ptr<Value>>(x)));
  }
  j["args"] = std::move(a);
  return j;
}

// ---- subcommands ----------------------------------------------------------

int schema_check(const std::string& file) {
  AdtSchema s = parse_schema(slurp(file));
  for (const auto& d : s.datatypes) {
    BufferShape sh = buffer_shape(s, d.name);
    std::cout << d.name << " " << layout_name(d.layout) << " constructors=" << d.ctors.size()
              << " buffers=" << cursor_count(sh) << "\n";
  }
  char h[24];
  std::snprintf(h, sizeof h, "%016llx", (unsigned long long)s.hash());
  std::cout << "hash " << h << "\n";
  return kOk;
}

struct PackArgs {
  std::string schema, type, layout, input, out;
  bool random_access = false, indirection = false;
};

int pack(const PackArgs& a) {
  AdtSchema s = schema_with_layout(a.schema, parse_layout(a.layout));
  int dt = s.find(a.type);
  if (dt < 0) fail(ErrorCode::UnknownDatatype, a.type);
  json j;
  try {
    j = json::parse(slurp(a.input));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::SyntaxError, std::string("values.json: ") + e.what());
  }
  if (j.is_array()) {
    if (j.size() != 1) fail(ErrorCode::SchemaMismatch, "a container holds exactly one value");
    j = j[0];
  }
  Value v = from_json(j);
  check_value(s, dt, v);
  SerializeOptions o;
  o.first_chunk_size = first_chunk();
  o.random_access = a.random_access;
  o.indirection_every = a.indirection ? 2 : 0;
  RegionStore store;
  SerializedRoot root = serialize(s, dt, v, store, o);
  std::vector<uint8_t> bytes = export_container(root);
  spit(a.out, std::string(bytes.begin(), bytes.end()));
  return kOk;
}

int unpack(const std::string& schema, const std::string& type, const std::string& file) {
  std::string data = slurp(file);
  // Header: magic(4) version(2) layout(1).
  std::optional<Layout> layout;
  if (data.size() >= 7 && data.compare(0, 4, "FADT") == 0) layout = data[6] ? Layout::Factored : Layout::Flat;
  AdtSchema s = schema_with_layout(schema, layout);
  int dt = -1;
  if (!type.empty()) {
    dt = s.find(type);
    if (dt < 0) fail(ErrorCode::UnknownDatatype, type);
  }
  RegionStore store;
  auto bytes = std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(data.data()), data.size());
  SerializedRoot root = import_container(bytes, s, store, dt);
  std::cout << to_json(deserialize(root)).dump() << "\n";
  return kOk;
}

socal::Program load_program(const std::string& file) { return socal::parse_socal(slurp(file)); }

int report_reject(const std::string& file, const socal::CheckResult& r) {
  std::cerr << file << ":" << r.line << ":" << r.col << ": " << r.reason << ": " << r.message;
  if (!r.rule.empty()) std::cerr << " [" << r.rule << "]";
  if (!r.function.empty()) std::cerr << " in " << r.function;
  std::cerr << "\n";
  return kInvalid;
}

int socal_check(const std::string& file, bool trace) {
  socal::Program p = load_program(file);
  socal::CheckResult r = socal::typecheck(p);
  if (trace)
    for (const auto& t : r.trace) std::cout << t.to_json() << "\n";
  if (!r.ok) return report_reject(file, r);
  if (!trace) std::cout << "ok\n";
  return kOk;
}

int socal_run(const std::string& file, bool trace) {
  socal::Program p = load_program(file);
  socal::CheckResult c = socal::typecheck(p);
  if (!c.ok) return report_reject(file, c);
  socal::RunOptions o;
  o.check_wf = true;
  o.trace = trace;
  socal::RunResult r = socal::interpret(p, o);
  if (trace)
    for (const auto& t : r.trace) std::cout << t.to_json() << "\n";
  if (!r.violation.ok) {
    std::cerr << file << ": store not well formed: clause " << r.violation.clause << " at " << r.violation.location
              << ": " << r.violation.detail << "\n";
    return kRuntime;
  }
  json out;
  out["steps"] = r.steps;
  if (r.value) out["value"] = to_json(*r.value);
  else out["int"] = r.n;
  std::cout << out.dump() << "\n";
  return kOk;
}

int socal_fuzz(uint64_t seed, uint64_t count) {
  socal::FuzzSummary f = socal::fuzz_type_safety(seed, count);
  json out;
  out["programs"] = f.programs;
  out["passed"] = f.passed;
  out["rejected"] = f.rejected;
  out["stuck"] = f.stuck;
  out["wf_violations"] = f.wf_violations;
  out["erasure_mismatches"] = f.erasure_mismatches;
  out["steps"] = f.steps;
  out["wf_checks"] = f.wf_checks;
  std::cout << out.dump() << "\n";
  for (const auto& c : f.counterexamples) std::cerr << "counterexample:\n" << c << "\n";
  return f.ok() ? kOk : kCounterexample;
}

struct BenchArgs {
  std::string suite, pass, format = "table";
  std::vector<uint64_t> sizes = {10000, 100000, 1000000};
  std::vector<std::string> layouts = {"flat", "factored"}, modes = {"mutable"};
  int reps = 5;
  uint64_t seed = 1;
};

int bench_run(const BenchArgs& a) {
  bench::BenchSpec s;
  s.suite = a.suite;
  s.pass = a.pass;
  s.sizes = a.sizes;
  s.layouts.clear();
  for (const auto& l : a.layouts) s.layouts.push_back(parse_layout(l));
  s.modes.clear();
  for (const auto& m : a.modes) s.modes.push_back(parse_mode(m));
  s.repetitions = a.reps;
  s.seed = a.seed;
  bench::ReportFormat f = bench::parse_format(a.format);
  std::cout << bench::emit_report(bench::run_experiment(s), f);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serialized algebraic datatypes: layouts, location calculus and benchmarks", "packedadt"};
  app.require_subcommand(1);
  int code = kOk;
  std::function<int()> action;

  auto* schema = app.add_subcommand("schema", "Schema tools")->require_subcommand(1);
  std::string schema_file;
  auto* sc = schema->add_subcommand("check", "Validate a schema and print its buffers");
  sc->add_option("file", schema_file, "Schema file")->required();
  sc->callback([&] { action = [&] { return schema_check(schema_file); }; });

  PackArgs pa;
  auto* pk = app.add_subcommand("pack", "Serialize values.json into a container file");
  pk->add_option("--schema", pa.schema, "Schema file")->required();
  pk->add_option("--type", pa.type, "Root datatype")->required();
  pk->add_option("--layout", pa.layout, "flat or factored")->required()->check(CLI::IsMember({"flat", "factored"}));
  pk->add_option("--input", pa.input, "values.json")->required();
  pk->add_option("--out", pa.out, "Output container")->required();
  pk->add_flag("--random-access", pa.random_access, "Write random-access records");
  pk->add_flag("--indirection", pa.indirection, "Share every second self-recursive child by indirection");
  pk->callback([&] { action = [&] { return pack(pa); }; });

  std::string up_schema, up_type, up_file;
  auto* up = app.add_subcommand("unpack", "Print the value in a container file as JSON");
  up->add_option("--schema", up_schema, "Schema file")->required();
  up->add_option("--type", up_type, "Root datatype (inferred when absent)");
  up->add_option("file", up_file, "Container file")->required();
  up->callback([&] { action = [&] { return unpack(up_schema, up_type, up_file); }; });

  auto* so = app.add_subcommand("socal", "Location calculus")->require_subcommand(1);
  std::string so_file;
  bool so_trace = false;
  uint64_t so_seed = 1, so_count = 1000;
  auto* so_check = so->add_subcommand("check", "Typecheck a program");
  so_check->add_option("file", so_file, "Program")->required();
  so_check->add_flag("--trace", so_trace, "Print the typing trace of main as JSON lines");
  so_check->callback([&] { action = [&] { return socal_check(so_file, so_trace); }; });
  auto* so_run = so->add_subcommand("run", "Typecheck and interpret a program");
  so_run->add_option("file", so_file, "Program")->required();
  so_run->add_flag("--trace", so_trace, "Print the reduction trace as JSON lines");
  so_run->callback([&] { action = [&] { return socal_run(so_file, so_trace); }; });
  auto* so_fuzz = so->add_subcommand("fuzz", "Check type safety on generated programs");
  so_fuzz->add_option("file", so_file, "Ignored; programs are generated");
  so_fuzz->add_option("--seed", so_seed, "Generator seed");
  so_fuzz->add_option("--count", so_count, "Number of programs")->check(CLI::PositiveNumber);
  so_fuzz->callback([&] { action = [&] { return socal_fuzz(so_seed, so_count); }; });

  auto* bench = app.add_subcommand("bench", "Benchmarks")->require_subcommand(1);
  BenchArgs ba;
  auto* br = bench->add_subcommand("run", "Run a benchmark grid");
  br->add_option("--suite", ba.suite, "Suite")->required();
  br->add_option("--pass", ba.pass, "Pass")->required();
  br->add_option("--sizes", ba.sizes, "Sizes")->delimiter(',');
  br->add_option("--layouts", ba.layouts, "flat,factored")->delimiter(',');
  br->add_option("--modes", ba.modes, "mutable,immutable")->delimiter(',');
  br->add_option("--reps", ba.reps, "Timed repetitions (at least 3)");
  br->add_option("--seed", ba.seed, "Input seed");
  br->add_option("--format", ba.format, "table, json or csv")->check(CLI::IsMember({"table", "json", "csv"}));
  br->callback([&] { action = [&] { return bench_run(ba); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    code = action();
  } catch (const Usage& e) {
    std::cerr << "packedadt: " << e.what() << "\n";
    code = kUsage;
  } catch (const Error& e) {
    std::cerr << "packedadt: " << e.what() << "\n";
    code = exit_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "packedadt: " << e.what() << "\n";
    code = kRuntime;
  }
  return code;
}
