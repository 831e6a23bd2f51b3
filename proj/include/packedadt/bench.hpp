#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "packedadt/traversal.hpp"

namespace packedadt::bench {

// Deterministic input of about `size` nodes. Trees are the largest perfect
// tree with at most `size` nodes; lists have `size` cells; KDTree has `size`
// points.
Value generate(std::string_view suite, uint64_t size, uint64_t seed);

struct BenchSpec {
  std::string suite;
  std::string pass;
  std::vector<uint64_t> sizes;
  std::vector<Layout> layouts = {Layout::Flat, Layout::Factored};
  std::vector<CursorMode> modes = {CursorMode::Mutable};
  int repetitions = 5;
  uint64_t seed = 1;
  uint64_t max_depth = uint64_t(1) << 20;
  uint32_t first_chunk_size = uint32_t(1) << 16;
};

struct BenchRow {
  std::string suite, pass;
  uint64_t size = 0;
  Layout layout = Layout::Flat;
  CursorMode mode = CursorMode::Mutable;
  std::string status = "ok";  // or the error name
  std::string message;
  uint64_t median_ns = 0, min_ns = 0;
  int64_t result = 0;
  std::vector<BufferCounters> buffers;
  uint64_t bytes_read_total = 0;
  uint64_t steps = 0;
  uint64_t bundle_copies = 0;
  double dead_fraction = 0;
  // Ratios of medians: S_fo = flat-mutable / this row, S_fb = flat-immutable
  // / this row, S_gm = flat-immutable / flat-mutable at the same size.
  std::optional<double> s_fo, s_fb, s_gm;

  bool ok() const { return status == "ok"; }
};

std::vector<BenchRow> run_experiment(const BenchSpec& spec);

enum class ReportFormat { Table, Json, Csv };
ReportFormat parse_format(std::string_view s);  // InvalidArgument
std::string emit_report(const std::vector<BenchRow>& rows, ReportFormat format);

// Report columns in order.
const std::vector<std::string>& report_columns();

double geomean(const std::vector<double>& xs);

}  // namespace packedadt::bench
