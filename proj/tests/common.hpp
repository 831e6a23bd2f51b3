#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "packedadt/layout.hpp"
#include "packedadt/schema.hpp"
#include "packedadt/value.hpp"

namespace fx {

using namespace packedadt;

inline const char* kTreeFlat = "data Tree = Node Tree Tree | Leaf Int\n";
inline const char* kTreeFactored = "data Tree = Node Tree Tree | Leaf Int\nlayout Tree = Factored\n";

// Every datatype used by the round-trip properties, in both layouts.
inline std::string mixed_schema(bool factored) {
  std::string L = factored ? "Factored" : "Flat";
  return "data Tree = Node Tree Tree | Leaf Int\n"
         "layout Tree = " + L + "\n"
         "data List = Cons Int List | Nil\n"
         "layout List = Flat\n"
         "data NestedList = NCons Int List NestedList | End\n"
         "layout NestedList = " + L + "\n"
         "data KDTree = KNode Int Int Int Int Int Int Int Int Int KDTree KDTree | KLeaf Int Int Int Int | KEmpty\n"
         "layout KDTree = " + L + "\n"
         "data TList = TCons Int List Tree TList | TNil\n"
         "layout TList = " + L + "\n";
}

inline Value leaf(int64_t n) { return std::move(mk("Leaf").add(n)); }
inline Value node(Value l, Value r) { return std::move(mk("Node").add(std::move(l)).add(std::move(r))); }

inline std::vector<uint8_t> le64(int64_t v) {
  std::vector<uint8_t> b(8);
  for (int i = 0; i < 8; ++i) b[i] = uint8_t(uint64_t(v) >> (8 * i));
  return b;
}

inline std::vector<uint8_t> cat(std::initializer_list<std::vector<uint8_t>> parts) {
  std::vector<uint8_t> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Independent recursive writer: builds the expected per-buffer bytes straight
// from the schema definition, without using buffer_shape.
struct OracleWriter {
  const AdtSchema& s;
  std::vector<std::vector<uint8_t>> bufs;

  // Allocates buffer indices in the same deterministic order the layout
  // promises: tags, then for each (ctor, non-self field) in order.
  struct Layout_ {
    int tag;
    std::vector<std::vector<int>> scalar;              // [ctor][field] buffer or -1
    std::vector<std::vector<std::shared_ptr<Layout_>>> nested;
  };

  std::shared_ptr<Layout_> plan(int d, int& next) {
    auto p = std::make_shared<Layout_>();
    p->tag = next++;
    const auto& def = s[d];
    p->scalar.resize(def.ctors.size());
    p->nested.resize(def.ctors.size());
    if (def.layout == packedadt::Layout::Flat) return p;
    for (size_t c = 0; c < def.ctors.size(); ++c) {
      const auto& ct = def.ctors[c];
      p->scalar[c].assign(ct.fields.size(), -1);
      p->nested[c].resize(ct.fields.size());
      for (size_t j = 0; j < ct.fields.size(); ++j) {
        const auto& f = ct.fields[j];
        if (f.kind == FieldKind::Int) p->scalar[c][j] = next++;
        else if (f.kind == FieldKind::Packed) p->nested[c][j] = plan(f.dt, next);
      }
    }
    return p;
  }

  void flat(int d, const Value& v, int b) {
    const auto& def = s[d];
    const auto& ct = def.ctors[def.find_ctor(v.ctor)];
    bufs[b].push_back(ct.tag);
    for (size_t j = 0; j < ct.fields.size(); ++j)
      if (ct.fields[j].kind == FieldKind::Int) {
        auto x = le64(std::get<int64_t>(v.args[j]));
        bufs[b].insert(bufs[b].end(), x.begin(), x.end());
      }
    for (size_t j = 0; j < ct.fields.size(); ++j)
      if (ct.fields[j].kind != FieldKind::Int) flat(ct.fields[j].dt, *std::get<1>(v.args[j]), b);
  }

  void fact(int d, const Value& v, const Layout_& p) {
    const auto& def = s[d];
    if (def.layout == packedadt::Layout::Flat) return flat(d, v, p.tag);
    int c = def.find_ctor(v.ctor);
    const auto& ct = def.ctors[c];
    bufs[p.tag].push_back(ct.tag);
    for (size_t j = 0; j < ct.fields.size(); ++j) {
      const auto& f = ct.fields[j];
      if (f.kind == FieldKind::Int) {
        auto x = le64(std::get<int64_t>(v.args[j]));
        auto& b = bufs[p.scalar[c][j]];
        b.insert(b.end(), x.begin(), x.end());
      } else if (f.kind == FieldKind::Packed) {
        fact(f.dt, *std::get<1>(v.args[j]), *p.nested[c][j]);
      } else {
        fact(d, *std::get<1>(v.args[j]), p);
      }
    }
  }

  std::vector<std::vector<uint8_t>> run(int d, const Value& v) {
    int n = 0;
    auto p = plan(d, n);
    bufs.assign(n, {});
    fact(d, v, *p);
    return bufs;
  }
};

// Contents of the first chunk of region r up to the frontier. Only valid when
// nothing redirected.
inline std::vector<uint8_t> region_bytes(const RegionStore& st, uint16_t r) {
  const uint8_t* p = st.data(r, 0);
  return std::vector<uint8_t>(p, p + st.chunk_used(r, 0));
}

// Random schema-conformant value with depth <= max_depth.
struct Gen {
  const AdtSchema& s;
  std::mt19937_64 rng;
  int max_depth;

  int64_t num() {
    std::uniform_int_distribution<int64_t> d(-1000000, 1000000);
    return d(rng);
  }

  Value make(int d, int depth) {
    const auto& def = s[d];
    // Prefer leaf constructors near the depth bound.
    std::vector<int> leaves, all;
    for (size_t c = 0; c < def.ctors.size(); ++c) {
      all.push_back(int(c));
      bool rec = false;
      for (const auto& f : def.ctors[c].fields) rec = rec || f.kind != FieldKind::Int;
      if (!rec) leaves.push_back(int(c));
    }
    bool stop = depth >= max_depth || rng() % 3 == 0;
    const auto& use = stop && !leaves.empty() ? leaves : all;
    const auto& ct = def.ctors[use[rng() % use.size()]];
    Value v(ct.name);
    for (const auto& f : ct.fields)
      if (f.kind == FieldKind::Int) v.add(num());
      else v.add(make(f.dt, depth + 1));
    return v;
  }
};

}  // namespace fx
