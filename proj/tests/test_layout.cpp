#include <functional>

#include "common.hpp"
#include "doctest.h"
#include "packedadt/cursor.hpp"

using namespace packedadt;
using fx::cat;
using fx::le64;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

Value two_leaves() { return fx::node(fx::leaf(1), fx::leaf(2)); }

StoreOptions tracked() {
  StoreOptions o;
  o.track_writes = true;
  return o;
}

}  // namespace

TEST_CASE("flat tree bytes") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st(tracked());
  auto v = two_leaves();
  auto root = serialize(s, "Tree", v, st, {256});
  auto expect = cat({{0x00, 0x01}, le64(1), {0x01}, le64(2)});
  CHECK(fx::region_bytes(st, root.regions[0]) == expect);
  CHECK(fx::OracleWriter{s, {}}.run(0, v)[0] == expect);
}

TEST_CASE("factored tree bytes") {
  auto s = parse_schema(fx::kTreeFactored);
  RegionStore st(tracked());
  auto root = serialize(s, "Tree", two_leaves(), st, {256});
  REQUIRE(root.regions.size() == 2);
  CHECK(fx::region_bytes(st, root.regions[0]) == std::vector<uint8_t>{0x00, 0x01, 0x01});
  CHECK(fx::region_bytes(st, root.regions[1]) == cat({le64(1), le64(2)}));
}

TEST_CASE("Nil in a factored list") {
  auto s = parse_schema("data List = Cons Int List | Nil; layout List = Factored");
  RegionStore st;
  auto root = serialize(s, "List", mk("Nil"), st);
  CHECK(fx::region_bytes(st, root.regions[0]) == std::vector<uint8_t>{0x01});
  CHECK(fx::region_bytes(st, root.regions[1]).empty());
}

TEST_CASE("oracle writer agrees on random values") {
  for (int f = 0; f < 2; ++f) {
    auto s = parse_schema(fx::mixed_schema(f));
    fx::Gen g{s, std::mt19937_64(f + 3), 8};
    for (int i = 0; i < 200; ++i) {
      int d = i % int(s.datatypes.size());
      Value v = g.make(d, 0);
      RegionStore st;
      auto root = serialize(s, d, v, st, {1 << 20});
      auto expect = fx::OracleWriter{s, {}}.run(d, v);
      REQUIRE(expect.size() == root.regions.size());
      for (size_t b = 0; b < expect.size(); ++b) REQUIRE(fx::region_bytes(st, root.regions[b]) == expect[b]);
      CHECK(canonical_buffers(s, d, v) == expect);
    }
  }
}

TEST_CASE("round trip") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st;
  auto v = two_leaves();
  auto root = serialize(s, "Tree", v, st);
  CHECK(deserialize(root) == v);
}

TEST_CASE("schema mismatch is rejected before writing") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st;
  CHECK(code_of([&] { serialize(s, "Tree", mk("Leaf"), st); }) == ErrorCode::SchemaMismatch);
  CHECK(code_of([&] { serialize(s, "Tree", mk("Bogus"), st); }) == ErrorCode::SchemaMismatch);
}

TEST_CASE("values crossing chunk boundaries") {
  for (int f = 0; f < 2; ++f) {
    auto s = parse_schema(f ? fx::kTreeFactored : fx::kTreeFlat);
    RegionStore st(tracked());
    Value v = fx::node(fx::leaf(1), fx::node(fx::leaf(2), fx::leaf(3)));
    auto root = serialize(s, "Tree", v, st, {32});
    bool crossed = false;
    for (auto r : root.regions) crossed = crossed || st.chunk_count(r) > 1;
    CHECK(crossed);
    CHECK(deserialize(root) == v);
  }
  // Factored scalar buffer crossing: 4 leaves = 32 bytes of ints.
  auto s = parse_schema(fx::kTreeFactored);
  RegionStore st(tracked());
  Value v = fx::node(fx::node(fx::leaf(1), fx::leaf(2)), fx::node(fx::leaf(3), fx::leaf(4)));
  auto root = serialize(s, "Tree", v, st, {32});
  CHECK(st.chunk_count(root.regions[1]) > 1);
  CHECK(deserialize(root) == v);
}

TEST_CASE("truncated buffer") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st;
  auto v = fx::leaf(5);
  auto root = serialize(s, "Tree", v, st);
  auto file = export_container(root);
  // Keep the header consistent but drop 3 bytes of the integer.
  file.resize(file.size() - 3);
  size_t len_at = 4 + 2 + 1 + 2 + 8;
  file[len_at] = uint8_t(file[len_at] - 3);
  RegionStore st2;
  auto back = import_container(file, s, st2);
  CHECK(code_of([&] { deserialize(back); }) == ErrorCode::TruncatedBuffer);
}

TEST_CASE("corrupt tag") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st;
  auto root = serialize(s, "Tree", fx::leaf(5), st);
  auto file = export_container(root);
  file[4 + 2 + 1 + 2 + 8 + 8] = 7;
  RegionStore st2;
  auto back = import_container(file, s, st2);
  CHECK(code_of([&] { deserialize(back); }) == ErrorCode::CorruptTag);
}

TEST_CASE("indirection into every buffer") {
  auto s = parse_schema(fx::kTreeFactored);
  RegionStore st(tracked());
  auto src = serialize(s, "Tree", two_leaves(), st, {256});
  BundleWriter w(s, 0, st, {256});
  write_indirection(s, 0, w, src);
  auto dst = w.finalize();
  auto tags = fx::region_bytes(st, dst.regions[0]);
  auto ints = fx::region_bytes(st, dst.regions[1]);
  REQUIRE(tags.size() == 9);
  REQUIRE(ints.size() == 9);
  CHECK(tags[0] == 254);
  CHECK(ints[0] == 254);
  CHECK(Address::decode(load_u64(tags.data() + 1)) == src.bundle[0]);
  CHECK(Address::decode(load_u64(ints.data() + 1)) == src.bundle[1]);
  CHECK(st.refcount(src.regions[0]) == 2);
  CHECK(st.refcount(src.regions[1]) == 2);
  CHECK(deserialize(dst) == two_leaves());
  // The source stays readable through the outlinks after its root goes away.
  src.drop();
  CHECK(deserialize(dst) == two_leaves());
  dst.drop();
  CHECK(st.live_bytes() == 0);
}

TEST_CASE("flat indirection") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st;
  auto src = serialize(s, "Tree", two_leaves(), st);
  BundleWriter w(s, 0, st, {});
  write_indirection(s, 0, w, src);
  auto dst = w.finalize();
  auto b = fx::region_bytes(st, dst.regions[0]);
  CHECK(b.size() == 9);
  CHECK(b[0] == 254);
  CHECK(deserialize(dst) == two_leaves());

  auto other = parse_schema(fx::kTreeFactored);
  RegionStore st2;
  auto fsrc = serialize(other, "Tree", two_leaves(), st2);
  BundleWriter w2(s, 0, st2, {});
  CHECK(code_of([&] { write_indirection(s, 0, w2, fsrc); }) == ErrorCode::LayoutMismatch);
}

TEST_CASE("indirection refcounts per distinct chunk and source region") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st;
  auto src = serialize(s, "Tree", fx::leaf(9), st);
  BundleWriter w(s, 0, st, {32});
  // Two records in the same chunk: one count. A record in a later chunk: one more.
  w.reserve(0, 1);
  uint8_t node_tag = 0;
  w.write(0, &node_tag, 1);
  write_indirection(s, 0, w, src);
  write_indirection(s, 0, w, src);
  CHECK(st.refcount(src.regions[0]) == 2);
  while (w.pos()[0].chunk == 0) write_indirection(s, 0, w, src);
  CHECK(st.refcount(src.regions[0]) == 3);
}

TEST_CASE("serialize with an indirection policy") {
  for (int f = 0; f < 2; ++f) {
    auto s = parse_schema(fx::mixed_schema(f));
    fx::Gen g{s, std::mt19937_64(40 + f), 10};
    for (int i = 0; i < 100; ++i) {
      int d = i % int(s.datatypes.size());
      Value v = g.make(d, 0);
      RegionStore st(tracked());
      auto root = serialize(s, d, v, st, {32, false, 2});
      CHECK(deserialize(root) == v);
      root.drop();
      CHECK(st.live_bytes() == 0);
    }
  }
}

TEST_CASE("random access records: flat Node") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st(tracked());
  auto v = two_leaves();
  auto root = serialize(s, "Tree", v, st, {256, true});
  auto b = fx::region_bytes(st, root.regions[0]);
  REQUIRE(b.size() == 9 + 1 + 9 + 9);
  CHECK(b[0] == 253);
  Address right = Address::decode(load_u64(b.data() + 1));
  CHECK(b[9] == 0x00);
  CHECK(right.offset == 9 + 1 + 9);
  // O(1) access to the right child equals traversal-based access.
  CursorBundle after_left = skip_value(s, 0, st, root.shape, {Address{root.regions[0], 0, 10}});
  CHECK(after_left[0] == right);
  CHECK(deserialize_at(s, 0, st, root.shape, {right}) == fx::leaf(2));
  CHECK(deserialize(root) == v);
}

TEST_CASE("random access records: factored Node slots hold component starts") {
  auto s = parse_schema(fx::kTreeFactored);
  RegionStore st(tracked());
  Value v = fx::node(fx::node(fx::leaf(1), fx::leaf(2)), fx::leaf(3));
  auto root = serialize(s, "Tree", v, st, {256, true});
  auto tags = fx::region_bytes(st, root.regions[0]);
  // [253][tagpos][intpos] Node ...
  REQUIRE(tags[0] == 253);
  Address rt = Address::decode(load_u64(tags.data() + 1));
  Address ri = Address::decode(load_u64(tags.data() + 9));
  CHECK(rt.region == root.regions[0]);
  CHECK(ri.region == root.regions[1]);
  CHECK(ri.offset == 16);
  CHECK(deserialize_at(s, 0, st, root.shape, {rt, ri}) == fx::leaf(3));
  CHECK(deserialize(root) == v);
}

TEST_CASE("random access parity with traversal on random values") {
  for (int f = 0; f < 2; ++f) {
    auto s = parse_schema(fx::mixed_schema(f));
    fx::Gen g{s, std::mt19937_64(90 + f), 10};
    for (int i = 0; i < 100; ++i) {
      int d = i % int(s.datatypes.size());
      Value v = g.make(d, 0);
      RegionStore st(tracked());
      auto root = serialize(s, d, v, st, {32, true, i % 3 == 0 ? 3u : 0u});
      CHECK(deserialize(root) == v);
    }
  }
}

TEST_CASE("random access is gated and patches must land") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st;
  BundleWriter off(s, 0, st, {});
  CHECK(code_of([&] { write_random_access(s, 0, 0, off, off.root().shape); }) == ErrorCode::FeatureDisabled);
  BundleWriter on(s, 0, st, {64, true});
  write_random_access(s, 0, 0, on, on.root().shape);
  CHECK(code_of([&] { on.finalize(); }) == ErrorCode::DanglingPatch);
}

TEST_CASE("skip_value") {
  auto s = parse_schema(fx::kTreeFlat);
  RegionStore st;
  BundleWriter w(s, 0, st, {256});
  serialize_into(w, w.root().shape, fx::leaf(1));
  serialize_into(w, w.root().shape, fx::leaf(7));
  auto root = w.finalize();
  auto end = skip_value(root, root.bundle);
  CHECK(end[0].offset == root.bundle[0].offset + 9);
  CHECK(deserialize_at(s, 0, st, root.shape, end) == fx::leaf(7));

  auto fs = parse_schema(fx::kTreeFactored);
  auto froot = serialize(fs, "Tree", two_leaves(), st, {256});
  auto fend = skip_value(froot, froot.bundle);
  CHECK(fend[0].offset == 3);
  CHECK(fend[1].offset == 16);
}

TEST_CASE("layout size invariants") {
  for (int f = 0; f < 2; ++f) {
    auto s = parse_schema(fx::mixed_schema(f));
    fx::Gen g{s, std::mt19937_64(5 + f), 9};
    for (int i = 0; i < 100; ++i) {
      int d = i % int(s.datatypes.size());
      Value v = g.make(d, 0);
      RegionStore st;
      auto root = serialize(s, d, v, st, {1 << 20});
      if (f == 0) {
        // Σ(1 + 8·scalars) over nodes.
        size_t expect = 0;
        std::vector<const Value*> w{&v};
        while (!w.empty()) {
          const Value* x = w.back();
          w.pop_back();
          expect += 1;
          for (const auto& a : x->args)
            if (a.index() == 0) expect += 8;
            else w.push_back(std::get<1>(a).get());
        }
        CHECK(fx::region_bytes(st, root.regions[0]).size() == expect);
      } else if (s[d].layout == Layout::Factored) {
        // Tag stream holds one byte per node of the root datatype.
        size_t nodes = 0;
        std::vector<const Value*> w{&v};
        while (!w.empty()) {
          const Value* x = w.back();
          w.pop_back();
          ++nodes;
          const auto& ct = s[d].ctors[s[d].find_ctor(x->ctor)];
          for (size_t j = 0; j < ct.fields.size(); ++j)
            if (ct.fields[j].kind == FieldKind::SelfRec) w.push_back(std::get<1>(x->args[j]).get());
        }
        CHECK(fx::region_bytes(st, root.regions[0]).size() == nodes);
      }
    }
  }
}

TEST_CASE("flat and factored decode to the same value") {
  auto a = parse_schema(fx::mixed_schema(false));
  auto b = parse_schema(fx::mixed_schema(true));
  fx::Gen g{a, std::mt19937_64(77), 10};
  for (int i = 0; i < 100; ++i) {
    int d = i % int(a.datatypes.size());
    Value v = g.make(d, 0);
    RegionStore st;
    auto ra = serialize(a, d, v, st, {32});
    auto rb = serialize(b, d, v, st, {32});
    CHECK(deserialize(ra) == deserialize(rb));
  }
}

TEST_CASE("containers") {
  auto s = parse_schema(fx::kTreeFactored);
  RegionStore st;
  auto root = serialize(s, "Tree", two_leaves(), st, {32, true, 1});
  auto file = export_container(root);
  size_t at = 0;
  CHECK(std::string(file.begin(), file.begin() + 4) == "FADT");
  at = 4;
  CHECK((file[at] | file[at + 1] << 8) == 1);
  CHECK(file[6] == 1);
  CHECK((file[7] | file[8] << 8) == 2);
  CHECK(load_u64(file.data() + 9) == s.hash());
  CHECK(load_u64(file.data() + 17) == 3);
  CHECK(load_u64(file.data() + 25) == 16);
  CHECK(file.size() == 33 + 3 + 16);

  RegionStore st2;
  auto back = import_container(file, s, st2);
  CHECK(deserialize(back) == two_leaves());
  CHECK(export_container(back) == file);

  auto bad = file;
  bad[0] ^= 1;
  CHECK(code_of([&] { import_container(bad, s, st2); }) == ErrorCode::BadMagic);
  bad = file;
  bad[4] = 2;
  CHECK(code_of([&] { import_container(bad, s, st2); }) == ErrorCode::VersionMismatch);
  bad = file;
  bad[9] ^= 1;
  CHECK(code_of([&] { import_container(bad, s, st2); }) == ErrorCode::SchemaHashMismatch);
  bad = file;
  bad.pop_back();
  CHECK(code_of([&] { import_container(bad, s, st2); }) == ErrorCode::TruncatedFile);
  bad.resize(20);
  CHECK(code_of([&] { import_container(bad, s, st2); }) == ErrorCode::TruncatedFile);
}

TEST_CASE("container datatype inference") {
  auto s = parse_schema(fx::mixed_schema(false));
  fx::Gen g{s, std::mt19937_64(123), 6};
  for (int d = 0; d < int(s.datatypes.size()); ++d) {
    Value v = g.make(d, 0);
    RegionStore st;
    auto root = serialize(s, d, v, st);
    auto file = export_container(root);
    RegionStore st2;
    auto back = import_container(file, s, st2, d);
    CHECK(deserialize(back) == v);
  }
}
