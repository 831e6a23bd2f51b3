#include "packedadt/layout.hpp"

#include <algorithm>
#include <cstring>

#include "packedadt/cursor.hpp"

namespace packedadt {

// ---- cursors -------------------------------------------------------------

void cursor_follow(const RegionStore& s, ReadCursor& c) {
  const uint8_t* end = c.base + s.chunk_used(c.region, c.chunk);
  if (c.p + kRecordSize > end || *c.p != kRedirTag)
    fail(ErrorCode::CorruptTag, "expected a redirection record");
  Address to = Address::decode(load_u64(c.p + 1));
  if (!s.alive(to.region) || to.chunk >= s.chunk_count(to.region))
    fail(ErrorCode::CorruptTag, "redirection to a missing chunk");
  c = open_cursor(s, to);
}

void cursor_refill(const RegionStore& s, ReadCursor& c, uint32_t n) {
  for (;;) {
    if (c.p + n <= c.lim) return;
    const uint8_t* limit = s.read_limit(c.region, c.chunk);
    const uint8_t* end = c.base + s.chunk_used(c.region, c.chunk);
    if (c.p + n > limit && c.p + kRecordSize <= end && *c.p == kRedirTag) {
      cursor_follow(s, c);
      continue;
    }
    fail(ErrorCode::TruncatedBuffer, "read of " + std::to_string(n) + " bytes past the written extent");
  }
}

namespace {

inline void need_inline(const ReadCursor& c, uint32_t n) {
  if (c.p + n > c.lim) fail(ErrorCode::TruncatedBuffer, "value ends mid-record");
}

}  // namespace

// ---- roots and writers ---------------------------------------------------

SerializedRoot::SerializedRoot(const AdtSchema& s, int dt, RegionStore& st)
    : schema(&s), datatype(dt), layout(s[dt].layout), shape(buffer_shape(s, dt)), store(&st) {}

SerializedRoot& SerializedRoot::operator=(SerializedRoot&& o) noexcept {
  if (this != &o) {
    drop();
    schema = o.schema;
    datatype = o.datatype;
    layout = o.layout;
    shape = std::move(o.shape);
    bundle = std::move(o.bundle);
    regions = std::move(o.regions);
    store = o.store;
    o.regions.clear();
    o.store = nullptr;
  }
  return *this;
}

void SerializedRoot::drop() {
  if (store)
    for (uint16_t r : regions)
      if (store->alive(r)) store->decref(r);
  regions.clear();
  store = nullptr;
}

BundleWriter::BundleWriter(const AdtSchema& schema, int datatype, RegionStore& store, SerializeOptions opts)
    : schema_(&schema), store_(&store), opts_(opts), root_(schema, datatype, store) {
  for (int i = 0; i < root_.shape.buffer_count; ++i) {
    uint16_t r = store.new_region(opts.first_chunk_size);
    root_.regions.push_back(r);
    pos_.push_back(store.frontier(r));
  }
  root_.bundle = pos_;
}

Address BundleWriter::reserve(int buffer, uint32_t n) {
  pos_[buffer] = store_->reserve(pos_[buffer], n);
  return pos_[buffer];
}

void BundleWriter::write(int buffer, const void* src, uint32_t n) {
  store_->write(pos_[buffer], src, n);
  pos_[buffer].offset += n;
}

SerializedRoot BundleWriter::finalize() {
  for (const auto& h : handles_)
    for (bool p : h.patched)
      if (!p) fail(ErrorCode::DanglingPatch, "random-access slot never patched");
  handles_.clear();
  return std::move(root_);
}

// ---- random access geometry ----------------------------------------------

int ra_slot_count(const AdtSchema& schema, int datatype, int ctor) {
  const auto& def = schema[datatype];
  const auto& c = def.ctors[ctor];
  // Flat: every packed field after the first. Factored: non-self packed
  // fields sit at the head of their own buffers, so only self-recursive
  // fields after the first need a slot.
  int n = def.layout == Layout::Flat ? c.packed_count() + c.selfrec_count() : c.selfrec_count();
  return std::max(0, n - 1);
}

int ra_slot_width(const BufferShape& shape) { return shape.layout == Layout::Flat ? 1 : shape.buffer_count; }

uint32_t ra_record_size(const AdtSchema& schema, const BufferShape& shape) {
  int most = 0;
  for (size_t c = 0; c < schema[shape.datatype].ctors.size(); ++c)
    most = std::max(most, ra_slot_count(schema, shape.datatype, int(c)));
  return 1 + 8u * uint32_t(ra_slot_width(shape)) * uint32_t(most);
}

size_t write_random_access(const AdtSchema& schema, int datatype, int ctor, BundleWriter& dst,
                           const BufferShape& shape) {
  if (!dst.options().random_access) fail(ErrorCode::FeatureDisabled, "random-access records are off");
  uint32_t size = ra_record_size(schema, shape);
  int slots = ra_slot_count(schema, datatype, ctor);
  int width = ra_slot_width(shape);
  int b = shape.base;
  Address at = dst.reserve(b, size);
  uint8_t tag = kRandomAccessTag;
  dst.write(b, &tag, 1);
  uint32_t slot_bytes = 8u * uint32_t(width) * uint32_t(slots);
  dst.store().skip(dst.pos()[b], slot_bytes);
  dst.pos()[b].offset += slot_bytes;
  std::vector<uint8_t> pad(size - 1 - slot_bytes, 0);
  if (!pad.empty()) dst.write(b, pad.data(), uint32_t(pad.size()));
  PatchHandle h;
  h.record = at;
  h.slots = slots;
  h.width = width;
  h.patched.assign(slots, false);
  dst.handles().push_back(std::move(h));
  return dst.handles().size() - 1;
}

void patch_random_access(BundleWriter& dst, size_t handle, int slot, std::span<const Address> starts) {
  PatchHandle& h = dst.handles().at(handle);
  if (slot < 0 || slot >= h.slots || int(starts.size()) != h.width)
    fail(ErrorCode::InvalidArgument, "bad random-access slot");
  if (h.patched[slot]) fail(ErrorCode::WriteTwice, "slot patched twice");
  std::vector<uint8_t> bytes(8 * starts.size());
  for (size_t i = 0; i < starts.size(); ++i) store_u64(bytes.data() + 8 * i, starts[i].encode());
  Address at = h.record;
  at.offset += 1 + 8u * uint32_t(h.width) * uint32_t(slot);
  dst.store().patch(at, bytes.data(), uint32_t(bytes.size()));
  h.patched[slot] = true;
}

// ---- indirection ---------------------------------------------------------

void write_indirection(const AdtSchema& schema, int datatype, BundleWriter& dst, const BufferShape& shape,
                       const SerializedRoot& src) {
  if (src.datatype != datatype || src.layout != schema[datatype].layout ||
      src.shape.buffer_count != shape.buffer_count || shape.datatype != datatype)
    fail(ErrorCode::LayoutMismatch, "indirection source has a different datatype or layout");
  for (int i = 0; i < shape.buffer_count; ++i) {
    int b = shape.base + i;
    Address at = dst.reserve(b, kRecordSize);
    uint8_t rec[kRecordSize];
    rec[0] = kIndirTag;
    store_u64(rec + 1, src.bundle[i].encode());
    dst.write(b, rec, kRecordSize);
    dst.store().record_outlink(at, src.regions[i]);
  }
}

void write_indirection(const AdtSchema& schema, int datatype, BundleWriter& dst, const SerializedRoot& src) {
  write_indirection(schema, datatype, dst, dst.root().shape, src);
}

// ---- serialize -----------------------------------------------------------

namespace {

struct WItem {
  enum Kind : uint8_t { Node, Patch, Indirect } kind;
  const Value* v;
  int dt;
  const BufferShape* shape;  // factored shape, or the single-buffer flat shape
  size_t handle;
  int slot;
};

}  // namespace

void serialize_into(BundleWriter& w, const BufferShape& root_shape, const Value& v, bool allow_indirection) {
  const AdtSchema& schema = *w.root().schema;
  const SerializeOptions& opts = w.options();
  check_value(schema, root_shape.datatype, v);

  // Flat shapes for datatypes nested inside a flat buffer are created on
  // demand; keyed by (datatype, buffer).
  std::vector<std::unique_ptr<BufferShape>> flat_shapes;
  auto flat_shape = [&](int dt, int buf) -> const BufferShape* {
    for (auto& s : flat_shapes)
      if (s->datatype == dt && s->base == buf) return s.get();
    auto s = std::make_unique<BufferShape>();
    s->datatype = dt;
    s->layout = Layout::Flat;
    s->base = buf;
    s->buffer_count = 1;
    s->roles = {schema[dt].name};
    flat_shapes.push_back(std::move(s));
    return flat_shapes.back().get();
  };

  uint64_t selfrec_seen = 0;
  std::vector<WItem> work{{WItem::Node, &v, root_shape.datatype, &root_shape, 0, 0}};
  std::vector<uint8_t> unit;
  std::vector<Address> starts;
  while (!work.empty()) {
    WItem it = work.back();
    work.pop_back();
    const BufferShape& sh = *it.shape;
    if (it.kind == WItem::Patch) {
      starts.assign(w.pos().begin() + sh.base, w.pos().begin() + sh.base + ra_slot_width(sh));
      patch_random_access(w, it.handle, it.slot, starts);
      continue;
    }
    if (it.kind == WItem::Indirect) {
      BundleWriter sub(schema, it.dt, w.store(), SerializeOptions{opts.first_chunk_size, opts.random_access, 0});
      serialize_into(sub, sub.root().shape, *it.v, false);
      SerializedRoot src = sub.finalize();
      write_indirection(schema, it.dt, w, sh, src);
      continue;
    }
    const auto& def = schema[it.dt];
    int c = def.find_ctor(it.v->ctor);
    const auto& ctor = def.ctors[c];
    size_t handle = 0;
    bool ra = opts.random_access && ra_slot_count(schema, it.dt, c) > 0;
    if (ra) handle = write_random_access(schema, it.dt, c, w, sh);

    if (sh.layout == Layout::Flat) {
      unit.assign(1, ctor.tag);
      for (size_t j = 0; j < ctor.fields.size(); ++j)
        if (ctor.fields[j].kind == FieldKind::Int) {
          uint8_t b[8];
          store_u64(b, uint64_t(std::get<int64_t>(it.v->args[j])));
          unit.insert(unit.end(), b, b + 8);
        }
      w.reserve(sh.base, uint32_t(unit.size()));
      w.write(sh.base, unit.data(), uint32_t(unit.size()));
    } else {
      w.reserve(sh.base, 1);
      w.write(sh.base, &ctor.tag, 1);
      for (size_t j = 0; j < ctor.fields.size(); ++j)
        if (ctor.fields[j].kind == FieldKind::Int) {
          int b = sh.entry(c, int(j))->buffer;
          int64_t n = std::get<int64_t>(it.v->args[j]);
          w.reserve(b, 8);
          w.write(b, &n, 8);
        }
    }

    // Children in reverse so they pop in field order; a slot patch sits on
    // top of the child whose start it records.
    std::vector<WItem> kids;
    int packed_index = 0;
    int self_index = 0;
    for (size_t j = 0; j < ctor.fields.size(); ++j) {
      const auto& f = ctor.fields[j];
      if (f.kind == FieldKind::Int) continue;
      const Value* child = std::get<std::unique_ptr<Value>>(it.v->args[j]).get();
      const BufferShape* csh;
      if (f.kind == FieldKind::SelfRec) {
        csh = &sh;
      } else if (sh.layout == Layout::Flat) {
        csh = flat_shape(f.dt, sh.base);
      } else {
        const auto* e = sh.entry(c, int(j));
        csh = e->nested->layout == Layout::Flat ? flat_shape(f.dt, e->nested->base) : e->nested.get();
      }
      int slot_of = sh.layout == Layout::Flat ? packed_index : (f.kind == FieldKind::SelfRec ? self_index : -1);
      if (ra && slot_of >= 1) kids.push_back({WItem::Patch, nullptr, f.dt, &sh, handle, slot_of - 1});
      bool indirect = false;
      if (f.kind == FieldKind::SelfRec && allow_indirection && opts.indirection_every > 0)
        indirect = (++selfrec_seen % opts.indirection_every) == 0;
      kids.push_back({indirect ? WItem::Indirect : WItem::Node, child, f.dt, csh, 0, 0});
      ++packed_index;
      if (f.kind == FieldKind::SelfRec) ++self_index;
    }
    // kids holds [patch?, child] pairs in field order; push so that pops see
    // patch then child, first field first.
    for (size_t k = kids.size(); k-- > 0;) {
      if (kids[k].kind == WItem::Patch) continue;
      work.push_back(kids[k]);
      if (k > 0 && kids[k - 1].kind == WItem::Patch) work.push_back(kids[k - 1]);
    }
  }
}

SerializedRoot serialize(const AdtSchema& schema, int datatype, const Value& v, RegionStore& store,
                         SerializeOptions opts) {
  BundleWriter w(schema, datatype, store, opts);
  serialize_into(w, w.root().shape, v, true);
  return w.finalize();
}

SerializedRoot serialize(const AdtSchema& schema, std::string_view datatype, const Value& v, RegionStore& store,
                         SerializeOptions opts) {
  int d = schema.find(datatype);
  if (d < 0) fail(ErrorCode::UnknownDatatype, std::string(datatype));
  return serialize(schema, d, v, store, opts);
}

// ---- reading -------------------------------------------------------------

namespace {

struct RItem {
  enum Kind : uint8_t { Node, Restore } kind;
  int dt;
  const BufferShape* shape;
  Value* out;
  size_t saved;  // index into the saved-cursor stack
};

// Reads one value laid out by `root` starting at cur (indexed relative to
// root.base). Builds into out when non-null.
void walk(const AdtSchema& schema, const RegionStore& store, const BufferShape& root, std::vector<ReadCursor>& cur,
          Value* out) {
  const int off = root.base;
  std::vector<std::unique_ptr<BufferShape>> flat_shapes;
  auto flat_shape = [&](int dt, int buf) -> const BufferShape* {
    for (auto& s : flat_shapes)
      if (s->datatype == dt && s->base == buf) return s.get();
    auto s = std::make_unique<BufferShape>();
    s->datatype = dt;
    s->base = buf;
    flat_shapes.push_back(std::move(s));
    return flat_shapes.back().get();
  };
  std::vector<uint32_t> ra_size_cache;

  std::vector<ReadCursor> saved;
  std::vector<RItem> work;
  const BufferShape* start = root.layout == Layout::Flat ? flat_shape(root.datatype, root.base) : &root;
  work.push_back({RItem::Node, root.datatype, start, out, 0});
  while (!work.empty()) {
    RItem it = work.back();
    work.pop_back();
    const BufferShape& sh = *it.shape;
    int nbuf = sh.layout == Layout::Flat ? 1 : sh.buffer_count;
    if (it.kind == RItem::Restore) {
      for (int i = 0; i < nbuf; ++i) cur[sh.base - off + i] = saved[it.saved + i];
      saved.resize(it.saved);
      continue;
    }
    const auto& def = schema[it.dt];
    ReadCursor& tc = cur[sh.base - off];
    uint8_t t;
    for (;;) {
      t = cursor_tag(store, tc);
      if (t == kIndirTag) {
        size_t mark = saved.size();
        for (int i = 0; i < nbuf; ++i) {
          ReadCursor& c = cur[sh.base - off + i];
          cursor_need(store, c, kRecordSize);
          if (*c.p != kIndirTag) fail(ErrorCode::CorruptTag, "indirection records out of step");
          Address to = Address::decode(load_u64(c.p + 1));
          ReadCursor back = c;
          back.p += kRecordSize;
          saved.push_back(back);
          if (!store.alive(to.region)) fail(ErrorCode::UseAfterFree, "indirection into a freed region");
          c = open_cursor(store, to);
        }
        work.push_back({RItem::Restore, it.dt, it.shape, nullptr, mark});
        continue;
      }
      if (t == kRandomAccessTag) {
        uint32_t n = ra_record_size(schema, sh);
        need_inline(tc, n);
        tc.p += n;
        continue;
      }
      break;
    }
    if (t >= def.ctors.size()) fail(ErrorCode::CorruptTag, "tag " + std::to_string(t) + " in " + def.name);
    const auto& ctor = def.ctors[t];
    tc.p += 1;
    Value* v = out ? it.out : nullptr;
    if (v) {
      v->ctor = ctor.name;
      v->args.clear();
      v->args.reserve(ctor.fields.size());
    }
    if (sh.layout == Layout::Flat) need_inline(tc, 8u * uint32_t(ctor.scalar_count()));
    size_t first_kid = work.size();
    for (size_t j = 0; j < ctor.fields.size(); ++j) {
      const auto& f = ctor.fields[j];
      if (f.kind == FieldKind::Int) {
        int64_t n;
        if (sh.layout == Layout::Flat) {
          n = load_i64(tc.p);
          tc.p += 8;
        } else {
          ReadCursor& c = cur[sh.entry(t, int(j))->buffer - off];
          cursor_need(store, c, 8);
          n = load_i64(c.p);
          c.p += 8;
        }
        if (v) v->args.emplace_back(n);
        continue;
      }
      Value* child = nullptr;
      if (v) {
        auto p = std::make_unique<Value>();
        child = p.get();
        v->args.emplace_back(std::move(p));
      }
      const BufferShape* csh;
      if (f.kind == FieldKind::SelfRec) {
        csh = &sh;
      } else if (sh.layout == Layout::Flat) {
        csh = flat_shape(f.dt, sh.base);
      } else {
        const auto* e = sh.entry(t, int(j));
        csh = e->nested->layout == Layout::Flat ? flat_shape(f.dt, e->nested->base) : e->nested.get();
      }
      work.push_back({RItem::Node, f.dt, csh, child, 0});
    }
    std::reverse(work.begin() + first_kid, work.end());
  }
}

std::vector<ReadCursor> open_all(const RegionStore& store, const CursorBundle& start) {
  std::vector<ReadCursor> cur;
  cur.reserve(start.size());
  for (const auto& a : start) {
    if (!store.alive(a.region)) fail(ErrorCode::UseAfterFree, "region " + std::to_string(a.region));
    cur.push_back(open_cursor(store, a));
  }
  return cur;
}

}  // namespace

Value deserialize_at(const AdtSchema& schema, int datatype, const RegionStore& store, const BufferShape& shape,
                     const CursorBundle& start, CursorBundle* end) {
  if (shape.datatype != datatype || int(start.size()) != shape.buffer_count)
    fail(ErrorCode::LayoutMismatch, "bundle does not match the shape");
  auto cur = open_all(store, start);
  Value v;
  walk(schema, store, shape, cur, &v);
  if (end) {
    end->clear();
    for (const auto& c : cur) end->push_back(c.addr());
  }
  return v;
}

Value deserialize(const SerializedRoot& root) {
  return deserialize_at(*root.schema, root.datatype, *root.store, root.shape, root.bundle);
}

CursorBundle skip_value(const AdtSchema& schema, int datatype, const RegionStore& store, const BufferShape& shape,
                        const CursorBundle& start) {
  if (shape.datatype != datatype || int(start.size()) != shape.buffer_count)
    fail(ErrorCode::LayoutMismatch, "bundle does not match the shape");
  auto cur = open_all(store, start);
  walk(schema, store, shape, cur, nullptr);
  CursorBundle end;
  for (const auto& c : cur) end.push_back(c.addr());
  return end;
}

CursorBundle skip_value(const SerializedRoot& root, const CursorBundle& start) {
  return skip_value(*root.schema, root.datatype, *root.store, root.shape, start);
}

// ---- canonical form and containers ---------------------------------------

std::vector<std::vector<uint8_t>> canonical_buffers(const AdtSchema& schema, int datatype, const Value& v) {
  check_value(schema, datatype, v);
  BufferShape root = buffer_shape(schema, datatype);
  std::vector<std::vector<uint8_t>> out(root.buffer_count);
  struct Item {
    const Value* v;
    int dt;
    const BufferShape* shape;  // null: flat at buf
    int buf;
  };
  std::vector<Item> work{{&v, datatype, root.layout == Layout::Flat ? nullptr : &root, 0}};
  auto put_i64 = [](std::vector<uint8_t>& b, int64_t n) {
    uint8_t x[8];
    store_u64(x, uint64_t(n));
    b.insert(b.end(), x, x + 8);
  };
  while (!work.empty()) {
    Item it = work.back();
    work.pop_back();
    const auto& def = schema[it.dt];
    int c = def.find_ctor(it.v->ctor);
    const auto& ctor = def.ctors[c];
    size_t first = work.size();
    if (!it.shape) {
      auto& b = out[it.buf];
      b.push_back(ctor.tag);
      for (size_t j = 0; j < ctor.fields.size(); ++j) {
        if (ctor.fields[j].kind == FieldKind::Int)
          put_i64(b, std::get<int64_t>(it.v->args[j]));
        else
          work.push_back({std::get<1>(it.v->args[j]).get(), ctor.fields[j].dt, nullptr, it.buf});
      }
    } else {
      const BufferShape& sh = *it.shape;
      out[sh.base].push_back(ctor.tag);
      for (size_t j = 0; j < ctor.fields.size(); ++j) {
        const auto& f = ctor.fields[j];
        if (f.kind == FieldKind::Int) {
          put_i64(out[sh.entry(c, int(j))->buffer], std::get<int64_t>(it.v->args[j]));
        } else if (f.kind == FieldKind::SelfRec) {
          work.push_back({std::get<1>(it.v->args[j]).get(), f.dt, &sh, 0});
        } else {
          const auto* e = sh.entry(c, int(j));
          bool flat = e->nested->layout == Layout::Flat;
          work.push_back({std::get<1>(it.v->args[j]).get(), f.dt, flat ? nullptr : e->nested.get(), e->nested->base});
        }
      }
    }
    std::reverse(work.begin() + first, work.end());
  }
  return out;
}

namespace {

constexpr uint8_t kMagic[4] = {'F', 'A', 'D', 'T'};
constexpr uint16_t kVersion = 1;

template <typename T>
void put_le(std::vector<uint8_t>& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(uint8_t(uint64_t(v) >> (8 * i)));
}

template <typename T>
T get_le(std::span<const uint8_t> b, size_t& at) {
  if (at + sizeof(T) > b.size()) fail(ErrorCode::TruncatedFile, "header ends early");
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= uint64_t(b[at + i]) << (8 * i);
  at += sizeof(T);
  return T(v);
}

SerializedRoot load_buffers(const AdtSchema& schema, int dt, RegionStore& store,
                            const std::vector<std::span<const uint8_t>>& payloads) {
  SerializedRoot root(schema, dt, store);
  for (const auto& p : payloads) {
    uint32_t size = std::max<uint32_t>(kMinFirstChunk, uint32_t(p.size()) + kRecordSize);
    uint16_t r = store.new_region(size);
    root.regions.push_back(r);
    Address a = store.frontier(r);
    root.bundle.push_back(a);
    if (!p.empty()) store.write(a, p.data(), uint32_t(p.size()));
  }
  return root;
}

}  // namespace

std::vector<uint8_t> export_container(const SerializedRoot& root) {
  Value v = deserialize(root);
  auto bufs = canonical_buffers(*root.schema, root.datatype, v);
  std::vector<uint8_t> out(kMagic, kMagic + 4);
  put_le<uint16_t>(out, kVersion);
  put_le<uint8_t>(out, uint8_t(root.layout));
  put_le<uint16_t>(out, uint16_t(bufs.size()));
  put_le<uint64_t>(out, root.schema->hash());
  for (const auto& b : bufs) put_le<uint64_t>(out, b.size());
  for (const auto& b : bufs) out.insert(out.end(), b.begin(), b.end());
  return out;
}

SerializedRoot import_container(std::span<const uint8_t> bytes, const AdtSchema& schema, RegionStore& store,
                                int datatype) {
  size_t at = 0;
  if (bytes.size() < 4) fail(ErrorCode::TruncatedFile, "shorter than the magic");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) fail(ErrorCode::BadMagic, "not a FADT container");
  at = 4;
  uint16_t version = get_le<uint16_t>(bytes, at);
  if (version != kVersion) fail(ErrorCode::VersionMismatch, "version " + std::to_string(version));
  uint8_t kind = get_le<uint8_t>(bytes, at);
  if (kind > 1) fail(ErrorCode::SchemaMismatch, "layout kind " + std::to_string(kind));
  uint16_t count = get_le<uint16_t>(bytes, at);
  uint64_t hash = get_le<uint64_t>(bytes, at);
  if (hash != schema.hash()) fail(ErrorCode::SchemaHashMismatch, "file was written against another schema");
  std::vector<uint64_t> lens;
  for (uint16_t i = 0; i < count; ++i) lens.push_back(get_le<uint64_t>(bytes, at));
  std::vector<std::span<const uint8_t>> payloads;
  for (uint64_t n : lens) {
    if (n > bytes.size() - at) fail(ErrorCode::TruncatedFile, "payload shorter than its declared length");
    payloads.push_back(bytes.subspan(at, n));
    at += n;
  }
  if (at != bytes.size()) fail(ErrorCode::TruncatedFile, "trailing bytes after the payloads");

  Layout layout = Layout(kind);
  auto fits = [&](int d) {
    return schema[d].layout == layout && buffer_shape(schema, d).buffer_count == int(count);
  };
  if (datatype >= 0) {
    if (!fits(datatype)) fail(ErrorCode::SchemaMismatch, "container does not hold a " + schema[datatype].name);
    return load_buffers(schema, datatype, store, payloads);
  }
  std::vector<int> cands;
  for (int d = 0; d < int(schema.datatypes.size()); ++d)
    if (fits(d)) cands.push_back(d);
  if (cands.size() == 1) return load_buffers(schema, cands[0], store, payloads);
  for (int d : cands) {
    SerializedRoot r = load_buffers(schema, d, store, payloads);
    try {
      CursorBundle end = skip_value(r, r.bundle);
      bool exact = true;
      for (size_t i = 0; i < end.size(); ++i) exact = exact && end[i].offset == payloads[i].size();
      if (exact) return r;
    } catch (const Error&) {
    }
  }
  fail(ErrorCode::SchemaMismatch, "no datatype in the schema decodes this container");
}

}  // namespace packedadt
