#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "packedadt/region.hpp"
#include "packedadt/schema.hpp"
#include "packedadt/value.hpp"

namespace packedadt {

// One position per buffer of the shape; index 0 is the tag stream.
using CursorBundle = std::vector<Address>;

struct SerializeOptions {
  uint32_t first_chunk_size = 64;
  bool random_access = false;
  // Every k-th self-recursive child is written as a separate root and shared
  // through an indirection record (0 = never).
  uint32_t indirection_every = 0;
};

// Owns one reference on each of its regions; dropping releases them.
class SerializedRoot {
 public:
  SerializedRoot() = default;
  SerializedRoot(const AdtSchema& schema, int datatype, RegionStore& store);
  SerializedRoot(SerializedRoot&& o) noexcept { *this = std::move(o); }
  SerializedRoot& operator=(SerializedRoot&& o) noexcept;
  SerializedRoot(const SerializedRoot&) = delete;
  SerializedRoot& operator=(const SerializedRoot&) = delete;
  ~SerializedRoot() { drop(); }

  void drop();

  const AdtSchema* schema = nullptr;
  int datatype = -1;
  Layout layout = Layout::Flat;
  BufferShape shape;
  CursorBundle bundle;
  std::vector<uint16_t> regions;  // one per buffer
  RegionStore* store = nullptr;
};

struct PatchHandle {
  Address record;  // the RANDOM_ACCESS byte in the tag stream
  int slots = 0;
  int width = 1;   // addresses per slot
  std::vector<bool> patched;
};

// Write-side bundle over the buffers of a root shape.
class BundleWriter {
 public:
  BundleWriter(const AdtSchema& schema, int datatype, RegionStore& store, SerializeOptions opts);

  SerializedRoot& root() { return root_; }
  CursorBundle& pos() { return pos_; }
  RegionStore& store() { return *store_; }
  const SerializeOptions& options() const { return opts_; }

  Address reserve(int buffer, uint32_t n);
  void write(int buffer, const void* src, uint32_t n);  // after reserve

  std::vector<PatchHandle>& handles() { return handles_; }
  // Checks every random-access slot was patched; hands the root over.
  SerializedRoot finalize();

 private:
  const AdtSchema* schema_;
  RegionStore* store_;
  SerializeOptions opts_;
  SerializedRoot root_;
  CursorBundle pos_;
  std::vector<PatchHandle> handles_;
};

// Random-access record geometry for a datatype laid out with shape `shape`.
int ra_slot_count(const AdtSchema& schema, int datatype, int ctor);
int ra_slot_width(const BufferShape& shape);
uint32_t ra_record_size(const AdtSchema& schema, const BufferShape& shape);

SerializedRoot serialize(const AdtSchema& schema, std::string_view datatype, const Value& v, RegionStore& store,
                         SerializeOptions opts = {});
SerializedRoot serialize(const AdtSchema& schema, int datatype, const Value& v, RegionStore& store,
                         SerializeOptions opts = {});

// Writes v at the writer's current positions (the shape's value slot).
void serialize_into(BundleWriter& w, const BufferShape& shape, const Value& v, bool allow_indirection = true);

Value deserialize(const SerializedRoot& root);
Value deserialize_at(const AdtSchema& schema, int datatype, const RegionStore& store, const BufferShape& shape,
                     const CursorBundle& start, CursorBundle* end = nullptr);

// Writes INDIR + address of src's start into every buffer of the writer at
// the positions of `shape` (the root shape by default).
void write_indirection(const AdtSchema& schema, int datatype, BundleWriter& dst, const SerializedRoot& src);
void write_indirection(const AdtSchema& schema, int datatype, BundleWriter& dst, const BufferShape& shape,
                       const SerializedRoot& src);

// Emits a RANDOM_ACCESS record in the tag stream; slots are filled later by
// patch_random_access.
// Returns a handle index into dst.handles().
size_t write_random_access(const AdtSchema& schema, int datatype, int ctor, BundleWriter& dst,
                           const BufferShape& shape);
void patch_random_access(BundleWriter& dst, size_t handle, int slot, std::span<const Address> starts);

CursorBundle skip_value(const AdtSchema& schema, int datatype, const RegionStore& store, const BufferShape& shape,
                        const CursorBundle& start);
CursorBundle skip_value(const SerializedRoot& root, const CursorBundle& start);

// Plain byte buffers with no reserved records: the canonical form.
std::vector<std::vector<uint8_t>> canonical_buffers(const AdtSchema& schema, int datatype, const Value& v);

std::vector<uint8_t> export_container(const SerializedRoot& root);
// datatype < 0 infers it from layout, buffer count and a decoding check.
SerializedRoot import_container(std::span<const uint8_t> bytes, const AdtSchema& schema, RegionStore& store,
                                int datatype = -1);

}  // namespace packedadt
