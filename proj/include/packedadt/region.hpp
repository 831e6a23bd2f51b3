#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <vector>

#include "packedadt/error.hpp"

namespace packedadt {

// 16-bit region | 16-bit chunk | 32-bit offset, little-endian on disk.
struct Address {
  uint16_t region = 0;
  uint16_t chunk = 0;
  uint32_t offset = 0;

  uint64_t encode() const {
    return (uint64_t(region) << 48) | (uint64_t(chunk) << 32) | uint64_t(offset);
  }
  static Address decode(uint64_t v) {
    return {uint16_t(v >> 48), uint16_t(v >> 32), uint32_t(v)};
  }
  bool operator==(const Address&) const = default;
};

// Reserved tag byte plus an encoded address.
inline constexpr uint32_t kRecordSize = 9;
inline constexpr uint32_t kMinFirstChunk = 32;

inline void store_u64(uint8_t* p, uint64_t v) { std::memcpy(p, &v, 8); }
inline uint64_t load_u64(const uint8_t* p) {
  uint64_t v;
  std::memcpy(&v, p, 8);
  return v;
}
inline int64_t load_i64(const uint8_t* p) {
  int64_t v;
  std::memcpy(&v, p, 8);
  return v;
}

struct StoreOptions {
  bool track_writes = false;  // per-byte write-once bitmap
  uint64_t max_bytes = 0;     // 0 = unlimited
};

class RegionStore {
 public:
  explicit RegionStore(StoreOptions opts = {}) : opts_(opts) {}
  RegionStore(const RegionStore&) = delete;
  RegionStore& operator=(const RegionStore&) = delete;

  uint16_t new_region(uint32_t first_chunk_size);

  Address frontier(uint16_t r) const;
  // Returns `at` when n bytes fit before the reserve zone, else chains a
  // doubled chunk via a redirection record and returns its start.
  Address reserve(Address at, uint32_t n);
  // Write at the frontier; the bytes must fit (reserve first).
  void write(Address at, const void* src, uint32_t n);
  void write_u8(Address at, uint8_t b) { write(at, &b, 1); }
  void write_u64(Address at, uint64_t v) { write(at, &v, 8); }
  // Allocate n bytes at the frontier without writing them; fill with patch().
  void skip(Address at, uint32_t n);
  void patch(Address at, const void* src, uint32_t n);

  uint32_t incref(uint16_t r);
  uint32_t decref(uint16_t r);
  void record_outlink(Address from, uint16_t to);

  bool alive(uint16_t r) const { return r < regions_.size() && regions_[r].alive; }
  uint32_t refcount(uint16_t r) const;
  size_t region_count() const { return regions_.size(); }
  uint16_t chunk_count(uint16_t r) const;
  std::vector<uint32_t> chunk_sizes(uint16_t r) const;
  uint32_t chunk_size(uint16_t r, uint16_t c) const { return chunk(r, c).size; }
  // Bytes allocated in the chunk (frontier for the last, end of REDIR otherwise).
  uint32_t chunk_used(uint16_t r, uint16_t c) const;
  std::optional<uint16_t> next(uint16_t r, uint16_t c) const;
  const std::vector<uint16_t>& outset(uint16_t r, uint16_t c) const { return chunk(r, c).outset; }
  std::vector<uint16_t> region_outset(uint16_t r) const;
  bool written(Address a) const;
  bool tracking() const { return opts_.track_writes; }
  uint64_t live_bytes() const { return live_bytes_; }

  const uint8_t* data(uint16_t r, uint16_t c) const { return chunk(r, c).data.get(); }
  const uint8_t* ptr(Address a) const { return chunk(a.region, a.chunk).data.get() + a.offset; }
  // End of the readable region of a chunk: a read of n bytes at p fits iff
  // p + n <= read_limit.
  const uint8_t* read_limit(uint16_t r, uint16_t c) const {
    const Chunk& ch = chunk(r, c);
    return ch.data.get() + ch.size - kRecordSize;
  }

 private:
  struct Chunk {
    std::unique_ptr<uint8_t[]> data;
    uint32_t size = 0;
    std::vector<uint16_t> outset;
    std::optional<uint16_t> next;
    uint32_t redir_at = 0;
    std::vector<uint64_t> written;  // bitmap when tracking
  };
  struct Region {
    std::vector<Chunk> chunks;
    uint32_t refcount = 0;
    uint32_t first_chunk_size = 0;
    uint32_t frontier = 0;  // offset in last chunk
    bool alive = false;
  };

  const Region& region(uint16_t r) const;
  Region& region(uint16_t r);
  const Chunk& chunk(uint16_t r, uint16_t c) const;
  void add_chunk(Region& reg, uint32_t size);
  void mark(Chunk& ch, uint32_t off, uint32_t n);
  bool reaches(uint16_t from, uint16_t target) const;
  void release(uint16_t r);

  StoreOptions opts_;
  std::vector<Region> regions_;
  uint64_t live_bytes_ = 0;
};

}  // namespace packedadt
