#include "packedadt/region.hpp"

#include <algorithm>
#include <new>
#include <string>

namespace packedadt {

namespace {
std::string rname(uint16_t r) { return "region " + std::to_string(r); }
}  // namespace

const RegionStore::Region& RegionStore::region(uint16_t r) const {
  if (r >= regions_.size() || !regions_[r].alive) fail(ErrorCode::UseAfterFree, rname(r));
  return regions_[r];
}

RegionStore::Region& RegionStore::region(uint16_t r) {
  if (r >= regions_.size() || !regions_[r].alive) fail(ErrorCode::UseAfterFree, rname(r));
  return regions_[r];
}

const RegionStore::Chunk& RegionStore::chunk(uint16_t r, uint16_t c) const {
  const Region& reg = region(r);
  if (c >= reg.chunks.size()) fail(ErrorCode::TruncatedBuffer, rname(r) + " has no chunk " + std::to_string(c));
  return reg.chunks[c];
}

void RegionStore::add_chunk(Region& reg, uint32_t size) {
  if (reg.chunks.size() >= 0xFFFF) fail(ErrorCode::OutOfMemory, "chunk index space exhausted");
  if (opts_.max_bytes && live_bytes_ + size > opts_.max_bytes)
    fail(ErrorCode::OutOfMemory, "store limit of " + std::to_string(opts_.max_bytes) + " bytes");
  Chunk ch;
  try {
    ch.data.reset(new uint8_t[size]());
    if (opts_.track_writes) ch.written.assign((size + 63) / 64, 0);
  } catch (const std::bad_alloc&) {
    fail(ErrorCode::OutOfMemory, "chunk of " + std::to_string(size) + " bytes");
  }
  ch.size = size;
  live_bytes_ += size;
  reg.chunks.push_back(std::move(ch));
  reg.frontier = 0;
}

uint16_t RegionStore::new_region(uint32_t first_chunk_size) {
  if (first_chunk_size < kMinFirstChunk)
    fail(ErrorCode::InvalidChunkSize, std::to_string(first_chunk_size) + " < " + std::to_string(kMinFirstChunk));
  if (first_chunk_size > (1u << 30)) fail(ErrorCode::InvalidChunkSize, "first chunk above 1 GiB");
  if (regions_.size() >= 0xFFFF) fail(ErrorCode::OutOfMemory, "region id space exhausted");
  Region reg;
  reg.first_chunk_size = first_chunk_size;
  reg.refcount = 1;
  reg.alive = true;
  add_chunk(reg, first_chunk_size);
  regions_.push_back(std::move(reg));
  return uint16_t(regions_.size() - 1);
}

Address RegionStore::frontier(uint16_t r) const {
  const Region& reg = region(r);
  return {r, uint16_t(reg.chunks.size() - 1), reg.frontier};
}

void RegionStore::mark(Chunk& ch, uint32_t off, uint32_t n) {
  if (!opts_.track_writes) return;
  for (uint32_t i = off; i < off + n; ++i) {
    uint64_t bit = 1ULL << (i & 63);
    if (ch.written[i >> 6] & bit) fail(ErrorCode::WriteTwice, "byte " + std::to_string(i) + " written twice");
    ch.written[i >> 6] |= bit;
  }
}

Address RegionStore::reserve(Address at, uint32_t n) {
  Region& reg = region(at.region);
  if (!(at == frontier(at.region))) fail(ErrorCode::NotAtFrontier, rname(at.region));
  for (;;) {
    Chunk& last = reg.chunks.back();
    if (uint64_t(reg.frontier) + n + kRecordSize <= last.size) return frontier(at.region);
    if (last.size > (1u << 30)) fail(ErrorCode::OutOfMemory, "chunk growth beyond 2 GiB");
    uint32_t at_off = reg.frontier;
    uint16_t from_chunk = uint16_t(reg.chunks.size() - 1);
    add_chunk(reg, last.size * 2);
    Chunk& old = reg.chunks[from_chunk];
    Address next_start{at.region, uint16_t(from_chunk + 1), 0};
    mark(old, at_off, kRecordSize);
    old.data[at_off] = 255;
    store_u64(old.data.get() + at_off + 1, next_start.encode());
    old.next = uint16_t(from_chunk + 1);
    old.redir_at = at_off;
  }
}

void RegionStore::write(Address at, const void* src, uint32_t n) {
  Region& reg = regions_.size() > at.region ? regions_[at.region] : region(at.region);
  if (!reg.alive) fail(ErrorCode::UseAfterFree, rname(at.region));
  if (at.chunk != reg.chunks.size() - 1 || at.offset != reg.frontier)
    fail(ErrorCode::NotAtFrontier, rname(at.region) + " offset " + std::to_string(at.offset));
  Chunk& ch = reg.chunks.back();
  if (uint64_t(at.offset) + n + kRecordSize > ch.size)
    fail(ErrorCode::NotAtFrontier, "write of " + std::to_string(n) + " bytes crosses the reserve zone");
  mark(ch, at.offset, n);
  std::memcpy(ch.data.get() + at.offset, src, n);
  reg.frontier += n;
}

void RegionStore::skip(Address at, uint32_t n) {
  Region& reg = region(at.region);
  if (!(at == frontier(at.region))) fail(ErrorCode::NotAtFrontier, rname(at.region));
  if (uint64_t(at.offset) + n + kRecordSize > reg.chunks.back().size)
    fail(ErrorCode::NotAtFrontier, "skip crosses the reserve zone");
  reg.frontier += n;
}

void RegionStore::patch(Address at, const void* src, uint32_t n) {
  Region& reg = region(at.region);
  if (at.chunk >= reg.chunks.size()) fail(ErrorCode::TruncatedBuffer, "patch outside region");
  Chunk& ch = reg.chunks[at.chunk];
  uint32_t used = chunk_used(at.region, at.chunk);
  if (uint64_t(at.offset) + n > used) fail(ErrorCode::NotAtFrontier, "patch beyond allocated bytes");
  mark(ch, at.offset, n);
  std::memcpy(ch.data.get() + at.offset, src, n);
}

uint32_t RegionStore::chunk_used(uint16_t r, uint16_t c) const {
  const Region& reg = region(r);
  const Chunk& ch = chunk(r, c);
  if (c + 1u == reg.chunks.size()) return reg.frontier;
  return ch.redir_at + kRecordSize;
}

uint32_t RegionStore::refcount(uint16_t r) const {
  if (r >= regions_.size()) fail(ErrorCode::UseAfterFree, rname(r));
  return regions_[r].refcount;
}

uint16_t RegionStore::chunk_count(uint16_t r) const { return uint16_t(region(r).chunks.size()); }

std::vector<uint32_t> RegionStore::chunk_sizes(uint16_t r) const {
  std::vector<uint32_t> out;
  for (const auto& c : region(r).chunks) out.push_back(c.size);
  return out;
}

std::optional<uint16_t> RegionStore::next(uint16_t r, uint16_t c) const { return chunk(r, c).next; }

bool RegionStore::written(Address a) const {
  if (!opts_.track_writes) fail(ErrorCode::FeatureDisabled, "write tracking is off");
  const Chunk& ch = chunk(a.region, a.chunk);
  return (ch.written[a.offset >> 6] >> (a.offset & 63)) & 1;
}

std::vector<uint16_t> RegionStore::region_outset(uint16_t r) const {
  std::vector<uint16_t> out;
  for (const auto& c : region(r).chunks) out.insert(out.end(), c.outset.begin(), c.outset.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

uint32_t RegionStore::incref(uint16_t r) { return ++region(r).refcount; }

void RegionStore::release(uint16_t root) {
  std::vector<uint16_t> work{root};
  while (!work.empty()) {
    uint16_t r = work.back();
    work.pop_back();
    Region& reg = regions_[r];
    for (auto& ch : reg.chunks) {
      for (uint16_t to : ch.outset) {
        Region& t = regions_[to];
        if (!t.alive) continue;
        if (--t.refcount == 0) work.push_back(to);
      }
      live_bytes_ -= ch.size;
    }
    reg.chunks.clear();
    reg.chunks.shrink_to_fit();
    reg.alive = false;
  }
}

uint32_t RegionStore::decref(uint16_t r) {
  Region& reg = region(r);
  if (--reg.refcount == 0) release(r);
  return reg.refcount;
}

bool RegionStore::reaches(uint16_t from, uint16_t target) const {
  std::vector<uint16_t> work{from};
  std::vector<bool> seen(regions_.size(), false);
  while (!work.empty()) {
    uint16_t r = work.back();
    work.pop_back();
    if (r == target) return true;
    if (seen[r] || !regions_[r].alive) continue;
    seen[r] = true;
    for (const auto& ch : regions_[r].chunks) work.insert(work.end(), ch.outset.begin(), ch.outset.end());
  }
  return false;
}

void RegionStore::record_outlink(Address from, uint16_t to) {
  Region& src = region(from.region);
  region(to);
  if (from.region == to) return;
  if (from.chunk >= src.chunks.size()) fail(ErrorCode::TruncatedBuffer, "outlink from missing chunk");
  auto& out = src.chunks[from.chunk].outset;
  if (std::find(out.begin(), out.end(), to) != out.end()) return;
  if (reaches(to, from.region))
    fail(ErrorCode::OutlinkCycle, rname(from.region) + " -> " + rname(to) + " closes a cycle");
  out.push_back(to);
  ++regions_[to].refcount;
}

}  // namespace packedadt
