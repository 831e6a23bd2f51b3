#pragma once

#include <cstdint>

#include "packedadt/region.hpp"
#include "packedadt/schema.hpp"

namespace packedadt {

// Read position inside one chunk. `lim` is the reserve-zone boundary of a
// chained chunk, or the frontier of the last chunk.
struct ReadCursor {
  const uint8_t* p = nullptr;
  const uint8_t* lim = nullptr;
  const uint8_t* base = nullptr;
  uint16_t region = 0;
  uint16_t chunk = 0;

  Address addr() const { return {region, chunk, uint32_t(p - base)}; }
};

inline ReadCursor open_cursor(const RegionStore& s, Address a) {
  ReadCursor c;
  c.base = s.data(a.region, a.chunk);
  c.p = c.base + a.offset;
  c.region = a.region;
  c.chunk = a.chunk;
  const uint8_t* limit = s.read_limit(a.region, a.chunk);
  if (a.chunk + 1u == s.chunk_count(a.region)) {
    const uint8_t* end = c.base + s.chunk_used(a.region, a.chunk);
    c.lim = end < limit ? end : limit;
  } else {
    c.lim = limit;
  }
  return c;
}

// Jumps through the redirection record at p.
void cursor_follow(const RegionStore& s, ReadCursor& c);
// Slow path of reading n bytes: follows a redirection record at p, or throws.
void cursor_refill(const RegionStore& s, ReadCursor& c, uint32_t n);

inline void cursor_need(const RegionStore& s, ReadCursor& c, uint32_t n) {
  if (c.p + n > c.lim) cursor_refill(s, c, n);
}

// Tag at a tag position, with redirections followed. Does not advance.
inline uint8_t cursor_tag(const RegionStore& s, ReadCursor& c) {
  for (;;) {
    if (c.p + 1 > c.lim) cursor_refill(s, c, 1);
    uint8_t b = *c.p;
    if (b != kRedirTag) return b;
    cursor_follow(s, c);
  }
}

}  // namespace packedadt
