#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "packedadt/error.hpp"

namespace packedadt {

enum class Layout : uint8_t { Flat = 0, Factored = 1 };

const char* layout_name(Layout l);

// Constructor tags share the byte with these.
inline constexpr uint8_t kRedirTag = 255;
inline constexpr uint8_t kIndirTag = 254;
inline constexpr uint8_t kRandomAccessTag = 253;
inline constexpr int kMaxConstructors = 250;

enum class FieldKind : uint8_t { Int, Packed, SelfRec };

struct FieldType {
  FieldKind kind = FieldKind::Int;
  std::string datatype;  // empty for Int
  int dt = -1;           // resolved index for Packed/SelfRec
};

struct ConstructorDef {
  std::string name;
  uint8_t tag = 0;
  std::vector<FieldType> fields;

  int scalar_count() const;
  int packed_count() const;   // non-self-recursive packed fields
  int selfrec_count() const;
};

struct DatatypeDef {
  std::string name;
  Layout layout = Layout::Flat;
  std::vector<ConstructorDef> ctors;

  int find_ctor(std::string_view name) const;  // -1 if absent
};

class AdtSchema {
 public:
  std::vector<DatatypeDef> datatypes;

  int find(std::string_view name) const;  // -1 if absent
  const DatatypeDef& at(std::string_view name) const;
  const DatatypeDef& operator[](int i) const { return datatypes[i]; }

  std::string canonical_text() const;
  uint64_t hash() const;

  void index_names();

 private:
  std::unordered_map<std::string, int> index_;
};

AdtSchema parse_schema(std::string_view text);

uint64_t fnv1a64(std::string_view bytes);

struct BufferShape;

struct ShapeEntry {
  int ctor = 0;
  int field = 0;
  // Exactly one of buffer >= 0 (scalar buffer) or nested != nullptr.
  int buffer = -1;
  std::shared_ptr<const BufferShape> nested;
};

struct BufferShape {
  int datatype = -1;
  Layout layout = Layout::Flat;
  int base = 0;          // absolute index of this shape's tag buffer
  int buffer_count = 1;  // buffers owned by this shape, nested included
  std::vector<ShapeEntry> entries;
  std::vector<std::string> roles;  // one per buffer, relative to base

  const ShapeEntry* entry(int ctor, int field) const;
};

bool operator==(const BufferShape& a, const BufferShape& b);

BufferShape buffer_shape(const AdtSchema& schema, std::string_view datatype);
BufferShape buffer_shape(const AdtSchema& schema, int datatype, int base = 0);

int cursor_count(const BufferShape& shape);

}  // namespace packedadt
