#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "packedadt/schema.hpp"

namespace packedadt {

struct Value;
using Arg = std::variant<int64_t, std::unique_ptr<Value>>;

// Reference representation. Destruction, copy and comparison are iterative so
// million-deep lists are safe.
struct Value {
  std::string ctor;
  std::vector<Arg> args;

  Value() = default;
  explicit Value(std::string c) : ctor(std::move(c)) {}
  Value(Value&&) noexcept = default;
  Value& operator=(Value&&) noexcept = default;
  Value(const Value&) = delete;
  Value& operator=(const Value&) = delete;
  ~Value();

  Value& add(int64_t n) {
    args.emplace_back(n);
    return *this;
  }
  Value& add(Value v) {
    args.emplace_back(std::make_unique<Value>(std::move(v)));
    return *this;
  }

  Value clone() const;
  size_t node_count() const;
  size_t depth() const;
};

bool operator==(const Value& a, const Value& b);

inline Value mk(std::string ctor) { return Value(std::move(ctor)); }

// Checks constructor names, arity and field kinds against the schema.
void check_value(const AdtSchema& schema, int datatype, const Value& v);

std::string to_string(const Value& v);

}  // namespace packedadt
