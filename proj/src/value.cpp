#include "packedadt/value.hpp"

#include <algorithm>

namespace packedadt {

Value::~Value() {
  std::vector<std::unique_ptr<Value>> work;
  for (auto& a : args)
    if (auto* p = std::get_if<std::unique_ptr<Value>>(&a); p && *p) work.push_back(std::move(*p));
  while (!work.empty()) {
    std::unique_ptr<Value> v = std::move(work.back());
    work.pop_back();
    for (auto& a : v->args)
      if (auto* p = std::get_if<std::unique_ptr<Value>>(&a); p && *p) work.push_back(std::move(*p));
  }
}

Value Value::clone() const {
  Value root(ctor);
  std::vector<std::pair<const Value*, Value*>> work{{this, &root}};
  while (!work.empty()) {
    auto [src, dst] = work.back();
    work.pop_back();
    dst->args.reserve(src->args.size());
    for (const auto& a : src->args) {
      if (auto* n = std::get_if<int64_t>(&a)) {
        dst->args.emplace_back(*n);
      } else {
        const Value* child = std::get<std::unique_ptr<Value>>(a).get();
        auto copy = std::make_unique<Value>(child->ctor);
        work.emplace_back(child, copy.get());
        dst->args.emplace_back(std::move(copy));
      }
    }
  }
  return root;
}

size_t Value::node_count() const {
  size_t n = 0;
  std::vector<const Value*> work{this};
  while (!work.empty()) {
    const Value* v = work.back();
    work.pop_back();
    ++n;
    for (const auto& a : v->args)
      if (auto* p = std::get_if<std::unique_ptr<Value>>(&a)) work.push_back(p->get());
  }
  return n;
}

size_t Value::depth() const {
  size_t best = 0;
  std::vector<std::pair<const Value*, size_t>> work{{this, 1}};
  while (!work.empty()) {
    auto [v, d] = work.back();
    work.pop_back();
    best = std::max(best, d);
    for (const auto& a : v->args)
      if (auto* p = std::get_if<std::unique_ptr<Value>>(&a)) work.emplace_back(p->get(), d + 1);
  }
  return best;
}

bool operator==(const Value& a, const Value& b) {
  std::vector<std::pair<const Value*, const Value*>> work{{&a, &b}};
  while (!work.empty()) {
    auto [x, y] = work.back();
    work.pop_back();
    if (x->ctor != y->ctor || x->args.size() != y->args.size()) return false;
    for (size_t i = 0; i < x->args.size(); ++i) {
      const Arg& p = x->args[i];
      const Arg& q = y->args[i];
      if (p.index() != q.index()) return false;
      if (p.index() == 0) {
        if (std::get<0>(p) != std::get<0>(q)) return false;
      } else {
        work.emplace_back(std::get<1>(p).get(), std::get<1>(q).get());
      }
    }
  }
  return true;
}

void check_value(const AdtSchema& schema, int datatype, const Value& v) {
  std::vector<std::pair<const Value*, int>> work{{&v, datatype}};
  while (!work.empty()) {
    auto [x, d] = work.back();
    work.pop_back();
    const auto& def = schema[d];
    int c = def.find_ctor(x->ctor);
    if (c < 0) fail(ErrorCode::SchemaMismatch, "no constructor " + x->ctor + " in " + def.name);
    const auto& ctor = def.ctors[c];
    if (ctor.fields.size() != x->args.size())
      fail(ErrorCode::SchemaMismatch, ctor.name + " expects " + std::to_string(ctor.fields.size()) + " fields");
    for (size_t i = 0; i < ctor.fields.size(); ++i) {
      bool is_int = ctor.fields[i].kind == FieldKind::Int;
      if (is_int != (x->args[i].index() == 0))
        fail(ErrorCode::SchemaMismatch, ctor.name + " field " + std::to_string(i) + " has the wrong kind");
      if (!is_int) work.emplace_back(std::get<1>(x->args[i]).get(), ctor.fields[i].dt);
    }
  }
}

std::string to_string(const Value& v) {
  // Iterative pretty printer: (Ctor a b ...)
  std::string out;
  struct Item {
    const Value* v;
    size_t next;
  };
  std::vector<Item> work{{&v, 0}};
  while (!work.empty()) {
    Item& it = work.back();
    if (it.next == 0) {
      if (!it.v->args.empty()) out += "(";
      out += it.v->ctor;
    }
    if (it.next == it.v->args.size()) {
      if (!it.v->args.empty()) out += ")";
      work.pop_back();
      continue;
    }
    const Arg& a = it.v->args[it.next++];
    out += " ";
    if (a.index() == 0) {
      out += std::to_string(std::get<0>(a));
    } else {
      work.push_back({std::get<1>(a).get(), 0});
    }
  }
  return out;
}

}  // namespace packedadt
