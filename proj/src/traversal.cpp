#include "packedadt/traversal.hpp"

#include <algorithm>
#include <chrono>
#include <deque>

#include "json.hpp"
#include "packedadt/cursor.hpp"

namespace packedadt {

const char* mode_name(CursorMode m) { return m == CursorMode::Mutable ? "mutable" : "immutable"; }

const DatatypeClauses* PassDef::find(std::string_view dt) const {
  for (const auto& t : types)
    if (t.datatype == dt) return &t;
  return nullptr;
}

double PassDef::dead_fraction() const {
  size_t all = 0, dead = 0;
  for (const auto& t : types)
    for (const auto& c : t.clauses) {
      all += c.used.size();
      for (bool u : c.used) dead += !u;
    }
  return all ? double(dead) / double(all) : 0.0;
}

std::string TraversalReport::to_json() const {
  nlohmann::ordered_json j;
  j["pass"] = pass;
  j["layout"] = layout_name(layout);
  j["mode"] = mode_name(mode);
  j["n"] = n;
  j["result"] = result;
  auto& b = j["buffers"] = nlohmann::ordered_json::array();
  for (const auto& c : buffers)
    b.push_back({{"role", c.role}, {"bytes_read", c.bytes_read}, {"bytes_written", c.bytes_written}});
  j["steps"] = steps;
  j["bundle_copies"] = bundle_copies;
  j["wall_ns"] = wall_ns;
  j["dead_fraction"] = dead_fraction;
  return j.dump();
}

namespace {

// Clause table: [datatype][ctor] -> clause or null.
using ClauseTable = std::vector<std::vector<const Clause*>>;

ClauseTable clause_table(const AdtSchema& schema, const PassDef& pass) {
  ClauseTable t(schema.datatypes.size());
  for (size_t d = 0; d < schema.datatypes.size(); ++d) t[d].assign(schema[int(d)].ctors.size(), nullptr);
  for (const auto& dc : pass.types) {
    int d = schema.find(dc.datatype);
    if (d < 0) fail(ErrorCode::UnknownDatatype, "pass " + pass.name + " names " + dc.datatype);
    for (const auto& cl : dc.clauses) {
      int c = schema[d].find_ctor(cl.ctor);
      if (c < 0) fail(ErrorCode::InvalidArgument, "no constructor " + cl.ctor + " in " + dc.datatype);
      if (cl.used.size() != schema[d].ctors[c].fields.size())
        fail(ErrorCode::InvalidArgument, "mask length differs from arity of " + cl.ctor);
      t[d][c] = &cl;
    }
  }
  return t;
}

const Clause* need_clause(const ClauseTable& t, const AdtSchema& s, const PassDef& p, int d, int c) {
  const Clause* cl = t[d][c];
  if (!cl && p.kind == PassKind::Fold)
    fail(ErrorCode::InvalidArgument, "pass " + p.name + " has no clause for " + s[d].ctors[c].name);
  if (cl && p.kind == PassKind::Fold) {
    if (p.style == FoldStyle::Combine && !cl->combine)
      fail(ErrorCode::InvalidArgument, "missing combine for " + cl->ctor);
    if (p.style == FoldStyle::Accumulate && !cl->step) fail(ErrorCode::InvalidArgument, "missing step for " + cl->ctor);
  }
  return cl;
}

inline bool field_used(const Clause* cl, const PassDef& p, size_t j) {
  return p.kind == PassKind::Map || (cl && cl->used[j]);
}

// ---- plans ---------------------------------------------------------------

struct SNode;

struct KidPlan {
  int nonint;
  SNode* node;  // null: dead packed kid whose buffers nobody tracks
  bool live;
  bool packed_factored;
  int jump_slot;  // slot holding the start of the next kid, or -1
};

struct CtorPlan {
  const Clause* clause = nullptr;
  uint32_t nscalar = 0;
  uint32_t nkids = 0;
  std::vector<uint8_t> scalar_live;
  std::vector<int> scalar_buf;  // factored only; -1 untracked
  std::vector<uint32_t> live_idx;                  // scalars the clause reads
  std::vector<std::pair<uint32_t, int>> live_sc;   // factored: (field, buffer)
  std::vector<int> bump_sc;                        // factored: tracked, unread
  std::vector<KidPlan> kids;
  bool any_live_kid = false;
  bool spine = false;  // accumulate with one live self kid
};

struct SNode {
  int dt = 0;
  bool flat = true;
  int base = 0;
  int count = 1;
  const BufferShape* shape = nullptr;
  uint32_t ra_size = 0;
  int ra_width = 1;
  bool has_live = false;
  bool has_skip = false;
  std::vector<int> tracked;  // tracked buffers in [base, base + count)
  std::vector<CtorPlan> lp, sp;
};

class Planner {
 public:
  Planner(const AdtSchema& s, const PassDef& p, const BufferShape& root)
      : s_(s), p_(p), table_(clause_table(s, p)), rb_(root.base), tracked_(root.buffer_count, false) {
    root_ = get(root.datatype, 0, root.layout == Layout::Flat ? nullptr : &root);
    live(root_);
    // Dead kids need skip plans once tracking is final.
    std::vector<SNode*> work;
    for (auto& n : nodes_)
      for (auto& cp : n.lp)
        for (auto& k : cp.kids) {
          if (k.live) continue;
          if (k.packed_factored && !any_tracked(k.node)) {
            k.node = nullptr;
            continue;
          }
          work.push_back(k.node);
        }
    while (!work.empty()) {
      SNode* n = work.back();
      work.pop_back();
      if (n->has_skip) continue;
      skip(n, work);
    }
    for (auto& n : nodes_) {
      for (int b = n.base; b < n.base + n.count; ++b)
        if (tracked_[b]) n.tracked.push_back(b);
      for (auto* plans : {&n.lp, &n.sp})
        for (auto& cp : *plans)
        {
          cp.kids.erase(std::remove_if(cp.kids.begin(), cp.kids.end(), [](const KidPlan& k) { return !k.node; }),
                        cp.kids.end());
          for (uint32_t j = 0; j < cp.nscalar; ++j) {
            if (cp.scalar_live[j]) {
              cp.live_idx.push_back(j);
              if (!n.flat) cp.live_sc.push_back({j, cp.scalar_buf[j]});
            } else if (!n.flat && cp.scalar_buf[j] >= 0) {
              cp.bump_sc.push_back(cp.scalar_buf[j]);
            }
          }
        }
    }
  }

  SNode* root() const { return root_; }
  const std::vector<bool>& tracked() const { return tracked_; }
  uint32_t max_scalars() const {
    uint32_t m = 1;
    for (const auto& d : s_.datatypes)
      for (const auto& c : d.ctors) m = std::max(m, uint32_t(c.scalar_count()));
    return m;
  }

 private:
  SNode* get(int dt, int base, const BufferShape* fshape) {
    for (auto& n : nodes_)
      if (n.dt == dt && n.base == base) return &n;
    SNode& n = nodes_.emplace_back();
    n.dt = dt;
    n.base = base;
    n.flat = fshape == nullptr;
    n.shape = fshape;
    n.count = fshape ? fshape->buffer_count : 1;
    n.ra_width = n.count;
    int most = 0;
    for (size_t c = 0; c < s_[dt].ctors.size(); ++c) most = std::max(most, ra_slot_count(s_, dt, int(c)));
    n.ra_size = 1 + 8u * uint32_t(n.ra_width) * uint32_t(most);
    return &n;
  }

  bool any_tracked(const SNode* n) const {
    for (int b = n->base; b < n->base + n->count; ++b)
      if (tracked_[b]) return true;
    return false;
  }

  SNode* kid_node(SNode* n, int c, int j) {
    const auto& f = s_[n->dt].ctors[c].fields[j];
    if (f.kind == FieldKind::SelfRec) return n;
    if (n->flat) return get(f.dt, n->base, nullptr);
    const auto* e = n->shape->entry(c, j);
    const BufferShape* nested = e->nested.get();
    return get(f.dt, nested->base - rb_, nested->layout == Layout::Flat ? nullptr : nested);
  }

  int jump_slot(const SNode* n, int c, int j) const {
    const auto& ct = s_[n->dt].ctors[c];
    int k = j - ct.scalar_count();
    if (n->flat) return k + 1 < int(ct.packed_count() + ct.selfrec_count()) ? k : -1;
    if (ct.fields[j].kind != FieldKind::SelfRec) return -1;
    int i = j - ct.scalar_count() - ct.packed_count();
    return i + 1 < int(ct.selfrec_count()) ? i : -1;
  }

  void live(SNode* n) {
    if (n->has_live) return;
    n->has_live = true;
    tracked_[n->base] = true;
    const auto& def = s_[n->dt];
    n->lp.resize(def.ctors.size());
    for (size_t c = 0; c < def.ctors.size(); ++c) {
      const auto& ct = def.ctors[c];
      CtorPlan& cp = n->lp[c];
      cp.clause = need_clause(table_, s_, p_, n->dt, int(c));
      cp.nscalar = ct.scalar_count();
      cp.nkids = uint32_t(ct.fields.size()) - cp.nscalar;
      for (uint32_t j = 0; j < cp.nscalar; ++j) {
        bool u = field_used(cp.clause, p_, j);
        cp.scalar_live.push_back(u);
        if (!n->flat) {
          int b = u ? n->shape->entry(int(c), int(j))->buffer - rb_ : -1;
          if (b >= 0) tracked_[b] = true;
          cp.scalar_buf.push_back(b);
        }
      }
      for (size_t j = cp.nscalar; j < ct.fields.size(); ++j) {
        bool u = field_used(cp.clause, p_, j);
        SNode* k = kid_node(n, int(c), int(j));
        bool pf = !n->flat && ct.fields[j].kind == FieldKind::Packed;
        cp.kids.push_back({int(j - cp.nscalar), k, u, pf, u ? -1 : jump_slot(n, int(c), int(j))});
        cp.any_live_kid = cp.any_live_kid || u;
        if (u) live(k);  // bounded by the number of shape nodes
      }
      cp.spine = p_.style == FoldStyle::Accumulate && cp.kids.size() == 1 && cp.kids[0].live &&
                 cp.kids[0].node == n;
    }
  }

  void skip(SNode* n, std::vector<SNode*>& work) {
    n->has_skip = true;
    const auto& def = s_[n->dt];
    n->sp.resize(def.ctors.size());
    for (size_t c = 0; c < def.ctors.size(); ++c) {
      const auto& ct = def.ctors[c];
      CtorPlan& cp = n->sp[c];
      cp.nscalar = ct.scalar_count();
      cp.nkids = uint32_t(ct.fields.size()) - cp.nscalar;
      cp.scalar_live.assign(cp.nscalar, 0);
      if (!n->flat)
        for (uint32_t j = 0; j < cp.nscalar; ++j) {
          int b = n->shape->entry(int(c), int(j))->buffer - rb_;
          cp.scalar_buf.push_back(tracked_[b] ? b : -1);
        }
      for (size_t j = cp.nscalar; j < ct.fields.size(); ++j) {
        SNode* k = kid_node(n, int(c), int(j));
        bool pf = !n->flat && ct.fields[j].kind == FieldKind::Packed;
        if (pf && !any_tracked(k)) continue;
        cp.kids.push_back({int(j - cp.nscalar), k, false, pf, jump_slot(n, int(c), int(j))});
        work.push_back(k);
      }
    }
  }

  const AdtSchema& s_;
  const PassDef& p_;
  ClauseTable table_;
  int rb_;
  std::vector<bool> tracked_;
  std::deque<SNode> nodes_;
  SNode* root_ = nullptr;
};

// ---- engine --------------------------------------------------------------

enum Op : uint8_t { OpLive, OpSkip, OpCombine, OpJump, OpRestore, OpReturn };

struct Task {
  Op op;
  bool frame_end;
  const SNode* sn;
  const CtorPlan* cp;
  const uint8_t* slots;
  size_t a, b, c;
};

inline int64_t load_scalar(const uint8_t* p) { return load_i64(p); }

inline void need_unit(const ReadCursor& c, uint32_t n) {
  if (c.p + n > c.lim) fail(ErrorCode::TruncatedBuffer, "value ends mid-record");
}

template <bool Count, bool Map>
class Engine {
 public:
  Engine(const AdtSchema& s, const PassDef& p, const SerializedRoot& root, const Planner& plan, CursorMode mode,
         const TraverseOptions& o, BundleWriter* w, TraversalReport& rep)
      : s_(s), p_(p), st_(*root.store), plan_(plan), mode_(mode), cap_(o.max_depth), w_(w), rep_(rep) {
    nbuf_ = root.shape.buffer_count;
    for (const auto& a : root.bundle) {
      if (!st_.alive(a.region)) fail(ErrorCode::UseAfterFree, "region " + std::to_string(a.region));
      bund_.push_back(open_cursor(st_, a));
    }
    read_.assign(nbuf_, 0);
    written_.assign(nbuf_, 0);
    scal_.assign(plan.max_scalars(), 0);
    size_t most = 1;
    for (const auto& d : s.datatypes)
      for (const auto& c : d.ctors) most = std::max(most, c.fields.size());
    zeros_.assign(most, 0);
    unit_.reserve(1 + 8 * scal_.size());
  }

  void run() {
    acc_ = p_.init;
    rstack_.assign(1, 0);
    tasks_.push_back({OpLive, false, plan_.root(), nullptr, nullptr, 0, 0, 0});
    while (!tasks_.empty()) {
      Task t = tasks_.back();
      tasks_.pop_back();
      if (t.frame_end) --depth_;
      switch (t.op) {
        case OpLive:
          node(t.sn, true, t.a);
          break;
        case OpSkip:
          node(t.sn, false, 0);
          break;
        case OpCombine: {
          const auto* cl = t.cp->clause;
          Ints sc(sstack_.data() + t.b, t.cp->nscalar);
          Ints kids(rstack_.data() + t.c, t.cp->nkids);
          int64_t r = cl->combine(sc, kids);
          rstack_[t.a] = r;
          sstack_.resize(t.b);
          rstack_.resize(t.c);
          break;
        }
        case OpJump:
          jump(t.sn, t.slots);
          break;
        case OpRestore: {
          ReadCursor* cur = bund_.data() + top_;
          for (size_t i = t.a; i < saved_.size(); ++i) cur[saved_[i].first] = saved_[i].second;
          saved_.resize(t.a);
          break;
        }
        case OpReturn:
          pop_bundle();
          break;
      }
    }
    rep_.result = p_.style == FoldStyle::Accumulate ? acc_ : rstack_[0];
    rep_.steps = steps_;
    rep_.bundle_copies = copies_;
    rep_.n = tags_;
    rep_.max_depth = max_depth_;
    for (int i = 0; i < nbuf_; ++i) {
      rep_.buffers[i].bytes_read = read_[i];
      rep_.buffers[i].bytes_written = written_[i];
    }
    rep_.end.clear();
    for (int i = 0; i < nbuf_; ++i) rep_.end.push_back(bund_[top_ + i].addr());
  }

 private:
  void push_bundle() {
    bund_.resize(top_ + 2 * nbuf_);
    std::copy_n(bund_.data() + top_, nbuf_, bund_.data() + top_ + nbuf_);
    top_ += nbuf_;
    ++copies_;
  }

  void pop_bundle() {
    std::copy_n(bund_.data() + top_, nbuf_, bund_.data() + top_ - nbuf_);
    bund_.resize(top_);
    top_ -= nbuf_;
    ++copies_;
  }

  void open_frame() {
    if (++depth_ > max_depth_) max_depth_ = depth_;
    if (depth_ > cap_) fail(ErrorCode::StackDepthExceeded, "traversal depth over " + std::to_string(cap_));
  }

  void jump(const SNode* sn, const uint8_t* slots) {
    ReadCursor* cur = bund_.data() + top_;
    for (int b : sn->tracked) {
      Address a = Address::decode(load_u64(slots + 8 * (b - sn->base)));
      if (!st_.alive(a.region) || a.chunk >= st_.chunk_count(a.region))
        fail(ErrorCode::CorruptTag, "random-access slot points nowhere");
      cur[b] = open_cursor(st_, a);
    }
    if constexpr (Count) ++steps_;
  }

  void node(const SNode* sn, bool live, size_t dest) {
    const bool immut = mode_ == CursorMode::Immutable;
    // Mutable cursors continue straight into a lone tail kid.
    for (;;) {
      if (immut) push_bundle();
      ReadCursor* cur = bund_.data() + top_;
      ReadCursor& tc = cur[sn->base];
      const uint8_t* ra = nullptr;
      uint8_t t;
      for (;;) {
        t = cursor_tag(st_, tc);
        if (t == kIndirTag) {
          size_t mark = saved_.size();
          for (int b : sn->tracked) {
            ReadCursor& c = cur[b];
            cursor_need(st_, c, kRecordSize);
            if (*c.p != kIndirTag) fail(ErrorCode::CorruptTag, "indirection records out of step");
            Address to = Address::decode(load_u64(c.p + 1));
            ReadCursor back = c;
            back.p += kRecordSize;
            saved_.emplace_back(b, back);
            if (!st_.alive(to.region)) fail(ErrorCode::UseAfterFree, "indirection into a freed region");
            c = open_cursor(st_, to);
          }
          if constexpr (Count) ++steps_;
          // The restore runs after the value; it sits below the node's frame.
          tasks_.push_back({OpRestore, true, nullptr, nullptr, nullptr, mark, 0, 0});
          open_frame();
          continue;
        }
        if (t == kRandomAccessTag) {
          need_unit(tc, sn->ra_size);
          ra = tc.p + 1;
          tc.p += sn->ra_size;
          if constexpr (Count) ++steps_;
          continue;
        }
        break;
      }
      if (t >= s_[sn->dt].ctors.size())
        fail(ErrorCode::CorruptTag, "tag " + std::to_string(t) + " in " + s_[sn->dt].name);
      const CtorPlan& cp = live ? sn->lp[t] : sn->sp[t];
      tc.p += 1;
      if constexpr (Count) {
        ++steps_;
        ++tags_;
        read_[sn->base] += 1;
      }
      // Dead scalar slots stay zero between nodes.
      int64_t* sc = scal_.data();
      if (sn->flat) {
        uint32_t w = 8 * cp.nscalar;
        need_unit(tc, w);
        if (live)
          for (uint32_t j : cp.live_idx) sc[j] = load_scalar(tc.p + 8 * j);
        tc.p += w;
        if constexpr (Count) {
          steps_ += cp.nscalar;
          read_[sn->base] += w;
        }
      } else {
        for (const auto& [j, b] : cp.live_sc) {
          ReadCursor& c = cur[b];
          cursor_need(st_, c, 8);
          sc[j] = load_scalar(c.p);
          c.p += 8;
          if constexpr (Count) {
            ++steps_;
            read_[b] += 8;
          }
        }
        for (int b : cp.bump_sc) {
          ReadCursor& c = cur[b];
          cursor_need(st_, c, 8);
          c.p += 8;
          if constexpr (Count) {
            ++steps_;
            read_[b] += 8;
          }
        }
      }

      bool combine_post = false;
      size_t rbase = 0;
      if (live) {
        if constexpr (Map) {
          if (cp.clause && cp.clause->rewrite) cp.clause->rewrite(std::span<int64_t>(sc, cp.nscalar));
          emit(sn, cp, t, sc);
        } else if (p_.style == FoldStyle::Accumulate) {
          acc_ = cp.clause->step(acc_, Ints(sc, cp.nscalar));
        } else if (!cp.any_live_kid) {
          rstack_[dest] = cp.clause->combine(Ints(sc, cp.nscalar), Ints(zeros_.data(), cp.nkids));
        } else {
          combine_post = true;
          rbase = rstack_.size();
          rstack_.resize(rbase + cp.nkids, 0);
        }
      }

      size_t g0 = tasks_.size();
      if (combine_post) {
        size_t sb = sstack_.size();
        sstack_.insert(sstack_.end(), sc, sc + cp.nscalar);
        tasks_.push_back({OpCombine, false, nullptr, &cp, nullptr, dest, sb, rbase});
      }
      if (live)
        for (uint32_t j : cp.live_idx) sc[j] = 0;

      if (!immut && !combine_post && cp.kids.size() == 1 && !(ra && cp.kids[0].jump_slot >= 0)) {
        const KidPlan& kp = cp.kids[0];
        sn = kp.node;
        dest = rbase + kp.nonint;
        live = kp.live;
        if constexpr (!Count && !Map)
          if (cp.spine && !ra) spine(sn, tc, cur, sc);
        continue;
      }
      if (immut) {
        tasks_.insert(tasks_.begin() + std::ptrdiff_t(g0), {OpReturn, false, nullptr, nullptr, nullptr, 0, 0, 0});
      }
      size_t post = tasks_.size() - g0;
      for (size_t k = cp.kids.size(); k-- > 0;) {
        const KidPlan& kp = cp.kids[k];
        if (kp.live) {
          tasks_.push_back({OpLive, false, kp.node, nullptr, nullptr, rbase + kp.nonint, 0, 0});
        } else if (ra && kp.jump_slot >= 0) {
          tasks_.push_back({OpJump, false, sn, nullptr, ra + 8 * sn->ra_width * kp.jump_slot, 0, 0, 0});
        } else {
          tasks_.push_back({OpSkip, false, kp.node, nullptr, nullptr, 0, 0, 0});
        }
      }
      size_t g = tasks_.size() - g0;
      if (immut && g == 1) {
        // Leaf: return straight away.
        tasks_.pop_back();
        pop_bundle();
        return;
      }
      if (g == 0) return;
      if (post > 0 || g >= 2) {
        tasks_[g0].frame_end = true;
        open_frame();
      }
      return;
    }
  }

  // Runs of list-like constructors without the generic dispatch. Stops
  // before any tag it does not handle.
  void spine(const SNode* sn, ReadCursor& tc, ReadCursor* cur, int64_t* sc) {
    const size_t nctors = sn->lp.size();
    for (;;) {
      uint8_t t = cursor_tag(st_, tc);
      if (t >= nctors) return;
      const CtorPlan& cp = sn->lp[t];
      if (!cp.spine) return;
      tc.p += 1;
      if (sn->flat) {
        uint32_t w = 8 * cp.nscalar;
        need_unit(tc, w);
        for (uint32_t j : cp.live_idx) sc[j] = load_scalar(tc.p + 8 * j);
        tc.p += w;
      } else {
        for (const auto& [j, b] : cp.live_sc) {
          ReadCursor& c = cur[b];
          cursor_need(st_, c, 8);
          sc[j] = load_scalar(c.p);
          c.p += 8;
        }
        for (int b : cp.bump_sc) {
          ReadCursor& c = cur[b];
          cursor_need(st_, c, 8);
          c.p += 8;
        }
      }
      acc_ = cp.clause->step(acc_, Ints(sc, cp.nscalar));
      for (uint32_t j : cp.live_idx) sc[j] = 0;
    }
  }

  void emit(const SNode* sn, const CtorPlan& cp, uint8_t tag, const int64_t* sc) {
    if (sn->flat) {
      unit_.assign(1, tag);
      for (uint32_t j = 0; j < cp.nscalar; ++j) {
        uint8_t b[8];
        store_u64(b, uint64_t(sc[j]));
        unit_.insert(unit_.end(), b, b + 8);
      }
      uint32_t n = uint32_t(unit_.size());
      w_->reserve(sn->base, n);
      w_->write(sn->base, unit_.data(), n);
      if constexpr (Count) {
        written_[sn->base] += n;
        steps_ += 1 + cp.nscalar;
      }
      return;
    }
    w_->reserve(sn->base, 1);
    w_->write(sn->base, &tag, 1);
    if constexpr (Count) {
      written_[sn->base] += 1;
      ++steps_;
    }
    for (uint32_t j = 0; j < cp.nscalar; ++j) {
      int b = cp.scalar_buf[j];
      uint8_t bytes[8];
      store_u64(bytes, uint64_t(sc[j]));
      w_->reserve(b, 8);
      w_->write(b, bytes, 8);
      if constexpr (Count) {
        written_[b] += 8;
        ++steps_;
      }
    }
  }

  const AdtSchema& s_;
  const PassDef& p_;
  const RegionStore& st_;
  const Planner& plan_;
  CursorMode mode_;
  uint64_t cap_;
  BundleWriter* w_;
  TraversalReport& rep_;

  int nbuf_ = 0;
  std::vector<ReadCursor> bund_;
  size_t top_ = 0;
  std::vector<Task> tasks_;
  std::vector<std::pair<int, ReadCursor>> saved_;
  std::vector<int64_t> scal_, sstack_, rstack_, zeros_;
  std::vector<uint8_t> unit_;
  int64_t acc_ = 0;
  uint64_t depth_ = 0, max_depth_ = 0;
  uint64_t steps_ = 0, copies_ = 0, tags_ = 0;
  std::vector<uint64_t> read_, written_;
};

TraversalReport make_report(const PassDef& pass, const SerializedRoot& root, CursorMode mode) {
  TraversalReport r;
  r.pass = pass.suite.empty() ? pass.name : pass.suite + "/" + pass.name;
  r.layout = root.layout;
  r.mode = mode;
  r.dead_fraction = pass.dead_fraction();
  for (const auto& role : root.shape.roles) r.buffers.push_back({role, 0, 0});
  r.buffers.resize(root.shape.buffer_count);
  return r;
}

template <bool Map>
void run_engine(const AdtSchema& schema, const PassDef& pass, const SerializedRoot& root, const Planner& plan,
                CursorMode mode, const TraverseOptions& opts, BundleWriter* w, TraversalReport& rep) {
  auto t0 = std::chrono::steady_clock::now();
  if (opts.instrument) {
    Engine<true, Map> e(schema, pass, root, plan, mode, opts, w, rep);
    e.run();
  } else {
    Engine<false, Map> e(schema, pass, root, plan, mode, opts, w, rep);
    e.run();
  }
  auto t1 = std::chrono::steady_clock::now();
  rep.wall_ns = uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
  rep.tracked = plan.tracked();
  for (size_t i = 0; i < rep.tracked.size(); ++i)
    if (!rep.tracked[i]) rep.end[i] = root.bundle[i];
}

void check_pass(const AdtSchema& schema, const PassDef& pass, const SerializedRoot& root, PassKind kind) {
  if (!root.store || !root.schema) fail(ErrorCode::InvalidArgument, "empty root");
  if (pass.kind != kind) fail(ErrorCode::InvalidArgument, "pass " + pass.name + " has the wrong kind");
  if (schema.find(pass.datatype) != root.datatype)
    fail(ErrorCode::SchemaMismatch, "pass " + pass.name + " is over " + pass.datatype);
}

}  // namespace

TraversalReport run_fold(const AdtSchema& schema, const PassDef& pass, const SerializedRoot& root, CursorMode mode,
                         const TraverseOptions& opts) {
  check_pass(schema, pass, root, PassKind::Fold);
  Planner plan(schema, pass, root.shape);
  TraversalReport rep = make_report(pass, root, mode);
  run_engine<false>(schema, pass, root, plan, mode, opts, nullptr, rep);
  return rep;
}

TraversalReport run_map(const AdtSchema& schema, const PassDef& pass, const SerializedRoot& root,
                        RegionStore& out_store, CursorMode mode, const TraverseOptions& opts) {
  check_pass(schema, pass, root, PassKind::Map);
  Planner plan(schema, pass, root.shape);
  TraversalReport rep = make_report(pass, root, mode);
  BundleWriter w(schema, root.datatype, out_store, SerializeOptions{opts.out_first_chunk, false, 0});
  run_engine<true>(schema, pass, root, plan, mode, opts, &w, rep);
  rep.output = w.finalize();
  return rep;
}

// ---- reference semantics over values -------------------------------------

int64_t reference_fold(const AdtSchema& schema, const PassDef& pass, const Value& v) {
  if (pass.kind != PassKind::Fold) fail(ErrorCode::InvalidArgument, "not a fold");
  int root = schema.find(pass.datatype);
  if (root < 0) fail(ErrorCode::UnknownDatatype, pass.datatype);
  check_value(schema, root, v);
  auto table = clause_table(schema, pass);
  struct Item {
    const Value* v;
    int dt;
    size_t dest;
    bool post;
    size_t rbase;
  };
  std::vector<Item> work{{&v, root, 0, false, 0}};
  std::vector<int64_t> res{0}, sc, zeros;
  int64_t acc = pass.init;
  while (!work.empty()) {
    Item it = work.back();
    work.pop_back();
    int c = schema[it.dt].find_ctor(it.v->ctor);
    const auto& ct = schema[it.dt].ctors[c];
    const Clause* cl = need_clause(table, schema, pass, it.dt, c);
    size_t ns = ct.scalar_count(), nk = ct.fields.size() - ns;
    sc.assign(ns, 0);
    for (size_t j = 0; j < ns; ++j)
      if (cl->used[j]) sc[j] = std::get<int64_t>(it.v->args[j]);
    if (it.post) {
      res[it.dest] = cl->combine(sc, Ints(res.data() + it.rbase, nk));
      res.resize(it.rbase);
      continue;
    }
    bool any = false;
    for (size_t j = ns; j < ct.fields.size(); ++j) any = any || cl->used[j];
    size_t rbase = res.size();
    if (pass.style == FoldStyle::Accumulate) {
      acc = cl->step(acc, sc);
    } else if (!any) {
      zeros.assign(nk, 0);
      res[it.dest] = cl->combine(sc, zeros);
    } else {
      res.resize(rbase + nk, 0);
      work.push_back({it.v, it.dt, it.dest, true, rbase});
    }
    for (size_t j = ct.fields.size(); j-- > ns;) {
      if (!cl->used[j]) continue;
      const Value* k = std::get<std::unique_ptr<Value>>(it.v->args[j]).get();
      work.push_back({k, ct.fields[j].dt, rbase + (j - ns), false, 0});
    }
  }
  return pass.style == FoldStyle::Accumulate ? acc : res[0];
}

Value reference_map(const AdtSchema& schema, const PassDef& pass, const Value& v) {
  if (pass.kind != PassKind::Map) fail(ErrorCode::InvalidArgument, "not a map");
  int root = schema.find(pass.datatype);
  if (root < 0) fail(ErrorCode::UnknownDatatype, pass.datatype);
  check_value(schema, root, v);
  auto table = clause_table(schema, pass);
  Value out = v.clone();
  std::vector<std::pair<Value*, int>> work{{&out, root}};
  std::vector<int64_t> sc;
  while (!work.empty()) {
    auto [n, dt] = work.back();
    work.pop_back();
    int c = schema[dt].find_ctor(n->ctor);
    const auto& ct = schema[dt].ctors[c];
    const Clause* cl = table[dt][c];
    size_t ns = ct.scalar_count();
    if (cl && cl->rewrite) {
      sc.resize(ns);
      for (size_t j = 0; j < ns; ++j) sc[j] = std::get<int64_t>(n->args[j]);
      cl->rewrite(sc);
      for (size_t j = 0; j < ns; ++j) n->args[j] = sc[j];
    }
    for (size_t j = ns; j < ct.fields.size(); ++j)
      work.push_back({std::get<std::unique_ptr<Value>>(n->args[j]).get(), ct.fields[j].dt});
  }
  return out;
}

}  // namespace packedadt
