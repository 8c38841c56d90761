#pragma once

#include <cstdint>
#include <list>
#include <unordered_map>
#include <vector>

#include "nestrank/cachefit.hpp"
#include "nestrank/deps.hpp"

namespace nestrank {

// Brute-force validators. Everything here executes the nest's loops
// directly from the textual bounds and never touches the constraint engine,
// so it can serve as an independent check of the analytical path.

namespace oracle_detail {

// Runs the visitor for every iteration in program order. Bounds are
// evaluated from the named expressions; multiple upper bounds mean their
// minimum.
template <typename Visit>
void for_each_iteration(const LoopNest& n, Visit&& visit) {
  std::map<std::string, std::int64_t> env;
  Point x(n.loops.size(), 0);
  auto rec = [&](auto&& self, std::size_t d) -> void {
    if (d == n.loops.size()) {
      visit(static_cast<const Point&>(x));
      return;
    }
    const Loop& l = n.loops[d];
    std::int64_t lo = l.lower.eval(env);
    std::int64_t hi = INT64_MAX;
    for (const NamedExpr& u : l.uppers) hi = std::min(hi, u.eval(env));
    for (std::int64_t v = lo; v < hi; v += l.step) {
      env[l.var] = v;
      x[d] = v;
      self(self, d + 1);
    }
    env.erase(l.var);
  };
  rec(rec, 0);
}

inline std::int64_t execution_count(const LoopNest& n, std::int64_t limit) {
  // Cheap product when all trip counts are constant.
  bool all_const = true;
  std::int64_t product = 1;
  for (const Loop& l : n.loops) {
    auto t = constant_trip_count(l);
    if (!t) { all_const = false; break; }
    product *= *t;
    if (product > limit) return product;
  }
  if (all_const) return product;

  std::map<std::string, std::int64_t> env;
  std::int64_t count = 0;
  auto rec = [&](auto&& self, std::size_t d) -> bool {
    if (d == n.loops.size()) return ++count <= limit;
    const Loop& l = n.loops[d];
    std::int64_t lo = l.lower.eval(env);
    std::int64_t hi = INT64_MAX;
    for (const NamedExpr& u : l.uppers) hi = std::min(hi, u.eval(env));
    for (std::int64_t v = lo; v < hi; v += l.step) {
      env[l.var] = v;
      if (!self(self, d + 1)) { env.erase(l.var); return false; }
    }
    env.erase(l.var);
    return true;
  };
  if (!rec(rec, 0)) return limit + 1;
  return count;
}

struct ElemKey {
  std::int32_t array = 0;
  Point idx;
  bool operator==(const ElemKey& o) const { return array == o.array && idx == o.idx; }
};

struct ElemKeyHash {
  std::size_t operator()(const ElemKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.array) * 0x9e3779b97f4a7c15ULL;
    for (std::int64_t v : k.idx)
      h = (h ^ static_cast<std::size_t>(v)) * 0x100000001b3ULL;
    return h;
  }
};

struct ResolvedRef {
  std::int32_t array = 0;
  AccessMode mode = AccessMode::READ;
  std::vector<LinearExpr> idx;
};

inline std::vector<ResolvedRef> resolve_refs(const LoopNest& n,
                                             std::vector<std::string>& array_names) {
  auto dim_index = detail::dim_index_of(n.loop_vars());
  int nd = static_cast<int>(n.loops.size());
  std::vector<ResolvedRef> out;
  for (const ArrayRef* r : n.all_refs()) {
    ResolvedRef rr;
    auto it = std::find(array_names.begin(), array_names.end(), r->array);
    if (it == array_names.end()) {
      array_names.push_back(r->array);
      rr.array = static_cast<std::int32_t>(array_names.size() - 1);
    } else {
      rr.array = static_cast<std::int32_t>(it - array_names.begin());
    }
    rr.mode = r->mode;
    for (const NamedExpr& e : r->index_exprs) rr.idx.push_back(e.to_linear(dim_index, nd));
    out.push_back(std::move(rr));
  }
  return out;
}

inline ElemKey element_at(const ResolvedRef& r, const Point& iter) {
  ElemKey k;
  k.array = r.array;
  k.idx.resize(r.idx.size());
  for (std::size_t j = 0; j < r.idx.size(); ++j) k.idx[j] = r.idx[j].eval(iter);
  return k;
}

}  // namespace oracle_detail

enum class WorkingSetBound { MIN, MAX };

// Enumeration-based working-set oracle for one dependence: executes the
// iterations in program order from the lexmin source through the first (MIN)
// or last (MAX) target inclusive and counts distinct (array, index) pairs.
inline std::int64_t enumerate_working_set(const LoopNest& n, const Dependence& d,
                                          WorkingSetBound which,
                                          std::int64_t max_points = 1000000) {
  using namespace oracle_detail;
  if (execution_count(n, max_points) > max_points)
    throw SpaceTooLargeError("iteration space exceeds " + std::to_string(max_points) +
                             " points");

  std::vector<std::string> arrays;
  std::vector<ResolvedRef> refs = resolve_refs(n, arrays);
  const ResolvedRef& src = refs[static_cast<std::size_t>(d.src_ref)];
  const ResolvedRef& tgt = refs[static_cast<std::size_t>(d.tgt_ref)];

  // Pass 1: per element, the ordered iteration indices touching it through
  // the source and target references.
  std::unordered_map<ElemKey, std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>>,
                     ElemKeyHash>
      touches;
  std::vector<Point> iters;
  for_each_iteration(n, [&](const Point& p) {
    std::int64_t pos = static_cast<std::int64_t>(iters.size());
    iters.push_back(p);
    touches[element_at(src, p)].first.push_back(pos);
    touches[element_at(tgt, p)].second.push_back(pos);
  });

  // The dependence's source is the first iteration with a strictly later
  // target on the same element; its targets come from the same bucket.
  std::int64_t source_pos = -1;
  for (const auto& [elem, lists] : touches) {
    const auto& [srcs, tgts] = lists;
    if (srcs.empty() || tgts.empty()) continue;
    for (std::int64_t s : srcs) {
      if (tgts.back() > s) {
        if (source_pos < 0 || s < source_pos) source_pos = s;
        break;  // lists are ordered; the first viable source is minimal
      }
    }
  }
  if (source_pos < 0) throw EmptySetError("dependence has no related pair");

  const auto& bucket = touches[element_at(src, iters[static_cast<std::size_t>(source_pos)])];
  std::int64_t first_target = -1, last_target = -1;
  for (std::int64_t t : bucket.second) {
    if (t > source_pos) {
      if (first_target < 0) first_target = t;
      last_target = t;
    }
  }
  std::int64_t end_pos = which == WorkingSetBound::MIN ? first_target : last_target;

  // Pass 2: distinct elements touched in [source .. target].
  std::unordered_map<ElemKey, char, ElemKeyHash> seen;
  for (std::int64_t pos = source_pos; pos <= end_pos; ++pos) {
    const Point& p = iters[static_cast<std::size_t>(pos)];
    for (const ResolvedRef& r : refs) seen.emplace(element_at(r, p), 1);
  }
  return static_cast<std::int64_t>(seen.size());
}

// ---------------------------------------------------------------------------
// Trace-driven multi-level LRU simulation (diagnostic only; the analytical
// model does not count misses)

struct TraceEntry {
  std::string array;
  Point index;
  AccessMode mode = AccessMode::READ;
};
using Trace = std::vector<TraceEntry>;

// Executes the nest in program order; reads are recorded before writes
// within one iteration.
inline Trace build_trace(const LoopNest& n, std::int64_t max_points = 1000000) {
  using namespace oracle_detail;
  if (execution_count(n, max_points) > max_points)
    throw SpaceTooLargeError("iteration space exceeds " + std::to_string(max_points) +
                             " points");
  std::vector<std::string> arrays;
  std::vector<ResolvedRef> refs = resolve_refs(n, arrays);
  Trace tr;
  for_each_iteration(n, [&](const Point& p) {
    for (const ResolvedRef& r : refs) {
      ElemKey k = element_at(r, p);
      tr.push_back(TraceEntry{arrays[static_cast<std::size_t>(k.array)], k.idx, r.mode});
    }
  });
  return tr;
}

struct LruLevelStats {
  std::string name;
  std::int64_t capacity_elements = 0;
  std::int64_t hits = 0;
  std::int64_t misses = 0;
};

struct LruResult {
  std::vector<LruLevelStats> levels;
  std::int64_t memory_accesses = 0;
};

// Fully-associative inclusive LRU at every level, element-granularity
// blocks. An access walks outward until it hits; the element is then filled
// into every level above the hit. Intentionally simpler than real hardware.
inline LruResult lru_simulate(const Trace& trace, const MachineDescriptor& m) {
  using namespace oracle_detail;

  struct LruCache {
    std::int64_t capacity = 0;
    std::list<ElemKey> order;  // front = MRU
    std::unordered_map<ElemKey, std::list<ElemKey>::iterator, ElemKeyHash> where;

    bool touch(const ElemKey& k) {
      auto it = where.find(k);
      if (it != where.end()) {
        order.splice(order.begin(), order, it->second);
        return true;
      }
      insert(k);
      return false;
    }
    void insert(const ElemKey& k) {
      order.push_front(k);
      where[k] = order.begin();
      if (static_cast<std::int64_t>(order.size()) > capacity) {
        where.erase(order.back());
        order.pop_back();
      }
    }
  };

  LruResult res;
  std::vector<LruCache> caches(m.levels.size());
  for (std::size_t i = 0; i < m.levels.size(); ++i) {
    caches[i].capacity = std::max<std::int64_t>(1, m.levels[i].size_bytes / m.element_bytes);
    res.levels.push_back(LruLevelStats{m.levels[i].name, caches[i].capacity, 0, 0});
  }

  std::unordered_map<std::string, std::int32_t> array_ids;
  for (const TraceEntry& e : trace) {
    auto [it, inserted] = array_ids.emplace(e.array, static_cast<std::int32_t>(array_ids.size()));
    ElemKey k{it->second, e.index};
    std::size_t level = 0;
    bool hit = false;
    for (; level < caches.size(); ++level) {
      if (caches[level].touch(k)) {
        ++res.levels[level].hits;
        hit = true;
        break;
      }
      ++res.levels[level].misses;
    }
    if (!hit) ++res.memory_accesses;
  }
  return res;
}

}  // namespace nestrank
