#pragma once

#include <string>
#include <vector>

#include "nestrank/loopnest.hpp"

namespace nestrank {

enum class DepKind { RAR, RAW, WAR, WAW };

inline const char* dep_kind_name(DepKind k) {
  switch (k) {
    case DepKind::RAR: return "RAR";
    case DepKind::RAW: return "RAW";
    case DepKind::WAR: return "WAR";
    case DepKind::WAW: return "WAW";
  }
  return "?";
}

// Source-to-target iteration relation for one ordered reference pair. Every
// related pair (s, t) touches the same array element, with s strictly before
// t in program order.
struct Dependence {
  std::string id;
  DepKind kind = DepKind::RAR;
  std::string array;
  int src_ref = 0;  // indices into LoopNest::all_refs order
  int tgt_ref = 0;
  IntRel rel;

  std::string label() const {
    return id + ":" + dep_kind_name(kind) + ":" + array + "(r" + std::to_string(src_ref) +
           "->r" + std::to_string(tgt_ref) + ")";
  }
};

namespace detail {

inline DepKind dep_kind_of(AccessMode src, AccessMode tgt) {
  if (src == AccessMode::WRITE && tgt == AccessMode::READ) return DepKind::RAW;
  if (src == AccessMode::READ && tgt == AccessMode::WRITE) return DepKind::WAR;
  if (src == AccessMode::WRITE && tgt == AccessMode::WRITE) return DepKind::WAW;
  return DepKind::RAR;
}

// rel = { s -> t : src(s) = tgt(t) and s, t in I and s << t }, with the
// strict lexicographic order expanded into one disjunct per depth.
inline IntRel dependence_relation(const LoopNest& n, const ArrayRef& src, const ArrayRef& tgt) {
  auto dim_index = dim_index_of(n.loop_vars());
  int nl = static_cast<int>(n.loops.size());
  int nd = 2 * nl;
  Space iter = iteration_space_of(n);

  std::vector<Constraint> shared;
  append_nest_constraints(n, dim_index, nd, 0, shared);
  append_nest_constraints(n, dim_index, nd, nl, shared);
  for (std::size_t j = 0; j < src.index_exprs.size(); ++j) {
    LinearExpr a = src.index_exprs[j].to_linear(dim_index, nl);
    LinearExpr b = tgt.index_exprs[j].to_linear(dim_index, nl);
    Constraint eq;
    eq.kind = ConstraintKind::EQ;
    eq.expr.coef.assign(static_cast<std::size_t>(nd), 0);
    for (std::size_t k = 0; k < a.coef.size(); ++k) eq.expr.coef[k] = a.coef[k];
    for (std::size_t k = 0; k < b.coef.size(); ++k)
      eq.expr.coef[k + static_cast<std::size_t>(nl)] -= b.coef[k];
    eq.expr.cst = a.cst - b.cst;
    shared.push_back(eq);
  }

  std::vector<BasicSet> disjuncts;
  for (int q = 0; q < nl; ++q) {
    BasicSet bs;
    bs.constraints = shared;
    for (int j = 0; j < q; ++j) {
      Constraint eq;
      eq.kind = ConstraintKind::EQ;
      eq.expr.coef.assign(static_cast<std::size_t>(nd), 0);
      eq.expr.coef[static_cast<std::size_t>(j)] = -1;
      eq.expr.coef[static_cast<std::size_t>(nl + j)] = 1;
      bs.constraints.push_back(eq);
    }
    Constraint lt;  // t_q - s_q - 1 >= 0
    lt.kind = ConstraintKind::GE;
    lt.expr.coef.assign(static_cast<std::size_t>(nd), 0);
    lt.expr.coef[static_cast<std::size_t>(q)] = -1;
    lt.expr.coef[static_cast<std::size_t>(nl + q)] = 1;
    lt.expr.cst = -1;
    bs.constraints.push_back(lt);
    disjuncts.push_back(std::move(bs));
  }

  Space out = iter;
  return IntRel(iter, out, std::move(disjuncts));
}

// Change of variables from (s, t) to (delta, s) with t_j = s_j + delta_j,
// plus box bounds keeping every delta dimension finite on its own. Walking
// delta prefixes with a feasibility witness answers nonemptiness and
// distance questions without enumerating pairs: uniform equalities and the
// lex-order constraints collapse to pure-delta constraints and prune
// immediately.
inline std::vector<BasicSet> delta_systems(const IntRel& rel,
                                           const std::vector<std::pair<std::int64_t, std::int64_t>>& boxes) {
  int nl = static_cast<int>(rel.in_space().arity());
  int nd = 2 * nl;
  std::vector<BasicSet> out;
  for (const BasicSet& bs : rel.disjuncts()) {
    BasicSet sys;
    for (const Constraint& c : bs.constraints) {
      Constraint nc;
      nc.kind = c.kind;
      nc.modulus = c.modulus;
      nc.expr.cst = c.expr.cst;
      nc.expr.coef.assign(static_cast<std::size_t>(nd), 0);
      for (int j = 0; j < nl; ++j) {
        std::int64_t in_c =
            j < static_cast<int>(c.expr.coef.size()) ? c.expr.coef[static_cast<std::size_t>(j)] : 0;
        std::int64_t out_c = nl + j < static_cast<int>(c.expr.coef.size())
                                 ? c.expr.coef[static_cast<std::size_t>(nl + j)]
                                 : 0;
        nc.expr.coef[static_cast<std::size_t>(j)] = out_c;              // delta_j
        nc.expr.coef[static_cast<std::size_t>(nl + j)] = in_c + out_c;  // s_j
      }
      sys.constraints.push_back(std::move(nc));
    }
    for (int j = 0; j < nl; ++j) {
      std::int64_t span = boxes[static_cast<std::size_t>(j)].second -
                          boxes[static_cast<std::size_t>(j)].first;
      if (span < 0) span = 0;
      Constraint ge, le;
      ge.kind = ConstraintKind::GE;
      ge.expr.coef.assign(static_cast<std::size_t>(nd), 0);
      ge.expr.coef[static_cast<std::size_t>(j)] = 1;
      ge.expr.cst = span;
      le.kind = ConstraintKind::GE;
      le.expr.coef.assign(static_cast<std::size_t>(nd), 0);
      le.expr.coef[static_cast<std::size_t>(j)] = -1;
      le.expr.cst = span;
      sys.constraints.push_back(ge);
      sys.constraints.push_back(le);
    }
    out.push_back(std::move(sys));
  }
  return out;
}

inline bool relation_nonempty(const IntRel& rel,
                              const std::vector<std::pair<std::int64_t, std::int64_t>>& boxes) {
  int nl = static_cast<int>(rel.in_space().arity());
  for (const BasicSet& sys : delta_systems(rel, boxes)) {
    detail::BasicSetWalker w(sys, 2 * nl);
    bool found = false;
    w.walk_feasible_prefixes(nl, [&](const Point&) {
      found = true;
      return false;
    });
    if (found) return true;
  }
  return false;
}

}  // namespace detail

// All nonempty RAR/RAW/WAR/WAW dependences of a nest, one per ordered
// reference pair on the same array (a reference pairs with itself too).
// Identical pair sets arising from different reference pairs stay distinct.
inline std::vector<Dependence> compute_dependences(const LoopNest& n) {
  std::vector<Dependence> out;
  auto refs = n.all_refs();
  auto boxes = loop_var_boxes(n);
  int counter = 0;
  for (std::size_t a = 0; a < refs.size(); ++a) {
    for (std::size_t b = 0; b < refs.size(); ++b) {
      if (refs[a]->array != refs[b]->array) continue;
      IntRel rel = detail::dependence_relation(n, *refs[a], *refs[b]);
      if (!detail::relation_nonempty(rel, boxes)) continue;
      Dependence d;
      d.id = "d" + std::to_string(counter++);
      d.kind = detail::dep_kind_of(refs[a]->mode, refs[b]->mode);
      d.array = refs[a]->array;
      d.src_ref = static_cast<int>(a);
      d.tgt_ref = static_cast<int>(b);
      d.rel = std::move(rel);
      out.push_back(std::move(d));
    }
  }
  return out;
}

// Distinct distance vectors t - s over all related pairs of a dependence,
// walked as feasible delta prefixes so all-pairs relations are never
// materialized.
inline std::vector<Point> distance_vectors(const Dependence& dep, const LoopNest& n) {
  auto boxes = loop_var_boxes(n);
  int nl = static_cast<int>(n.loops.size());
  std::vector<Point> deltas;
  for (const BasicSet& sys : detail::delta_systems(dep.rel, boxes)) {
    detail::BasicSetWalker w(sys, 2 * nl);
    w.walk_feasible_prefixes(nl, [&](const Point& delta) {
      deltas.push_back(delta);
      return true;
    });
  }
  detail::sort_unique(deltas);
  return deltas;
}

}  // namespace nestrank
