#pragma once

#include <string>
#include <vector>

#include "nestrank/intset.hpp"

namespace testsupport {

using namespace nestrank;

inline Space sp(std::string tuple, std::vector<std::string> dims) {
  return Space{std::move(tuple), std::move(dims)};
}

inline Constraint ge(std::vector<std::int64_t> coef, std::int64_t cst) {
  Constraint c;
  c.kind = ConstraintKind::GE;
  c.expr.coef = std::move(coef);
  c.expr.cst = cst;
  return c;
}

inline Constraint eq(std::vector<std::int64_t> coef, std::int64_t cst) {
  Constraint c;
  c.kind = ConstraintKind::EQ;
  c.expr.coef = std::move(coef);
  c.expr.cst = cst;
  return c;
}

inline Constraint mod(std::vector<std::int64_t> coef, std::int64_t cst, std::int64_t m) {
  Constraint c;
  c.kind = ConstraintKind::MOD;
  c.expr.coef = std::move(coef);
  c.expr.cst = cst;
  c.modulus = m;
  return c;
}

// Axis-aligned box [lo_i, hi_i] inclusive.
inline IntSet box_set(Space space, const std::vector<std::int64_t>& lo,
                      const std::vector<std::int64_t>& hi) {
  BasicSet bs;
  std::size_t n = space.arity();
  for (std::size_t d = 0; d < n; ++d) {
    std::vector<std::int64_t> up(n, 0), down(n, 0);
    up[d] = 1;
    down[d] = -1;
    bs.constraints.push_back(ge(up, -lo[d]));
    bs.constraints.push_back(ge(down, hi[d]));
  }
  return IntSet(std::move(space), std::vector<BasicSet>{bs});
}

// Brute-force point filter over an explicit bounding box, using only
// Constraint::holds; independent of the production enumerator.
inline std::vector<Point> brute_points(const std::vector<BasicSet>& disjuncts, std::size_t ndims,
                                       const std::vector<std::int64_t>& lo,
                                       const std::vector<std::int64_t>& hi) {
  std::vector<Point> out;
  Point x(ndims, 0);
  auto rec = [&](auto&& self, std::size_t d) -> void {
    if (d == ndims) {
      for (const BasicSet& bs : disjuncts) {
        bool ok = true;
        for (const Constraint& c : bs.constraints)
          if (!c.holds(x)) { ok = false; break; }
        if (ok) { out.push_back(x); break; }
      }
      return;
    }
    for (std::int64_t v = lo[d]; v <= hi[d]; ++v) {
      x[d] = v;
      self(self, d + 1);
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace testsupport
