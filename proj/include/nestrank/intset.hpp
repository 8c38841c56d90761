#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nestrank/common.hpp"

namespace nestrank {

// A tuple of integer coordinates, compared lexicographically.
using Point = std::vector<std::int64_t>;

// Named tuple space, e.g. S[i,j,k]. Two spaces match only if both the tuple
// name and the dimension names agree.
struct Space {
  std::string tuple;
  std::vector<std::string> dims;

  std::size_t arity() const { return dims.size(); }
  friend bool operator==(const Space& a, const Space& b) {
    return a.tuple == b.tuple && a.dims == b.dims;
  }
  friend bool operator!=(const Space& a, const Space& b) { return !(a == b); }

  std::string str() const {
    std::string s = tuple + "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (i) s += ",";
      s += dims[i];
    }
    return s + "]";
  }
};

// Affine form over the dimensions of one space: coef . x + cst.
struct LinearExpr {
  std::vector<std::int64_t> coef;
  std::int64_t cst = 0;

  std::int64_t eval(const Point& x) const {
    std::int64_t v = cst;
    for (std::size_t i = 0; i < coef.size(); ++i) v += coef[i] * x[i];
    return v;
  }
};

// EQ: expr == 0.  GE: expr >= 0.  MOD: expr == 0 (mod modulus), used to
// encode non-unit loop steps.
enum class ConstraintKind { EQ, GE, MOD };

struct Constraint {
  ConstraintKind kind = ConstraintKind::GE;
  LinearExpr expr;
  std::int64_t modulus = 0;  // MOD only, >= 2

  bool holds(const Point& x) const {
    std::int64_t v = expr.eval(x);
    switch (kind) {
      case ConstraintKind::EQ: return v == 0;
      case ConstraintKind::GE: return v >= 0;
      case ConstraintKind::MOD: return ((v % modulus) + modulus) % modulus == 0;
    }
    return false;
  }
};

// Conjunction of constraints over one dimension ordering.
struct BasicSet {
  std::vector<Constraint> constraints;
};

namespace detail {

// Highest dimension index with a nonzero coefficient, or -1 for a constant
// constraint.
inline int constraint_level(const Constraint& c, int ndims) {
  for (int d = ndims - 1; d >= 0; --d)
    if (d < static_cast<int>(c.expr.coef.size()) && c.expr.coef[d] != 0) return d;
  return -1;
}

// Depth-first walker over the integer points of a conjunction. Dimensions
// are assigned in order; the bounds for dimension d come from the
// constraints whose deepest variable is d. Throws UnboundedSpaceError if a
// reachable search dimension has no finite lower or upper bound; this is
// what enforces set finiteness at construction time.
class BasicSetWalker {
 public:
  BasicSetWalker(const BasicSet& bs, int ndims)
      : bs_(bs), ndims_(ndims), by_level_(static_cast<std::size_t>(std::max(ndims, 1))) {
    for (std::size_t ci = 0; ci < bs.constraints.size(); ++ci) {
      int lvl = constraint_level(bs.constraints[ci], ndims);
      if (lvl < 0) {
        if (!bs.constraints[ci].holds(Point(static_cast<std::size_t>(ndims), 0)))
          infeasible_ = true;
      } else {
        by_level_[static_cast<std::size_t>(lvl)].push_back(static_cast<int>(ci));
      }
    }
  }

  // Visits every point; `prefix` pins the leading dimensions (used to apply
  // relations to fixed input tuples). The visitor returns false to stop the
  // whole walk; returns false iff stopped early.
  template <typename Visit>
  bool walk_all(const Point& prefix, Visit&& visit) {
    if (infeasible_) return true;
    Point x(static_cast<std::size_t>(ndims_), 0);
    auto rec = [&](auto&& self, int d) -> bool {
      if (d == ndims_) return visit(static_cast<const Point&>(x));
      return iterate(d, x, prefix, [&] { return self(self, d + 1); });
    };
    return rec(rec, 0);
  }

  // Visits every assignment of the first `split` dimensions for which the
  // remaining dimensions admit at least one solution. Used to enumerate
  // dependence distance vectors without enumerating all pairs. The visitor
  // returns false to stop the walk.
  template <typename Visit>
  void walk_feasible_prefixes(int split, Visit&& visit) {
    if (infeasible_) return;
    Point x(static_cast<std::size_t>(ndims_), 0);
    auto witness = [&](auto&& self, int d) -> bool {  // true once a completion exists
      if (d == ndims_) return true;
      bool found = false;
      iterate(d, x, Point{}, [&] {
        if (self(self, d + 1)) { found = true; return false; }
        return true;
      });
      return found;
    };
    auto rec = [&](auto&& self, int d) -> bool {
      if (d == split) {
        if (witness(witness, d)) return visit(Point(x.begin(), x.begin() + split));
        return true;
      }
      return iterate(d, x, Point{}, [&] { return self(self, d + 1); });
    };
    rec(rec, 0);
  }

 private:
  struct Mod { std::int64_t a, s, m; };

  // Computes the value range of dimension d under the partial assignment and
  // runs `body` for each admissible value; body returning false stops the
  // sweep. Returns false iff stopped early.
  template <typename Body>
  bool iterate(int d, Point& x, const Point& prefix, Body&& body) {
    bool has_lo = false, has_hi = false;
    std::int64_t lo = 0, hi = 0;
    std::vector<Mod> mods;
    for (int ci : by_level_[static_cast<std::size_t>(d)]) {
      const Constraint& c = bs_.constraints[static_cast<std::size_t>(ci)];
      std::int64_t s = c.expr.cst;
      for (int j = 0; j < d; ++j)
        if (j < static_cast<int>(c.expr.coef.size()))
          s += c.expr.coef[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
      std::int64_t a = c.expr.coef[static_cast<std::size_t>(d)];
      switch (c.kind) {
        case ConstraintKind::GE:
          if (a > 0) {
            std::int64_t b = ceil_div(-s, a);
            if (!has_lo || b > lo) { lo = b; has_lo = true; }
          } else {
            std::int64_t b = floor_div(-s, a);
            if (!has_hi || b < hi) { hi = b; has_hi = true; }
          }
          break;
        case ConstraintKind::EQ: {
          if ((-s) % a != 0) return true;  // no integer solution on this branch
          std::int64_t v = (-s) / a;
          if (!has_lo || v > lo) { lo = v; has_lo = true; }
          if (!has_hi || v < hi) { hi = v; has_hi = true; }
          break;
        }
        case ConstraintKind::MOD:
          mods.push_back({a, s, c.modulus});
          break;
      }
    }

    auto mods_ok = [&](std::int64_t v) {
      for (const Mod& m : mods) {
        std::int64_t r = ((m.a * v + m.s) % m.m + m.m) % m.m;
        if (r != 0) return false;
      }
      return true;
    };

    if (d < static_cast<int>(prefix.size())) {
      std::int64_t v = prefix[static_cast<std::size_t>(d)];
      if (has_lo && v < lo) return true;
      if (has_hi && v > hi) return true;
      if (!mods_ok(v)) return true;
      x[static_cast<std::size_t>(d)] = v;
      return body();
    }

    if (!has_lo || !has_hi)
      throw UnboundedSpaceError("dimension " + std::to_string(d) +
                                " is not bounded on both sides; sets must be finite");
    if (lo > hi) return true;

    std::int64_t start = lo, step = 1;
    if (mods.size() == 1 && (mods[0].a == 1 || mods[0].a == -1)) {
      // Single unit-coefficient congruence: walk the residue class directly.
      const Mod& m = mods[0];
      std::int64_t want = ((m.a == 1 ? -m.s : m.s) % m.m + m.m) % m.m;
      std::int64_t delta = ((want - lo) % m.m + m.m) % m.m;
      start = lo + delta;
      step = m.m;
      mods.clear();
    }
    for (std::int64_t v = start; v <= hi; v += step) {
      if (!mods.empty() && !mods_ok(v)) continue;
      x[static_cast<std::size_t>(d)] = v;
      if (!body()) return false;
    }
    return true;
  }

  const BasicSet& bs_;
  int ndims_;
  std::vector<std::vector<int>> by_level_;
  bool infeasible_ = false;
};

template <typename Visit>
bool enumerate_basic(const BasicSet& bs, int ndims, const Point& prefix, Visit&& visit) {
  BasicSetWalker w(bs, ndims);
  return w.walk_all(prefix, std::forward<Visit>(visit));
}

inline void sort_unique(std::vector<Point>& pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
}

inline std::string render_expr(const LinearExpr& e, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < e.coef.size(); ++i) {
    std::int64_t c = e.coef[i];
    if (c == 0) continue;
    if (out.empty()) {
      if (c == -1) out += "-";
      else if (c != 1) out += std::to_string(c) + "*";
    } else {
      out += c > 0 ? " + " : " - ";
      std::int64_t a = c > 0 ? c : -c;
      if (a != 1) out += std::to_string(a) + "*";
    }
    out += i < names.size() ? names[i] : "x" + std::to_string(i);
  }
  if (out.empty()) return std::to_string(e.cst);
  if (e.cst > 0) out += " + " + std::to_string(e.cst);
  if (e.cst < 0) out += " - " + std::to_string(-e.cst);
  return out;
}

inline std::string render_constraint(const Constraint& c, const std::vector<std::string>& names) {
  std::string e = render_expr(c.expr, names);
  switch (c.kind) {
    case ConstraintKind::EQ: return e + " = 0";
    case ConstraintKind::GE: return e + " >= 0";
    case ConstraintKind::MOD: return e + " mod " + std::to_string(c.modulus) + " = 0";
  }
  return e;
}

}  // namespace detail

inline std::string point_str(const Point& p) {
  std::string s = "[";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(p[i]);
  }
  return s + "]";
}

// Finite set of integer tuples. Points are materialized at construction
// (sorted, deduplicated); the defining constraints are kept for diagnostics
// when the set was built from them.
class IntSet {
 public:
  IntSet() = default;

  IntSet(Space space, std::vector<BasicSet> disjuncts)
      : space_(std::move(space)), disjuncts_(std::move(disjuncts)) {
    for (const BasicSet& bs : disjuncts_) {
      detail::enumerate_basic(bs, static_cast<int>(space_.arity()), Point{},
                              [&](const Point& p) {
                                pts_.push_back(p);
                                return true;
                              });
    }
    // A single conjunction is emitted in lexicographic order with no
    // duplicates; only unions of disjuncts need normalizing.
    if (disjuncts_.size() > 1) detail::sort_unique(pts_);
  }

  IntSet(Space space, std::vector<Point> points) : space_(std::move(space)) {
    for (const Point& p : points)
      if (p.size() != space_.arity())
        throw SpaceMismatchError("point arity " + std::to_string(p.size()) +
                                 " does not match space " + space_.str());
    pts_ = std::move(points);
    detail::sort_unique(pts_);
  }

  static IntSet empty(Space space) { return IntSet(std::move(space), std::vector<Point>{}); }

  const Space& space() const { return space_; }
  const std::vector<Point>& points() const { return pts_; }
  const std::vector<BasicSet>& disjuncts() const { return disjuncts_; }
  bool is_empty() const { return pts_.empty(); }
  std::int64_t size() const { return static_cast<std::int64_t>(pts_.size()); }

  bool contains(const Point& p) const {
    return std::binary_search(pts_.begin(), pts_.end(), p);
  }

  std::string debug_string(std::size_t max_points = 16) const {
    std::ostringstream os;
    os << "{ " << space_.str();
    if (!disjuncts_.empty()) {
      os << " : ";
      for (std::size_t i = 0; i < disjuncts_.size(); ++i) {
        if (i) os << " or ";
        for (std::size_t j = 0; j < disjuncts_[i].constraints.size(); ++j) {
          if (j) os << " and ";
          os << detail::render_constraint(disjuncts_[i].constraints[j], space_.dims);
        }
      }
    } else {
      os << " : ";
      for (std::size_t i = 0; i < pts_.size() && i < max_points; ++i) {
        if (i) os << ", ";
        os << point_str(pts_[i]);
      }
      if (pts_.size() > max_points) os << ", ... (" << pts_.size() << " points)";
    }
    os << " }";
    return os.str();
  }

 private:
  friend IntSet set_union(const IntSet&, const IntSet&);
  friend IntSet set_intersect(const IntSet&, const IntSet&);
  friend IntSet set_subtract(const IntSet&, const IntSet&);

  static IntSet from_sorted(Space space, std::vector<Point> pts) {
    IntSet s;
    s.space_ = std::move(space);
    s.pts_ = std::move(pts);
    return s;
  }

  Space space_;
  std::vector<Point> pts_;
  std::vector<BasicSet> disjuncts_;
};

inline void require_same_space(const IntSet& a, const IntSet& b) {
  if (a.space() != b.space())
    throw SpaceMismatchError("space mismatch: " + a.space().str() + " vs " + b.space().str());
}

inline IntSet set_union(const IntSet& a, const IntSet& b) {
  require_same_space(a, b);
  std::vector<Point> out;
  out.reserve(a.points().size() + b.points().size());
  std::set_union(a.points().begin(), a.points().end(), b.points().begin(), b.points().end(),
                 std::back_inserter(out));
  return IntSet::from_sorted(a.space(), std::move(out));
}

inline IntSet set_intersect(const IntSet& a, const IntSet& b) {
  require_same_space(a, b);
  std::vector<Point> out;
  std::set_intersection(a.points().begin(), a.points().end(), b.points().begin(),
                        b.points().end(), std::back_inserter(out));
  return IntSet::from_sorted(a.space(), std::move(out));
}

inline IntSet set_subtract(const IntSet& a, const IntSet& b) {
  require_same_space(a, b);
  std::vector<Point> out;
  std::set_difference(a.points().begin(), a.points().end(), b.points().begin(), b.points().end(),
                      std::back_inserter(out));
  return IntSet::from_sorted(a.space(), std::move(out));
}

inline const Point& lexmin(const IntSet& s) {
  if (s.is_empty()) throw EmptySetError("lexmin of empty set " + s.space().str());
  return s.points().front();
}

inline const Point& lexmax(const IntSet& s) {
  if (s.is_empty()) throw EmptySetError("lexmax of empty set " + s.space().str());
  return s.points().back();
}

inline std::int64_t cardinality(const IntSet& s) { return s.size(); }

enum class LexMode { STRICTLY_BEFORE, BEFORE_OR_EQUAL };

// Subset of s lexicographically before (or not after) the fixed point p.
inline IntSet lex_order_set(const IntSet& s, const Point& p, LexMode mode) {
  if (p.size() != s.space().arity())
    throw SpaceMismatchError("point arity does not match space " + s.space().str());
  auto end = mode == LexMode::STRICTLY_BEFORE
                 ? std::lower_bound(s.points().begin(), s.points().end(), p)
                 : std::upper_bound(s.points().begin(), s.points().end(), p);
  return IntSet(s.space(), std::vector<Point>(s.points().begin(), end));
}

// Relation from in_space tuples to out_space tuples, kept in constraint form
// over the concatenated (in ++ out) dimensions. Relations are not
// materialized; images are enumerated per input tuple, which keeps large
// all-pairs reuse relations tractable.
class IntRel {
 public:
  IntRel() = default;
  IntRel(Space in, Space out, std::vector<BasicSet> disjuncts)
      : in_(std::move(in)), out_(std::move(out)), disjuncts_(std::move(disjuncts)) {}

  const Space& in_space() const { return in_; }
  const Space& out_space() const { return out_; }
  const std::vector<BasicSet>& disjuncts() const { return disjuncts_; }
  int total_dims() const { return static_cast<int>(in_.arity() + out_.arity()); }

  // Image points of a single input tuple, sorted and deduplicated.
  std::vector<Point> apply_point(const Point& p) const {
    check_point(p);
    std::vector<Point> out;
    for (const BasicSet& bs : disjuncts_) {
      detail::enumerate_basic(bs, total_dims(), p, [&](const Point& full) {
        out.emplace_back(full.begin() + static_cast<std::ptrdiff_t>(in_.arity()), full.end());
        return true;
      });
    }
    detail::sort_unique(out);
    return out;
  }

  bool has_image(const Point& p) const {
    check_point(p);
    for (const BasicSet& bs : disjuncts_) {
      bool found = false;
      detail::enumerate_basic(bs, total_dims(), p, [&](const Point&) {
        found = true;
        return false;
      });
      if (found) return true;
    }
    return false;
  }

  // Exact image of a set: union of the images of its points.
  IntSet apply(const IntSet& s) const {
    if (s.space() != in_)
      throw SpaceMismatchError("apply: set space " + s.space().str() +
                               " does not match relation input " + in_.str());
    std::vector<Point> out;
    for (const Point& p : s.points()) {
      for (const BasicSet& bs : disjuncts_) {
        detail::enumerate_basic(bs, total_dims(), p, [&](const Point& full) {
          out.emplace_back(full.begin() + static_cast<std::ptrdiff_t>(in_.arity()), full.end());
          return true;
        });
      }
    }
    detail::sort_unique(out);
    return IntSet(out_, std::move(out));
  }

  // True when the relation relates at least one pair. Requires the input
  // dimensions to be bounded by the relation's own constraints (always the
  // case for relations restricted to an iteration space).
  bool is_nonempty() const {
    for (const BasicSet& bs : disjuncts_) {
      bool found = false;
      detail::enumerate_basic(bs, total_dims(), Point{}, [&](const Point&) {
        found = true;
        return false;
      });
      if (found) return true;
    }
    return false;
  }

  std::string debug_string() const {
    std::vector<std::string> names = in_.dims;
    for (const std::string& d : out_.dims) names.push_back(d + "'");
    std::ostringstream os;
    os << "{ " << in_.str() << " -> " << out_.str() << " : ";
    for (std::size_t i = 0; i < disjuncts_.size(); ++i) {
      if (i) os << " or ";
      os << "(";
    for (std::size_t j = 0; j < disjuncts_[i].constraints.size(); ++j) {
        if (j) os << " and ";
        os << detail::render_constraint(disjuncts_[i].constraints[j], names);
      }
      os << ")";
    }
    os << " }";
    return os.str();
  }

 private:
  void check_point(const Point& p) const {
    if (p.size() != in_.arity())
      throw SpaceMismatchError("point arity does not match relation input " + in_.str());
  }

  Space in_;
  Space out_;
  std::vector<BasicSet> disjuncts_;
};

inline IntSet apply(const IntRel& r, const IntSet& s) { return r.apply(s); }

// Extensional equality: same point set.
inline bool set_equal(const IntSet& a, const IntSet& b) {
  return a.space() == b.space() && a.points() == b.points();
}

}  // namespace nestrank
