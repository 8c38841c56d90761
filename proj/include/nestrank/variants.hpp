#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nestrank/deps.hpp"

namespace nestrank {

// One transformation: a new order for the listed (non-band) loops plus
// strip-and-hoist tile sizes per loop. The string form round-trips:
//   perm=ofm_tile,oj,ifm_tile,kj,ki;tile=oj:2
struct VariantRecipe {
  std::vector<std::string> perm;                            // listed loops in new order
  std::vector<std::pair<std::string, std::int64_t>> tiles;  // loop var -> tile size

  std::string id() const {
    std::string s = "perm=";
    for (std::size_t i = 0; i < perm.size(); ++i) {
      if (i) s += ",";
      s += perm[i];
    }
    if (!tiles.empty()) {
      s += ";tile=";
      for (std::size_t i = 0; i < tiles.size(); ++i) {
        if (i) s += ",";
        s += tiles[i].first + ":" + std::to_string(tiles[i].second);
      }
    }
    return s;
  }

  static VariantRecipe parse(const std::string& text) {
    VariantRecipe r;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find(';', pos);
      if (end == std::string::npos) end = text.size();
      std::string part = text.substr(pos, end - pos);
      if (part.rfind("perm=", 0) == 0) {
        r.perm = detail::split_names(part.substr(5));
      } else if (part.rfind("tile=", 0) == 0) {
        for (const std::string& item : detail::split_names(part.substr(5))) {
          std::size_t colon = item.find(':');
          if (colon == std::string::npos)
            throw ConfigRejectedError("bad tile entry '" + item + "' in recipe");
          std::int64_t size;
          try {
            size = std::stoll(item.substr(colon + 1));
          } catch (const std::logic_error&) {
            throw ConfigRejectedError("bad tile size in recipe entry '" + item + "'");
          }
          r.tiles.emplace_back(item.substr(0, colon), size);
        }
      } else if (!part.empty()) {
        throw ConfigRejectedError("unknown recipe clause '" + part + "'");
      }
      pos = end + 1;
    }
    return r;
  }
};

struct VariantConfig {
  std::vector<std::vector<std::string>> permutations;
  std::map<std::string, std::vector<std::int64_t>> tile_candidates;  // 0 means untiled
  std::size_t max_variants = 64;
};

// ---------------------------------------------------------------------------
// Legality

// Reordering is checked against the dependences that actually constrain
// order. Read-read pairs never do. Accumulation dependences (read and write
// of one array through identical subscripts, the reduction pattern the
// microkernel flow is built around) are treated as reorderable, matching how
// these kernels are tuned in practice. Every remaining dependence must have
// component-wise non-negative distance vectors over the moved loops.
struct LegalityContext {
  std::vector<std::string> loop_vars;
  // Distance vectors of each order-constraining dependence, original dims.
  std::vector<std::pair<std::string, std::vector<Point>>> distances;
};

namespace detail {

inline bool is_accumulator_dep(const LoopNest& n, const Dependence& d) {
  auto refs = n.all_refs();
  const ArrayRef& src = *refs[static_cast<std::size_t>(d.src_ref)];
  const ArrayRef& tgt = *refs[static_cast<std::size_t>(d.tgt_ref)];
  if (!(src.index_exprs == tgt.index_exprs)) return false;
  bool has_read = false, has_write = false;
  for (const ArrayRef* r : refs) {
    if (r->array != d.array || !(r->index_exprs == src.index_exprs)) continue;
    has_read |= r->mode == AccessMode::READ;
    has_write |= r->mode == AccessMode::WRITE;
  }
  return has_read && has_write;
}

}  // namespace detail

inline LegalityContext make_legality_context(const LoopNest& n,
                                             const std::vector<Dependence>& deps) {
  LegalityContext ctx;
  ctx.loop_vars = n.loop_vars();
  for (const Dependence& d : deps) {
    if (d.kind == DepKind::RAR) continue;
    if (detail::is_accumulator_dep(n, d)) continue;
    ctx.distances.emplace_back(d.label(), distance_vectors(d, n));
  }
  return ctx;
}

// True when every order-constraining distance vector is non-negative in
// every moved component.
inline bool moves_are_legal(const LegalityContext& ctx, const std::set<std::size_t>& moved,
                            std::string* offender = nullptr) {
  for (const auto& [label, dists] : ctx.distances) {
    for (const Point& delta : dists) {
      for (std::size_t p : moved) {
        if (delta[p] < 0) {
          if (offender) *offender = label;
          return false;
        }
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Recipe application

namespace detail {

// True when every loop's bounds reference only loops that precede it in the
// given order; reordering must never move a loop above its bound provider.
inline bool bounds_well_ordered(const std::vector<Loop>& loops) {
  std::set<std::string> declared;
  for (const Loop& l : loops) {
    auto ok = [&](const NamedExpr& e) {
      for (const auto& [v, c] : e.terms)
        if (c != 0 && !declared.count(v)) return false;
      return true;
    };
    if (!ok(l.lower)) return false;
    for (const NamedExpr& u : l.uppers)
      if (!ok(u)) return false;
    declared.insert(l.var);
  }
  return true;
}

struct RecipePlan {
  std::vector<std::size_t> new_order;   // original indices of non-band loops, new order
  std::set<std::size_t> moved;          // original positions affected
  std::map<std::string, std::int64_t> tile_of;
};

inline RecipePlan plan_recipe(const LoopNest& n, const VariantRecipe& recipe) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < n.loops.size(); ++i) pos[n.loops[i].var] = i;
  std::size_t band = n.band_begin();

  std::set<std::string> seen;
  std::vector<std::size_t> listed_positions;
  for (const std::string& v : recipe.perm) {
    auto it = pos.find(v);
    if (it == pos.end())
      throw ConfigRejectedError("recipe names unknown loop '" + v + "'");
    if (it->second >= band)
      throw InvalidPermutationError("recipe permutes microkernel band loop '" + v + "'");
    if (!seen.insert(v).second)
      throw InvalidPermutationError("recipe lists loop '" + v + "' twice");
    listed_positions.push_back(it->second);
  }

  RecipePlan plan;
  std::vector<std::size_t> slots = listed_positions;
  std::sort(slots.begin(), slots.end());
  for (std::size_t i = 0; i < band; ++i) plan.new_order.push_back(i);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    plan.new_order[slots[k]] = pos[recipe.perm[k]];
    if (plan.new_order[slots[k]] != slots[k]) {
      plan.moved.insert(slots[k]);
      plan.moved.insert(plan.new_order[slots[k]]);
    }
  }

  for (const auto& [var, size] : recipe.tiles) {
    if (size <= 0)
      throw TileSizeNonPositiveError("tile size for loop '" + var + "' must be positive");
    auto it = pos.find(var);
    if (it == pos.end())
      throw ConfigRejectedError("recipe tiles unknown loop '" + var + "'");
    if (it->second >= band)
      throw ConfigRejectedError("recipe tiles microkernel band loop '" + var + "'");
    const Loop& l = n.loops[it->second];
    if (l.step != 1)
      throw ConfigRejectedError("tiling requires unit step on loop '" + var + "'");
    if (!constant_trip_count(l))
      throw ConfigRejectedError("tiling requires constant bounds on loop '" + var + "'");
    if (plan.tile_of.count(var))
      throw ConfigRejectedError("recipe tiles loop '" + var + "' twice");
    plan.tile_of[var] = size;
    // Hoisting the intra-tile loop reorders it past everything below the
    // tiled loop, so treat all non-band loops from that point on as moved.
    for (std::size_t p = it->second; p < band; ++p) plan.moved.insert(p);
  }
  return plan;
}

inline std::string fresh_name(const LoopNest& n, std::string base) {
  std::set<std::string> taken;
  for (const Loop& l : n.loops) taken.insert(l.var);
  while (taken.count(base)) base += "_";
  return base;
}

}  // namespace detail

// Builds the transformed nest: permuted non-band loops, tile-index loops in
// place of tiled loops, intra-tile loops hoisted just outside the band (in
// permuted order), band untouched. Throws ConfigRejected when the moved
// loops violate a dependence.
inline LoopNest apply_recipe(const LoopNest& n, const VariantRecipe& recipe,
                             const LegalityContext& ctx) {
  detail::RecipePlan plan = detail::plan_recipe(n, recipe);
  std::string offender;
  if (!moves_are_legal(ctx, plan.moved, &offender))
    throw ConfigRejectedError("recipe '" + recipe.id() + "' violates dependence " + offender);

  LoopNest out;
  out.stmt = n.stmt;
  out.params = n.params;
  out.annotations = n.annotations;
  out.microkernel = n.microkernel;

  std::vector<Loop> intra;
  for (std::size_t slot = 0; slot < plan.new_order.size(); ++slot) {
    Loop l = n.loops[plan.new_order[slot]];
    auto t = plan.tile_of.find(l.var);
    if (t == plan.tile_of.end()) {
      out.loops.push_back(std::move(l));
      continue;
    }
    std::int64_t tile = t->second;
    std::int64_t lo = l.lower.cst;
    std::int64_t hi = l.uppers[0].cst;
    std::int64_t trips = hi - lo;
    std::string tvar = detail::fresh_name(n, l.var + "_t");

    Loop tile_loop;
    tile_loop.var = tvar;
    tile_loop.lower = NamedExpr::constant(0);
    tile_loop.uppers = {NamedExpr::constant(ceil_div(trips, tile))};
    out.loops.push_back(std::move(tile_loop));

    Loop intra_loop;
    intra_loop.var = l.var;
    intra_loop.lower = NamedExpr::constant(lo);
    intra_loop.lower.terms[tvar] = tile;
    NamedExpr tile_end = intra_loop.lower;
    tile_end.cst += tile;
    intra_loop.uppers = {tile_end};
    if (trips % tile != 0) intra_loop.uppers.push_back(l.uppers[0]);  // remainder tile
    intra.push_back(std::move(intra_loop));
  }
  for (Loop& l : intra) out.loops.push_back(std::move(l));
  for (std::size_t i = n.band_begin(); i < n.loops.size(); ++i) out.loops.push_back(n.loops[i]);
  if (!detail::bounds_well_ordered(out.loops))
    throw ConfigRejectedError("recipe '" + recipe.id() +
                              "' moves a loop above one its bounds depend on");
  return out;
}

inline LoopNest apply_recipe(const LoopNest& n, const VariantRecipe& recipe) {
  LegalityContext ctx = make_legality_context(n, compute_dependences(n));
  return apply_recipe(n, recipe, ctx);
}

// ---------------------------------------------------------------------------
// Enumeration

// Cartesian product of the configured permutations and per-loop tile
// choices, in a fixed order, capped at max_variants. Illegal permutations in
// an explicit config are an error, not a skip.
inline std::vector<std::pair<VariantRecipe, LoopNest>> generate_variants(
    const LoopNest& n, const VariantConfig& cfg) {
  LegalityContext ctx = make_legality_context(n, compute_dependences(n));

  std::vector<std::vector<std::string>> perms = cfg.permutations;
  if (perms.empty()) perms.push_back({});  // identity

  // Tiled loops in nest order, each with its candidate list.
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> tile_axes;
  for (const Loop& l : n.loops) {
    auto it = cfg.tile_candidates.find(l.var);
    if (it != cfg.tile_candidates.end() && !it->second.empty())
      tile_axes.emplace_back(l.var, it->second);
  }

  std::vector<std::pair<VariantRecipe, LoopNest>> out;
  std::vector<std::size_t> choice(tile_axes.size(), 0);
  for (const std::vector<std::string>& perm : perms) {
    bool done = false;
    std::fill(choice.begin(), choice.end(), 0);
    while (!done) {
      VariantRecipe r;
      r.perm = perm;
      for (std::size_t a = 0; a < tile_axes.size(); ++a) {
        std::int64_t size = tile_axes[a].second[choice[a]];
        if (size < 0)
          throw TileSizeNonPositiveError("negative tile candidate for loop '" +
                                         tile_axes[a].first + "'");
        if (size > 0) r.tiles.emplace_back(tile_axes[a].first, size);
      }
      out.emplace_back(r, apply_recipe(n, r, ctx));
      if (out.size() >= cfg.max_variants) return out;

      // advance the mixed-radix tile counter
      done = true;
      for (std::size_t a = 0; a < tile_axes.size(); ++a) {
        if (++choice[a] < tile_axes[a].second.size()) { done = false; break; }
        choice[a] = 0;
      }
      if (tile_axes.empty()) done = true;
    }
  }
  return out;
}

// All legal permutations of the given loops (identity first), for building
// default configs; illegal orders are filtered out rather than rejected.
inline std::vector<std::vector<std::string>> legal_permutations_of(
    const LoopNest& n, const std::vector<std::string>& loops_to_permute,
    const LegalityContext& ctx, std::size_t limit = 5040) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < n.loops.size(); ++i) pos[n.loops[i].var] = i;
  std::vector<std::size_t> base;
  for (const std::string& v : loops_to_permute) {
    auto it = pos.find(v);
    if (it == pos.end()) throw ConfigRejectedError("unknown loop '" + v + "' in permutation set");
    base.push_back(it->second);
  }
  std::sort(base.begin(), base.end());
  std::vector<std::size_t> slots = base;

  std::vector<std::vector<std::string>> result;
  std::vector<std::size_t> order = base;
  do {
    std::set<std::size_t> moved;
    std::vector<Loop> reordered = n.loops;
    for (std::size_t k = 0; k < order.size(); ++k) {
      reordered[slots[k]] = n.loops[order[k]];
      if (order[k] != slots[k]) { moved.insert(order[k]); moved.insert(slots[k]); }
    }
    if (detail::bounds_well_ordered(reordered) && moves_are_legal(ctx, moved)) {
      std::vector<std::string> perm;
      for (std::size_t p : order) perm.push_back(n.loops[p].var);
      result.push_back(std::move(perm));
      if (result.size() >= limit) break;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return result;
}

// Config file:
//   perm ofm_tile,ifm_tile,oj,kj,ki     # explicit permutation (strict)
//   perms-all ofm_tile,ifm_tile,oj,kj,ki  # every legal order of these loops
//   tile oj 0 2 4                       # candidates; 0 means untiled
//   max_variants 64
inline VariantConfig parse_variant_config(const std::string& text, const LoopNest& n) {
  VariantConfig cfg;
  LegalityContext ctx = make_legality_context(n, compute_dependences(n));

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string kw;
    ls >> kw;
    std::string rest = detail::trim(t.substr(kw.size()));
    if (kw == "perm") {
      cfg.permutations.push_back(detail::split_names(rest));
    } else if (kw == "perms-all") {
      for (auto& p : legal_permutations_of(n, detail::split_names(rest), ctx))
        cfg.permutations.push_back(std::move(p));
    } else if (kw == "tile") {
      auto toks = detail::split_ws(rest);
      if (toks.size() < 2)
        throw ConfigRejectedError("variant config line " + std::to_string(lineno) +
                                  ": expected 'tile LOOP SIZE...'");
      std::vector<std::int64_t> sizes;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        try {
          sizes.push_back(std::stoll(toks[i]));
        } catch (const std::logic_error&) {
          throw ConfigRejectedError("variant config line " + std::to_string(lineno) +
                                    ": bad tile size '" + toks[i] + "'");
        }
      }
      cfg.tile_candidates[toks[0]] = std::move(sizes);
    } else if (kw == "max_variants") {
      auto toks = detail::split_ws(rest);
      if (toks.size() != 1)
        throw ConfigRejectedError("variant config line " + std::to_string(lineno) +
                                  ": expected 'max_variants N'");
      cfg.max_variants = static_cast<std::size_t>(std::stoull(toks[0]));
    } else {
      throw ConfigRejectedError("variant config line " + std::to_string(lineno) +
                                ": unknown directive '" + kw + "'");
    }
  }
  return cfg;
}

// Default space: all legal orders of the non-band loops (outermost loop held
// fixed when a microkernel band is present, mirroring the usual mini-batch
// loop), no tiling.
inline VariantConfig default_variant_config(const LoopNest& n) {
  VariantConfig cfg;
  LegalityContext ctx = make_legality_context(n, compute_dependences(n));
  std::size_t band = n.band_begin();
  std::size_t first = (n.microkernel && band > 1) ? 1 : 0;
  std::vector<std::string> movable;
  for (std::size_t i = first; i < band; ++i) movable.push_back(n.loops[i].var);
  if (movable.size() <= 7)
    cfg.permutations = legal_permutations_of(n, movable, ctx);
  else
    cfg.permutations.push_back({});
  return cfg;
}

}  // namespace nestrank
