#include <doctest.h>

#include <set>

#include "nestrank/emit.hpp"
#include "nestrank/presets.hpp"
#include "nestrank/variants.hpp"
#include "support/random_nests.hpp"

using namespace nestrank;
using namespace testsupport;

namespace {

VariantConfig perms_only(std::vector<std::vector<std::string>> perms) {
  VariantConfig cfg;
  cfg.permutations = std::move(perms);
  cfg.max_variants = 1000;
  return cfg;
}

// A nest with a genuine ordering dependence: A[i][j] = A[i-1][j+1], distance
// vector (1, -1). Interchanging i and j is illegal.
LoopNest skewed_stencil() {
  return parse_nest(
      "param N = 6\n"
      "loop i lower 1 upper N\n"
      "loop j lower 0 upper 5\n"
      "stmt S\n"
      "read A[i - 1][j + 1]\n"
      "write A[i][j]\n");
}

}  // namespace

TEST_CASE("all six matmul loop orders generate") {
  LoopNest n = make_matmul_nest(4, 4, 4);
  VariantConfig cfg = perms_only({{"i", "j", "k"}, {"i", "k", "j"}, {"j", "i", "k"},
                                  {"j", "k", "i"}, {"k", "i", "j"}, {"k", "j", "i"}});
  auto variants = generate_variants(n, cfg);
  CHECK(variants.size() == 6);
  std::set<std::string> ids;
  for (auto& [recipe, nest] : variants) {
    CHECK(cardinality(iteration_space(nest)) == 64);
    ids.insert(recipe.id());
  }
  CHECK(ids.size() == 6);

  // default config enumerates the same six orders, identity first
  VariantConfig def = default_variant_config(n);
  CHECK(def.permutations.size() == 6);
  CHECK(def.permutations[0] == std::vector<std::string>{"i", "j", "k"});
}

TEST_CASE("permutation reorders the loops") {
  LoopNest n = make_matmul_nest(4, 5, 6);
  LoopNest v = apply_recipe(n, VariantRecipe::parse("perm=k,j,i"));
  CHECK(v.loops[0].var == "k");
  CHECK(v.loops[1].var == "j");
  CHECK(v.loops[2].var == "i");
  CHECK(v.loops[0].uppers[0].cst == 6);
  CHECK(cardinality(iteration_space(v)) == 4 * 5 * 6);
}

TEST_CASE("tiling covers the trip count exactly, remainder included") {
  LoopNest n = parse_nest("param N = 10\nloop i lower 0 upper N\nstmt S\nwrite A[i]\n");
  LoopNest v = apply_recipe(n, VariantRecipe::parse("perm=i;tile=i:4"));
  REQUIRE(v.loops.size() == 2);
  CHECK(v.loops[0].var == "i_t");
  CHECK(v.loops[0].uppers[0].cst == 3);  // ceil(10/4)
  CHECK(v.loops[1].var == "i");
  CHECK(v.loops[1].uppers.size() == 2);  // tile-local end and original end

  IntSet space = iteration_space(v);
  CHECK(cardinality(space) == 10);
  // tiles of sizes 4, 4, 2
  std::map<std::int64_t, int> tile_sizes;
  for (const Point& p : space.points()) tile_sizes[p[0]]++;
  CHECK(tile_sizes == std::map<std::int64_t, int>{{0, 4}, {1, 4}, {2, 2}});
  // executed i values cover [0, 10) exactly once
  Footprint fp = footprint_of(v, space.points());
  CHECK(fp.elements.at("A").size() == 10);

  // divisible tile needs no remainder bound
  LoopNest v2 = apply_recipe(n, VariantRecipe::parse("perm=i;tile=i:5"));
  CHECK(v2.loops[1].uppers.size() == 1);
}

TEST_CASE("variants preserve cardinality and footprint") {
  LoopNest n = make_matmul_nest(4, 4, 4);
  IntSet orig_space = iteration_space(n);
  Footprint orig_fp = footprint_of(n, orig_space.points());

  VariantConfig cfg = default_variant_config(n);
  cfg.tile_candidates["i"] = {0, 2, 3};
  cfg.tile_candidates["j"] = {0, 2};
  cfg.max_variants = 50;
  auto variants = generate_variants(n, cfg);
  CHECK(variants.size() == 36);
  for (auto& [recipe, nest] : variants) {
    IntSet space = iteration_space(nest);
    CHECK(cardinality(space) == 64);
    Footprint fp = footprint_of(nest, space.points());
    CHECK(fp.elements == orig_fp.elements);
  }
}

TEST_CASE("microkernel band loops stay untouched in every variant") {
  ConvPreset p;
  LoopNest n = p.build();
  std::vector<Loop> band(n.loops.begin() + 6, n.loops.end());

  VariantConfig cfg = p.default_variant_config(n);
  cfg.max_variants = 24;
  for (auto& [recipe, nest] : generate_variants(n, cfg)) {
    REQUIRE(nest.loops.size() >= 3);
    std::vector<Loop> got(nest.loops.end() - 3, nest.loops.end());
    CHECK(got == band);
    CHECK(nest.microkernel == n.microkernel);
  }
}

TEST_CASE("generation is deterministic") {
  ConvPreset p;
  LoopNest n = p.build();
  VariantConfig cfg = p.default_variant_config(n);
  cfg.max_variants = 16;
  auto a = generate_variants(n, cfg);
  auto b = generate_variants(n, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first.id() == b[i].first.id());
    CHECK(a[i].second == b[i].second);
  }
  CHECK(a.size() == 16);  // max_variants caps the space
}

TEST_CASE("recipe ids round-trip") {
  VariantRecipe r;
  r.perm = {"ofm_tile", "oj", "ifm_tile", "kj", "ki"};
  r.tiles = {{"oj", 2}};
  CHECK(r.id() == "perm=ofm_tile,oj,ifm_tile,kj,ki;tile=oj:2");
  VariantRecipe back = VariantRecipe::parse(r.id());
  CHECK(back.perm == r.perm);
  CHECK(back.tiles == r.tiles);
}

TEST_CASE("recipe validation errors") {
  LoopNest n = make_matmul_nest(4, 4, 4);
  CHECK_THROWS_AS(apply_recipe(n, VariantRecipe::parse("perm=i,q,k")), ConfigRejectedError);
  CHECK_THROWS_AS(apply_recipe(n, VariantRecipe::parse("perm=i,i,k")), InvalidPermutationError);
  CHECK_THROWS_AS(apply_recipe(n, VariantRecipe::parse("perm=i;tile=j:0")),
                  TileSizeNonPositiveError);
  CHECK_THROWS_AS(apply_recipe(n, VariantRecipe::parse("perm=i;tile=q:2")), ConfigRejectedError);

  ConvPreset p;
  LoopNest conv = p.build();
  CHECK_THROWS_AS(apply_recipe(conv, VariantRecipe::parse("perm=oi,ofm")),
                  InvalidPermutationError);  // band loops cannot move
  CHECK_THROWS_AS(apply_recipe(conv, VariantRecipe::parse("perm=oj;tile=ofm:2")),
                  ConfigRejectedError);  // band loops cannot be tiled

  LoopNest stepped = parse_nest("loop i lower 0 upper 8 step 2\nstmt S\nwrite A[i]\n");
  CHECK_THROWS_AS(apply_recipe(stepped, VariantRecipe::parse("perm=i;tile=i:2")),
                  ConfigRejectedError);  // tiling needs unit step
}

TEST_CASE("illegal interchange is rejected") {
  LoopNest n = skewed_stencil();
  CHECK_THROWS_AS(apply_recipe(n, VariantRecipe::parse("perm=j,i")), ConfigRejectedError);
  // identity stays fine
  LoopNest v = apply_recipe(n, VariantRecipe::parse("perm=i,j"));
  CHECK(v.loops[0].var == "i");
  // tiling i hoists the intra loop past j, which also violates the (1,-1)
  // dependence
  CHECK_THROWS_AS(apply_recipe(n, VariantRecipe::parse("perm=i,j;tile=i:2")),
                  ConfigRejectedError);
  // the default config filters the illegal order out
  VariantConfig def = default_variant_config(n);
  CHECK(def.permutations == std::vector<std::vector<std::string>>{{"i", "j"}});

  // an explicit config containing the illegal order fails as a whole
  CHECK_THROWS_AS(generate_variants(n, perms_only({{"i", "j"}, {"j", "i"}})),
                  ConfigRejectedError);
}

TEST_CASE("loops never move above their bound providers") {
  LoopNest tri = parse_nest("param N = 6\nloop i lower 0 upper N\nloop j lower i upper N\n"
                            "stmt S\nread A[i][j]\nwrite B[j]\n");
  CHECK_THROWS_AS(apply_recipe(tri, VariantRecipe::parse("perm=j,i")), ConfigRejectedError);
  // tiling i hoists the intra i loop below j, whose lower bound needs i
  CHECK_THROWS_AS(apply_recipe(tri, VariantRecipe::parse("perm=i,j;tile=i:2")),
                  ConfigRejectedError);
  VariantConfig def = default_variant_config(tri);
  CHECK(def.permutations == std::vector<std::vector<std::string>>{{"i", "j"}});
}

TEST_CASE("reduction loops remain freely reorderable") {
  // C accumulation in matmul carries RAW/WAR/WAW on C, but identical-
  // subscript updates do not pin the loop order
  LoopNest n = make_matmul_nest(4, 4, 4);
  LoopNest v = apply_recipe(n, VariantRecipe::parse("perm=k,j,i"));
  CHECK(v.loops[0].var == "k");
}

TEST_CASE("variant config files parse") {
  LoopNest n = make_matmul_nest(4, 4, 4);
  VariantConfig cfg = parse_variant_config(
      "# config\n"
      "perm k,j,i\n"
      "perms-all i,j\n"
      "tile k 0 2\n"
      "max_variants 7\n",
      n);
  CHECK(cfg.permutations.size() == 3);  // explicit + two legal orders of (i, j)
  CHECK(cfg.tile_candidates.at("k") == std::vector<std::int64_t>{0, 2});
  CHECK(cfg.max_variants == 7);
  CHECK_THROWS_AS(parse_variant_config("bogus directive\n", n), ConfigRejectedError);
}
