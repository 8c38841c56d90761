#include <doctest.h>

#include <fstream>
#include <sstream>

#include "nestrank/loopnest.hpp"
#include "nestrank/presets.hpp"

using namespace nestrank;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const std::string kMatmulDoc = R"(
param M = 4
param N = 4
param K = 4
loop i lower 0 upper M step 1
loop j lower 0 upper N step 1
loop k lower 0 upper K step 1
stmt S
read C[i][j]
read A[i][k]
read B[k][j]
write C[i][j]
body C[i][j] += A[i][k] * B[k][j];
)";

}  // namespace

TEST_CASE("parse_nest builds the matmul structure") {
  LoopNest n = parse_nest(kMatmulDoc);
  CHECK(n.loops.size() == 3);
  CHECK(n.stmt.reads.size() == 3);
  CHECK(n.stmt.writes.size() == 1);
  CHECK(n.params.at("K") == 4);
  CHECK(n.loops[1].var == "j");
  CHECK(n.loops[1].uppers[0].is_constant());
  CHECK(n.loops[1].uppers[0].cst == 4);
  CHECK(n == make_matmul_nest(4, 4, 4));
}

TEST_CASE("parse_nest round-trips the conv document against the preset") {
  LoopNest parsed = parse_nest(slurp(std::string(NESTRANK_SOURCE_DIR) + "/samples/conv2d.nest"));
  CHECK(parsed.loops.size() == 9);
  CHECK(parsed.band_begin() == 6);
  for (std::size_t i = 6; i < 9; ++i) CHECK(parsed.loops[i].tag == LoopTag::MICROKERNEL_BAND);
  REQUIRE(parsed.microkernel.has_value());
  CHECK(parsed.microkernel->callee == "gemm_microkernel");

  ConvPreset p;
  LoopNest built = p.build();
  CHECK(parsed == built);
}

TEST_CASE("parse_nest error cases") {
  CHECK_THROWS_AS(parse_nest("loop i lower 0 upper Q step 1\nstmt S\nread A[i]\n"),
                  UnboundParameterError);
  CHECK_THROWS_AS(parse_nest("param N = 4\nloop i lower 0 upper N step 1\n"
                             "stmt S\nread A[i * i]\n"),
                  NonAffineExpressionError);
  CHECK_THROWS_AS(parse_nest("param N = 4\nloop i lower 0 upper N step 1\n"
                             "stmt S\nread A[i]\nstmt T\nread A[i]\n"),
                  NotSupportedError);
  CHECK_THROWS_AS(parse_nest("param N = 4\nloop i lower 0 upper N\nstmt S\nread A[i]\n"
                             "read A[i][i]\n"),
                  ParseError);  // inconsistent arity
  CHECK_THROWS_AS(parse_nest("stmt S\nread A[0]\n"), ParseError);  // no loops
  CHECK_THROWS_AS(parse_nest("param N = 4\nloop i lower 0 upper N step 0\nstmt S\nread A[i]\n"),
                  ParseError);  // bad step
  CHECK_THROWS_AS(parse_nest("param N = 4\nloop i lower 0 upper N / 3\nstmt S\nread A[i]\n"),
                  NonAffineExpressionError);  // inexact constant division
  // band loops must be the contiguous innermost loops
  CHECK_THROWS_AS(parse_nest("param N = 4\nloop i lower 0 upper N\nloop j lower 0 upper N\n"
                             "stmt S\nread A[i]\nmicrokernel f\nband i\n"),
                  ParseError);
}

TEST_CASE("iteration_space counts dynamic executions") {
  CHECK(cardinality(iteration_space(make_matmul_nest(4, 4, 4))) == 64);

  LoopNest stepped = parse_nest("loop i lower 0 upper 8 step 2\nstmt S\nread A[i]\n");
  IntSet s = iteration_space(stepped);
  CHECK(cardinality(s) == 4);
  CHECK(s.points() == std::vector<Point>{{0}, {2}, {4}, {6}});

  ConvPreset p;
  CHECK(cardinality(iteration_space(p.build())) == 294912);
}

TEST_CASE("access_relations map iterations to array elements") {
  LoopNest n = make_matmul_nest(4, 4, 4);
  AccessRelations ar = access_relations(n);
  CHECK(ar.all.size() == 4);
  CHECK(ar.reads().size() == 3);
  CHECK(ar.writes().size() == 1);

  // A[i][k] reference: S[i,j,k] -> A[i,k]
  const RefRelation* a_ref = nullptr;
  for (const RefRelation& r : ar.all)
    if (r.ref.array == "A") a_ref = &r;
  REQUIRE(a_ref != nullptr);
  auto img = a_ref->rel.apply_point({1, 2, 3});
  REQUIRE(img.size() == 1);
  CHECK(img[0] == Point{1, 3});

  // footprint agrees with applying each relation to the whole space
  IntSet I = iteration_space(n);
  Footprint fp = footprint_of(n, I.points());
  for (const RefRelation& r : ar.all) {
    IntSet via_rel = r.rel.apply(I);
    CHECK(via_rel.points() == fp.elements.at(r.ref.array));
  }
  CHECK(fp.total() == 16 + 16 + 16);
}

TEST_CASE("statement with no reads has an empty read side") {
  LoopNest n = parse_nest("param N = 4\nloop i lower 0 upper N\nstmt S\nwrite A[i]\n");
  AccessRelations ar = access_relations(n);
  CHECK(ar.reads().empty());
  CHECK(ar.writes().size() == 1);
}

TEST_CASE("restore_microkernel inverts the band inlining") {
  ConvPreset p;
  LoopNest n = p.build();
  RestoredNest r = restore_microkernel(n);
  CHECK(r.outer_loops.size() == 6);
  CHECK(r.outer_loops.back().var == "ki");
  CHECK(r.call.callee == "gemm_microkernel");
  CHECK(r.call.call_args.size() == 3);
  CHECK(r.annotations == n.annotations);

  // round trip: the restored outer loops plus the recorded band equal the
  // original nest's loops
  std::vector<Loop> rebuilt = r.outer_loops;
  for (std::size_t i = n.band_begin(); i < n.loops.size(); ++i) rebuilt.push_back(n.loops[i]);
  CHECK(rebuilt == n.loops);

  CHECK_THROWS_AS(restore_microkernel(make_matmul_nest(4, 4, 4)), MissingMicrokernelSpecError);
}

TEST_CASE("loop_var_boxes covers triangular bounds") {
  LoopNest n = parse_nest("param N = 6\nloop i lower 0 upper N\nloop j lower i upper N\n"
                          "stmt S\nread A[j]\n");
  auto boxes = loop_var_boxes(n);
  CHECK(boxes[0] == std::pair<std::int64_t, std::int64_t>{0, 5});
  CHECK(boxes[1] == std::pair<std::int64_t, std::int64_t>{0, 5});
  CHECK(cardinality(iteration_space(n)) == 21);  // 6+5+...+1
}
