#include <doctest.h>

#include <random>

#include "nestrank/oracle.hpp"
#include "nestrank/presets.hpp"

using namespace nestrank;

namespace {

Trace make_trace(std::initializer_list<std::int64_t> elems) {
  Trace t;
  for (std::int64_t e : elems) t.push_back(TraceEntry{"A", {e}, AccessMode::READ});
  return t;
}

MachineDescriptor tiny_machine(std::int64_t l1_elems, std::int64_t l2_elems) {
  MachineDescriptor m;
  m.element_bytes = 4;
  m.levels = {{"L1", l1_elems * 4, Rational(1), Rational(1)},
              {"L2", l2_elems * 4, Rational(2), Rational(1)}};
  m.mem_latency_cycles = Rational(10);
  m.mem_bandwidth_bytes_per_cycle = Rational(1);
  return m;
}

}  // namespace

TEST_CASE("enumeration oracle reproduces the matmul working sets") {
  LoopNest n = make_matmul_nest(4, 4, 4);
  auto deps = compute_dependences(n);
  const Dependence* d2 = nullptr;
  const Dependence* d1 = nullptr;
  for (const Dependence& d : deps) {
    if (d.array == "A") d2 = &d;
    if (d.array == "C" && d.kind == DepKind::RAR) d1 = &d;
  }
  REQUIRE(d2 != nullptr);
  REQUIRE(d1 != nullptr);
  CHECK(enumerate_working_set(n, *d2, WorkingSetBound::MIN) == 11);  // 2K + 3
  CHECK(enumerate_working_set(n, *d2, WorkingSetBound::MAX) == 21);  // N*K + N + 1
  CHECK(enumerate_working_set(n, *d1, WorkingSetBound::MIN) == 5);
  CHECK(enumerate_working_set(n, *d1, WorkingSetBound::MAX) == 9);  // 2K + 1
}

TEST_CASE("enumeration oracle rejects oversized spaces") {
  LoopNest n = make_matmul_nest(100, 100, 101);  // > 10^6 points
  LoopNest small = make_matmul_nest(2, 2, 2);
  auto deps = compute_dependences(small);
  REQUIRE(!deps.empty());
  CHECK_THROWS_AS(enumerate_working_set(n, deps[0], WorkingSetBound::MIN, 1000000),
                  SpaceTooLargeError);
}

TEST_CASE("single element reused N times misses once") {
  Trace t;
  for (int i = 0; i < 50; ++i) t.push_back(TraceEntry{"A", {0}, AccessMode::READ});
  LruResult r = lru_simulate(t, tiny_machine(4, 16));
  CHECK(r.levels[0].misses == 1);
  CHECK(r.levels[0].hits == 49);
  CHECK(r.levels[1].misses == 1);
  CHECK(r.memory_accesses == 1);
}

TEST_CASE("cyclic reuse that fits L1 misses only compulsorily") {
  Trace t;
  for (int rep = 0; rep < 10; ++rep)
    for (std::int64_t e = 0; e < 4; ++e) t.push_back(TraceEntry{"A", {e}, AccessMode::READ});
  LruResult r = lru_simulate(t, tiny_machine(4, 16));
  CHECK(r.levels[0].misses == 4);
  CHECK(r.levels[0].hits == 36);
}

TEST_CASE("cyclic reuse just over capacity thrashes L1") {
  Trace t;
  for (int rep = 0; rep < 5; ++rep)
    for (std::int64_t e = 0; e < 5; ++e) t.push_back(TraceEntry{"A", {e}, AccessMode::READ});
  LruResult r = lru_simulate(t, tiny_machine(4, 16));
  CHECK(r.levels[0].misses == 25);  // LRU evicts exactly what comes next
  CHECK(r.levels[1].misses == 5);
  CHECK(r.levels[1].hits == 20);
}

TEST_CASE("streaming misses at every level") {
  Trace t;
  for (std::int64_t e = 0; e < 100000; ++e) t.push_back(TraceEntry{"A", {e}, AccessMode::READ});
  LruResult r = lru_simulate(t, tiny_machine(1024, 8192));
  CHECK(r.levels[0].misses == 100000);
  CHECK(r.levels[1].misses == 100000);
  CHECK(r.memory_accesses == 100000);
}

TEST_CASE("outer misses never exceed inner misses") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 20; ++t) {
    Trace tr;
    std::size_t len = 200 + rng() % 800;
    std::int64_t universe = 1 + static_cast<std::int64_t>(rng() % 40);
    for (std::size_t i = 0; i < len; ++i)
      tr.push_back(TraceEntry{"A", {static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(universe))},
                              AccessMode::READ});
    LruResult r = lru_simulate(tr, tiny_machine(8, 24));
    CHECK(r.levels[1].misses <= r.levels[0].misses);
    CHECK(r.memory_accesses <= r.levels[1].misses);
    CHECK(r.levels[0].hits + r.levels[0].misses == static_cast<std::int64_t>(tr.size()));
  }
}

TEST_CASE("build_trace follows program order with reads before writes") {
  LoopNest n = parse_nest("param N = 2\nloop i lower 0 upper N\nstmt S\nread A[i]\nwrite B[i]\n");
  Trace t = build_trace(n);
  REQUIRE(t.size() == 4);
  CHECK(t[0].array == "A");
  CHECK(t[0].mode == AccessMode::READ);
  CHECK(t[1].array == "B");
  CHECK(t[1].mode == AccessMode::WRITE);
  CHECK(t[2].index == Point{1});
  CHECK(make_trace({0}).size() == 1);
}
