#include <doctest.h>

#include <random>

#include "nestrank/cachefit.hpp"

using namespace nestrank;

namespace {

std::vector<WsEntry> entries(std::initializer_list<std::int64_t> sizes) {
  std::vector<WsEntry> out;
  int i = 0;
  for (std::int64_t s : sizes) out.push_back(WsEntry{"w" + std::to_string(i++), s});
  return out;
}

}  // namespace

TEST_CASE("machine file parsing") {
  MachineDescriptor m = MachineDescriptor::parse(
      "# comment\n"
      "level L1 size 32768 latency 4 bandwidth 128\n"
      "level L2 size 1048576 latency 14 bandwidth 64\n"
      "mem latency 200 bandwidth 16\n"
      "element_bytes 4\n");
  CHECK(m.levels.size() == 2);
  CHECK(m.levels[0].size_bytes == 32768);
  CHECK(m.levels[1].latency_cycles == Rational(14));
  CHECK(m.mem_bandwidth_bytes_per_cycle == Rational(16));
  CHECK(m.element_bytes == 4);

  CHECK_THROWS_AS(MachineDescriptor::parse("mem latency 1 bandwidth 1\nelement_bytes 4\n"),
                  ParseError);  // no levels
  CHECK_THROWS_AS(MachineDescriptor::parse("level L1 size 64 latency 1 bandwidth 1\n"
                                           "level L2 size 64 latency 2 bandwidth 1\n"
                                           "mem latency 9 bandwidth 1\nelement_bytes 4\n"),
                  ParseError);  // sizes must strictly increase
  CHECK_THROWS_AS(MachineDescriptor::load("/nonexistent/machine/file"), IoError);
}

TEST_CASE("single working set lands in L1 when it fits") {
  MachineDescriptor m = MachineDescriptor::cascade_lake_default();
  CacheFitResult r = assign_to_caches(entries({1000}), m);
  CHECK(r.per_level_ws == std::vector<std::int64_t>{1000, 0, 0});
  CHECK(r.mem_ws == 0);
  CHECK(r.placement.size() == 1);
  CHECK(r.placement[0].second == 0);
}

TEST_CASE("oversized working set spills to memory") {
  MachineDescriptor m = MachineDescriptor::cascade_lake_default();
  CacheFitResult r = assign_to_caches(entries({20000000}), m);
  CHECK(r.per_level_ws == std::vector<std::int64_t>{0, 0, 0});
  CHECK(r.mem_ws == 20000000);
  CHECK(r.placement[0].second == -1);
}

TEST_CASE("greedy placement walks the hierarchy as the hand-derived example") {
  MachineDescriptor m = MachineDescriptor::cascade_lake_default();
  CacheFitResult r = assign_to_caches(entries({4000, 5000, 300000, 11000000}), m);
  CHECK(r.per_level_ws == std::vector<std::int64_t>{4000, 5000, 300000});
  CHECK(r.mem_ws == 11000000);
}

TEST_CASE("conservation, fit and permutation invariance") {
  MachineDescriptor m = MachineDescriptor::cascade_lake_default();
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<WsEntry> in;
    std::int64_t total = 0;
    std::size_t count = 1 + rng() % 12;
    for (std::size_t i = 0; i < count; ++i) {
      std::int64_t v = static_cast<std::int64_t>(rng() % 4000000);
      in.push_back(WsEntry{"e" + std::to_string(i), v});
      total += v;
    }
    CacheFitResult r = assign_to_caches(in, m);
    CHECK(r.total() == total);
    for (std::size_t i = 0; i < m.levels.size(); ++i)
      CHECK(r.per_level_ws[i] * m.element_bytes <= m.levels[i].size_bytes);

    std::vector<WsEntry> shuffled = in;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng() % i]);
    CacheFitResult r2 = assign_to_caches(shuffled, m);
    CHECK(r2.per_level_ws == r.per_level_ws);
    CHECK(r2.mem_ws == r.mem_ws);
    CHECK(r2.placement == r.placement);  // sorting is internal and id-stable
  }
}

TEST_CASE("ties are broken by id") {
  MachineDescriptor m;
  m.levels = {{"L1", 16, Rational(1), Rational(1)}};
  m.mem_latency_cycles = Rational(10);
  m.mem_bandwidth_bytes_per_cycle = Rational(1);
  m.element_bytes = 4;
  // two equal sizes; only one fits
  CacheFitResult r = assign_to_caches({WsEntry{"b", 3}, WsEntry{"a", 3}}, m);
  CHECK(r.placement[0].first == "a");
  CHECK(r.placement[0].second == 0);
  CHECK(r.placement[1].first == "b");
  CHECK(r.placement[1].second == -1);
}

TEST_CASE("empty machine is rejected") {
  MachineDescriptor m;
  m.mem_latency_cycles = Rational(1);
  m.mem_bandwidth_bytes_per_cycle = Rational(1);
  CHECK_THROWS_AS(assign_to_caches({WsEntry{"x", 1}}, m), EmptyMachineError);
}
