#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nestrank/common.hpp"

namespace nestrank {

struct CacheLevel {
  std::string name;
  std::int64_t size_bytes = 0;
  Rational latency_cycles;
  Rational bandwidth_bytes_per_cycle;
};

// Cache hierarchy plus memory behind it. Level sizes must strictly increase
// from L1 outward; a shared outer level is listed with whatever capacity the
// user wants to grant this one instance.
struct MachineDescriptor {
  std::vector<CacheLevel> levels;
  Rational mem_latency_cycles;
  Rational mem_bandwidth_bytes_per_cycle;
  std::int64_t element_bytes = 4;

  void validate() const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i].size_bytes <= 0)
        throw ParseError("machine: level " + levels[i].name + " has non-positive size");
      if (i > 0 && levels[i].size_bytes <= levels[i - 1].size_bytes)
        throw ParseError("machine: level sizes must strictly increase outward");
      if (levels[i].latency_cycles <= Rational(0) || levels[i].bandwidth_bytes_per_cycle <= Rational(0))
        throw ParseError("machine: latencies and bandwidths must be positive");
    }
    if (mem_latency_cycles <= Rational(0) || mem_bandwidth_bytes_per_cycle <= Rational(0))
      throw ParseError("machine: memory latency/bandwidth must be positive");
    if (element_bytes <= 0) throw ParseError("machine: element_bytes must be positive");
  }

  // Text format, one directive per line:
  //   level L1 size 32768 latency 4 bandwidth 128
  //   mem latency 200 bandwidth 16
  //   element_bytes 4
  static MachineDescriptor parse(const std::string& text) {
    MachineDescriptor m;
    bool saw_mem = false;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::istringstream ls(line);
      std::string kw;
      if (!(ls >> kw) || kw[0] == '#') continue;
      auto want = [&](const std::string& name) {
        std::string got;
        if (!(ls >> got) || got != name)
          throw ParseError("machine line " + std::to_string(lineno) + ": expected '" + name + "'");
      };
      auto rat = [&]() {
        std::string tok;
        if (!(ls >> tok))
          throw ParseError("machine line " + std::to_string(lineno) + ": missing value");
        return Rational::parse(tok);
      };
      if (kw == "level") {
        CacheLevel lvl;
        if (!(ls >> lvl.name))
          throw ParseError("machine line " + std::to_string(lineno) + ": missing level name");
        want("size");
        std::string sz;
        ls >> sz;
        try {
          lvl.size_bytes = std::stoll(sz);
        } catch (const std::logic_error&) {
          throw ParseError("machine line " + std::to_string(lineno) + ": bad size '" + sz + "'");
        }
        want("latency");
        lvl.latency_cycles = rat();
        want("bandwidth");
        lvl.bandwidth_bytes_per_cycle = rat();
        m.levels.push_back(std::move(lvl));
      } else if (kw == "mem") {
        want("latency");
        m.mem_latency_cycles = rat();
        want("bandwidth");
        m.mem_bandwidth_bytes_per_cycle = rat();
        saw_mem = true;
      } else if (kw == "element_bytes") {
        std::string eb;
        if (!(ls >> eb))
          throw ParseError("machine line " + std::to_string(lineno) + ": missing element_bytes");
        m.element_bytes = std::stoll(eb);
      } else {
        throw ParseError("machine line " + std::to_string(lineno) + ": unknown directive '" + kw +
                         "'");
      }
    }
    if (m.levels.empty()) throw ParseError("machine: no cache levels");
    if (!saw_mem) throw ParseError("machine: missing 'mem' line");
    m.validate();
    return m;
  }

  static MachineDescriptor load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open machine file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  // Cascade Lake-class defaults: 32KB L1, 1MB L2, 39MB L3, 4-byte elements.
  // The latency/bandwidth figures are representative placeholders, not
  // measurements; rankings that depend on them should treat the machine file
  // as the tuning surface.
  static MachineDescriptor cascade_lake_default() {
    MachineDescriptor m;
    m.levels = {
        {"L1", 32768, Rational(4), Rational(128)},
        {"L2", 1048576, Rational(14), Rational(64)},
        {"L3", 40894464, Rational(50), Rational(32)},
    };
    m.mem_latency_cycles = Rational(200);
    m.mem_bandwidth_bytes_per_cycle = Rational(16);
    m.element_bytes = 4;
    return m;
  }
};

// One working-set size to place, tagged with a stable id ("d0.min", ...).
struct WsEntry {
  std::string id;
  std::int64_t elements = 0;
};

struct CacheFitResult {
  std::vector<std::int64_t> per_level_ws;                // elements per level
  std::int64_t mem_ws = 0;                               // elements out of cache
  std::vector<std::pair<std::string, int>> placement;    // entry id -> level index, -1 = memory

  std::int64_t total() const {
    std::int64_t t = mem_ws;
    for (std::int64_t v : per_level_ws) t += v;
    return t;
  }
};

// Greedy smallest-first assignment of working sets to cache levels: each
// size goes to the innermost level where it still fits on top of what that
// level already holds (in bytes); sizes fitting nowhere accumulate against
// memory. Input order does not matter; sizes are sorted ascending with ties
// broken by id.
inline CacheFitResult assign_to_caches(std::vector<WsEntry> entries,
                                       const MachineDescriptor& m) {
  if (m.levels.empty()) throw EmptyMachineError("machine has no cache levels");
  for (const WsEntry& e : entries)
    if (e.elements < 0) throw Error("negative working-set size for " + e.id);

  std::sort(entries.begin(), entries.end(), [](const WsEntry& a, const WsEntry& b) {
    if (a.elements != b.elements) return a.elements < b.elements;
    return a.id < b.id;
  });

  CacheFitResult r;
  r.per_level_ws.assign(m.levels.size(), 0);
  for (const WsEntry& e : entries) {
    int placed = -1;
    for (std::size_t i = 0; i < m.levels.size(); ++i) {
      if ((e.elements + r.per_level_ws[i]) * m.element_bytes <= m.levels[i].size_bytes) {
        r.per_level_ws[i] += e.elements;
        placed = static_cast<int>(i);
        break;
      }
    }
    if (placed < 0) r.mem_ws += e.elements;
    r.placement.emplace_back(e.id, placed);
  }
  return r;
}

}  // namespace nestrank
