#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "nestrank/cachefit.hpp"

namespace nestrank {

struct VariantScore {
  std::string variant_id;
  Rational cost;
  CacheFitResult fit;
};

// C = sum_i WS^Li * lat^Li / bw^Li  +  WS^mem * lat^mem / bw^mem, in exact
// rational arithmetic. Working sets are in elements.
inline Rational cost(const CacheFitResult& fit, const MachineDescriptor& m) {
  Rational c(0);
  for (std::size_t i = 0; i < fit.per_level_ws.size() && i < m.levels.size(); ++i) {
    c += Rational(fit.per_level_ws[i]) * m.levels[i].latency_cycles /
         m.levels[i].bandwidth_bytes_per_cycle;
  }
  c += Rational(fit.mem_ws) * m.mem_latency_cycles / m.mem_bandwidth_bytes_per_cycle;
  return c;
}

// Ascending cost (lower cost ranks higher), ties broken by variant id, first
// k ids returned; k larger than the list clamps.
inline std::vector<std::string> rank_by_cost(std::vector<VariantScore> scores, std::size_t k) {
  if (scores.empty()) throw EmptyInputError("rank_by_cost: no variants to rank");
  std::sort(scores.begin(), scores.end(), [](const VariantScore& a, const VariantScore& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.variant_id < b.variant_id;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scores.size() && i < k; ++i) out.push_back(scores[i].variant_id);
  return out;
}

}  // namespace nestrank
