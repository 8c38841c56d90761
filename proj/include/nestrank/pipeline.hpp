#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nestrank/cachefit.hpp"
#include "nestrank/costrank.hpp"
#include "nestrank/dnnrank.hpp"
#include "nestrank/emit.hpp"
#include "nestrank/reuse.hpp"
#include "nestrank/variants.hpp"

namespace nestrank {

// Full analysis of one nest: dependences, per-dependence working sets, the
// greedy cache placement of all WS_min/WS_max sizes, and the cost.
struct NestAnalysis {
  std::vector<Dependence> deps;
  std::vector<WorkingSetRecord> records;
  std::vector<WsEntry> entries;
  CacheFitResult fit;
  Rational total_cost;
  VariantStats stats;
};

inline NestAnalysis analyze_nest(const LoopNest& nest, const MachineDescriptor& machine) {
  NestAnalysis a;
  a.deps = compute_dependences(nest);
  a.records = working_sets(nest, a.deps);
  for (const WorkingSetRecord& r : a.records) {
    a.entries.push_back(WsEntry{r.dep_id + ".min", r.ws_min});
    a.entries.push_back(WsEntry{r.dep_id + ".max", r.ws_max});
  }
  a.fit = assign_to_caches(a.entries, machine);
  a.total_cost = cost(a.fit, machine);
  a.stats = stats_from_fit(a.fit);
  return a;
}

enum class RankerKind { COST, DNN };

struct VariantAnalysis {
  VariantRecipe recipe;
  std::string id;
  LoopNest nest;
  NestAnalysis analysis;
};

struct RankOutcome {
  RankerKind ranker = RankerKind::COST;
  std::vector<VariantAnalysis> variants;  // generation order
  std::vector<std::string> ranked;        // every variant id, best first
  std::map<std::string, int> wins;        // tournament wins (DNN ranker only)
  double symmetry = 1.0;                  // DNN order-consistency diagnostic
};

// Generates the variant space, analyzes every variant, and ranks all of
// them with the chosen backend. Deterministic for identical inputs.
inline RankOutcome rank_variants(const LoopNest& nest, const MachineDescriptor& machine,
                                 const VariantConfig& cfg, RankerKind ranker,
                                 const PairwiseRanker* net = nullptr) {
  RankOutcome out;
  out.ranker = ranker;
  for (auto& [recipe, variant_nest] : generate_variants(nest, cfg)) {
    VariantAnalysis va;
    va.recipe = recipe;
    va.id = recipe.id();
    va.nest = variant_nest;
    va.analysis = analyze_nest(variant_nest, machine);
    out.variants.push_back(std::move(va));
  }
  if (out.variants.empty()) throw EmptyInputError("variant space is empty");

  if (ranker == RankerKind::COST) {
    std::vector<VariantScore> scores;
    for (const VariantAnalysis& v : out.variants)
      scores.push_back(VariantScore{v.id, v.analysis.total_cost, v.analysis.fit});
    out.ranked = rank_by_cost(std::move(scores), out.variants.size());
  } else {
    if (net == nullptr) throw MissingWeightsError("DNN ranker needs a weights file");
    std::vector<TournamentEntry> entries;
    for (const VariantAnalysis& v : out.variants)
      entries.push_back(TournamentEntry{v.id, v.analysis.stats, v.analysis.total_cost});
    TournamentResult res = tournament(*net, std::move(entries));
    out.ranked = res.ranked;
    for (const auto& [id, w] : res.wins) out.wins[id] = w;
    out.symmetry = res.symmetry;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training dataset rows: 8 integers (variant A then B working sets, each
// L1 L2 L3 mem) and a winner label A|B (or 0|1).

inline std::vector<TrainPair> parse_dataset(const std::string& text) {
  std::vector<TrainPair> rows;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::int64_t v[8];
    for (int i = 0; i < 8; ++i) {
      if (!(ls >> v[i]))
        throw MalformedRowError("dataset line " + std::to_string(lineno) +
                                ": expected 8 working-set sizes and a label");
    }
    std::string label;
    if (!(ls >> label))
      throw MalformedRowError("dataset line " + std::to_string(lineno) + ": missing label");
    TrainPair p;
    p.a = VariantStats{v[0], v[1], v[2], v[3]};
    p.b = VariantStats{v[4], v[5], v[6], v[7]};
    if (label == "A" || label == "0") p.winner = 0;
    else if (label == "B" || label == "1") p.winner = 1;
    else
      throw MalformedRowError("dataset line " + std::to_string(lineno) + ": bad label '" + label +
                              "'");
    std::string extra;
    if (ls >> extra)
      throw MalformedRowError("dataset line " + std::to_string(lineno) + ": trailing tokens");
    rows.push_back(p);
  }
  if (rows.empty()) throw EmptyDatasetError("dataset has no rows");
  return rows;
}

struct TrainReport {
  PairwiseRanker net;
  std::size_t train_rows = 0;
  std::size_t holdout_rows = 0;
  double train_accuracy = 0.0;
  bool has_holdout = false;
  double holdout_accuracy = 0.0;
};

// Seeded shuffle, held-out fraction floor((1-split)*n), train on the rest.
inline TrainReport train_with_holdout(const std::vector<TrainPair>& dataset, double split,
                                      int epochs, double learning_rate, std::uint64_t seed,
                                      int batch_size = 32) {
  if (dataset.empty()) throw EmptyDatasetError("training dataset is empty");
  if (split <= 0.0 || split > 1.0) throw ConfigRejectedError("split must be in (0, 1]");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  dnn_detail::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  rng.shuffle(order);

  std::size_t holdout = static_cast<std::size_t>(
      std::floor(static_cast<double>(dataset.size()) * (1.0 - split)));
  std::size_t train_n = dataset.size() - holdout;
  if (train_n == 0) throw EmptyDatasetError("split leaves no training rows");

  std::vector<TrainPair> train_set, holdout_set;
  for (std::size_t i = 0; i < train_n; ++i) train_set.push_back(dataset[order[i]]);
  for (std::size_t i = train_n; i < dataset.size(); ++i) holdout_set.push_back(dataset[order[i]]);

  TrainReport rep;
  rep.net = PairwiseRanker::train(train_set, epochs, learning_rate, seed, batch_size);
  rep.train_rows = train_set.size();
  rep.holdout_rows = holdout_set.size();
  rep.train_accuracy = PairwiseRanker::accuracy(rep.net, train_set);
  if (!holdout_set.empty()) {
    rep.has_holdout = true;
    rep.holdout_accuracy = PairwiseRanker::accuracy(rep.net, holdout_set);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Reports. `text` is for humans; `rows` is tab-separated, one record per
// line, stable field order.

namespace report_detail {

inline std::string cost_decimal(const Rational& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", r.to_double());
  return buf;
}

inline std::string level_name(const MachineDescriptor& m, int idx) {
  if (idx < 0) return "mem";
  return m.levels[static_cast<std::size_t>(idx)].name;
}

}  // namespace report_detail

inline std::string analyze_report(const NestAnalysis& a, const MachineDescriptor& m,
                                  bool rows_format) {
  std::ostringstream os;
  if (rows_format) {
    for (const WorkingSetRecord& r : a.records) {
      os << "dep\t" << r.dep_id << "\t" << dep_kind_name(r.kind) << "\t" << r.array << "\t"
         << r.ws_min << "\t" << r.ws_max << "\t" << point_str(r.source) << "\t"
         << point_str(r.first_target) << "\t" << point_str(r.last_target) << "\n";
    }
    for (const auto& [id, level] : a.fit.placement)
      os << "place\t" << id << "\t" << report_detail::level_name(m, level) << "\n";
    for (std::size_t i = 0; i < a.fit.per_level_ws.size(); ++i)
      os << "levelws\t" << m.levels[i].name << "\t" << a.fit.per_level_ws[i] << "\n";
    os << "levelws\tmem\t" << a.fit.mem_ws << "\n";
    os << "cost\t" << a.total_cost.str() << "\t" << report_detail::cost_decimal(a.total_cost)
       << "\n";
    return os.str();
  }

  os << "dependences (" << a.records.size() << "):\n";
  for (const WorkingSetRecord& r : a.records) {
    os << "  " << r.dep_id << "  " << dep_kind_name(r.kind) << "  " << r.array
       << "  ws_min=" << r.ws_min << "  ws_max=" << r.ws_max << "  source=" << point_str(r.source)
       << "  first=" << point_str(r.first_target) << "  last=" << point_str(r.last_target)
       << "\n";
  }
  os << "placement (smallest first):\n";
  for (const auto& [id, level] : a.fit.placement)
    os << "  " << id << " -> " << report_detail::level_name(m, level) << "\n";
  os << "working set per level (elements):";
  for (std::size_t i = 0; i < a.fit.per_level_ws.size(); ++i)
    os << "  " << m.levels[i].name << "=" << a.fit.per_level_ws[i];
  os << "  mem=" << a.fit.mem_ws << "\n";
  os << "cost: " << a.total_cost.str() << " (= " << report_detail::cost_decimal(a.total_cost)
     << ")\n";
  return os.str();
}

inline std::string rank_report(const RankOutcome& out, const MachineDescriptor& m,
                               bool rows_format) {
  std::map<std::string, std::size_t> rank_of;
  for (std::size_t i = 0; i < out.ranked.size(); ++i) rank_of[out.ranked[i]] = i + 1;

  std::ostringstream os;
  if (rows_format) {
    for (const VariantAnalysis& v : out.variants) {
      os << "variant\t" << v.id << "\t" << v.analysis.total_cost.str() << "\t"
         << report_detail::cost_decimal(v.analysis.total_cost) << "\t" << v.analysis.stats.ws_l1
         << "\t" << v.analysis.stats.ws_l2 << "\t" << v.analysis.stats.ws_l3 << "\t"
         << v.analysis.stats.ws_mem << "\t" << rank_of.at(v.id);
      if (out.ranker == RankerKind::DNN) os << "\t" << out.wins.at(v.id);
      os << "\n";
    }
    for (std::size_t i = 0; i < out.ranked.size(); ++i)
      os << "ranked\t" << (i + 1) << "\t" << out.ranked[i] << "\n";
    if (out.ranker == RankerKind::DNN) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", out.symmetry);
      os << "symmetry\t" << buf << "\n";
    }
    return os.str();
  }

  os << "variants: " << out.variants.size() << "  ranker: "
     << (out.ranker == RankerKind::COST ? "cost" : "dnn") << "\n";
  (void)m;
  for (std::size_t i = 0; i < out.ranked.size(); ++i) {
    const std::string& id = out.ranked[i];
    const VariantAnalysis* v = nullptr;
    for (const VariantAnalysis& cand : out.variants)
      if (cand.id == id) { v = &cand; break; }
    os << "  " << (i + 1) << ". " << id << "  cost=" << v->analysis.total_cost.str() << " (= "
       << report_detail::cost_decimal(v->analysis.total_cost) << ")"
       << "  ws=[" << v->analysis.stats.ws_l1 << ", " << v->analysis.stats.ws_l2 << ", "
       << v->analysis.stats.ws_l3 << ", " << v->analysis.stats.ws_mem << "]";
    if (out.ranker == RankerKind::DNN) os << "  wins=" << out.wins.at(id);
    os << "\n";
  }
  if (out.ranker == RankerKind::DNN) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", out.symmetry);
    os << "pairwise order-consistency: " << buf << "\n";
  }
  return os.str();
}

}  // namespace nestrank
