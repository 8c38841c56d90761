#pragma once

#include <span>
#include <string>
#include <vector>

#include "nestrank/deps.hpp"

namespace nestrank {

// Minimum and maximum working set of one dependence: the distinct array
// elements touched between the representative source iteration and its
// first / last target iteration, both endpoints included.
struct WorkingSetRecord {
  std::string dep_id;
  DepKind kind = DepKind::RAR;
  std::string array;
  std::int64_t ws_min = 0;
  std::int64_t ws_max = 0;
  Point source;
  Point first_target;
  Point last_target;
};

// Per-dependence working set sizes. For each dependence d the representative
// source is lexmin(dom d); the working sets cover the closed program-order
// intervals [source .. first target] and [source .. last target], counting
// distinct elements per array and summing across arrays.
inline std::vector<WorkingSetRecord> working_sets(const LoopNest& n,
                                                  const std::vector<Dependence>& deps) {
  IntSet iter = iteration_space(n);
  const std::vector<Point>& pts = iter.points();

  std::vector<WorkingSetRecord> out;
  out.reserve(deps.size());
  // Dependences from different reference pairs often share the identical
  // source/target triple (the accumulator's four kinds, for one); their
  // interval footprints are counted once.
  std::map<std::pair<Point, Point>, std::int64_t> interval_count;
  auto counted = [&](const Point& from, const Point& to, std::span<const Point> interval) {
    auto key = std::make_pair(from, to);
    auto it = interval_count.find(key);
    if (it != interval_count.end()) return it->second;
    std::int64_t c = footprint_of(n, interval).total();
    interval_count.emplace(key, c);
    return c;
  };
  for (const Dependence& d : deps) {
    WorkingSetRecord rec;
    rec.dep_id = d.id;
    rec.kind = d.kind;
    rec.array = d.array;

    // lexmin of the relation's domain: first iteration with any target.
    const Point* source = nullptr;
    for (const Point& p : pts) {
      if (d.rel.has_image(p)) { source = &p; break; }
    }
    if (source == nullptr)
      throw EmptySetError("dependence " + d.id + " has an empty relation");
    rec.source = *source;

    std::vector<Point> targets = d.rel.apply_point(*source);
    if (targets.empty())
      throw EmptySetError("dependence " + d.id + " has a source without targets");
    rec.first_target = targets.front();
    rec.last_target = targets.back();

    auto begin = std::lower_bound(pts.begin(), pts.end(), rec.source);
    auto end_min = std::upper_bound(pts.begin(), pts.end(), rec.first_target);
    auto end_max = std::upper_bound(pts.begin(), pts.end(), rec.last_target);
    std::span<const Point> min_interval(&*begin, static_cast<std::size_t>(end_min - begin));
    std::span<const Point> max_interval(&*begin, static_cast<std::size_t>(end_max - begin));

    rec.ws_min = counted(rec.source, rec.first_target, min_interval);
    rec.ws_max = counted(rec.source, rec.last_target, max_interval);
    if (rec.ws_min < 1 || rec.ws_min > rec.ws_max)
      throw Error("working set invariant violated for dependence " + d.id);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace nestrank
