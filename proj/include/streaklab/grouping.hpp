#pragma once

#include <cstdint>
#include <span>

#include "streaklab/error.hpp"

namespace streaklab {

// A group's mean together with how many underlying items produced it.
// pooled_mean() weights each group by its item count (equal weight per item);
// unweighted_mean() gives every group the same weight regardless of size.
// The gap between the two is the whole story of this library.
struct GroupSummary {
  double mean = 0.0;
  std::int64_t count = 1; // >= 1
};

inline double pooled_mean(std::span<const GroupSummary> groups) {
  if (groups.empty()) throw Error(errc::empty_list, "no groups to average");
  double weighted_sum = 0.0;
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.count < 1) throw Error(errc::bad_argument, "group count must be positive");
    weighted_sum += g.mean * static_cast<double>(g.count);
    total += static_cast<double>(g.count);
  }
  return weighted_sum / total;
}

inline double unweighted_mean(std::span<const GroupSummary> groups) {
  if (groups.empty()) throw Error(errc::empty_list, "no groups to average");
  double sum = 0.0;
  for (const auto& g : groups) {
    if (g.count < 1) throw Error(errc::bad_argument, "group count must be positive");
    sum += g.mean;
  }
  return sum / static_cast<double>(groups.size());
}

} // namespace streaklab
