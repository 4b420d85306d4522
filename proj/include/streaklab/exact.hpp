#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "streaklab/error.hpp"
#include "streaklab/parallel.hpp"
#include "streaklab/ratio.hpp"
#include "streaklab/sequence.hpp"

namespace streaklab {

// Memoryless null model: each flip is a hit with probability p, independent
// of everything else, over sequences of length k.
struct NullModel {
  double p = 0.5;
  int k = 4;

  NullModel() = default;
  NullModel(double p_, int k_) : p(p_), k(k_) { validate(); }

  void validate() const {
    if (!(p > 0.0 && p < 1.0))
      throw Error(errc::bad_argument, "hit probability must lie strictly between 0 and 1");
    if (k < 1 || k > static_cast<int>(Flips::max_length))
      throw Error(errc::bad_argument, "sequence length must be in 1..65536");
  }
};

// What to do with sequences whose statistic has no eligible trial: drop them
// from the average, or count them as zero with full weight.
enum class UndefinedPolicy { exclude, include_as_zero };

// Exhaustive enumeration caps out here; larger k belongs to the sampling
// engine. Overridable via STREAKLAB_ENUM_LIMIT (clamped to 1..40, beyond
// which exact accumulation would no longer be provably overflow-free).
inline int enumeration_limit() {
  static const int limit = [] {
    if (const char* env = std::getenv("STREAKLAB_ENUM_LIMIT")) {
      const long v = std::strtol(env, nullptr, 10);
      return static_cast<int>(std::clamp(v, 1L, 40L));
    }
    return 28;
  }();
  return limit;
}

struct BiasSummary {
  NullModel model;
  Stat stat;
  UndefinedPolicy policy = UndefinedPolicy::exclude;

  double unweighted_mean = 0.0;
  double pooled_mean = 0.0;
  // Exact value of unweighted_mean, available when p is exactly 1/2 (all
  // sequences equally likely) and the reduced fraction fits in 64 bits.
  std::optional<Ratio> unweighted_exact;

  std::uint64_t defined_count = 0;
  double defined_probability = 0.0;
  // Probability mass per exact statistic value, over defined sequences.
  std::map<Ratio, double> histogram;
};

namespace detail {

inline __int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

inline __int128 lcm_upto(int n) {
  __int128 l = 1;
  for (int i = 2; i <= n; ++i) l = l / gcd128(l, i) * i;
  return l;
}

inline std::optional<Ratio> reduce_to_ratio(__int128 num, __int128 den) {
  __int128 g = gcd128(num, den);
  if (g == 0) g = 1;
  num /= g;
  den /= g;
  constexpr __int128 lim = INT64_MAX;
  if (num > lim || num < -lim || den > lim) return std::nullopt;
  return Ratio(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

inline std::vector<double> hit_count_weights(double p, int k) {
  std::vector<double> w(static_cast<std::size_t>(k) + 1);
  for (int h = 0; h <= k; ++h)
    w[static_cast<std::size_t>(h)] = std::pow(p, h) * std::pow(1.0 - p, k - h);
  return w;
}

inline void check_enumerable(const NullModel& model, int run_length) {
  model.validate();
  if (model.k > enumeration_limit())
    throw Error(errc::k_too_large,
                "k=" + std::to_string(model.k) + " exceeds the enumeration limit (" +
                    std::to_string(enumeration_limit()) + "); use the sampling engine");
  if (run_length >= model.k)
    throw Error(errc::run_too_long, "run length must be shorter than the sequence length");
}

// ---- single-sided statistic (after-hit-run / after-miss-run) --------------
//
// Per-sequence work lands in an integer tensor indexed by (eligible,
// successes, hit count). Everything downstream of the tensor is a short
// fixed-order pass, so worker count can never change a single output bit.

struct SideTensor {
  int k = 0, span = 0;
  std::vector<std::uint64_t> cells; // (e * (span+1) + s) * (k+1) + h

  SideTensor() = default;
  SideTensor(int k_, int span_)
      : k(k_), span(span_),
        cells(static_cast<std::size_t>(span_ + 1) * (span_ + 1) * (k_ + 1), 0) {}

  std::size_t index(int e, int s, int h) const {
    return (static_cast<std::size_t>(e) * (span + 1) + s) * (k + 1) + h;
  }

  void merge(const SideTensor& o) {
    if (o.cells.empty()) return; // worker slot that never ran a chunk
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] += o.cells[i];
  }
};

inline SideTensor enumerate_side_tensor(const NullModel& model, bool run_on_hits, int m,
                                        int threads) {
  const int k = model.k;
  const int span = k - m;
  const std::uint64_t total = std::uint64_t{1} << k;
  const int n_workers = std::max(1, threads);
  const std::uint64_t slice = (total + n_workers - 1) / n_workers;

  std::vector<SideTensor> partial(static_cast<std::size_t>(n_workers));
  detail::for_chunks(total, slice, n_workers, [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
    SideTensor t(k, span);
    for (std::uint64_t bits = lo; bits < hi; ++bits) {
      const TrialCounts counts = packed_count_after_run(bits, k, run_on_hits, m);
      const int h = std::popcount(bits);
      ++t.cells[t.index(static_cast<int>(counts.eligible), static_cast<int>(counts.successes), h)];
    }
    partial[c] = std::move(t);
  });

  SideTensor merged(k, span);
  for (const auto& t : partial) merged.merge(t);
  return merged;
}

// ---- difference statistic --------------------------------------------------
//
// Defined sequences (both sides have an eligible trial) are binned by the
// reduced difference value and the hit count; side totals feed the pooled
// means. Bin keys pack (numerator, denominator, hit count) into one word.

struct DiffBins {
  std::map<std::uint64_t, std::uint64_t> cells;
  std::vector<std::int64_t> hit_succ, hit_elig, miss_succ, miss_elig; // per h

  explicit DiffBins(int k)
      : hit_succ(static_cast<std::size_t>(k) + 1, 0),
        hit_elig(static_cast<std::size_t>(k) + 1, 0),
        miss_succ(static_cast<std::size_t>(k) + 1, 0),
        miss_elig(static_cast<std::size_t>(k) + 1, 0) {}

  static std::uint64_t key(std::int64_t num, std::int64_t den, int h) {
    return (static_cast<std::uint64_t>(num + (1 << 20)) << 24) |
           (static_cast<std::uint64_t>(den) << 8) | static_cast<std::uint64_t>(h);
  }
  static void decode(std::uint64_t key, std::int64_t& num, std::int64_t& den, int& h) {
    h = static_cast<int>(key & 0xff);
    den = static_cast<std::int64_t>((key >> 8) & 0xffff);
    num = static_cast<std::int64_t>(key >> 24) - (1 << 20);
  }

  void merge(const DiffBins& o) {
    for (const auto& [key, cnt] : o.cells) cells[key] += cnt;
    for (std::size_t h = 0; h < hit_succ.size(); ++h) {
      hit_succ[h] += o.hit_succ[h];
      hit_elig[h] += o.hit_elig[h];
      miss_succ[h] += o.miss_succ[h];
      miss_elig[h] += o.miss_elig[h];
    }
  }
};

inline DiffBins enumerate_diff_bins(const NullModel& model, int m, int threads) {
  const int k = model.k;
  const std::uint64_t total = std::uint64_t{1} << k;
  const int n_workers = std::max(1, threads);
  const std::uint64_t slice = (total + n_workers - 1) / n_workers;

  std::vector<DiffBins> partial(static_cast<std::size_t>(n_workers), DiffBins(k));
  detail::for_chunks(total, slice, n_workers, [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
    DiffBins bins(k);
    std::unordered_map<std::uint64_t, std::uint64_t> scratch;
    for (std::uint64_t bits = lo; bits < hi; ++bits) {
      const TrialCounts ch = packed_count_after_run(bits, k, true, m);
      const TrialCounts ct = packed_count_after_run(bits, k, false, m);
      const int h = std::popcount(bits);
      bins.hit_succ[static_cast<std::size_t>(h)] += ch.successes;
      bins.hit_elig[static_cast<std::size_t>(h)] += ch.eligible;
      bins.miss_succ[static_cast<std::size_t>(h)] += ct.successes;
      bins.miss_elig[static_cast<std::size_t>(h)] += ct.eligible;
      if (ch.eligible == 0 || ct.eligible == 0) continue;
      std::int64_t num = ch.successes * ct.eligible - ct.successes * ch.eligible;
      std::int64_t den = ch.eligible * ct.eligible;
      const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
      if (g > 1) {
        num /= g;
        den /= g;
      }
      ++scratch[DiffBins::key(num, den, h)];
    }
    bins.cells.insert(scratch.begin(), scratch.end());
    partial[c] = std::move(bins);
  });

  DiffBins merged(k);
  for (const auto& b : partial) merged.merge(b);
  return merged;
}

} // namespace detail

// Exact expectations over all 2^k sequences under the null model. The
// unweighted mean gives every (defined) sequence the same weight; the pooled
// mean weights by eligible trials and collapses to plain hit probability.
inline BiasSummary enumerate_summary(const NullModel& model, const Stat& stat,
                                     UndefinedPolicy policy, int threads = 1) {
  detail::check_enumerable(model, stat.run_length);
  if (stat.is_difference() && policy == UndefinedPolicy::include_as_zero)
    throw Error(errc::policy_unsupported,
                "include-as-zero has no principled sign for the difference statistic");

  const int k = model.k;
  const int m = stat.run_length;
  const bool fair = model.p == 0.5;
  const std::vector<double> w = detail::hit_count_weights(model.p, k);
  const __int128 common_den = detail::lcm_upto(k - m); // every value's denominator divides it

  BiasSummary out;
  out.model = model;
  out.stat = stat;
  out.policy = policy;

  // Per-hit-count aggregates; integers (and a common-denominator value sum)
  // until the final h-indexed reduction.
  std::vector<__int128> value_sum(static_cast<std::size_t>(k) + 1, 0);
  std::vector<std::uint64_t> defined(static_cast<std::size_t>(k) + 1, 0);

  double pooled_succ = 0.0, pooled_elig = 0.0;

  if (!stat.is_difference()) {
    const detail::SideTensor t =
        detail::enumerate_side_tensor(model, stat.run_on_hits(), m, threads);
    std::vector<std::int64_t> succ(static_cast<std::size_t>(k) + 1, 0);
    std::vector<std::int64_t> elig(static_cast<std::size_t>(k) + 1, 0);
    for (int e = 0; e <= t.span; ++e) {
      for (int s = 0; s <= e; ++s) {
        double mass = 0.0;
        bool any = false;
        for (int h = 0; h <= k; ++h) {
          const std::uint64_t cnt = t.cells[t.index(e, s, h)];
          if (cnt == 0) continue;
          any = true;
          succ[static_cast<std::size_t>(h)] += static_cast<std::int64_t>(cnt) * s;
          elig[static_cast<std::size_t>(h)] += static_cast<std::int64_t>(cnt) * e;
          if (e > 0) {
            defined[static_cast<std::size_t>(h)] += cnt;
            value_sum[static_cast<std::size_t>(h)] +=
                static_cast<__int128>(cnt) * s * (common_den / e);
            mass += w[static_cast<std::size_t>(h)] * static_cast<double>(cnt);
          }
        }
        if (any && e > 0) out.histogram[Ratio(s, e)] += mass;
      }
    }
    for (int h = 0; h <= k; ++h) {
      pooled_succ += w[static_cast<std::size_t>(h)] * static_cast<double>(succ[static_cast<std::size_t>(h)]);
      pooled_elig += w[static_cast<std::size_t>(h)] * static_cast<double>(elig[static_cast<std::size_t>(h)]);
    }
    out.pooled_mean = pooled_succ / pooled_elig;
  } else {
    const detail::DiffBins bins = detail::enumerate_diff_bins(model, m, threads);
    for (const auto& [key, cnt] : bins.cells) {
      std::int64_t num, den;
      int h;
      detail::DiffBins::decode(key, num, den, h);
      defined[static_cast<std::size_t>(h)] += cnt;
      value_sum[static_cast<std::size_t>(h)] += static_cast<__int128>(cnt) * num *
                                                (common_den / den);
      out.histogram[Ratio(num, den)] += w[static_cast<std::size_t>(h)] * static_cast<double>(cnt);
    }
    double hs = 0.0, he = 0.0, ms = 0.0, me = 0.0;
    for (int h = 0; h <= k; ++h) {
      const auto hi = static_cast<std::size_t>(h);
      hs += w[hi] * static_cast<double>(bins.hit_succ[hi]);
      he += w[hi] * static_cast<double>(bins.hit_elig[hi]);
      ms += w[hi] * static_cast<double>(bins.miss_succ[hi]);
      me += w[hi] * static_cast<double>(bins.miss_elig[hi]);
    }
    out.pooled_mean = hs / he - ms / me;
  }

  double defined_mass = 0.0, value_mass = 0.0;
  __int128 exact_num = 0;
  for (int h = 0; h <= k; ++h) {
    const auto hi = static_cast<std::size_t>(h);
    out.defined_count += defined[hi];
    defined_mass += w[hi] * static_cast<double>(defined[hi]);
    // long double holds the full 64-bit mantissa, so each per-h term rounds once
    value_mass += w[hi] * static_cast<double>(static_cast<long double>(value_sum[hi]) /
                                              static_cast<long double>(common_den));
    exact_num += value_sum[hi];
  }
  out.defined_probability = defined_mass;

  if (policy == UndefinedPolicy::exclude) {
    if (out.defined_count == 0)
      throw Error(errc::all_undefined, "statistic undefined on every sequence");
    out.unweighted_mean = value_mass / defined_mass;
    if (fair)
      out.unweighted_exact =
          detail::reduce_to_ratio(exact_num, common_den * static_cast<__int128>(out.defined_count));
  } else {
    out.unweighted_mean = value_mass; // total mass is exactly 1
    if (fair)
      out.unweighted_exact =
          detail::reduce_to_ratio(exact_num, common_den * (static_cast<__int128>(1) << k));
  }
  return out;
}

inline std::vector<BiasSummary> bias_table(int k_min, int k_max, double p, const Stat& stat,
                                           UndefinedPolicy policy, int threads = 1) {
  if (k_min < 1 || k_min > k_max)
    throw Error(errc::invalid_range, "need 1 <= k_min <= k_max");
  if (k_max > enumeration_limit())
    throw Error(errc::k_too_large, "k_max exceeds the enumeration limit (" +
                                       std::to_string(enumeration_limit()) + ")");
  std::vector<BiasSummary> rows;
  rows.reserve(static_cast<std::size_t>(k_max - k_min + 1));
  for (int k = k_min; k <= k_max; ++k)
    rows.push_back(enumerate_summary(NullModel(p, k), stat, policy, threads));
  return rows;
}

// Number of length-k sequences containing the pattern as a contiguous
// substring, by stepping a KMP automaton over both branches per position.
inline std::uint64_t count_sequences_containing(int k, const Sequence& pattern) {
  if (k < 1 || k > enumeration_limit())
    throw Error(errc::k_too_large, "k must be in 1.." + std::to_string(enumeration_limit()));
  const int n = pattern.size();
  if (n > k)
    throw Error(errc::pattern_too_long, "pattern is longer than the sequences");

  std::vector<int> fail(static_cast<std::size_t>(n), 0);
  for (int i = 1; i < n; ++i) {
    int q = fail[static_cast<std::size_t>(i) - 1];
    while (q > 0 && pattern.hit(i) != pattern.hit(q)) q = fail[static_cast<std::size_t>(q) - 1];
    fail[static_cast<std::size_t>(i)] = (pattern.hit(i) == pattern.hit(q)) ? q + 1 : 0;
  }
  const auto step = [&](int q, bool bit) {
    while (q > 0 && pattern.hit(q) != bit) q = fail[static_cast<std::size_t>(q) - 1];
    return pattern.hit(q) == bit ? q + 1 : 0;
  };

  // dp over match states 0..n-1 counts sequences that avoid the pattern
  std::vector<std::uint64_t> dp(static_cast<std::size_t>(n), 0), next(dp);
  dp[0] = 1;
  for (int pos = 0; pos < k; ++pos) {
    std::fill(next.begin(), next.end(), 0);
    for (int q = 0; q < n; ++q) {
      if (dp[static_cast<std::size_t>(q)] == 0) continue;
      for (const bool bit : {false, true}) {
        const int to = step(q, bit);
        if (to < n) next[static_cast<std::size_t>(to)] += dp[static_cast<std::size_t>(q)];
      }
    }
    dp.swap(next);
  }
  std::uint64_t avoiding = 0;
  for (const auto c : dp) avoiding += c;
  return (std::uint64_t{1} << k) - avoiding;
}

// ---------------------------------------------------------------------------
// Presentation-scale listing of every length-k sequence with its eligible and
// success counts, totals, and the unweighted average of the defined values.
// ---------------------------------------------------------------------------

struct TableRow {
  Sequence seq;
  std::int64_t eligible = 0;
  std::int64_t successes = 0;
  std::optional<Ratio> value;
};

struct TableOne {
  int k = 0;
  Stat stat;
  UndefinedPolicy policy = UndefinedPolicy::exclude;
  std::vector<TableRow> rows; // lexicographic, H before T
  std::int64_t total_eligible = 0;
  std::int64_t total_successes = 0;
  std::uint64_t defined_count = 0;
  std::optional<Ratio> average;
};

inline TableOne table_one(int k, const Stat& stat = Stat::after_hit_run(1),
                          UndefinedPolicy policy = UndefinedPolicy::exclude) {
  if (k < 1 || k > 16)
    throw Error(errc::k_too_large, "k exceeds presentation limit 16");
  if (stat.is_difference())
    throw Error(errc::bad_argument,
                "the listing shows one side's counts; difference has no single count pair");

  const int m = stat.run_length;
  const bool conditionable = m < k;
  const std::int64_t common_den = conditionable ? static_cast<std::int64_t>(detail::lcm_upto(k - m)) : 1;

  TableOne table;
  table.k = k;
  table.stat = stat;
  table.policy = policy;
  std::int64_t value_sum = 0; // over common_den

  const std::uint64_t total = std::uint64_t{1} << k;
  table.rows.reserve(total);
  for (std::uint64_t r = 0; r < total; ++r) {
    // lexicographic order: treat H as 0 with the first flip in the top bit
    std::uint64_t bits = 0;
    for (int j = 0; j < k; ++j)
      if (((r >> (k - 1 - j)) & 1u) == 0) bits |= std::uint64_t{1} << j;

    TableRow row{Sequence(bits, k), 0, 0, std::nullopt};
    if (conditionable) {
      const TrialCounts c = packed_count_after_run(bits, k, stat.run_on_hits(), m);
      row.eligible = c.eligible;
      row.successes = c.successes;
      if (c.eligible > 0) {
        row.value = Ratio(c.successes, c.eligible);
        ++table.defined_count;
        value_sum += c.successes * (common_den / c.eligible);
      }
    }
    table.total_eligible += row.eligible;
    table.total_successes += row.successes;
    table.rows.push_back(std::move(row));
  }

  if (policy == UndefinedPolicy::exclude) {
    if (table.defined_count > 0)
      table.average = detail::reduce_to_ratio(
          value_sum, common_den * static_cast<std::int64_t>(table.defined_count));
  } else {
    table.average =
        detail::reduce_to_ratio(value_sum, common_den * static_cast<std::int64_t>(total));
  }
  return table;
}

} // namespace streaklab
