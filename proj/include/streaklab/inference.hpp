#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "streaklab/error.hpp"
#include "streaklab/exact.hpp"
#include "streaklab/ratio.hpp"
#include "streaklab/sampling.hpp"
#include "streaklab/sequence.hpp"

namespace streaklab {

// One player's shot record: a list of units (per-game sequences, or a single
// season-long sequence).
struct Record {
  std::optional<std::string> player_id;
  std::vector<Flips> units;
};

// Input format: one unit per line, optional "player_id," prefix (first comma
// splits), '#' comment lines and blank lines ignored, H/T case-insensitive.
inline std::vector<Record> ingest(std::istream& in) {
  std::vector<Record> records;
  std::map<std::string, std::size_t> index; // player id -> slot in records
  std::optional<std::size_t> anonymous;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    std::optional<std::string> id;
    std::string_view flips_text = line;
    if (const auto comma = line.find(','); comma != std::string::npos) {
      std::string name = line.substr(0, comma);
      while (!name.empty() && (name.front() == ' ' || name.front() == '\t')) name.erase(0, 1);
      while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
      if (!name.empty()) id = std::move(name);
      flips_text = std::string_view(line).substr(comma + 1);
    }

    Flips unit;
    try {
      unit = Flips::parse(flips_text);
    } catch (const Error& e) {
      throw Error(errc::parse_error,
                  "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }

    std::size_t slot;
    if (id) {
      const auto [it, inserted] = index.try_emplace(*id, records.size());
      if (inserted) records.push_back(Record{id, {}});
      slot = it->second;
    } else {
      if (!anonymous) {
        anonymous = records.size();
        records.push_back(Record{std::nullopt, {}});
      }
      slot = *anonymous;
    }
    records[slot].units.push_back(std::move(unit));
  }

  if (records.empty()) throw Error(errc::empty_file, "no shot records in input");
  return records;
}

inline double empirical_hit_rate(const Record& record) {
  std::int64_t hits = 0, flips = 0;
  for (const auto& unit : record.units) {
    flips += unit.size();
    for (int i = 0; i < unit.size(); ++i) hits += unit.hit(i) ? 1 : 0;
  }
  return flips == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(flips);
}

// Which null value an observed statistic is judged against: the long-run hit
// rate itself, or the per-sequence unweighted mean at the unit's length.
enum class Convention { pooled_long_run, per_sequence_unweighted };

struct ReferenceSpec {
  Convention convention = Convention::per_sequence_unweighted;
  NullModel model; // k is overridden by the unit length under test
  Stat stat;
  UndefinedPolicy policy = UndefinedPolicy::exclude;
};

inline double reference_number(const ReferenceSpec& spec, int unit_length,
                               std::int64_t mc_trials = 200'000, SeededStream stream = {},
                               int threads = 1) {
  spec.model.validate();
  if (spec.stat.run_length >= unit_length)
    throw Error(errc::run_too_long, "unit length must exceed the run length");
  if (spec.convention == Convention::pooled_long_run) return spec.model.p;
  const NullModel model(spec.model.p, unit_length);
  if (unit_length <= enumeration_limit())
    return enumerate_summary(model, spec.stat, spec.policy, threads).unweighted_mean;
  return sample_unweighted_mean(model, spec.stat, spec.policy, mc_trials, stream, threads).value;
}

enum class Tail { upper, lower };

struct UnitReport {
  std::string sequence;
  TrialCounts after_hits;
  TrialCounts after_misses;
  std::optional<Ratio> value;
};

struct HotHandReport {
  std::optional<std::string> player_id;
  ReferenceSpec spec;
  Tail tail = Tail::upper;

  std::vector<UnitReport> per_unit;
  std::int64_t total_flips = 0;
  std::int64_t total_hits = 0;

  // Pooled counts across all units; the aggregate statistic derives from
  // these, so summing the per-unit rows reproduces it exactly.
  std::int64_t hit_successes = 0, hit_eligible = 0;
  std::int64_t miss_successes = 0, miss_eligible = 0;

  double aggregate_observed = 0.0;
  std::optional<Ratio> aggregate_exact;
  double reference_number = 0.0;
  double excess = 0.0;

  double p_value = 0.0;
  bool exact_pvalue = false;
  std::int64_t pvalue_trials = 0;        // 0 when exact
  std::int64_t pvalue_defined_draws = 0; // Monte Carlo only
  SeededStream stream;
};

namespace detail {

struct AggregateCounts {
  std::int64_t hs = 0, he = 0, ms = 0, me = 0;

  bool defined(const Stat& stat) const {
    if (stat.is_difference()) return he > 0 && me > 0;
    return stat.run_on_hits() ? he > 0 : me > 0;
  }

  // Sign of (this's statistic - obs), exact; requires defined().
  int compare(const Stat& stat, const Ratio& obs) const {
    __int128 num, den;
    if (stat.is_difference()) {
      num = static_cast<__int128>(hs) * me - static_cast<__int128>(ms) * he;
      den = static_cast<__int128>(he) * me;
    } else if (stat.run_on_hits()) {
      num = hs;
      den = he;
    } else {
      num = ms;
      den = me;
    }
    const __int128 lhs = num * obs.den();
    const __int128 rhs = static_cast<__int128>(obs.num()) * den;
    return lhs < rhs ? -1 : lhs > rhs ? 1 : 0;
  }
};

inline TrialCounts safe_counts(const Flips& unit, bool run_on_hits, int m) {
  if (m >= unit.size()) return {}; // too short for any trial
  return count_after_run(unit, run_on_hits, m);
}

inline bool in_tail(int cmp, Tail tail) { return tail == Tail::upper ? cmp >= 0 : cmp <= 0; }

// Exact tail mass over all sequences of one unit length, conditioned on the
// statistic being defined.
inline double exact_tail_pvalue(const NullModel& model, const Stat& stat, const Ratio& obs,
                                Tail tail) {
  const int k = model.k;
  const int m = stat.run_length;
  const std::vector<double> w = hit_count_weights(model.p, k);
  double defined_mass = 0.0, tail_mass = 0.0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << k); ++bits) {
    const TrialCounts ch = packed_count_after_run(bits, k, true, m);
    const TrialCounts ct = packed_count_after_run(bits, k, false, m);
    AggregateCounts agg{ch.successes, ch.eligible, ct.successes, ct.eligible};
    if (!agg.defined(stat)) continue;
    const double mass = w[static_cast<std::size_t>(std::popcount(bits))];
    defined_mass += mass;
    if (in_tail(agg.compare(stat, obs), tail)) tail_mass += mass;
  }
  return tail_mass / defined_mass;
}

} // namespace detail

// Observed statistics, the reference number under the chosen convention, and
// a one-sided p-value for the aggregate under the null model.
inline HotHandReport hot_hand_report(const Record& record, const ReferenceSpec& spec,
                                     std::int64_t pvalue_trials, SeededStream stream,
                                     Tail tail = Tail::upper, int threads = 1) {
  spec.model.validate();
  if (record.units.empty()) throw Error(errc::bad_argument, "record has no units");
  if (pvalue_trials < 1) throw Error(errc::bad_argument, "need at least one p-value trial");
  if (spec.stat.is_difference() && spec.policy == UndefinedPolicy::include_as_zero)
    throw Error(errc::policy_unsupported,
                "include-as-zero has no principled sign for the difference statistic");

  const Stat stat = spec.stat;
  const int m = stat.run_length;

  HotHandReport report;
  report.player_id = record.player_id;
  report.spec = spec;
  report.tail = tail;
  report.stream = stream;

  for (const auto& unit : record.units) {
    UnitReport u;
    u.sequence = unit.str();
    u.after_hits = detail::safe_counts(unit, true, m);
    u.after_misses = detail::safe_counts(unit, false, m);
    const detail::AggregateCounts c{u.after_hits.successes, u.after_hits.eligible,
                                    u.after_misses.successes, u.after_misses.eligible};
    if (c.defined(stat)) {
      if (stat.is_difference())
        u.value = Ratio(u.after_hits.successes, u.after_hits.eligible) -
                  Ratio(u.after_misses.successes, u.after_misses.eligible);
      else if (stat.run_on_hits())
        u.value = Ratio(u.after_hits.successes, u.after_hits.eligible);
      else
        u.value = Ratio(u.after_misses.successes, u.after_misses.eligible);
    }
    report.total_flips += unit.size();
    for (int i = 0; i < unit.size(); ++i) report.total_hits += unit.hit(i) ? 1 : 0;
    report.hit_successes += u.after_hits.successes;
    report.hit_eligible += u.after_hits.eligible;
    report.miss_successes += u.after_misses.successes;
    report.miss_eligible += u.after_misses.eligible;
    report.per_unit.push_back(std::move(u));
  }

  const detail::AggregateCounts agg{report.hit_successes, report.hit_eligible,
                                    report.miss_successes, report.miss_eligible};
  if (!agg.defined(stat))
    throw Error(errc::all_undefined, "no unit has an eligible trial for this statistic");

  Ratio observed;
  if (stat.is_difference()) {
    const auto reduced = detail::reduce_to_ratio(
        static_cast<__int128>(agg.hs) * agg.me - static_cast<__int128>(agg.ms) * agg.he,
        static_cast<__int128>(agg.he) * agg.me);
    if (!reduced) throw Error(errc::bad_argument, "record too large for exact aggregation");
    observed = *reduced;
  } else {
    observed = stat.run_on_hits() ? Ratio(agg.hs, agg.he) : Ratio(agg.ms, agg.me);
  }
  report.aggregate_exact = observed;
  report.aggregate_observed = observed.value();

  // Reference: per-length references mixed by unit length. Units too short
  // to ever have a trial carry no reference and are left out of the mix.
  {
    std::map<int, double> by_length;
    double weight_sum = 0.0, mix = 0.0;
    const SeededStream ref_stream{ChunkRng(stream.seed, 0x7265666eull).next(), stream.chunk_size};
    for (const auto& unit : record.units) {
      const int len = unit.size();
      if (len <= m) continue;
      auto it = by_length.find(len);
      if (it == by_length.end())
        it = by_length.emplace(len, reference_number(spec, len, pvalue_trials, ref_stream, threads))
                 .first;
      mix += static_cast<double>(len) * it->second;
      weight_sum += static_cast<double>(len);
    }
    report.reference_number = mix / weight_sum;
  }
  report.excess = report.aggregate_observed - report.reference_number;

  // One-sided tail probability for the aggregate under the null model,
  // conditioned on the statistic being defined.
  const bool exact = record.units.size() == 1 && record.units.front().size() <= 12;
  if (exact) {
    const NullModel unit_model(spec.model.p, record.units.front().size());
    report.p_value = detail::exact_tail_pvalue(unit_model, stat, observed, tail);
    report.exact_pvalue = true;
  } else {
    struct Partial {
      std::int64_t defined = 0;
      std::int64_t in_tail = 0;
    };
    std::vector<int> lengths;
    lengths.reserve(record.units.size());
    for (const auto& unit : record.units) lengths.push_back(unit.size());

    const std::uint64_t n = static_cast<std::uint64_t>(pvalue_trials);
    const std::uint64_t n_chunks = (n + stream.chunk_size - 1) / stream.chunk_size;
    std::vector<Partial> partial(n_chunks);
    detail::for_chunks(n, stream.chunk_size, threads,
                       [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
                         ChunkRng rng(stream.seed, c);
                         std::vector<std::uint8_t> flips;
                         Partial acc;
                         for (std::uint64_t i = lo; i < hi; ++i) {
                           detail::AggregateCounts draw;
                           for (const int len : lengths) {
                             detail::draw_flips(rng, spec.model.p, len, flips);
                             if (m >= len) continue;
                             TrialCounts ch, ct;
                             detail::stream_counts(flips, m, ch, ct);
                             draw.hs += ch.successes;
                             draw.he += ch.eligible;
                             draw.ms += ct.successes;
                             draw.me += ct.eligible;
                           }
                           if (!draw.defined(stat)) continue;
                           ++acc.defined;
                           if (detail::in_tail(draw.compare(stat, observed), tail)) ++acc.in_tail;
                         }
                         partial[c] = acc;
                       });

    Partial total;
    for (const auto& p : partial) {
      total.defined += p.defined;
      total.in_tail += p.in_tail;
    }
    if (total.defined == 0)
      throw Error(errc::zero_defined_draws, "statistic undefined on every synthetic record");
    report.p_value = static_cast<double>(total.in_tail) / static_cast<double>(total.defined);
    report.pvalue_trials = pvalue_trials;
    report.pvalue_defined_draws = total.defined;
  }

  return report;
}

} // namespace streaklab
