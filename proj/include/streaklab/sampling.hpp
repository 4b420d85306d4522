#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "streaklab/error.hpp"
#include "streaklab/exact.hpp"
#include "streaklab/parallel.hpp"
#include "streaklab/sequence.hpp"

namespace streaklab {

// Generator identifier echoed in all stochastic output. Bump when the
// underlying bit stream changes, since archived results pin it.
inline constexpr char generator_id[] = "splitmix64-v1";

// Reproducibility contract for Monte Carlo runs: trials are cut into fixed
// chunks and chunk c draws from a substream derived from (seed, c) alone, so
// results are identical for any worker count or schedule.
struct SeededStream {
  std::uint64_t seed = 0;
  std::uint32_t chunk_size = 65536;
};

// Counter-based splitmix64 substream.
class ChunkRng {
public:
  ChunkRng(std::uint64_t seed, std::uint64_t chunk)
      : state_(mix(seed ^ mix(chunk * golden + golden))) {}

  std::uint64_t next() {
    state_ += golden;
    return mix(state_);
  }

  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_unit() < p; }

  // Unbiased uniform draw from [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t bound = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= bound);
    return r % n;
  }

private:
  static constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ull;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

namespace detail {

inline void draw_flips(ChunkRng& rng, double p, int k, std::vector<std::uint8_t>& out) {
  out.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = rng.bernoulli(p) ? 1 : 0;
}

// Both sides' trial counts in one pass.
inline void stream_counts(const std::vector<std::uint8_t>& flips, int m, TrialCounts& after_hits,
                          TrialCounts& after_misses) {
  after_hits = {};
  after_misses = {};
  int run_h = 0, run_t = 0;
  for (const std::uint8_t f : flips) {
    if (run_h >= m) {
      ++after_hits.eligible;
      after_hits.successes += f;
    }
    if (run_t >= m) {
      ++after_misses.eligible;
      after_misses.successes += f;
    }
    if (f) {
      ++run_h;
      run_t = 0;
    } else {
      ++run_t;
      run_h = 0;
    }
  }
}

// 0-based outcome positions eligible on the hit-run side.
inline void collect_hit_run_trials(const std::vector<std::uint8_t>& flips, int m,
                                   std::vector<int>& out) {
  out.clear();
  int run = 0;
  for (int i = 0; i < static_cast<int>(flips.size()); ++i) {
    if (run >= m) out.push_back(i);
    run = flips[static_cast<std::size_t>(i)] ? run + 1 : 0;
  }
}

// Drawn statistic as a double; NaN-free optional-style via `defined` flag.
struct DrawnValue {
  bool defined = false;
  double value = 0.0;
};

inline DrawnValue eval_drawn(const std::vector<std::uint8_t>& flips, const Stat& stat) {
  TrialCounts h, t;
  stream_counts(flips, stat.run_length, h, t);
  if (stat.is_difference()) {
    if (h.eligible == 0 || t.eligible == 0) return {};
    return {true, static_cast<double>(h.successes) / static_cast<double>(h.eligible) -
                      static_cast<double>(t.successes) / static_cast<double>(t.eligible)};
  }
  const TrialCounts& side = stat.run_on_hits() ? h : t;
  if (side.eligible == 0) return {};
  return {true, static_cast<double>(side.successes) / static_cast<double>(side.eligible)};
}

inline void check_sampleable(const NullModel& model, int run_length) {
  model.validate();
  if (run_length >= model.k)
    throw Error(errc::run_too_long, "run length must be shorter than the sequence length");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Monte Carlo estimate of the unweighted mean, for any k the exact engine
// cannot reach.
// ---------------------------------------------------------------------------

struct SampleEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t trials = 0;
  std::int64_t defined_draws = 0;
};

inline SampleEstimate sample_unweighted_mean(const NullModel& model, const Stat& stat,
                                             UndefinedPolicy policy, std::int64_t trials,
                                             SeededStream stream, int threads = 1) {
  detail::check_sampleable(model, stat.run_length);
  if (trials < 1) throw Error(errc::bad_argument, "need at least one trial");
  if (stat.is_difference() && policy == UndefinedPolicy::include_as_zero)
    throw Error(errc::policy_unsupported,
                "include-as-zero has no principled sign for the difference statistic");

  struct Partial {
    std::int64_t defined = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  const std::uint64_t n = static_cast<std::uint64_t>(trials);
  const std::uint64_t n_chunks = (n + stream.chunk_size - 1) / stream.chunk_size;
  std::vector<Partial> partial(n_chunks);

  detail::for_chunks(n, stream.chunk_size, threads,
                     [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
                       ChunkRng rng(stream.seed, c);
                       std::vector<std::uint8_t> flips;
                       Partial acc;
                       for (std::uint64_t i = lo; i < hi; ++i) {
                         detail::draw_flips(rng, model.p, model.k, flips);
                         const detail::DrawnValue v = detail::eval_drawn(flips, stat);
                         if (!v.defined) continue;
                         ++acc.defined;
                         acc.sum += v.value;
                         acc.sum_sq += v.value * v.value;
                       }
                       partial[c] = acc;
                     });

  Partial total;
  for (const auto& p : partial) { // ascending chunk order, bit-stable
    total.defined += p.defined;
    total.sum += p.sum;
    total.sum_sq += p.sum_sq;
  }

  if (total.defined == 0)
    throw Error(errc::zero_defined_draws, "statistic was undefined on every draw");

  SampleEstimate est;
  est.trials = trials;
  est.defined_draws = total.defined;
  const double denom = policy == UndefinedPolicy::exclude ? static_cast<double>(total.defined)
                                                          : static_cast<double>(trials);
  est.value = total.sum / denom;
  const double var = denom > 1.0
                         ? std::max(0.0, (total.sum_sq - total.sum * total.sum / denom) / (denom - 1.0))
                         : 0.0;
  est.std_error = std::sqrt(var / denom);
  return est;
}

// ---------------------------------------------------------------------------
// Selection games. Two-stage picks a qualifying sequence first, then an
// eligible position inside it: its win frequency tracks the unweighted mean.
// One-stage picks uniformly among all eligible positions of the pooled
// population (realized by acceptance sampling), so it tracks plain p.
// ---------------------------------------------------------------------------

struct GameConfig {
  enum class Mode { two_stage, one_stage };
  Mode mode = Mode::two_stage;
  NullModel model;
  bool bet_hit = true;
  std::int64_t trials = 1'000'000;
  SeededStream stream;
  int run_length = 1;
};

struct GameResult {
  std::int64_t trials = 0;
  std::int64_t wins = 0;
  double win_freq = 0.0;
  double std_error = 0.0;
  std::int64_t rejected_draws = 0;
};

inline GameResult play_selection_game(const GameConfig& config, int threads = 1) {
  detail::check_sampleable(config.model, config.run_length);
  if (config.trials < 1) throw Error(errc::bad_argument, "need at least one trial");

  const int k = config.model.k;
  const int m = config.run_length;
  const double p = config.model.p;
  const bool one_stage = config.mode == GameConfig::Mode::one_stage;
  const std::uint64_t positions = static_cast<std::uint64_t>(k - m);

  struct Partial {
    std::int64_t wins = 0;
    std::int64_t rejected = 0;
  };
  const std::uint64_t n = static_cast<std::uint64_t>(config.trials);
  const std::uint64_t n_chunks = (n + config.stream.chunk_size - 1) / config.stream.chunk_size;
  std::vector<Partial> partial(n_chunks);

  detail::for_chunks(n, config.stream.chunk_size, threads,
                     [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
                       ChunkRng rng(config.stream.seed, c);
                       std::vector<std::uint8_t> flips;
                       std::vector<int> eligible;
                       Partial acc;
                       for (std::uint64_t i = lo; i < hi; ++i) {
                         for (;;) {
                           detail::draw_flips(rng, p, k, flips);
                           detail::collect_hit_run_trials(flips, m, eligible);
                           if (one_stage) {
                             // keep the sequence with probability eligible/(k-m)
                             if (rng.next_below(positions) < eligible.size()) break;
                           } else if (!eligible.empty()) {
                             break;
                           }
                           ++acc.rejected;
                         }
                         const int pos = eligible[rng.next_below(eligible.size())];
                         const bool hit = flips[static_cast<std::size_t>(pos)] != 0;
                         if (hit == config.bet_hit) ++acc.wins;
                       }
                       partial[c] = acc;
                     });

  GameResult result;
  result.trials = config.trials;
  for (const auto& part : partial) {
    result.wins += part.wins;
    result.rejected_draws += part.rejected;
  }
  result.win_freq = static_cast<double>(result.wins) / static_cast<double>(result.trials);
  result.std_error =
      std::sqrt(result.win_freq * (1.0 - result.win_freq) / static_cast<double>(result.trials));
  return result;
}

// ---------------------------------------------------------------------------
// Belief formation by unweighted averaging: an observer keeps a running mean
// of the per-sequence statistic over everything they watch. The running mean
// converges to the biased unweighted average, not to p, no matter how long
// they watch.
// ---------------------------------------------------------------------------

struct LearningTrace {
  std::int64_t episodes = 0;
  std::vector<std::pair<std::int64_t, double>> running_estimate; // (episode, mean so far)
  double final_estimate = 0.0;
  std::int64_t skipped_episodes = 0;
};

inline LearningTrace run_gambler_learning(const NullModel& model, const Stat& stat,
                                          std::int64_t episodes, SeededStream stream,
                                          std::int64_t trace_stride,
                                          UndefinedPolicy policy = UndefinedPolicy::exclude) {
  detail::check_sampleable(model, stat.run_length);
  if (episodes < 1) throw Error(errc::bad_argument, "need at least one episode");
  if (trace_stride < 1) throw Error(errc::bad_argument, "trace stride must be positive");
  if (stat.is_difference() && policy == UndefinedPolicy::include_as_zero)
    throw Error(errc::policy_unsupported,
                "include-as-zero has no principled sign for the difference statistic");

  LearningTrace trace;
  trace.episodes = episodes;

  // Inherently sequential: the cumulative mean is consumed in episode order.
  // Substreams still advance chunk by chunk so the draws match the chunked
  // engines for the same (seed, chunk_size).
  double sum = 0.0;
  std::int64_t defined = 0;
  double current = 0.0;
  const std::uint64_t n = static_cast<std::uint64_t>(episodes);
  detail::for_chunks(n, stream.chunk_size, 1,
                     [&](std::uint64_t c, std::uint64_t lo, std::uint64_t hi) {
                       ChunkRng rng(stream.seed, c);
                       std::vector<std::uint8_t> flips;
                       for (std::uint64_t i = lo; i < hi; ++i) {
                         detail::draw_flips(rng, model.p, model.k, flips);
                         const detail::DrawnValue v = detail::eval_drawn(flips, stat);
                         if (v.defined) {
                           ++defined;
                           sum += v.value;
                         } else {
                           ++trace.skipped_episodes;
                         }
                         const std::int64_t episode = static_cast<std::int64_t>(i) + 1;
                         const std::int64_t divisor =
                             policy == UndefinedPolicy::exclude ? defined : episode;
                         if (divisor > 0) current = sum / static_cast<double>(divisor);
                         if (episode % trace_stride == 0 && divisor > 0)
                           trace.running_estimate.emplace_back(episode, current);
                       }
                     });

  if (defined == 0 && policy == UndefinedPolicy::exclude)
    throw Error(errc::zero_defined_draws, "statistic was undefined in every episode");

  trace.final_estimate = current;
  if (trace.running_estimate.empty() || trace.running_estimate.back().first != episodes)
    trace.running_estimate.emplace_back(episodes, current);
  return trace;
}

} // namespace streaklab
