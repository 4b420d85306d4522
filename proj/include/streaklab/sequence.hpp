#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streaklab/error.hpp"
#include "streaklab/ratio.hpp"

namespace streaklab {

// ---------------------------------------------------------------------------
// Conditioning statistic: success frequency after a run of m hits, after a
// run of m misses, or the difference of the two.
// ---------------------------------------------------------------------------

enum class StatKind { after_hit_run, after_miss_run, difference };

struct Stat {
  StatKind kind = StatKind::after_hit_run;
  int run_length = 1; // m >= 1

  static Stat after_hit_run(int m = 1) { return validated({StatKind::after_hit_run, m}); }
  static Stat after_miss_run(int m = 1) { return validated({StatKind::after_miss_run, m}); }
  static Stat difference(int m = 1) { return validated({StatKind::difference, m}); }

  bool is_difference() const { return kind == StatKind::difference; }

  // The flip value whose runs condition eligibility (meaningless for
  // difference, which uses both sides).
  bool run_on_hits() const { return kind != StatKind::after_miss_run; }

  std::string name() const {
    switch (kind) {
      case StatKind::after_hit_run: return "after-hit-run";
      case StatKind::after_miss_run: return "after-miss-run";
      case StatKind::difference: return "difference";
    }
    return "?";
  }

private:
  static Stat validated(Stat s) {
    if (s.run_length < 1)
      throw Error(errc::bad_argument, "run length must be at least 1");
    return s;
  }
};

// ---------------------------------------------------------------------------
// Sequence representations. `Sequence` bit-packs up to 64 flips into one word
// and is the unit of the enumeration engine; `Flips` is the unpacked form for
// season-scale records (up to 65536 flips). Both expose size()/hit(i) so the
// statistics below work on either.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t low_mask(int k) {
  return k >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1;
}

// Trims ASCII whitespace, validates H/T characters (case-insensitive) and
// calls out(bool is_hit) once per flip. Returns the flip count.
template <typename Out>
int parse_flip_text(std::string_view text, std::size_t max_len, Out out) {
  std::size_t begin = 0, end = text.size();
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
  };
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  if (begin == end)
    throw Error(errc::empty_input, "empty flip sequence");
  if (end - begin > max_len)
    throw Error(errc::too_long, "flip sequence longer than " + std::to_string(max_len));
  for (std::size_t i = begin; i < end; ++i) {
    const char c = text[i];
    if (c == 'H' || c == 'h') {
      out(true);
    } else if (c == 'T' || c == 't') {
      out(false);
    } else {
      const std::size_t pos = i - begin + 1;
      throw Error(errc::invalid_character,
                  "invalid character '" + std::string(1, c) + "' at position " +
                      std::to_string(pos),
                  pos);
    }
  }
  return static_cast<int>(end - begin);
}

} // namespace detail

class Sequence {
public:
  static constexpr int max_length = 64;

  static Sequence parse(std::string_view text) {
    std::uint64_t bits = 0;
    int i = 0;
    const int len = detail::parse_flip_text(text, max_length, [&](bool hit) {
      if (hit) bits |= std::uint64_t{1} << i;
      ++i;
    });
    return Sequence(bits, len);
  }

  Sequence(std::uint64_t bits, int length) : bits_(bits & detail::low_mask(length)), len_(length) {
    if (length < 1 || length > max_length)
      throw Error(errc::bad_argument, "sequence length must be in 1..64");
  }

  int size() const { return len_; }
  bool hit(int i) const { return (bits_ >> i) & 1u; }
  std::uint64_t bits() const { return bits_; }

  Sequence complement() const { return Sequence(~bits_, len_); }

  std::string str() const {
    std::string s(static_cast<std::size_t>(len_), 'T');
    for (int i = 0; i < len_; ++i)
      if (hit(i)) s[static_cast<std::size_t>(i)] = 'H';
    return s;
  }

  bool operator==(const Sequence&) const = default;

private:
  std::uint64_t bits_;
  int len_;
};

class Flips {
public:
  static constexpr std::size_t max_length = 65536;

  static Flips parse(std::string_view text) {
    Flips f;
    f.hits_.reserve(text.size());
    detail::parse_flip_text(text, max_length, [&](bool hit) { f.hits_.push_back(hit ? 1 : 0); });
    return f;
  }

  explicit Flips(std::vector<std::uint8_t> hits = {}) : hits_(std::move(hits)) {}

  int size() const { return static_cast<int>(hits_.size()); }
  bool hit(int i) const { return hits_[static_cast<std::size_t>(i)] != 0; }

  Flips complement() const {
    Flips f = *this;
    for (auto& b : f.hits_) b = b ? 0 : 1;
    return f;
  }

  std::string str() const {
    std::string s(hits_.size(), 'T');
    for (std::size_t i = 0; i < hits_.size(); ++i)
      if (hits_[i]) s[i] = 'H';
    return s;
  }

  bool operator==(const Flips&) const = default;

private:
  std::vector<std::uint8_t> hits_;
};

// ---------------------------------------------------------------------------
// Per-sequence statistics.
//
// A trial index t (1-based) is eligible when the m flips before it are all
// hits (after-hit-run) or all misses (after-miss-run); the flip at t itself
// is the trial's outcome, so the last position can be an outcome but never a
// conditioning flip.
// ---------------------------------------------------------------------------

struct TrialCounts {
  std::int64_t successes = 0;
  std::int64_t eligible = 0;
};

namespace detail {

inline void check_run_length(int m, int length) {
  if (m < 1) throw Error(errc::bad_argument, "run length must be at least 1");
  if (m >= length)
    throw Error(errc::run_too_long, "run length " + std::to_string(m) +
                                        " must be shorter than the sequence (" +
                                        std::to_string(length) + ")");
}

} // namespace detail

template <typename Seq>
TrialCounts count_after_run(const Seq& seq, bool run_on_hits, int m) {
  detail::check_run_length(m, seq.size());
  TrialCounts c;
  int run = 0; // consecutive conditioning flips ending just before position i
  for (int i = 0; i < seq.size(); ++i) {
    const bool h = seq.hit(i);
    if (run >= m) {
      ++c.eligible;
      if (h) ++c.successes;
    }
    run = (h == run_on_hits) ? run + 1 : 0;
  }
  return c;
}

// 1-based eligible trial indices, ascending.
template <typename Seq>
std::vector<int> eligible_trials(const Seq& seq, const Stat& stat) {
  if (stat.is_difference())
    throw Error(errc::bad_argument, "eligible trials are per side, not defined for difference");
  detail::check_run_length(stat.run_length, seq.size());
  std::vector<int> out;
  int run = 0;
  for (int i = 0; i < seq.size(); ++i) {
    if (run >= stat.run_length) out.push_back(i + 1);
    run = (seq.hit(i) == stat.run_on_hits()) ? run + 1 : 0;
  }
  return out;
}

// Success frequency among eligible trials; nullopt when no trial is eligible.
template <typename Seq>
std::optional<Ratio> conditional_freq(const Seq& seq, const Stat& stat) {
  if (stat.is_difference())
    throw Error(errc::bad_argument, "use d_statistic for the difference statistic");
  const TrialCounts c = count_after_run(seq, stat.run_on_hits(), stat.run_length);
  if (c.eligible == 0) return std::nullopt;
  return Ratio(c.successes, c.eligible);
}

// Hit-run-side frequency minus miss-run-side frequency, in [-1, 1];
// nullopt when either side has no eligible trial.
template <typename Seq>
std::optional<Ratio> d_statistic(const Seq& seq, int m) {
  const auto hit_side = conditional_freq(seq, Stat::after_hit_run(m));
  const auto miss_side = conditional_freq(seq, Stat::after_miss_run(m));
  if (!hit_side || !miss_side) return std::nullopt;
  return *hit_side - *miss_side;
}

template <typename Seq>
std::optional<Ratio> evaluate_stat(const Seq& seq, const Stat& stat) {
  return stat.is_difference() ? d_statistic(seq, stat.run_length) : conditional_freq(seq, stat);
}

// Word-parallel counts for a bit-packed sequence (flip i lives at bit i).
// Hot path of the enumeration engine; agrees with count_after_run.
inline TrialCounts packed_count_after_run(std::uint64_t bits, int k, bool run_on_hits, int m) {
  const std::uint64_t base = run_on_hits ? bits : (~bits & detail::low_mask(k));
  std::uint64_t runs = base;
  for (int j = 1; j < m; ++j) runs &= base >> j;
  // bit j of runs: flips j..j+m-1 all match, so trial index j+m is eligible
  const std::uint64_t eligible = runs & detail::low_mask(k - m);
  return {static_cast<std::int64_t>(std::popcount(eligible & (bits >> m))),
          static_cast<std::int64_t>(std::popcount(eligible))};
}

} // namespace streaklab
