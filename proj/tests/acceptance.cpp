// Acceptance suite: runs every release criterion at its pinned tolerance and
// prints one pass/fail line per criterion. Exit code is the failure count.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "streaklab/streaklab.hpp"

namespace sl = streaklab;
using sl::NullModel;
using sl::Ratio;
using sl::Stat;
using sl::UndefinedPolicy;

namespace {

int failures = 0;

struct Criterion {
  explicit Criterion(std::string name) : name_(std::move(name)) {}

  void require(bool ok, const std::string& detail) {
    if (!ok) {
      ok_ = false;
      problems_.push_back(detail);
    }
  }

  void finish(double seconds, double budget_seconds) {
    if (budget_seconds > 0.0 && seconds > budget_seconds) {
      ok_ = false;
      problems_.push_back("runtime " + std::to_string(seconds) + "s exceeds " +
                          std::to_string(budget_seconds) + "s");
    }
    std::printf("[%s] %s (%.2fs)\n", ok_ ? "PASS" : "FAIL", name_.c_str(), seconds);
    for (const auto& p : problems_) std::printf("       %s\n", p.c_str());
    if (!ok_) ++failures;
  }

private:
  std::string name_;
  bool ok_ = true;
  std::vector<std::string> problems_;
};

void run(const std::string& name, double budget_seconds, const std::function<void(Criterion&)>& body) {
  Criterion criterion(name);
  const auto start = std::chrono::steady_clock::now();
  try {
    body(criterion);
  } catch (const std::exception& e) {
    criterion.require(false, std::string("threw: ") + e.what());
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  criterion.finish(seconds, budget_seconds);
}

std::string run_cli(const std::string& args) {
  const std::string cmd = std::string(STREAKLAB_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {};
  std::string out;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  pclose(pipe);
  return out;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

} // namespace

int main() {
  constexpr double len4_mean = 17.0 / 42.0;

  run("criterion 1: length-4 listing reproduced exactly", 1.0, [](Criterion& c) {
    const struct {
      const char* seq;
      int eligible, successes;
      const char* percent;
    } expected[16] = {
        {"HHHH", 3, 3, "100.00"}, {"HHHT", 3, 2, "66.67"}, {"HHTH", 2, 1, "50.00"},
        {"HHTT", 2, 1, "50.00"},  {"HTHH", 2, 1, "50.00"}, {"HTHT", 2, 0, "0.00"},
        {"HTTH", 1, 0, "0.00"},   {"HTTT", 1, 0, "0.00"},  {"THHH", 2, 2, "100.00"},
        {"THHT", 2, 1, "50.00"},  {"THTH", 1, 0, "0.00"},  {"THTT", 1, 0, "0.00"},
        {"TTHH", 1, 1, "100.00"}, {"TTHT", 1, 0, "0.00"},  {"TTTH", 0, 0, "-"},
        {"TTTT", 0, 0, "-"},
    };

    const std::string out = run_cli("enumerate --k 4");
    std::istringstream in(out);
    std::string line;
    std::getline(in, line);
    c.require(line == "sequence\teligible\tsuccesses\tpercent", "header mismatch: " + line);
    for (const auto& row : expected) {
      std::getline(in, line);
      const std::string want = std::string(row.seq) + "\t" + std::to_string(row.eligible) + "\t" +
                               std::to_string(row.successes) + "\t" + row.percent;
      c.require(line == want, "row mismatch: got '" + line + "' want '" + want + "'");
    }
    std::getline(in, line);
    c.require(line == "total\t24\t12\t-", "totals mismatch: " + line);
    std::getline(in, line);
    c.require(line == "average\t-\t-\t40.48", "average mismatch: " + line);

    const auto table = sl::table_one(4);
    c.require(table.average.has_value() && *table.average == Ratio(17, 42),
              "exact average is not 17/42");
  });

  run("criterion 2: pooled mean exactly one half for k=2..20", 30.0, [](Criterion& c) {
    for (int k = 2; k <= 20; ++k) {
      const auto s = sl::enumerate_summary(NullModel(0.5, k), Stat::after_hit_run(1),
                                           UndefinedPolicy::exclude, 2);
      c.require(close(s.pooled_mean, 0.5, 1e-12),
                "k=" + std::to_string(k) + " pooled=" + std::to_string(s.pooled_mean));
    }
  });

  run("criterion 3: length-6 bias is 41.6 percent over 62 sequences", 5.0, [](Criterion& c) {
    const auto s = sl::enumerate_summary(NullModel(0.5, 6), Stat::after_hit_run(1),
                                         UndefinedPolicy::exclude);
    c.require(s.defined_count == 62, "defined=" + std::to_string(s.defined_count));
    c.require(close(s.unweighted_mean, 0.416, 0.0005),
              "mean=" + std::to_string(s.unweighted_mean));
  });

  run("criterion 4: substring counts 8 and 11", 1.0, [](Criterion& c) {
    const auto hh = sl::count_sequences_containing(4, sl::Sequence::parse("HH"));
    const auto ht = sl::count_sequences_containing(4, sl::Sequence::parse("HT"));
    c.require(hh == 8, "count(4,HH)=" + std::to_string(hh));
    c.require(ht == 11, "count(4,HT)=" + std::to_string(ht));
  });

  run("criterion 5: selection games at a million trials", 10.0, [&](Criterion& c) {
    sl::GameConfig config;
    config.model = NullModel(0.5, 4);
    config.bet_hit = true;
    config.trials = 1'000'000;
    config.stream = sl::SeededStream{1};

    const auto t0 = std::chrono::steady_clock::now();
    config.mode = sl::GameConfig::Mode::two_stage;
    const auto two = sl::play_selection_game(config, 2);
    const double two_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.require(two_seconds < 5.0, "two-stage took " + std::to_string(two_seconds) + "s");
    c.require(close(two.win_freq, len4_mean, 4.0 * two.std_error),
              "two-stage freq=" + std::to_string(two.win_freq));

    const auto t1 = std::chrono::steady_clock::now();
    config.mode = sl::GameConfig::Mode::one_stage;
    const auto one = sl::play_selection_game(config, 2);
    const double one_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    c.require(one_seconds < 5.0, "one-stage took " + std::to_string(one_seconds) + "s");
    c.require(close(one.win_freq, 0.5, 4.0 * one.std_error),
              "one-stage freq=" + std::to_string(one.win_freq));
  });

  run("criterion 6: learning never returns to one half", 10.0, [&](Criterion& c) {
    const auto trace = sl::run_gambler_learning(NullModel(0.5, 4), Stat::after_hit_run(1),
                                                1'000'000, sl::SeededStream{3}, 10'000);
    c.require(close(trace.final_estimate, len4_mean, 0.002),
              "final=" + std::to_string(trace.final_estimate));
    for (const auto& [episode, estimate] : trace.running_estimate) {
      if (episode >= 10'000 && estimate >= 0.45)
        c.require(false, "episode " + std::to_string(episode) + " estimate " +
                             std::to_string(estimate) + " not below 0.45");
    }
  });

  run("criterion 7: difference statistic averages to minus one third", 5.0, [](Criterion& c) {
    // independent brute force over the sixteen length-4 strings
    long long oracle_num = 0, oracle_defined = 0;
    for (const auto& seq : oracle::all_sequences(4)) {
      const auto d = oracle::statistic(seq, 'D', 1);
      if (!d) continue;
      ++oracle_defined;
      oracle_num += d->first * (6 / d->second); // common denominator 6
    }
    c.require(oracle_defined == 12, "oracle defined=" + std::to_string(oracle_defined));
    // mean = oracle_num / (6 * defined) must equal -1/3 exactly
    c.require(oracle_num * 3 == -6 * oracle_defined,
              "oracle mean != -1/3: sum/" + std::to_string(6 * oracle_defined) + " with sum " +
                  std::to_string(oracle_num));

    const auto s = sl::enumerate_summary(NullModel(0.5, 4), Stat::difference(1),
                                         UndefinedPolicy::exclude);
    c.require(s.defined_count == 12, "engine defined=" + std::to_string(s.defined_count));
    c.require(s.unweighted_exact.has_value() && *s.unweighted_exact == Ratio(-1, 3),
              "engine exact mean is not -1/3");
    c.require(s.unweighted_mean < 0.0, "mean not negative");

    const auto hit_table = sl::table_one(4, Stat::after_hit_run(1));
    const auto miss_table = sl::table_one(4, Stat::after_miss_run(1));
    c.require(hit_table.total_successes == 12 && miss_table.total_successes == 12,
              "pair totals are not both 12");
  });

  run("criterion 8: bias stays below one half and fades with k", 120.0, [](Criterion& c) {
    double mean4 = 0.0, mean24 = 0.0;
    for (int k = 3; k <= 24; ++k) {
      const auto s = sl::enumerate_summary(NullModel(0.5, k), Stat::after_hit_run(1),
                                           UndefinedPolicy::exclude, 2);
      c.require(s.unweighted_mean < 0.5,
                "k=" + std::to_string(k) + " mean=" + std::to_string(s.unweighted_mean));
      if (k == 4) mean4 = s.unweighted_mean;
      if (k == 24) mean24 = s.unweighted_mean;
    }
    c.require(mean24 > mean4, "mean(24) <= mean(4)");
  });

  run("criterion 9: engine equals the naive oracle", 60.0, [](Criterion& c) {
    for (const double p : {0.3, 0.5, 0.7}) {
      for (int k = 2; k <= 10; ++k) {
        const auto got = sl::enumerate_summary(NullModel(p, k), Stat::after_hit_run(1),
                                               UndefinedPolicy::exclude);
        const auto want = oracle::summarize(k, p, 'H', 1, false);
        c.require(close(got.unweighted_mean, want.unweighted, 1e-12),
                  "unweighted mismatch at p=" + std::to_string(p) + " k=" + std::to_string(k));
        c.require(close(got.pooled_mean, want.pooled, 1e-12), "pooled mismatch");
        c.require(got.defined_count == static_cast<std::uint64_t>(want.defined_count),
                  "defined count mismatch");
        c.require(close(got.defined_probability, want.defined_probability, 1e-12),
                  "defined probability mismatch");
        if (got.histogram.size() != want.histogram.size()) {
          c.require(false, "histogram size mismatch");
          continue;
        }
        for (const auto& [value, mass] : got.histogram) {
          const auto it = want.histogram.find({value.num(), value.den()});
          if (it == want.histogram.end() || !close(mass, it->second, 1e-12)) {
            c.require(false, "histogram mass mismatch at " + value.str());
            break;
          }
        }
      }
    }

    std::mt19937 gen(2024);
    std::uniform_int_distribution<int> len_dist(2, 64);
    std::bernoulli_distribution flip(0.5);
    for (int trial = 0; trial < 1000; ++trial) {
      std::string text(static_cast<std::size_t>(len_dist(gen)), 'T');
      for (auto& ch : text)
        if (flip(gen)) ch = 'H';
      const auto seq = sl::Sequence::parse(text);
      const auto got = sl::count_after_run(seq, true, 1);
      const auto want = oracle::count_after_run(text, 'H', 1);
      if (got.successes != want.successes || got.eligible != want.eligible) {
        c.require(false, "per-sequence mismatch on " + text);
        break;
      }
    }
  });

  run("criterion 10: byte-identical output for 1, 2 and 8 threads", 60.0, [](Criterion& c) {
    {
      std::ofstream record("acceptance_record.txt");
      record << "curry,HHTTHHTTHHHTTTH\ncurry,THHTHHT\n";
    }
    const std::string commands[] = {
        "game --mode two-stage --k 4 --bet H --trials 1000000 --seed 42",
        "game --mode one-stage --k 4 --bet H --trials 1000000 --seed 42",
        "learn --k 4 --episodes 200000 --seed 3 --stride 10000",
        "test acceptance_record.txt --p 0.5 --trials 100000 --seed 5",
    };
    for (const auto& cmd : commands) {
      const std::string base = run_cli(cmd);
      c.require(!base.empty(), "no output from: " + cmd);
      c.require(run_cli(cmd) == base, "rerun differs: " + cmd);
      for (const int threads : {1, 2, 8}) {
        const std::string out = run_cli(cmd + " --threads " + std::to_string(threads));
        c.require(out == base, "threads=" + std::to_string(threads) + " differs: " + cmd);
      }
    }
  });

  if (failures == 0) std::printf("all criteria passed\n");
  return failures;
}
