// streaklab: conditional streak statistics on hit/miss sequences.
//
// Subcommands: enumerate, bias, game, learn, test, stat. Every stochastic
// command embeds its seed and generator in the output and reproduces
// byte-identical results for the same flags, regardless of --threads.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "streaklab/streaklab.hpp"

namespace sl = streaklab;
using json = nlohmann::ordered_json;

namespace {

struct GlobalOpts {
  std::string format = "tsv";
  std::uint64_t seed = 0;
  int threads = 1;
};

int exit_code_for(const sl::Error& e) {
  switch (e.code()) {
    case sl::errc::k_too_large:
    case sl::errc::parse_error:
    case sl::errc::empty_file:
    case sl::errc::all_undefined:
    case sl::errc::zero_defined_draws:
    case sl::errc::pattern_too_long:
    case sl::errc::invalid_character:
    case sl::errc::empty_input:
    case sl::errc::too_long:
      return 2; // data / limit
    default:
      return 1; // usage
  }
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string pct2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v * 100.0);
  return buf;
}

sl::Stat stat_from_flags(const std::string& name, int m) {
  if (name == "hh") return sl::Stat::after_hit_run(m);
  if (name == "th") return sl::Stat::after_miss_run(m);
  return sl::Stat::difference(m);
}

sl::UndefinedPolicy policy_from_flag(const std::string& name) {
  return name == "include-zero" ? sl::UndefinedPolicy::include_as_zero
                                : sl::UndefinedPolicy::exclude;
}

json ratio_json(const std::optional<sl::Ratio>& r) {
  if (!r) return nullptr;
  return json{{"num", r->num()}, {"den", r->den()}};
}

std::string ratio_tsv(const std::optional<sl::Ratio>& r) { return r ? r->str() : "-"; }

void emit(const json& doc) { std::cout << doc.dump(2) << "\n"; }

// ---------------------------------------------------------------------------

int cmd_enumerate(const GlobalOpts& g, int k, const std::string& stat_name, int m,
                  const std::string& policy_name) {
  if (k > 16) {
    std::cerr << "--k: k exceeds presentation limit 16\n";
    return 1;
  }
  if (stat_name == "d") {
    std::cerr << "--stat: the listing needs a single-sided statistic (hh or th)\n";
    return 1;
  }
  const sl::TableOne table =
      sl::table_one(k, stat_from_flags(stat_name, m), policy_from_flag(policy_name));

  if (g.format == "json") {
    json rows = json::array();
    for (const auto& row : table.rows) {
      rows.push_back({{"sequence", row.seq.str()},
                      {"eligible", row.eligible},
                      {"successes", row.successes},
                      {"percent", row.value ? json(row.value->value() * 100.0) : json(nullptr)},
                      {"value", ratio_json(row.value)}});
    }
    emit(json{{"command", "enumerate"},
              {"k", k},
              {"stat", table.stat.name()},
              {"run_length", m},
              {"policy", policy_name},
              {"rows", rows},
              {"total_eligible", table.total_eligible},
              {"total_successes", table.total_successes},
              {"defined_count", table.defined_count},
              {"average",
               table.average
                   ? json{{"percent", table.average->value() * 100.0}, {"value", ratio_json(table.average)}}
                   : json(nullptr)}});
    return 0;
  }

  std::cout << "sequence\teligible\tsuccesses\tpercent\n";
  for (const auto& row : table.rows) {
    std::cout << row.seq.str() << '\t' << row.eligible << '\t' << row.successes << '\t'
              << (row.value ? pct2(row.value->value()) : "-") << '\n';
  }
  std::cout << "total\t" << table.total_eligible << '\t' << table.total_successes << "\t-\n";
  std::cout << "average\t-\t-\t" << (table.average ? pct2(table.average->value()) : "-") << '\n';
  return 0;
}

int cmd_bias(const GlobalOpts& g, int k_min, int k_max, double p, const std::string& stat_name,
             int m, const std::string& policy_name) {
  const auto rows = sl::bias_table(k_min, k_max, p, stat_from_flags(stat_name, m),
                                   policy_from_flag(policy_name), g.threads);

  if (g.format == "json") {
    json out = json::array();
    for (const auto& row : rows) {
      out.push_back({{"k", row.model.k},
                     {"unweighted_mean", row.unweighted_mean},
                     {"pooled_mean", row.pooled_mean},
                     {"defined_count", row.defined_count},
                     {"defined_probability", row.defined_probability},
                     {"unweighted_exact", ratio_json(row.unweighted_exact)}});
    }
    emit(json{{"command", "bias"},
              {"p", p},
              {"stat", stat_from_flags(stat_name, m).name()},
              {"run_length", m},
              {"policy", policy_name},
              {"rows", out}});
    return 0;
  }

  std::cout << "k\tunweighted_mean\tpooled_mean\tdefined_count\tdefined_probability\tunweighted_exact\n";
  for (const auto& row : rows) {
    std::cout << row.model.k << '\t' << fixed6(row.unweighted_mean) << '\t'
              << fixed6(row.pooled_mean) << '\t' << row.defined_count << '\t'
              << fixed6(row.defined_probability) << '\t' << ratio_tsv(row.unweighted_exact)
              << '\n';
  }
  return 0;
}

int cmd_game(const GlobalOpts& g, const std::string& mode, int k, double p,
             const std::string& bet, std::int64_t trials, int m) {
  sl::GameConfig config;
  config.mode = mode == "one-stage" ? sl::GameConfig::Mode::one_stage
                                    : sl::GameConfig::Mode::two_stage;
  config.model = sl::NullModel(p, k);
  config.bet_hit = bet == "H" || bet == "h";
  config.trials = trials;
  config.stream = sl::SeededStream{g.seed};
  config.run_length = m;

  const sl::GameResult result = sl::play_selection_game(config, g.threads);

  if (g.format == "json") {
    emit(json{{"command", "game"},
              {"mode", mode},
              {"k", k},
              {"p", p},
              {"run_length", m},
              {"bet", config.bet_hit ? "H" : "T"},
              {"trials", result.trials},
              {"wins", result.wins},
              {"win_freq", result.win_freq},
              {"std_error", result.std_error},
              {"rejected_draws", result.rejected_draws},
              {"seed", g.seed},
              {"chunk_size", config.stream.chunk_size},
              {"generator", sl::generator_id}});
    return 0;
  }

  std::cout << "mode\tk\tp\tm\tbet\ttrials\twins\twin_freq\tstd_error\trejected_draws\tseed\tchunk_size\tgenerator\n";
  std::cout << mode << '\t' << k << '\t' << fixed6(p) << '\t' << m << '\t'
            << (config.bet_hit ? "H" : "T") << '\t' << result.trials << '\t' << result.wins
            << '\t' << fixed6(result.win_freq) << '\t' << fixed6(result.std_error) << '\t'
            << result.rejected_draws << '\t' << g.seed << '\t' << config.stream.chunk_size
            << '\t' << sl::generator_id << '\n';
  return 0;
}

int cmd_learn(const GlobalOpts& g, int k, double p, const std::string& stat_name, int m,
              const std::string& policy_name, std::int64_t episodes, std::int64_t stride) {
  const sl::SeededStream stream{g.seed};
  const sl::LearningTrace trace =
      sl::run_gambler_learning(sl::NullModel(p, k), stat_from_flags(stat_name, m), episodes,
                               stream, stride, policy_from_flag(policy_name));

  if (g.format == "json") {
    json snapshots = json::array();
    for (const auto& [episode, estimate] : trace.running_estimate)
      snapshots.push_back({{"episode", episode}, {"estimate", estimate}});
    emit(json{{"command", "learn"},
              {"k", k},
              {"p", p},
              {"stat", stat_from_flags(stat_name, m).name()},
              {"run_length", m},
              {"policy", policy_name},
              {"episodes", trace.episodes},
              {"stride", stride},
              {"skipped_episodes", trace.skipped_episodes},
              {"final_estimate", trace.final_estimate},
              {"snapshots", snapshots},
              {"seed", g.seed},
              {"chunk_size", stream.chunk_size},
              {"generator", sl::generator_id}});
    return 0;
  }

  std::cout << "# seed=" << g.seed << "\tchunk_size=" << stream.chunk_size
            << "\tgenerator=" << sl::generator_id << "\tk=" << k << "\tp=" << fixed6(p)
            << "\tstat=" << stat_from_flags(stat_name, m).name() << "\tm=" << m
            << "\tpolicy=" << policy_name << "\tepisodes=" << trace.episodes
            << "\tstride=" << stride << "\tskipped=" << trace.skipped_episodes
            << "\tfinal=" << fixed6(trace.final_estimate) << '\n';
  std::cout << "episode\testimate\n";
  for (const auto& [episode, estimate] : trace.running_estimate)
    std::cout << episode << '\t' << fixed6(estimate) << '\n';
  return 0;
}

int cmd_test(const GlobalOpts& g, const std::string& input, std::optional<double> p_override,
             const std::string& convention, const std::string& stat_name, int m,
             const std::string& policy_name, std::int64_t trials, const std::string& tail_name) {
  std::vector<sl::Record> records;
  if (input == "-") {
    records = sl::ingest(std::cin);
  } else {
    std::ifstream file(input);
    if (!file) throw sl::Error(sl::errc::parse_error, "cannot open input file: " + input);
    records = sl::ingest(file);
  }

  const sl::Tail tail = tail_name == "lower" ? sl::Tail::lower : sl::Tail::upper;
  const sl::SeededStream stream{g.seed};

  std::vector<sl::HotHandReport> reports;
  for (const auto& record : records) {
    double p;
    if (p_override) {
      p = *p_override;
    } else {
      p = sl::empirical_hit_rate(record);
      if (!(p > 0.0 && p < 1.0))
        throw sl::Error(sl::errc::all_undefined,
                        "record has a degenerate hit rate (" + fixed6(p) +
                            "); pass --p to choose the null model");
    }
    sl::ReferenceSpec spec;
    spec.convention = convention == "pooled" ? sl::Convention::pooled_long_run
                                             : sl::Convention::per_sequence_unweighted;
    spec.model = sl::NullModel(p, 4); // k is per-unit
    spec.stat = stat_from_flags(stat_name, m);
    spec.policy = policy_from_flag(policy_name);
    reports.push_back(sl::hot_hand_report(record, spec, trials, stream, tail, g.threads));
  }

  if (g.format == "json") {
    json out = json::array();
    for (const auto& r : reports) {
      json units = json::array();
      for (const auto& u : r.per_unit) {
        units.push_back({{"sequence", u.sequence},
                         {"hit_eligible", u.after_hits.eligible},
                         {"hit_successes", u.after_hits.successes},
                         {"miss_eligible", u.after_misses.eligible},
                         {"miss_successes", u.after_misses.successes},
                         {"value", ratio_json(u.value)}});
      }
      out.push_back(
          {{"player", r.player_id ? json(*r.player_id) : json(nullptr)},
           {"p", r.spec.model.p},
           {"units", units},
           {"aggregate",
            {{"flips", r.total_flips},
             {"hits", r.total_hits},
             {"hit_eligible", r.hit_eligible},
             {"hit_successes", r.hit_successes},
             {"miss_eligible", r.miss_eligible},
             {"miss_successes", r.miss_successes},
             {"observed", r.aggregate_observed},
             {"exact", ratio_json(r.aggregate_exact)}}},
           {"reference_number", r.reference_number},
           {"reference_mixing", "length-weighted"}, // artifact convention, not a null-model fact
           {"excess", r.excess},
           {"p_value", r.p_value},
           {"tail", tail_name},
           {"conditioning", "defined-only"},
           {"method", r.exact_pvalue
                          ? json{{"kind", "exact"}}
                          : json{{"kind", "monte-carlo"},
                                 {"trials", r.pvalue_trials},
                                 {"defined_draws", r.pvalue_defined_draws}}}});
    }
    emit(json{{"command", "test"},
              {"convention", convention},
              {"stat", stat_from_flags(stat_name, m).name()},
              {"run_length", m},
              {"policy", policy_name},
              {"tail", tail_name},
              {"seed", g.seed},
              {"chunk_size", stream.chunk_size},
              {"generator", sl::generator_id},
              {"reports", out}});
    return 0;
  }

  std::cout << "# convention=" << convention << "\tstat=" << stat_from_flags(stat_name, m).name()
            << "\tm=" << m << "\tpolicy=" << policy_name << "\ttail=" << tail_name
            << "\ttrials=" << trials << "\tseed=" << g.seed << "\tchunk_size=" << stream.chunk_size
            << "\tgenerator=" << sl::generator_id
            << "\tconditioning=defined-only\treference_mixing=length-weighted\n";
  std::cout << "player\tunits\tflips\thits\tp\teligible\tsuccesses\tobserved\treference\texcess\tp_value\tmethod\n";
  for (const auto& r : reports) {
    const bool hit_side = !r.spec.stat.is_difference() && r.spec.stat.run_on_hits();
    const bool miss_side = !r.spec.stat.is_difference() && !r.spec.stat.run_on_hits();
    std::cout << (r.player_id ? *r.player_id : "-") << '\t' << r.per_unit.size() << '\t'
              << r.total_flips << '\t' << r.total_hits << '\t' << fixed6(r.spec.model.p) << '\t';
    if (hit_side)
      std::cout << r.hit_eligible << '\t' << r.hit_successes;
    else if (miss_side)
      std::cout << r.miss_eligible << '\t' << r.miss_successes;
    else
      std::cout << "-\t-";
    std::cout << '\t' << fixed6(r.aggregate_observed) << '\t' << fixed6(r.reference_number)
              << '\t' << fixed6(r.excess) << '\t' << fixed6(r.p_value) << '\t'
              << (r.exact_pvalue ? "exact" : "monte-carlo") << '\n';
  }
  return 0;
}

int cmd_stat(const GlobalOpts& g, const std::vector<std::string>& inputs,
             const std::string& stat_name, int m) {
  std::vector<std::string> texts;
  for (const auto& in : inputs) {
    if (in == "-") {
      std::string token;
      while (std::cin >> token) texts.push_back(token);
    } else {
      texts.push_back(in);
    }
  }
  if (texts.empty()) throw sl::Error(sl::errc::empty_input, "no sequences given");

  const sl::Stat stat = stat_from_flags(stat_name, m);

  struct Row {
    std::string text;
    sl::TrialCounts counts;
    std::optional<sl::Ratio> value;
  };
  std::vector<Row> rows;
  for (const auto& text : texts) {
    const sl::Flips flips = sl::Flips::parse(text);
    Row row;
    row.text = flips.str();
    if (!stat.is_difference())
      row.counts = sl::count_after_run(flips, stat.run_on_hits(), m);
    row.value = sl::evaluate_stat(flips, stat);
    rows.push_back(std::move(row));
  }

  if (g.format == "json") {
    json out = json::array();
    for (const auto& row : rows) {
      out.push_back({{"sequence", row.text},
                     {"stat", stat.name()},
                     {"run_length", m},
                     {"eligible", stat.is_difference() ? json(nullptr) : json(row.counts.eligible)},
                     {"successes", stat.is_difference() ? json(nullptr) : json(row.counts.successes)},
                     {"value", row.value ? json(row.value->value()) : json(nullptr)},
                     {"exact", ratio_json(row.value)}});
    }
    emit(json{{"command", "stat"}, {"rows", out}});
    return 0;
  }

  std::cout << "sequence\tstat\tm\teligible\tsuccesses\tvalue\texact\n";
  for (const auto& row : rows) {
    std::cout << row.text << '\t' << stat.name() << '\t' << m << '\t';
    if (stat.is_difference())
      std::cout << "-\t-";
    else
      std::cout << row.counts.eligible << '\t' << row.counts.successes;
    std::cout << '\t' << (row.value ? fixed6(row.value->value()) : "-") << '\t'
              << ratio_tsv(row.value) << '\n';
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaklab: conditional streak statistics on hit/miss sequences"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"tsv", "json"}));
  app.add_option("--seed", g.seed, "seed for stochastic commands");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1, 256));

  // enumerate
  int en_k = 4, en_m = 1;
  std::string en_stat = "hh", en_policy = "exclude";
  auto* enumerate = app.add_subcommand("enumerate", "list every length-k sequence with its statistic");
  enumerate->fallthrough();
  enumerate->add_option("--k", en_k, "sequence length (max 16)");
  enumerate->add_option("--stat", en_stat)->check(CLI::IsMember({"hh", "th"}));
  enumerate->add_option("--m", en_m, "conditioning run length")->check(CLI::PositiveNumber);
  enumerate->add_option("--policy", en_policy)->check(CLI::IsMember({"exclude", "include-zero"}));

  // bias
  int bi_kmin = 4, bi_kmax = 4, bi_m = 1;
  double bi_p = 0.5;
  std::string bi_stat = "hh", bi_policy = "exclude";
  auto* bias = app.add_subcommand("bias", "exact unweighted vs pooled means across k");
  bias->fallthrough();
  bias->add_option("--k-min", bi_kmin);
  bias->add_option("--k-max", bi_kmax);
  bias->add_option("--p", bi_p, "hit probability");
  bias->add_option("--stat", bi_stat)->check(CLI::IsMember({"hh", "th", "d"}));
  bias->add_option("--m", bi_m)->check(CLI::PositiveNumber);
  bias->add_option("--policy", bi_policy)->check(CLI::IsMember({"exclude", "include-zero"}));

  // game
  int ga_k = 4, ga_m = 1;
  double ga_p = 0.5;
  std::string ga_mode = "two-stage", ga_bet = "H";
  std::int64_t ga_trials = 1'000'000;
  auto* game = app.add_subcommand("game", "simulate the two-stage / one-stage selection game");
  game->fallthrough();
  game->add_option("--mode", ga_mode)->check(CLI::IsMember({"two-stage", "one-stage"}));
  game->add_option("--k", ga_k);
  game->add_option("--p", ga_p);
  game->add_option("--bet", ga_bet)->check(CLI::IsMember({"H", "T", "h", "t"}));
  game->add_option("--trials", ga_trials)->check(CLI::PositiveNumber);
  game->add_option("--m", ga_m)->check(CLI::PositiveNumber);

  // learn
  int le_k = 4, le_m = 1;
  double le_p = 0.5;
  std::string le_stat = "hh", le_policy = "exclude";
  std::int64_t le_episodes = 1'000'000, le_stride = 10'000;
  auto* learn = app.add_subcommand("learn", "running unweighted average an observer would form");
  learn->fallthrough();
  learn->add_option("--k", le_k);
  learn->add_option("--p", le_p);
  learn->add_option("--stat", le_stat)->check(CLI::IsMember({"hh", "th", "d"}));
  learn->add_option("--m", le_m)->check(CLI::PositiveNumber);
  learn->add_option("--policy", le_policy)->check(CLI::IsMember({"exclude", "include-zero"}));
  learn->add_option("--episodes", le_episodes);
  learn->add_option("--stride", le_stride);

  // test
  std::string te_input, te_convention = "per-sequence", te_stat = "hh", te_policy = "exclude",
              te_tail = "upper";
  int te_m = 1;
  std::optional<double> te_p;
  std::int64_t te_trials = 100'000;
  auto* test = app.add_subcommand("test", "hot-hand report for recorded hit/miss sequences");
  test->fallthrough();
  test->add_option("input", te_input, "input file, or - for stdin")->required();
  test->add_option("--p", te_p, "null hit probability (default: record's own hit rate)");
  test->add_option("--convention", te_convention)->check(CLI::IsMember({"per-sequence", "pooled"}));
  test->add_option("--stat", te_stat)->check(CLI::IsMember({"hh", "th", "d"}));
  test->add_option("--m", te_m)->check(CLI::PositiveNumber);
  test->add_option("--policy", te_policy)->check(CLI::IsMember({"exclude", "include-zero"}));
  test->add_option("--trials", te_trials, "Monte Carlo p-value trials")->check(CLI::PositiveNumber);
  test->add_option("--tail", te_tail)->check(CLI::IsMember({"upper", "lower"}));

  // stat
  std::vector<std::string> st_inputs;
  std::string st_stat = "hh";
  int st_m = 1;
  auto* statcmd = app.add_subcommand("stat", "per-sequence statistics for ad-hoc input");
  statcmd->fallthrough();
  statcmd->add_option("sequences", st_inputs, "H/T strings, or - for stdin")->required();
  statcmd->add_option("--stat", st_stat)->check(CLI::IsMember({"hh", "th", "d"}));
  statcmd->add_option("--m", st_m)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }

  try {
    if (enumerate->parsed()) return cmd_enumerate(g, en_k, en_stat, en_m, en_policy);
    if (bias->parsed()) return cmd_bias(g, bi_kmin, bi_kmax, bi_p, bi_stat, bi_m, bi_policy);
    if (game->parsed()) return cmd_game(g, ga_mode, ga_k, ga_p, ga_bet, ga_trials, ga_m);
    if (learn->parsed())
      return cmd_learn(g, le_k, le_p, le_stat, le_m, le_policy, le_episodes, le_stride);
    if (test->parsed())
      return cmd_test(g, te_input, te_p, te_convention, te_stat, te_m, te_policy, te_trials,
                      te_tail);
    if (statcmd->parsed()) return cmd_stat(g, st_inputs, st_stat, st_m);
  } catch (const sl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
