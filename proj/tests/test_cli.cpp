#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args, bool merge_stderr = false) {
  const std::string cmd = std::string(STREAKLAB_CLI_PATH) + " " + args +
                          (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) result.output.append(buf.data(), n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    out.push_back(text.substr(pos, nl == std::string::npos ? nl : nl - pos));
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
    if (tab == std::string::npos) return out;
    pos = tab + 1;
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << content;
}

} // namespace

TEST_CASE("enumerate reproduces the length-4 listing") {
  const auto run = run_cli("enumerate --k 4");
  REQUIRE(run.exit_code == 0);
  const auto rows = lines(run.output);
  REQUIRE(rows.size() == 19); // header + 16 + total + average
  CHECK(rows[0] == "sequence\teligible\tsuccesses\tpercent");
  CHECK(rows[1] == "HHHH\t3\t3\t100.00");
  CHECK(rows[2] == "HHHT\t3\t2\t66.67");
  CHECK(rows[3] == "HHTH\t2\t1\t50.00");
  CHECK(rows[14] == "TTHT\t1\t0\t0.00");
  CHECK(rows[15] == "TTTH\t0\t0\t-");
  CHECK(rows[16] == "TTTT\t0\t0\t-");
  CHECK(rows[17] == "total\t24\t12\t-");
  CHECK(rows[18] == "average\t-\t-\t40.48");
}

TEST_CASE("enumerate edge cases") {
  const auto k1 = run_cli("enumerate --k 1");
  REQUIRE(k1.exit_code == 0);
  const auto rows = lines(k1.output);
  REQUIRE(rows.size() == 5);
  CHECK(rows[1] == "H\t0\t0\t-");
  CHECK(rows[2] == "T\t0\t0\t-");
  CHECK(rows[4] == "average\t-\t-\t-");

  const auto too_big = run_cli("enumerate --k 20", true);
  CHECK(too_big.exit_code == 1);
  CHECK(too_big.output.find("--k") != std::string::npos);
  CHECK(too_big.output.find("presentation limit 16") != std::string::npos);

  const auto zeros = run_cli("enumerate --k 4 --policy include-zero");
  REQUIRE(zeros.exit_code == 0);
  CHECK(lines(zeros.output)[18] == "average\t-\t-\t35.42"); // 17/48
}

TEST_CASE("enumerate json carries exact fractions") {
  const auto run = run_cli("enumerate --k 4 --format json");
  REQUIRE(run.exit_code == 0);
  const auto doc = nlohmann::json::parse(run.output);
  CHECK(doc["rows"].size() == 16);
  CHECK(doc["rows"][1]["value"]["num"] == 2);
  CHECK(doc["rows"][1]["value"]["den"] == 3);
  CHECK(doc["total_eligible"] == 24);
  CHECK(doc["average"]["value"]["num"] == 17);
  CHECK(doc["average"]["value"]["den"] == 42);
}

TEST_CASE("bias rows carry both means") {
  const auto run = run_cli("bias --k-min 4 --k-max 4 --p 0.5");
  REQUIRE(run.exit_code == 0);
  const auto rows = lines(run.output);
  REQUIRE(rows.size() == 2);
  const auto cols = fields(rows[1]);
  REQUIRE(cols.size() == 6);
  CHECK(cols[0] == "4");
  CHECK(cols[1] == "0.404762");
  CHECK(cols[2] == "0.500000");
  CHECK(cols[3] == "14");
  CHECK(cols[5] == "17/42");

  const auto k6 = run_cli("bias --k-min 6 --k-max 6 --p 0.5");
  const auto c6 = fields(lines(k6.output)[1]);
  CHECK(c6[1].substr(0, 5) == "0.416");
  CHECK(c6[3] == "62");
}

TEST_CASE("bias validates its range and limit") {
  CHECK(run_cli("bias --k-min 5 --k-max 3").exit_code == 1);
  CHECK(run_cli("bias --k-min 2 --k-max 200").exit_code == 2);
}

TEST_CASE("selection games land on their reference values") {
  const auto two = run_cli("game --mode two-stage --k 4 --bet H --trials 200000 --seed 42");
  REQUIRE(two.exit_code == 0);
  const auto cols = fields(lines(two.output)[1]);
  REQUIRE(cols.size() == 13);
  const double freq = std::stod(cols[7]);
  CHECK(freq == Catch::Approx(17.0 / 42.0).margin(0.005));
  CHECK(cols[11] == "65536");           // chunk size
  CHECK(cols[12] == "splitmix64-v1");   // generator id

  const auto one = run_cli("game --mode one-stage --k 4 --bet H --trials 200000 --seed 42");
  const double one_freq = std::stod(fields(lines(one.output)[1])[7]);
  CHECK(one_freq == Catch::Approx(0.5).margin(0.005));
}

TEST_CASE("stochastic commands are byte-identical across reruns and threads") {
  const std::string flags[] = {
      "game --mode two-stage --k 4 --bet H --trials 100000 --seed 42",
      "game --mode one-stage --k 4 --bet T --trials 100000 --seed 9",
      "learn --k 4 --episodes 100000 --seed 3 --stride 10000",
  };
  for (const auto& f : flags) {
    CAPTURE(f);
    const auto base = run_cli(f);
    REQUIRE(base.exit_code == 0);
    CHECK(run_cli(f).output == base.output);
    CHECK(run_cli(f + " --threads 2").output == base.output);
    CHECK(run_cli(f + " --threads 8").output == base.output);
  }
}

TEST_CASE("learning trace output") {
  const auto run = run_cli("learn --k 4 --episodes 200000 --seed 3 --stride 50000");
  REQUIRE(run.exit_code == 0);
  const auto rows = lines(run.output);
  REQUIRE(rows.size() == 6); // metadata + header + 4 snapshots
  CHECK(rows[0].find("# seed=3") == 0);
  CHECK(rows[0].find("generator=splitmix64-v1") != std::string::npos);
  CHECK(rows[1] == "episode\testimate");
  const double final_estimate = std::stod(fields(rows[5])[1]);
  CHECK(final_estimate == Catch::Approx(17.0 / 42.0).margin(0.01));

  CHECK(run_cli("learn --episodes 0").exit_code == 1);
}

TEST_CASE("hot-hand test on a file") {
  write_file("cli_single.txt", "HHTT\n");
  const auto run = run_cli("test cli_single.txt --convention per-sequence --p 0.5");
  REQUIRE(run.exit_code == 0);
  const auto rows = lines(run.output);
  REQUIRE(rows.size() == 3); // metadata + header + one record
  const auto cols = fields(rows[2]);
  REQUIRE(cols.size() == 12);
  CHECK(cols[0] == "-");          // anonymous
  CHECK(cols[1] == "1");          // units
  CHECK(cols[7] == "0.500000");   // observed
  CHECK(cols[8] == "0.404762");   // reference
  CHECK(cols[9] == "0.095238");   // excess
  CHECK(cols[11] == "exact");

  // without --p the null model takes the record's own hit rate (here 1/2)
  const auto defaulted = run_cli("test cli_single.txt");
  REQUIRE(defaulted.exit_code == 0);
  CHECK(fields(lines(defaulted.output)[2])[4] == "0.500000");

  // the pooled convention compares against the hit rate itself
  const auto pooled = run_cli("test cli_single.txt --convention pooled --p 0.5");
  REQUIRE(pooled.exit_code == 0);
  CHECK(fields(lines(pooled.output)[2])[8] == "0.500000");
}

TEST_CASE("hot-hand test data errors exit 2") {
  write_file("cli_undefined.txt", "TTTT\n");
  CHECK(run_cli("test cli_undefined.txt --p 0.5").exit_code == 2);
  // degenerate hit rate with no --p override
  CHECK(run_cli("test cli_undefined.txt").exit_code == 2);

  write_file("cli_bad.txt", "bird,HHXT\n");
  const auto bad = run_cli("test cli_bad.txt", true);
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("line 1") != std::string::npos);

  CHECK(run_cli("test cli_missing_file.txt").exit_code == 2);
}

TEST_CASE("hot-hand test groups units per player") {
  write_file("cli_curry.txt", "curry,HHTT\ncurry,THHH\n");
  const auto run = run_cli("test cli_curry.txt --p 0.5 --trials 20000 --seed 7");
  REQUIRE(run.exit_code == 0);
  const auto rows = lines(run.output);
  REQUIRE(rows.size() == 3); // one report for the one player
  const auto cols = fields(rows[2]);
  CHECK(cols[0] == "curry");
  CHECK(cols[1] == "2");
  CHECK(cols[7] == "0.750000");
  CHECK(cols[11] == "monte-carlo");

  const auto json_run = run_cli("test cli_curry.txt --p 0.5 --trials 20000 --seed 7 --format json");
  const auto doc = nlohmann::json::parse(json_run.output);
  REQUIRE(doc["reports"].size() == 1);
  CHECK(doc["reports"][0]["player"] == "curry");
  CHECK(doc["reports"][0]["units"].size() == 2);
  CHECK(doc["reports"][0]["aggregate"]["exact"]["num"] == 3);
  CHECK(doc["reports"][0]["aggregate"]["exact"]["den"] == 4);
  CHECK(doc["seed"] == 7);
}

TEST_CASE("hot-hand test reads stdin") {
  write_file("cli_stdin.txt", "HHTT\n");
  const auto run = run_cli("test - --p 0.5 < cli_stdin.txt");
  REQUIRE(run.exit_code == 0);
  CHECK(lines(run.output).size() == 3);
}

TEST_CASE("test command is deterministic across threads") {
  write_file("cli_det.txt", "curry,HHTTHHTTHHHTTTH\n");
  const std::string f = "test cli_det.txt --p 0.5 --trials 50000 --seed 11";
  const auto base = run_cli(f);
  REQUIRE(base.exit_code == 0);
  CHECK(run_cli(f + " --threads 2").output == base.output);
  CHECK(run_cli(f + " --threads 8").output == base.output);
}

TEST_CASE("ad-hoc statistics") {
  const auto run = run_cli("stat HHTT hhth");
  REQUIRE(run.exit_code == 0);
  const auto rows = lines(run.output);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "sequence\tstat\tm\teligible\tsuccesses\tvalue\texact");
  CHECK(rows[1] == "HHTT\tafter-hit-run\t1\t2\t1\t0.500000\t1/2");
  CHECK(rows[2] == "HHTH\tafter-hit-run\t1\t2\t1\t0.500000\t1/2");

  const auto diff = run_cli("stat THHT --stat d");
  CHECK(lines(diff.output)[1] == "THHT\tdifference\t1\t-\t-\t-0.500000\t-1/2");

  const auto zero_rate = run_cli("stat HTTT");
  CHECK(lines(zero_rate.output)[1] == "HTTT\tafter-hit-run\t1\t1\t0\t0.000000\t0");

  const auto no_trials = run_cli("stat TTTH");
  CHECK(lines(no_trials.output)[1] == "TTTH\tafter-hit-run\t1\t0\t0\t-\t-");

  CHECK(run_cli("stat HHXT").exit_code == 2);
}

TEST_CASE("usage errors name the offending flag") {
  const auto bad_flag = run_cli("bias --nope 3", true);
  CHECK(bad_flag.exit_code == 1);
  CHECK(bad_flag.output.find("--nope") != std::string::npos);

  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("--help").exit_code == 0);

  const auto bad_value = run_cli("game --bet X", true);
  CHECK(bad_value.exit_code == 1);
  CHECK(bad_value.output.find("--bet") != std::string::npos);
}

TEST_CASE("json outputs are well formed") {
  for (const std::string cmd :
       {"bias --k-min 2 --k-max 5 --format json",
        "game --trials 1000 --seed 1 --format json",
        "learn --episodes 1000 --stride 100 --seed 1 --format json",
        "stat HHTT --format json"}) {
    CAPTURE(cmd);
    const auto run = run_cli(cmd);
    REQUIRE(run.exit_code == 0);
    CHECK_NOTHROW(nlohmann::json::parse(run.output));
  }
}

TEST_CASE("enumeration limit honors the environment override") {
  const std::string cmd = "STREAKLAB_ENUM_LIMIT=6 " + std::string(STREAKLAB_CLI_PATH) +
                          " bias --k-min 2 --k-max 8 2>/dev/null; echo exit=$?";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) output.append(buf.data(), n);
  pclose(pipe);
  CHECK(output.find("exit=2") != std::string::npos);
}
