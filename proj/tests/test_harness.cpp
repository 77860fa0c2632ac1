#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "ehtrain/harness.hpp"

using namespace ehtrain;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.block_lengths = {20, 40};
  c.trials = 6;
  c.seed = 77;
  c.policies[0].exhaustive.ete_grid_points = 9;
  return c;
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / ("ehtrain_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EHTRAIN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsMirrorTheSimulationSetup) {
  const ExperimentConfig c;
  EXPECT_EQ(c.trials, 1000u);
  EXPECT_EQ(c.lambda_e, 1.0);
  EXPECT_EQ(c.channel.sigma_sq, 1.0);
  EXPECT_EQ(c.channel.sigma_h_sq, 1.0);
  ASSERT_EQ(c.policies.size(), 6u);
  EXPECT_EQ(c.policies[3].id(), "fixed_slots_30");
  EXPECT_EQ(c.policies[4].id(), "fixed_ratio_0.04");
  EXPECT_EQ(c.fixed_nt_block_length, 1250u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = small_config();
  c.channel.sigma_sq = 0.5;
  c.policies.push_back(PolicyConfig::fixed_slots(7));
  const auto j = to_json(c);
  const ExperimentConfig back = experiment_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
}

TEST(Config, PartialJsonKeepsDefaults) {
  const auto c = experiment_config_from_json(nlohmann::json::parse(R"({"trials": 3})"));
  EXPECT_EQ(c.trials, 3u);
  EXPECT_EQ(c.block_lengths, ExperimentConfig{}.block_lengths);
}

TEST(Config, RejectsInvalidInput) {
  auto parse = [](const char* text) { return experiment_config_from_json(nlohmann::json::parse(text)); };
  EXPECT_THROW(parse(R"({"trails": 3})"), FormatError);
  EXPECT_THROW(parse(R"({"trials": 0})"), FormatError);
  EXPECT_THROW(parse(R"({"block_lengths": [1]})"), FormatError);
  EXPECT_THROW(parse(R"({"sigma_sq": -1})"), FormatError);
  EXPECT_THROW(parse(R"({"trials": "many"})"), FormatError);
  EXPECT_THROW(parse(R"({"policies": [{"policy": "magic"}]})"), FormatError);
  EXPECT_THROW(parse(R"({"policies": [{"policy": "fixed_ratio", "ratio": 1.5}]})"), FormatError);
  EXPECT_THROW(parse(R"({"policies": [{"policy": "one_slot", "colour": 1}]})"), FormatError);
  EXPECT_THROW(parse(R"({"fixed_nt": {"n": 10, "nt_values": [10]}})"), FormatError);
  EXPECT_THROW(parse(R"({"validate": {"samples": 10}})"), FormatError);
}

TEST(Sweep, RowsAndDominance) {
  const auto c = small_config();
  const auto r = run_policy_sweep(c, 1);
  ASSERT_EQ(r.policy_ids.size(), 8u);
  ASSERT_EQ(r.rows.size(), 16u);
  for (std::size_t n : c.block_lengths) {
    const auto& records = r.trials.at(n);
    ASSERT_EQ(records.size(), c.trials);
    for (const auto& rec : records) {
      const double opt = rec.rate[r.column("optimal")];
      EXPECT_GE(rec.rate[r.column(kUpperBoundPerfectCsi)] + 1e-12, opt);
      EXPECT_GE(rec.rate[r.column(kUpperBoundNonEh)] + 1e-12, opt);
      for (std::size_t k = 1; k < c.policies.size(); ++k) EXPECT_GE(opt + 1e-12, rec.rate[k]);
    }
  }
  for (const auto& row : r.rows) {
    EXPECT_GE(row.stderr_rate, 0.0);
    EXPECT_GE(row.mean_rate, 0.0);
  }
}

TEST(Sweep, UsesTheSameProfileForEveryPolicy) {
  const auto c = small_config();
  const auto r = run_policy_sweep(c, 2);
  for (std::size_t t = 0; t < c.trials; ++t) {
    EXPECT_EQ(r.trials.at(40)[t].profile_hash,
              profile_hash(generate_poisson_profile(40, c.lambda_e, RngSpec{c.seed, t})));
  }
}

TEST(Sweep, DeterministicAcrossRunsAndJobs) {
  auto c = small_config();
  c.trials = 1;
  EXPECT_EQ(sweep_csv(run_policy_sweep(c, 1)), sweep_csv(run_policy_sweep(c, 1)));
  c.trials = 7;
  const auto serial = run_policy_sweep(c, 1);
  const auto parallel = run_policy_sweep(c, 3);
  EXPECT_EQ(sweep_csv(serial), sweep_csv(parallel));
  EXPECT_EQ(sweep_sidecar(c, serial).dump(), sweep_sidecar(c, parallel).dump());
}

TEST(Sweep, CsvLayout) {
  const auto csv = sweep_csv(run_policy_sweep(small_config(), 1));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "n,policy_id,mean_rate_bits_per_slot,stderr,mean_n_t,mean_e_te");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("20,optimal,", 0), 0u) << line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 15);
}

TEST(Sweep, SidecarSchema) {
  const auto c = small_config();
  const auto j = sweep_sidecar(c, run_policy_sweep(c, 1));
  EXPECT_EQ(j.at("schema"), 1);
  EXPECT_EQ(j.at("blocks").size(), 2u);
  EXPECT_EQ(j.at("blocks")[0].at("rates").at("one_slot").size(), c.trials);
  EXPECT_EQ(j.at("blocks")[0].at("profile_hashes").size(), c.trials);
}

TEST(Sweep, OneSlotGapStaysLarge) {
  ExperimentConfig c;
  c.block_lengths = {400};
  c.trials = 4;
  c.policies = {PolicyConfig::of(PolicyConfig::Kind::OneSlot)};
  const auto r = run_policy_sweep(c, 1);
  const double one = r.rows[0].mean_rate;
  const double perfect = r.rows[1].mean_rate;
  EXPECT_LT(one, 0.6 * perfect);
}

TEST(FixedNt, SmallRun) {
  auto c = small_config();
  const auto r = run_fixed_nt_sweep(c, 60, {}, 2);
  ASSERT_EQ(r.rows.size(), 59u);
  for (const auto& row : r.rows) EXPECT_GE(row.gap, -1e-12);
  ASSERT_EQ(r.thresholds.size(), 2u);
  ASSERT_TRUE(r.thresholds[0].primary && r.thresholds[1].primary);
  EXPECT_LE(r.thresholds[1].primary->lo, r.thresholds[0].primary->lo);
  EXPECT_GE(r.thresholds[1].primary->hi, r.thresholds[0].primary->hi);
  EXPECT_EQ(fixed_nt_csv(r), fixed_nt_csv(run_fixed_nt_sweep(c, 60, {}, 1)));
  EXPECT_THROW(run_fixed_nt_sweep(c, 60, {60}, 1), FormatError);
}

TEST(FixedNt, GapRunsAreContiguous) {
  std::vector<FixedNtRow> rows;
  const double gaps[] = {0.3, 0.08, 0.04, 0.01, 0.03, 0.2, 0.04, 0.5};
  for (std::size_t i = 0; i < 8; ++i) rows.push_back({i + 1, 0.0, 0.0, gaps[i]});
  const auto five = harness_detail::gap_runs(rows, 0.05);
  ASSERT_EQ(five.runs.size(), 2u);
  ASSERT_TRUE(five.primary);
  EXPECT_EQ(five.primary->lo, 3u);
  EXPECT_EQ(five.primary->hi, 5u);
  const auto ten = harness_detail::gap_runs(rows, 0.10);
  EXPECT_EQ(ten.primary->lo, 2u);
}

TEST(Validate, SmallRunPassesAndIncludesZeroTraining) {
  ExperimentConfig c;
  c.seed = 5;
  const auto report = validate_closed_form(c, 4, 20000, 1, true);
  ASSERT_EQ(report.cases.size(), 5u);
  EXPECT_TRUE(report.passed()) << validation_summary(report);
  const auto& z = report.cases.back();
  EXPECT_EQ(z.training_sum, 0.0);
  EXPECT_EQ(z.closed_form, 0.0);
  EXPECT_EQ(z.monte_carlo, 0.0);
  EXPECT_THROW(validate_closed_form(c, 1, 100), FormatError);
}

TEST(Solve, TwoSlotProfile) {
  const auto dir = temp_dir();
  write(dir / "p.json", R"({"energies": [2, 0]})");
  const auto r = solve_single((dir / "p.json").string(), ChannelParams{}, PolicyConfig::optimal());
  EXPECT_EQ(r.outcome.n_t, 1u);
  EXPECT_NEAR(r.outcome.e_te, 1.0, 1e-6);
  EXPECT_EQ(r.json.at("schema"), 1);
  EXPECT_EQ(r.json.at("data_alloc").at("start_slot"), 1);
  write(dir / "q.csv", "energy\n1\n1\n1\n1\n");
  const auto q = solve_single((dir / "q.csv").string(), ChannelParams{},
                              PolicyConfig::of(PolicyConfig::Kind::OneSlot));
  EXPECT_EQ(q.outcome.n_t, 1u);
  EXPECT_THROW(solve_single((dir / "missing.json").string(), ChannelParams{}, PolicyConfig{}),
               IoError);
  write(dir / "bad.csv", "energy\n1\nx\n");
  EXPECT_THROW(solve_single((dir / "bad.csv").string(), ChannelParams{}, PolicyConfig{}),
               FormatError);
  fs::remove_all(dir);
}

TEST(Cli, ExitCodesAndOutputs) {
  const auto dir = temp_dir();
  write(dir / "p.json", R"({"energies": [2, 0, 1]})");
  write(dir / "cfg.json", R"({"block_lengths": [12], "trials": 3,
    "policies": [{"policy": "optimal", "ete_grid_points": 5}, {"policy": "one_slot"}]})");
  write(dir / "bad.json", R"({"trials": 0})");
  EXPECT_EQ(run_cli("--dump-defaults"), 0);
  EXPECT_EQ(run_cli("solve " + (dir / "p.json").string()), 0);
  EXPECT_EQ(run_cli("solve " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("solve " + (dir / "p.json").string() + " --policy nope"), 2);
  EXPECT_EQ(run_cli("sweep --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("sweep --bogus"), 2);
  EXPECT_EQ(run_cli("sweep --out /nonexistent/dir/x.csv --config " + (dir / "cfg.json").string()), 2);

  const std::string a = (dir / "a.csv").string();
  const std::string b = (dir / "b.csv").string();
  EXPECT_EQ(run_cli("sweep --config " + (dir / "cfg.json").string() + " --jobs 1 --sidecar --out " + a), 0);
  EXPECT_EQ(run_cli("sweep --config " + (dir / "cfg.json").string() + " --jobs 3 --out " + b), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_TRUE(fs::exists(dir / "a.json"));
  EXPECT_EQ(run_cli("validate --cases 2 --samples 10000 --out " + (dir / "v.csv").string()), 0);
  EXPECT_EQ(run_cli("fixed-nt --n 20 --trials 2 --out " + (dir / "f.csv").string()), 0);
  fs::remove_all(dir);
}
