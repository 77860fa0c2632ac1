#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ehtrain/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string out;
  unsigned jobs = ehtrain::default_jobs();
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config (absent keys keep defaults)");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--trials", f.trials, "Monte-Carlo trials per block length");
  cmd->add_option("--out", f.out, "Output file (default: config output_path, or stdout)");
  cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

ehtrain::ExperimentConfig resolve_config(const CommonFlags& f) {
  ehtrain::ExperimentConfig c;
  if (!f.config_path.empty()) c = ehtrain::load_experiment_config(f.config_path);
  if (f.seed) c.seed = *f.seed;
  if (f.trials) c.trials = *f.trials;
  c.validate();
  return c;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    ehtrain::write_text_file(path, text);
  }
}

std::string sidecar_path(const std::string& out) {
  const auto dot = out.rfind('.');
  const auto slash = out.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? out.substr(0, dot) : out) + ".json";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel-training schedules for energy-harvesting links"};
  app.require_subcommand(0, 1);
  bool dump_defaults = false;
  app.add_flag("--dump-defaults", dump_defaults, "Print the default experiment config as JSON");

  CommonFlags sweep_flags;
  bool sidecar = false;
  std::vector<std::size_t> sweep_n;
  auto* sweep = app.add_subcommand("sweep", "Policy comparison over block lengths");
  add_common(sweep, sweep_flags);
  sweep->add_option("--n", sweep_n, "Override block lengths");
  sweep->add_flag("--sidecar", sidecar, "Also write per-trial JSON next to --out");

  CommonFlags fixed_flags;
  std::optional<std::size_t> fixed_n;
  std::vector<std::size_t> nt_values;
  auto* fixed = app.add_subcommand("fixed-nt", "Fixed training periods against the optimal policy");
  add_common(fixed, fixed_flags);
  fixed->add_option("--n", fixed_n, "Block length");
  fixed->add_option("--nt", nt_values, "Training periods to evaluate (default: all)");

  CommonFlags val_flags;
  std::optional<std::size_t> cases;
  std::optional<std::uint64_t> samples;
  auto* validate = app.add_subcommand("validate", "Closed-form rate against Monte Carlo");
  add_common(validate, val_flags);
  validate->add_option("--cases", cases, "Random configurations");
  validate->add_option("--samples", samples, "Channel draws per configuration");

  std::string profile_path;
  std::string policy_name = "optimal";
  double value = 30;
  double ratio = 0.04;
  ehtrain::ChannelParams channel;
  std::string solve_out;
  auto* solve = app.add_subcommand("solve", "Evaluate one policy on a profile file");
  solve->add_option("profile", profile_path, "Profile (.json {\"energies\": [...]} or .csv)")->required();
  solve->add_option("--policy", policy_name, "optimal | suboptimal_dwf_rate | suboptimal_constant_rate | fixed_slots | fixed_ratio | one_slot");
  solve->add_option("--value", value, "fixed_slots training period");
  solve->add_option("--ratio", ratio, "fixed_ratio training fraction");
  solve->add_option("--sigma-sq", channel.sigma_sq, "Noise variance");
  solve->add_option("--sigma-h-sq", channel.sigma_h_sq, "Channel gain variance");
  solve->add_option("--slot-duration", channel.slot_duration, "Slot duration");
  solve->add_option("--out", solve_out, "Write the JSON outcome here (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (dump_defaults) {
      std::cout << ehtrain::to_json(ehtrain::ExperimentConfig{}).dump(2) << '\n';
      return kExitOk;
    }
    if (sweep->parsed()) {
      ehtrain::ExperimentConfig c = resolve_config(sweep_flags);
      if (!sweep_n.empty()) c.block_lengths = sweep_n;
      c.validate();
      const std::string out = sweep_flags.out.empty() ? c.output_path : sweep_flags.out;
      const auto result = ehtrain::run_policy_sweep(c, sweep_flags.jobs);
      emit(out, ehtrain::sweep_csv(result));
      if (sidecar) {
        const std::string side = (out.empty() || out == "-") ? "sweep.json" : sidecar_path(out);
        ehtrain::write_text_file(side, ehtrain::sweep_sidecar(c, result).dump() + "\n");
      }
      return kExitOk;
    }
    if (fixed->parsed()) {
      ehtrain::ExperimentConfig c = resolve_config(fixed_flags);
      if (fixed_n) c.fixed_nt_block_length = *fixed_n;
      if (!nt_values.empty()) c.fixed_nt_values = nt_values;
      c.validate();
      const auto r = ehtrain::run_fixed_nt_sweep(c, c.fixed_nt_block_length, c.fixed_nt_values,
                                                 fixed_flags.jobs);
      emit(fixed_flags.out, ehtrain::fixed_nt_csv(r));
      std::cerr << ehtrain::fixed_nt_summary(r);
      return kExitOk;
    }
    if (validate->parsed()) {
      ehtrain::ExperimentConfig c = resolve_config(val_flags);
      if (cases) c.validate_cases = *cases;
      if (samples) c.validate_samples = *samples;
      c.validate();
      const auto report = ehtrain::validate_closed_form(c, c.validate_cases, c.validate_samples,
                                                        val_flags.jobs, true);
      emit(val_flags.out, ehtrain::validation_summary(report));
      return report.passed() ? kExitOk : kExitValidation;
    }
    if (solve->parsed()) {
      ehtrain::PolicyConfig p;
      p.kind = ehtrain::policy_kind_from_name(policy_name);
      if (!(value >= 1.0) || value != static_cast<double>(static_cast<std::size_t>(value))) {
        throw ehtrain::FormatError("--value must be a positive integer");
      }
      p.value = static_cast<std::size_t>(value);
      p.ratio = ratio;
      try {
        channel.validate();
      } catch (const std::invalid_argument& e) {
        throw ehtrain::FormatError(e.what());
      }
      const auto r = ehtrain::solve_single(profile_path, channel, p);
      emit(solve_out, r.json.dump(2) + "\n");
      std::cerr << r.summary;
      return kExitOk;
    }
    std::cout << app.help();
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
