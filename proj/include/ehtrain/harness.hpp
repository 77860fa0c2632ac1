#ifndef EHTRAIN_HARNESS_HPP
#define EHTRAIN_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ehtrain/dwf.hpp"
#include "ehtrain/energy_model.hpp"
#include "ehtrain/policies.hpp"
#include "ehtrain/profile_io.hpp"
#include "ehtrain/rng.hpp"
#include "ehtrain/throughput.hpp"

namespace ehtrain {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// One training policy to evaluate.
///
/// JSON keys: "policy" (optimal | suboptimal_dwf_rate | suboptimal_constant_rate |
/// fixed_slots | fixed_ratio | one_slot), "value" (fixed_slots), "ratio"
/// (fixed_ratio), "ete_grid_points" and "refine" (optimal), "root_tolerance"
/// (both sub-optimal policies).
struct PolicyConfig {
  enum class Kind { Optimal, SuboptimalDwfRate, SuboptimalConstantRate, FixedSlots, FixedRatio, OneSlot };

  Kind kind = Kind::Optimal;
  std::size_t value = 30;
  double ratio = 0.04;
  ExhaustiveOptions exhaustive;
  RootOptions root;

  static PolicyConfig optimal(std::size_t grid_points = 65) {
    PolicyConfig c;
    c.kind = Kind::Optimal;
    c.exhaustive.ete_grid_points = grid_points;
    return c;
  }
  static PolicyConfig of(Kind kind) {
    PolicyConfig c;
    c.kind = kind;
    return c;
  }
  static PolicyConfig fixed_slots(std::size_t v) {
    PolicyConfig c;
    c.kind = Kind::FixedSlots;
    c.value = v;
    return c;
  }
  static PolicyConfig fixed_ratio(double r) {
    PolicyConfig c;
    c.kind = Kind::FixedRatio;
    c.ratio = r;
    return c;
  }

  std::string id() const {
    switch (kind) {
      case Kind::Optimal: return "optimal";
      case Kind::SuboptimalDwfRate: return "suboptimal_dwf_rate";
      case Kind::SuboptimalConstantRate: return "suboptimal_constant_rate";
      case Kind::FixedSlots: return fixed_policy_id(FixedSlots{value});
      case Kind::FixedRatio: return fixed_policy_id(FixedRatio{ratio});
      case Kind::OneSlot: return fixed_policy_id(OneSlot{});
    }
    return "unknown";
  }

  void validate() const {
    if (kind == Kind::Optimal && exhaustive.ete_grid_points < 2) {
      throw FormatError("policy optimal: ete_grid_points must be >= 2");
    }
    if (kind == Kind::FixedSlots && value < 1) {
      throw FormatError("policy fixed_slots: value must be >= 1");
    }
    if (kind == Kind::FixedRatio && !(ratio > 0.0 && ratio < 1.0)) {
      throw FormatError("policy fixed_ratio: ratio must lie in (0, 1)");
    }
    if (!(root.x_tolerance > 0.0)) {
      throw FormatError("policy " + id() + ": root_tolerance must be > 0");
    }
  }
};

inline PolicyOutcome evaluate_policy(const PolicyConfig& cfg, const EnergyProfile& profile,
                                     const ChannelParams& params) {
  using Kind = PolicyConfig::Kind;
  switch (cfg.kind) {
    case Kind::Optimal: return optimal_exhaustive(profile, params, cfg.exhaustive);
    case Kind::SuboptimalDwfRate: return suboptimal_dwf_rate(profile, params, cfg.root);
    case Kind::SuboptimalConstantRate: return suboptimal_constant_rate(profile, params, cfg.root);
    case Kind::FixedSlots: return fixed_policy(profile, params, FixedSlots{cfg.value});
    case Kind::FixedRatio: return fixed_policy(profile, params, FixedRatio{cfg.ratio});
    case Kind::OneSlot: return fixed_policy(profile, params, OneSlot{});
  }
  throw std::logic_error("evaluate_policy: unknown policy kind");
}

inline const std::vector<std::pair<std::string, PolicyConfig::Kind>>& policy_names() {
  using Kind = PolicyConfig::Kind;
  static const std::vector<std::pair<std::string, Kind>> names = {
      {"optimal", Kind::Optimal},
      {"suboptimal_dwf_rate", Kind::SuboptimalDwfRate},
      {"suboptimal_constant_rate", Kind::SuboptimalConstantRate},
      {"fixed_slots", Kind::FixedSlots},
      {"fixed_ratio", Kind::FixedRatio},
      {"one_slot", Kind::OneSlot},
  };
  return names;
}

inline PolicyConfig::Kind policy_kind_from_name(const std::string& name) {
  for (const auto& [n, k] : policy_names()) {
    if (n == name) return k;
  }
  throw FormatError("unknown policy \"" + name + "\"");
}

inline std::string policy_kind_name(PolicyConfig::Kind kind) {
  for (const auto& [n, k] : policy_names()) {
    if (k == kind) return n;
  }
  return "unknown";
}

struct ExperimentConfig {
  std::vector<std::size_t> block_lengths{50, 100, 200, 400, 800, 1600};
  std::size_t trials = 1000;
  double lambda_e = 1.0;
  ChannelParams channel;  // sigma^2 = sigma_h^2 = 1 with lambda_e = 1 gives average SNR 1
  std::uint64_t seed = 2015;
  std::vector<PolicyConfig> policies{
      PolicyConfig::optimal(),
      PolicyConfig::of(PolicyConfig::Kind::SuboptimalDwfRate),
      PolicyConfig::of(PolicyConfig::Kind::SuboptimalConstantRate),
      PolicyConfig::fixed_slots(30),
      PolicyConfig::fixed_ratio(0.04),
      PolicyConfig::of(PolicyConfig::Kind::OneSlot),
  };
  std::string output_path = "sweep.csv";
  std::size_t fixed_nt_block_length = 1250;
  std::vector<std::size_t> fixed_nt_values;  // empty: every n_t in [1, N-1]
  std::size_t validate_cases = 20;
  std::uint64_t validate_samples = 1'000'000;

  void validate() const {
    if (trials < 1) throw FormatError("config: trials must be >= 1");
    if (block_lengths.empty()) throw FormatError("config: block_lengths must not be empty");
    for (std::size_t n : block_lengths) {
      if (n < 2) throw FormatError("config: every block length must be >= 2");
    }
    if (!(lambda_e > 0.0) || lambda_e > 500.0) {
      throw FormatError("config: lambda_e must lie in (0, 500]");
    }
    try {
      channel.validate();
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("config: ") + e.what());
    }
    if (policies.empty()) throw FormatError("config: policies must not be empty");
    for (const auto& p : policies) p.validate();
    if (fixed_nt_block_length < 2) throw FormatError("config: fixed_nt.n must be >= 2");
    for (std::size_t v : fixed_nt_values) {
      if (v < 1 || v > fixed_nt_block_length - 1) {
        throw FormatError("config: fixed_nt value " + std::to_string(v) + " outside [1, N-1]");
      }
    }
    if (validate_cases < 1) throw FormatError("config: validate.cases must be >= 1");
    if (validate_samples < 10'000) throw FormatError("config: validate.samples must be >= 10000");
  }
};

inline nlohmann::json to_json(const PolicyConfig& p) {
  nlohmann::json j;
  j["policy"] = policy_kind_name(p.kind);
  using Kind = PolicyConfig::Kind;
  switch (p.kind) {
    case Kind::Optimal:
      j["ete_grid_points"] = p.exhaustive.ete_grid_points;
      j["refine"] = p.exhaustive.refine;
      break;
    case Kind::SuboptimalDwfRate:
    case Kind::SuboptimalConstantRate: j["root_tolerance"] = p.root.x_tolerance; break;
    case Kind::FixedSlots: j["value"] = p.value; break;
    case Kind::FixedRatio: j["ratio"] = p.ratio; break;
    case Kind::OneSlot: break;
  }
  return j;
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["block_lengths"] = c.block_lengths;
  j["trials"] = c.trials;
  j["lambda_e"] = c.lambda_e;
  j["sigma_sq"] = c.channel.sigma_sq;
  j["sigma_h_sq"] = c.channel.sigma_h_sq;
  j["slot_duration"] = c.channel.slot_duration;
  j["seed"] = c.seed;
  j["policies"] = nlohmann::json::array();
  for (const auto& p : c.policies) j["policies"].push_back(to_json(p));
  j["output_path"] = c.output_path;
  j["fixed_nt"] = {{"n", c.fixed_nt_block_length}, {"nt_values", c.fixed_nt_values}};
  j["validate"] = {{"cases", c.validate_cases}, {"samples", c.validate_samples}};
  return j;
}

namespace harness_detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) ==
        known.end()) {
      throw FormatError(where + ": unknown key \"" + key + "\"");
    }
  }
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + "." + key + ": " + e.what());
  }
}

}  // namespace harness_detail

inline PolicyConfig policy_config_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("policy") || !j.at("policy").is_string()) {
    throw FormatError(where + ": expected an object with a string \"policy\"");
  }
  harness_detail::reject_unknown_keys(
      j, {"policy", "value", "ratio", "ete_grid_points", "refine", "root_tolerance"}, where);
  PolicyConfig p;
  p.kind = policy_kind_from_name(j.at("policy").get<std::string>());
  harness_detail::read_field(j, "value", p.value, where);
  harness_detail::read_field(j, "ratio", p.ratio, where);
  harness_detail::read_field(j, "ete_grid_points", p.exhaustive.ete_grid_points, where);
  harness_detail::read_field(j, "refine", p.exhaustive.refine, where);
  harness_detail::read_field(j, "root_tolerance", p.root.x_tolerance, where);
  p.validate();
  return p;
}

/// Reads a config object; absent keys keep their defaults.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("config: expected a JSON object");
  harness_detail::reject_unknown_keys(
      j,
      {"block_lengths", "trials", "lambda_e", "sigma_sq", "sigma_h_sq", "slot_duration", "seed",
       "policies", "output_path", "fixed_nt", "validate"},
      "config");
  ExperimentConfig c;
  harness_detail::read_field(j, "block_lengths", c.block_lengths, "config");
  harness_detail::read_field(j, "trials", c.trials, "config");
  harness_detail::read_field(j, "lambda_e", c.lambda_e, "config");
  harness_detail::read_field(j, "sigma_sq", c.channel.sigma_sq, "config");
  harness_detail::read_field(j, "sigma_h_sq", c.channel.sigma_h_sq, "config");
  harness_detail::read_field(j, "slot_duration", c.channel.slot_duration, "config");
  harness_detail::read_field(j, "seed", c.seed, "config");
  harness_detail::read_field(j, "output_path", c.output_path, "config");
  if (j.contains("policies")) {
    const auto& arr = j.at("policies");
    if (!arr.is_array()) throw FormatError("config.policies: expected an array");
    c.policies.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.policies.push_back(
          policy_config_from_json(arr[i], "config.policies[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("fixed_nt")) {
    const auto& f = j.at("fixed_nt");
    if (!f.is_object()) throw FormatError("config.fixed_nt: expected an object");
    harness_detail::reject_unknown_keys(f, {"n", "nt_values"}, "config.fixed_nt");
    harness_detail::read_field(f, "n", c.fixed_nt_block_length, "config.fixed_nt");
    harness_detail::read_field(f, "nt_values", c.fixed_nt_values, "config.fixed_nt");
  }
  if (j.contains("validate")) {
    const auto& v = j.at("validate");
    if (!v.is_object()) throw FormatError("config.validate: expected an object");
    harness_detail::reject_unknown_keys(v, {"cases", "samples"}, "config.validate");
    harness_detail::read_field(v, "cases", c.validate_cases, "config.validate");
    harness_detail::read_field(v, "samples", c.validate_samples, "config.validate");
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  const std::string text = io_detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Trial execution
// ---------------------------------------------------------------------------

/// Runs body(i) for i in [0, count) on `jobs` threads. Each index is handled
/// exactly once; callers write results into per-index slots so the outcome
/// does not depend on scheduling. The first exception is rethrown.
template <class Body>
void parallel_for_trials(std::size_t count, unsigned jobs, Body&& body) {
  const unsigned workers =
      static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(jobs, count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline unsigned default_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// FNV-1a over the profile's energies (bit patterns).
inline std::uint64_t profile_hash(const EnergyProfile& profile) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (double e : profile.energies()) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &e, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

inline const char* kUpperBoundPerfectCsi = "upper_bound_perfect_csi";
inline const char* kUpperBoundNonEh = "upper_bound_non_eh";

struct SweepRow {
  std::size_t n = 0;
  std::string policy_id;
  double mean_rate = 0.0;
  double stderr_rate = 0.0;
  double mean_n_t = 0.0;
  double mean_e_te = 0.0;
};

/// Everything measured on one profile: one entry per policy column.
struct TrialRecord {
  std::uint64_t profile_hash = 0;
  std::vector<double> rate;
  std::vector<double> n_t;
  std::vector<double> e_te;
};

struct SweepResult {
  std::vector<std::string> policy_ids;  // configured policies, then both upper bounds
  std::vector<SweepRow> rows;
  std::map<std::size_t, std::vector<TrialRecord>> trials;  // keyed by block length

  std::size_t column(const std::string& id) const {
    const auto it = std::find(policy_ids.begin(), policy_ids.end(), id);
    if (it == policy_ids.end()) throw std::out_of_range("SweepResult: no policy " + id);
    return static_cast<std::size_t>(it - policy_ids.begin());
  }
};

namespace harness_detail {

struct MeanStderr {
  double mean = 0.0;
  double stderr_value = 0.0;
};

inline MeanStderr mean_and_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stderr_value = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                                 static_cast<double>(xs.size()));
  }
  return out;
}

}  // namespace harness_detail

/// Evaluates every configured policy and both upper bounds on the same
/// Poisson profile per trial (trial t reads stream t) for every block length.
inline SweepResult run_policy_sweep(const ExperimentConfig& config, unsigned jobs = default_jobs()) {
  config.validate();
  SweepResult result;
  for (const auto& p : config.policies) result.policy_ids.push_back(p.id());
  result.policy_ids.emplace_back(kUpperBoundPerfectCsi);
  result.policy_ids.emplace_back(kUpperBoundNonEh);
  const std::size_t columns = result.policy_ids.size();

  for (std::size_t n : config.block_lengths) {
    std::vector<TrialRecord> records(config.trials);
    parallel_for_trials(config.trials, jobs, [&](std::size_t t) {
      const EnergyProfile profile =
          generate_poisson_profile(n, config.lambda_e, RngSpec{config.seed, t});
      TrialRecord rec;
      rec.profile_hash = profile_hash(profile);
      rec.rate.reserve(columns);
      for (const auto& p : config.policies) {
        PolicyOutcome o;
        try {
          o = evaluate_policy(p, profile, config.channel);
        } catch (const std::exception& e) {
          throw std::runtime_error("sweep: policy " + p.id() + " failed at N = " +
                                   std::to_string(n) + ", trial " + std::to_string(t) + ": " +
                                   e.what());
        }
        rec.rate.push_back(o.rate);
        rec.n_t.push_back(static_cast<double>(o.n_t));
        rec.e_te.push_back(o.e_te);
      }
      rec.rate.push_back(upper_bound_perfect_csi(profile, config.channel));
      rec.n_t.push_back(0.0);
      rec.e_te.push_back(0.0);
      rec.rate.push_back(upper_bound_non_eh(profile.total(), n, config.channel));
      rec.n_t.push_back(1.0);
      rec.e_te.push_back(0.0);
      if (profile_hash(profile) != rec.profile_hash) {
        throw std::logic_error("sweep: profile changed while policies were evaluated");
      }
      records[t] = std::move(rec);
    });

    for (std::size_t c = 0; c < columns; ++c) {
      std::vector<double> rate(config.trials), n_t(config.trials), e_te(config.trials);
      for (std::size_t t = 0; t < config.trials; ++t) {
        rate[t] = records[t].rate[c];
        n_t[t] = records[t].n_t[c];
        e_te[t] = records[t].e_te[c];
      }
      const auto r = harness_detail::mean_and_stderr(rate);
      result.rows.push_back({n, result.policy_ids[c], r.mean, r.stderr_value,
                             harness_detail::mean_and_stderr(n_t).mean,
                             harness_detail::mean_and_stderr(e_te).mean});
    }
    result.trials.emplace(n, std::move(records));
  }
  return result;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// CSV: n, policy_id, mean_rate_bits_per_slot, stderr, mean_n_t, mean_e_te.
inline std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "n,policy_id,mean_rate_bits_per_slot,stderr,mean_n_t,mean_e_te\n";
  for (const auto& r : result.rows) {
    out << r.n << ',' << r.policy_id << ',' << format_double(r.mean_rate) << ','
        << format_double(r.stderr_rate) << ',' << format_double(r.mean_n_t) << ','
        << format_double(r.mean_e_te) << '\n';
  }
  return out.str();
}

/// Per-trial raw values for downstream plotting (schema 1).
inline nlohmann::json sweep_sidecar(const ExperimentConfig& config, const SweepResult& result) {
  nlohmann::json j;
  j["schema"] = 1;
  j["config"] = to_json(config);
  j["policy_ids"] = result.policy_ids;
  j["blocks"] = nlohmann::json::array();
  for (const auto& [n, records] : result.trials) {
    nlohmann::json block;
    block["n"] = n;
    nlohmann::json hashes = nlohmann::json::array();
    nlohmann::json rates = nlohmann::json::object();
    nlohmann::json nts = nlohmann::json::object();
    for (std::size_t c = 0; c < result.policy_ids.size(); ++c) {
      nlohmann::json r = nlohmann::json::array();
      nlohmann::json t = nlohmann::json::array();
      for (const auto& rec : records) {
        r.push_back(rec.rate[c]);
        t.push_back(rec.n_t[c]);
      }
      rates[result.policy_ids[c]] = std::move(r);
      nts[result.policy_ids[c]] = std::move(t);
    }
    for (const auto& rec : records) {
      char buf[20];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rec.profile_hash));
      hashes.push_back(buf);
    }
    block["profile_hashes"] = std::move(hashes);
    block["rates"] = std::move(rates);
    block["n_t"] = std::move(nts);
    j["blocks"].push_back(std::move(block));
  }
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Fixed training period study
// ---------------------------------------------------------------------------

struct NtInterval {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

struct FixedNtRow {
  std::size_t n_t = 0;
  double mean_rate = 0.0;
  double stderr_rate = 0.0;
  double gap = 0.0;  // 1 - mean_fixed / mean_optimal
};

struct FixedNtResult {
  std::size_t n = 0;
  double mean_optimal = 0.0;
  double stderr_optimal = 0.0;
  std::vector<FixedNtRow> rows;  // ascending n_t
  // Contiguous runs (in the n_t list) with gap <= threshold; `primary` is the
  // run containing the smallest gap.
  struct Threshold {
    double threshold = 0.0;
    std::vector<NtInterval> runs;
    std::optional<NtInterval> primary;
  };
  std::vector<Threshold> thresholds;
};

namespace harness_detail {

inline FixedNtResult::Threshold gap_runs(const std::vector<FixedNtRow>& rows, double threshold) {
  FixedNtResult::Threshold out;
  out.threshold = threshold;
  std::size_t best = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].gap < rows[best].gap) best = i;
  }
  std::size_t i = 0;
  while (i < rows.size()) {
    if (rows[i].gap > threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < rows.size() && rows[j + 1].gap <= threshold) ++j;
    out.runs.push_back({rows[i].n_t, rows[j].n_t});
    if (best >= i && best <= j) out.primary = NtInterval{rows[i].n_t, rows[j].n_t};
    i = j + 1;
  }
  return out;
}

}  // namespace harness_detail

/// Optimal (adaptive) policy against every fixed training period in
/// nt_values on common Poisson profiles of length n. Fixed periods run with no
/// leftover and their data stage is derived from the no-training allocation.
inline FixedNtResult run_fixed_nt_sweep(const ExperimentConfig& config, std::size_t n,
                                        std::vector<std::size_t> nt_values,
                                        unsigned jobs = default_jobs(),
                                        const std::vector<double>& thresholds = {0.05, 0.10}) {
  config.validate();
  require_block_length(n, "run_fixed_nt_sweep");
  if (nt_values.empty()) {
    for (std::size_t v = 1; v < n; ++v) nt_values.push_back(v);
  }
  std::sort(nt_values.begin(), nt_values.end());
  nt_values.erase(std::unique(nt_values.begin(), nt_values.end()), nt_values.end());
  for (std::size_t v : nt_values) {
    if (v < 1 || v > n - 1) {
      throw FormatError("fixed-nt: n_t = " + std::to_string(v) + " outside [1, " +
                        std::to_string(n - 1) + "]");
    }
  }
  ExhaustiveOptions exhaustive;
  for (const auto& p : config.policies) {
    if (p.kind == PolicyConfig::Kind::Optimal) exhaustive = p.exhaustive;
  }

  std::vector<double> optimal(config.trials);
  std::vector<std::vector<double>> fixed(config.trials);
  parallel_for_trials(config.trials, jobs, [&](std::size_t t) {
    const EnergyProfile profile =
        generate_poisson_profile(n, config.lambda_e, RngSpec{config.seed, t});
    optimal[t] = optimal_exhaustive(profile, config.channel, exhaustive).rate;
    const PowerAllocation base = dwf_allocate(profile, config.channel);
    std::vector<double> rates;
    rates.reserve(nt_values.size());
    for (std::size_t v : nt_values) {
      const TrainingDecision d = training_split(profile, v, 0.0, config.channel);
      const PowerAllocation data = incremental_update(base, profile, v, config.channel);
      rates.push_back(block_throughput(profile, d, data, config.channel).bits_per_slot);
    }
    fixed[t] = std::move(rates);
  });

  FixedNtResult out;
  out.n = n;
  const auto opt = harness_detail::mean_and_stderr(optimal);
  out.mean_optimal = opt.mean;
  out.stderr_optimal = opt.stderr_value;
  for (std::size_t k = 0; k < nt_values.size(); ++k) {
    std::vector<double> col(config.trials);
    for (std::size_t t = 0; t < config.trials; ++t) col[t] = fixed[t][k];
    const auto ms = harness_detail::mean_and_stderr(col);
    out.rows.push_back({nt_values[k], ms.mean, ms.stderr_value,
                        out.mean_optimal > 0.0 ? 1.0 - ms.mean / out.mean_optimal : 0.0});
  }
  for (double th : thresholds) out.thresholds.push_back(harness_detail::gap_runs(out.rows, th));
  return out;
}

/// CSV: n, n_t, mean_rate_bits_per_slot, stderr, mean_optimal_rate, gap_to_optimal.
inline std::string fixed_nt_csv(const FixedNtResult& r) {
  std::ostringstream out;
  out << "n,n_t,mean_rate_bits_per_slot,stderr,mean_optimal_rate,gap_to_optimal\n";
  for (const auto& row : r.rows) {
    out << r.n << ',' << row.n_t << ',' << format_double(row.mean_rate) << ','
        << format_double(row.stderr_rate) << ',' << format_double(r.mean_optimal) << ','
        << format_double(row.gap) << '\n';
  }
  return out.str();
}

inline std::string fixed_nt_summary(const FixedNtResult& r) {
  std::ostringstream out;
  out << "N = " << r.n << ", optimal mean rate " << format_double(r.mean_optimal)
      << " bits/slot (stderr " << format_double(r.stderr_optimal) << ")\n";
  for (const auto& th : r.thresholds) {
    out << "gap <= " << format_double(100.0 * th.threshold) << "%: ";
    if (th.primary) {
      out << "[" << th.primary->lo << ", " << th.primary->hi << "]";
    } else {
      out << "none";
    }
    if (th.runs.size() > 1) out << " (" << th.runs.size() << " runs)";
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Closed form against Monte Carlo
// ---------------------------------------------------------------------------

struct ValidationCase {
  std::size_t index = 0;
  std::size_t n = 0;
  std::size_t n_t = 0;
  double e_te = 0.0;
  double lambda_e = 0.0;
  ChannelParams channel;
  double training_sum = 0.0;
  double closed_form = 0.0;
  double monte_carlo = 0.0;
  double standard_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationCase> cases;
  bool passed() const {
    return std::all_of(cases.begin(), cases.end(), [](const auto& c) { return c.pass; });
  }
};

/// Builds a randomized configuration for case `index` from stream
/// (seed, index); forced_zero_training pins the leftover to the whole
/// training energy so nothing is learned about the channel.
inline ValidationCase make_validation_case(std::uint64_t seed, std::size_t index,
                                           bool forced_zero_training = false) {
  CounterRng rng(RngSpec{seed, index}, std::uint64_t{1} << 48);
  auto log_uniform = [&](double lo, double hi) {
    return std::exp(std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo)));
  };
  ValidationCase c;
  c.index = index;
  c.n = 2 + static_cast<std::size_t>(rng.uniform() * 19.0);  // 2..20
  c.lambda_e = log_uniform(0.3, 5.0);
  c.channel.sigma_sq = log_uniform(0.2, 5.0);
  c.channel.sigma_h_sq = log_uniform(0.2, 5.0);
  c.channel.slot_duration = 1.0;
  c.n_t = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(c.n - 1));
  c.e_te = forced_zero_training ? -1.0 : rng.uniform();  // fraction, resolved against the profile
  return c;
}

inline ValidationReport validate_closed_form(const ExperimentConfig& config, std::size_t cases,
                                             std::uint64_t samples, unsigned jobs = default_jobs(),
                                             bool include_zero_training_case = false) {
  if (samples < 10'000) throw FormatError("validate: samples must be >= 10000");
  if (cases < 1) throw FormatError("validate: cases must be >= 1");
  ValidationReport report;
  report.cases.resize(cases + (include_zero_training_case ? 1 : 0));
  for (std::size_t i = 0; i < report.cases.size(); ++i) {
    const bool zero_training = include_zero_training_case && i == cases;
    ValidationCase c = make_validation_case(config.seed, i, zero_training);
    EnergyProfile profile = generate_poisson_profile(c.n, c.lambda_e, RngSpec{config.seed, i});
    if (zero_training) {
      std::vector<double> e(profile.energies().begin(), profile.energies().end());
      std::fill(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(c.n_t) - 1, 0.0);
      profile = EnergyProfile(std::move(e));
    }
    const double last = profile[c.n_t - 1];
    c.e_te = zero_training ? last : c.e_te * last;
    const TrainingDecision d = training_split(profile, c.n_t, c.e_te, c.channel);
    const PowerAllocation data = dwf_suffix(profile, c.n_t, c.e_te, c.channel);
    c.training_sum = d.training_energy_sum / c.channel.slot_duration;
    c.closed_form = block_throughput(profile, d, data, c.channel).bits_per_slot;
    const MonteCarloEstimate mc = mc_throughput_oracle(
        profile, d, data, c.channel, samples, RngSpec{config.seed ^ 0x5eedULL, i}, jobs);
    c.monte_carlo = mc.mean;
    c.standard_error = mc.standard_error;
    c.tolerance = std::max(3.0 * mc.standard_error, 1e-3 * c.closed_form);
    c.pass = std::abs(c.monte_carlo - c.closed_form) <= c.tolerance;
    report.cases[i] = c;
  }
  return report;
}

inline std::string validation_summary(const ValidationReport& r) {
  std::ostringstream out;
  out << "case,n,n_t,e_te,sigma_sq,sigma_h_sq,training_sum,closed_form,monte_carlo,stderr,tolerance,"
         "result\n";
  for (const auto& c : r.cases) {
    out << c.index << ',' << c.n << ',' << c.n_t << ',' << format_double(c.e_te) << ','
        << format_double(c.channel.sigma_sq) << ',' << format_double(c.channel.sigma_h_sq) << ','
        << format_double(c.training_sum) << ',' << format_double(c.closed_form) << ','
        << format_double(c.monte_carlo) << ',' << format_double(c.standard_error) << ','
        << format_double(c.tolerance) << ',' << (c.pass ? "pass" : "FAIL") << '\n';
  }
  out << (r.passed() ? "all cases agree\n" : "closed form and Monte Carlo disagree\n");
  return out.str();
}

// ---------------------------------------------------------------------------
// Single profile
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const PowerAllocation& a) {
  return {{"breakpoints", a.breakpoints}, {"powers", a.powers}, {"start_slot", a.start_slot}};
}

inline nlohmann::json to_json(const PolicyOutcome& o) {
  nlohmann::json j;
  j["policy_id"] = o.policy_id;
  j["n_t"] = o.n_t;
  j["e_te"] = o.e_te;
  j["training_powers"] = o.decision.training_powers;
  j["training_energy_sum"] = o.decision.training_energy_sum;
  j["data_alloc"] = to_json(o.data_alloc);
  j["rate_bits_per_slot"] = o.rate;
  j["clamped"] = o.clamped;
  return j;
}

struct SolveResult {
  PolicyOutcome outcome;
  nlohmann::json json;
  std::string summary;
};

inline SolveResult solve_profile(const EnergyProfile& profile, const ChannelParams& params,
                                 const PolicyConfig& policy) {
  params.validate();
  policy.validate();
  SolveResult r;
  r.outcome = evaluate_policy(policy, profile, params);
  r.json = to_json(r.outcome);
  r.json["schema"] = 1;
  r.json["n"] = profile.size();
  r.json["upper_bound_perfect_csi"] = upper_bound_perfect_csi(profile, params);
  r.json["upper_bound_non_eh"] = upper_bound_non_eh(profile.total(), profile.size(), params);
  std::ostringstream s;
  s << "policy " << r.outcome.policy_id << " on N = " << profile.size() << " slots: n_t = "
    << r.outcome.n_t << ", e_te = " << format_double(r.outcome.e_te) << ", rate "
    << format_double(r.outcome.rate) << " bits/slot over " << r.outcome.data_alloc.interval_count()
    << " data interval(s)" << (r.outcome.clamped ? " [n_t clamped]" : "") << '\n';
  r.summary = s.str();
  return r;
}

/// Loads a profile file and evaluates one policy on it.
inline SolveResult solve_single(const std::string& profile_path, const ChannelParams& params,
                                const PolicyConfig& policy) {
  return solve_profile(load_profile(profile_path), params, policy);
}

}  // namespace ehtrain

#endif  // EHTRAIN_HARNESS_HPP
