#ifndef EHTRAIN_THROUGHPUT_HPP
#define EHTRAIN_THROUGHPUT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ehtrain/dwf.hpp"
#include "ehtrain/energy_model.hpp"
#include "ehtrain/rng.hpp"
#include "ehtrain/special_functions.hpp"

namespace ehtrain {

/// MMSE channel-estimation quality after training with total power S.
struct EstimationState {
  double error_var = 0.0;     // variance of h - h_hat
  double estimate_var = 0.0;  // variance of h_hat; error_var + estimate_var = sigma_h^2
  double training_energy_sum = 0.0;
};

struct RateReport {
  double bits_per_slot = 0.0;
  std::vector<double> per_slot_terms;  // M_i for every data slot, in slot order
  std::size_t n_t_used = 0;
};

/// Error variance sigma^2 sigma_h^2 / (sigma^2 + sigma_h^2 S) of the MMSE
/// estimate for a training power sum S (only the sum matters).
inline EstimationState estimation_error_variance(double training_power_sum,
                                                 const ChannelParams& params) {
  if (!(training_power_sum >= 0.0)) {
    throw std::invalid_argument("estimation_error_variance: training power sum must be >= 0");
  }
  EstimationState st;
  st.training_energy_sum = training_power_sum * params.slot_duration;
  if (std::isinf(training_power_sum)) {
    st.error_var = 0.0;
  } else if (training_power_sum == 0.0) {
    st.error_var = params.sigma_h_sq;
  } else {
    st.error_var = params.sigma_sq * params.sigma_h_sq /
                   (params.sigma_sq + params.sigma_h_sq * training_power_sum);
  }
  st.estimate_var = params.sigma_h_sq - st.error_var;
  return st;
}

/// Effective SNR K of a data slot with power P after training with power sum S:
///   sigma_h^4 P S / (sigma^4 + sigma^2 sigma_h^2 P + sigma^2 sigma_h^2 S)
inline double k_factor(double data_power, double training_power_sum, const ChannelParams& params) {
  if (!(data_power >= 0.0) || !(training_power_sum >= 0.0)) {
    throw std::invalid_argument("k_factor: powers must be >= 0");
  }
  if (data_power == 0.0 || training_power_sum == 0.0) {
    return 0.0;
  }
  const double s2 = params.sigma_sq;
  const double h2 = params.sigma_h_sq;
  return h2 * h2 * data_power * training_power_sum /
         (s2 * s2 + s2 * h2 * data_power + s2 * h2 * training_power_sum);
}

/// M = exp(1/K) E1(1/K), the expected rate of one slot in nats; 0 when K = 0.
inline double slot_rate_term(double k) {
  if (!(k >= 0.0)) {
    throw std::invalid_argument("slot_rate_term: k must be >= 0");
  }
  return k > 0.0 ? exp_e1(1.0 / k) : 0.0;
}

/// Average throughput in bits/slot over the whole block of N slots, counting
/// only the data slots n_t+1 .. N.
inline RateReport block_throughput(const EnergyProfile& profile, const TrainingDecision& decision,
                                   const PowerAllocation& data_alloc,
                                   const ChannelParams& params) {
  const std::size_t n = profile.size();
  if (data_alloc.start_slot != decision.n_t || data_alloc.end_slot() != n ||
      data_alloc.powers.size() != data_alloc.breakpoints.size()) {
    throw std::invalid_argument("block_throughput: allocation covers slots " +
                                std::to_string(data_alloc.start_slot + 1) + ".." +
                                std::to_string(data_alloc.end_slot()) + " but training ends at " +
                                std::to_string(decision.n_t) + " of N = " + std::to_string(n));
  }
  const double s = decision.training_energy_sum / params.slot_duration;
  RateReport report;
  report.n_t_used = decision.n_t;
  report.per_slot_terms.reserve(n - decision.n_t);
  double nats = 0.0;
  for (std::size_t i = 0; i < data_alloc.interval_count(); ++i) {
    const double m = slot_rate_term(k_factor(data_alloc.powers[i], s, params));
    const std::size_t len = data_alloc.interval_length(i);
    nats += static_cast<double>(len) * m;
    report.per_slot_terms.insert(report.per_slot_terms.end(), len, m);
  }
  report.bits_per_slot = std::numbers::log2e * nats / static_cast<double>(n);
  return report;
}

/// Throughput with perfect CSI (no estimation error, no training slots).
inline RateReport perfect_csi_throughput(const PowerAllocation& data_alloc,
                                         const ChannelParams& params) {
  if (data_alloc.start_slot != 0 || data_alloc.breakpoints.empty()) {
    throw std::invalid_argument("perfect_csi_throughput: allocation must cover slots 1..N");
  }
  const std::size_t n = data_alloc.end_slot();
  RateReport report;
  report.per_slot_terms.reserve(n);
  double nats = 0.0;
  for (std::size_t i = 0; i < data_alloc.interval_count(); ++i) {
    const double p = data_alloc.powers[i];
    const double m = p > 0.0 ? exp_e1(params.sigma_sq / (params.sigma_h_sq * p)) : 0.0;
    const std::size_t len = data_alloc.interval_length(i);
    nats += static_cast<double>(len) * m;
    report.per_slot_terms.insert(report.per_slot_terms.end(), len, m);
  }
  report.bits_per_slot = std::numbers::log2e * nats / static_cast<double>(n);
  return report;
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::uint64_t samples = 0;
};

namespace mc_detail {

inline constexpr std::uint64_t kChunkSamples = 1u << 16;
// Chunks read disjoint windows of the same Philox stream.
inline constexpr std::uint64_t kChunkStride = std::uint64_t{1} << 40;

struct Partial {
  double sum = 0.0;
  double sum_sq = 0.0;
};

}  // namespace mc_detail

/// Monte-Carlo estimate of the block rate: averages
///   (1/N) sum_i log2(1 + |h_hat|^2 P_i / (sigma^2 + P_i sigma_err^2))
/// over draws h_hat ~ CN(0, sigma_h^2 - sigma_err^2).
///
/// Samples are split into fixed-size chunks that read disjoint counter
/// windows; partial sums are merged in chunk order, so the result does not
/// depend on `jobs`.
inline MonteCarloEstimate mc_throughput_oracle(const EnergyProfile& profile,
                                               const TrainingDecision& decision,
                                               const PowerAllocation& data_alloc,
                                               const ChannelParams& params, std::uint64_t samples,
                                               RngSpec rng, unsigned jobs = 1) {
  if (samples < 1) {
    throw std::invalid_argument("mc_throughput_oracle: samples must be >= 1");
  }
  const std::size_t n = profile.size();
  if (data_alloc.start_slot != decision.n_t || data_alloc.end_slot() != n) {
    throw std::invalid_argument("mc_throughput_oracle: allocation does not match the decision");
  }
  const EstimationState est =
      estimation_error_variance(decision.training_energy_sum / params.slot_duration, params);
  const double half_var = est.estimate_var / 2.0;

  struct Term {
    double weight;  // interval length / N
    double power;
  };
  std::vector<Term> terms;
  for (std::size_t i = 0; i < data_alloc.interval_count(); ++i) {
    if (data_alloc.powers[i] > 0.0) {
      terms.push_back({static_cast<double>(data_alloc.interval_length(i)) / static_cast<double>(n),
                       data_alloc.powers[i]});
    }
  }

  const std::uint64_t chunks = (samples + mc_detail::kChunkSamples - 1) / mc_detail::kChunkSamples;
  std::vector<mc_detail::Partial> partials(chunks);
  auto run_chunk = [&](std::uint64_t c) {
    CounterRng gen(rng, c * mc_detail::kChunkStride);
    const std::uint64_t begin = c * mc_detail::kChunkSamples;
    const std::uint64_t end = std::min(samples, begin + mc_detail::kChunkSamples);
    mc_detail::Partial part;
    for (std::uint64_t s = begin; s < end; ++s) {
      const auto [z1, z2] = gen.normal_pair();
      const double gain = half_var * (z1 * z1 + z2 * z2);
      double value = 0.0;
      for (const Term& t : terms) {
        value += t.weight * std::log2(1.0 + gain * t.power /
                                                (params.sigma_sq + t.power * est.error_var));
      }
      part.sum += value;
      part.sum_sq += value * value;
    }
    partials[c] = part;
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint64_t c = w; c < chunks; c += workers) run_chunk(c);
      });
    }
    for (auto& t : pool) t.join();
  }

  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& p : partials) {
    sum += p.sum;
    sum_sq += p.sum_sq;
  }
  const double count = static_cast<double>(samples);
  MonteCarloEstimate out;
  out.samples = samples;
  out.mean = sum / count;
  if (samples > 1) {
    const double var = std::max(0.0, (sum_sq - count * out.mean * out.mean) / (count - 1.0));
    out.standard_error = std::sqrt(var / count);
  }
  return out;
}

}  // namespace ehtrain

#endif  // EHTRAIN_THROUGHPUT_HPP
