#ifndef EHTRAIN_ENERGY_MODEL_HPP
#define EHTRAIN_ENERGY_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehtrain/rng.hpp"

namespace ehtrain {

/// Channel and timing constants shared by every rate computation.
struct ChannelParams {
  double sigma_h_sq = 1.0;     // channel variance
  double sigma_sq = 1.0;       // noise variance
  double slot_duration = 1.0;  // T_S

  void validate() const {
    if (!(sigma_h_sq > 0.0) || !std::isfinite(sigma_h_sq)) {
      throw std::invalid_argument("ChannelParams: sigma_h_sq must be finite and > 0");
    }
    if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq)) {
      throw std::invalid_argument("ChannelParams: sigma_sq must be finite and > 0");
    }
    if (!(slot_duration > 0.0) || !std::isfinite(slot_duration)) {
      throw std::invalid_argument("ChannelParams: slot_duration must be finite and > 0");
    }
  }
};

/// Harvested energies [E_0, ..., E_{N-1}] of one transmission block.
///
/// E_0 is the initial buffer content. E_k becomes usable from slot k+1 on, so
/// the energy available by the end of slot l is E_0 + ... + E_{l-1}.
/// Immutable once constructed.
class EnergyProfile {
 public:
  explicit EnergyProfile(std::vector<double> energies) : energies_(std::move(energies)) {
    if (energies_.empty()) {
      throw std::invalid_argument("EnergyProfile: at least one slot is required");
    }
    prefix_.resize(energies_.size() + 1);
    prefix_[0] = 0.0;
    for (std::size_t k = 0; k < energies_.size(); ++k) {
      const double e = energies_[k];
      if (!(e >= 0.0) || !std::isfinite(e)) {
        throw std::invalid_argument("EnergyProfile: energy at slot index " + std::to_string(k) +
                                    " must be finite and >= 0");
      }
      prefix_[k + 1] = prefix_[k] + e;
    }
    if (!std::isfinite(prefix_.back())) {
      throw std::invalid_argument("EnergyProfile: total energy is not finite");
    }
  }

  std::size_t size() const noexcept { return energies_.size(); }
  double operator[](std::size_t k) const { return energies_[k]; }
  std::span<const double> energies() const noexcept { return energies_; }
  double total() const noexcept { return prefix_.back(); }

  /// Sum of E_0 .. E_{l-1}; l in [0, N].
  double cumulative(std::size_t l) const {
    if (l > energies_.size()) {
      throw std::out_of_range("EnergyProfile::cumulative: slot index " + std::to_string(l) +
                              " exceeds N = " + std::to_string(energies_.size()));
    }
    return prefix_[l];
  }

  bool operator==(const EnergyProfile& other) const { return energies_ == other.energies_; }

 private:
  std::vector<double> energies_;
  std::vector<double> prefix_;
};

inline void require_block_length(std::size_t n, const char* fn) {
  if (n < 2) {
    throw std::invalid_argument(std::string(fn) +
                                ": need at least 2 slots (one training, one data), got " +
                                std::to_string(n));
  }
}

/// One Poisson(lambda_e) draw by inversion: walk the CDF until it exceeds u.
inline unsigned poisson_by_inversion(double lambda_e, CounterRng& rng) {
  const double u = rng.uniform();
  double p = std::exp(-lambda_e);
  double cdf = p;
  unsigned k = 0;
  while (u >= cdf) {
    ++k;
    p *= lambda_e / k;
    const double next = cdf + p;
    if (next == cdf) {
      break;  // remaining tail mass is below double resolution
    }
    cdf = next;
  }
  return k;
}

/// N independent Poisson(lambda_e) energies; E_0 (initial buffer) included.
inline EnergyProfile generate_poisson_profile(std::size_t n, double lambda_e, RngSpec rng_spec) {
  require_block_length(n, "generate_poisson_profile");
  if (!(lambda_e > 0.0) || lambda_e > 500.0) {
    throw std::invalid_argument("generate_poisson_profile: lambda_e must be in (0, 500]");
  }
  CounterRng rng(rng_spec);
  std::vector<double> energies(n);
  for (auto& e : energies) {
    e = static_cast<double>(poisson_by_inversion(lambda_e, rng));
  }
  return EnergyProfile(std::move(energies));
}

inline EnergyProfile constant_profile(std::size_t n, double rate) {
  require_block_length(n, "constant_profile");
  if (!(rate >= 0.0) || !std::isfinite(rate)) {
    throw std::invalid_argument("constant_profile: rate must be finite and >= 0");
  }
  return EnergyProfile(std::vector<double>(n, rate));
}

inline double cumulative_available(const EnergyProfile& profile, std::size_t l) {
  return profile.cumulative(l);
}

/// Mean harvested power over the block, total / (N * T_S).
inline double average_eh_rate(const EnergyProfile& profile, const ChannelParams& params) {
  return profile.total() / (static_cast<double>(profile.size()) * params.slot_duration);
}

struct NeutralityCheck {
  bool ok = true;
  std::optional<std::size_t> first_violation;  // smallest violating l (1-based slot)
};

/// Checks T_S * (P_1 + ... + P_l) <= E_0 + ... + E_{l-1} for every l = 1..N.
///
/// rel_tol absorbs rounding in powers derived from interval averages; the
/// allowed excess at slot l is rel_tol * max(1, available(l)).
inline NeutralityCheck check_energy_neutral(const EnergyProfile& profile,
                                            std::span<const double> powers,
                                            const ChannelParams& params,
                                            double rel_tol = 1e-12) {
  if (powers.size() != profile.size()) {
    throw std::invalid_argument("check_energy_neutral: " + std::to_string(powers.size()) +
                                " powers for a profile of " + std::to_string(profile.size()) +
                                " slots");
  }
  double used = 0.0;
  for (std::size_t l = 1; l <= powers.size(); ++l) {
    const double p = powers[l - 1];
    if (!(p >= 0.0)) {
      throw std::invalid_argument("check_energy_neutral: negative power at slot " +
                                  std::to_string(l));
    }
    used += params.slot_duration * p;
    const double available = profile.cumulative(l);
    if (used > available + rel_tol * std::max(1.0, available)) {
      return {false, l};
    }
  }
  return {};
}

}  // namespace ehtrain

#endif  // EHTRAIN_ENERGY_MODEL_HPP
