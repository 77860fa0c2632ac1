#ifndef EHTRAIN_DWF_HPP
#define EHTRAIN_DWF_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehtrain/energy_model.hpp"

namespace ehtrain {

/// Piecewise-constant power schedule over slots start_slot+1 .. N.
///
/// Interval n covers slots (k_{n-1}, k_n] with k_0 = start_slot and
/// k_n = breakpoints[n-1]; its per-slot power is powers[n-1]. Powers strictly
/// increase from one interval to the next, and the cumulative consumption meets
/// the available energy with equality at every breakpoint.
struct PowerAllocation {
  std::vector<std::size_t> breakpoints;
  std::vector<double> powers;
  std::size_t start_slot = 0;

  std::size_t interval_count() const noexcept { return breakpoints.size(); }
  std::size_t end_slot() const { return breakpoints.empty() ? start_slot : breakpoints.back(); }
  std::size_t slot_count() const { return end_slot() - start_slot; }

  std::size_t interval_begin(std::size_t n) const {
    return n == 0 ? start_slot : breakpoints[n - 1];
  }
  std::size_t interval_length(std::size_t n) const { return breakpoints[n] - interval_begin(n); }

  /// Expanded powers for slots start_slot+1 .. end_slot, in order.
  std::vector<double> per_slot_powers() const {
    std::vector<double> out;
    out.reserve(slot_count());
    for (std::size_t n = 0; n < interval_count(); ++n) {
      out.insert(out.end(), interval_length(n), powers[n]);
    }
    return out;
  }

  bool operator==(const PowerAllocation&) const = default;
};

/// Training stage layout for a given training period.
struct TrainingDecision {
  std::size_t n_t = 1;
  std::vector<double> training_powers;  // slots 1..n_t
  double e_te = 0.0;                    // energy carried into the data stage
  double training_energy_sum = 0.0;     // T_S * sum of training powers
};

namespace dwf_detail {

// Relative slack under which two interval averages count as equal. Equal
// averages merge into one interval (largest minimizing index wins).
inline constexpr double kTieRelTol = 1e-12;

struct Breakpoint {
  std::size_t index;
  double energy;  // sum of energies[from .. index-1], accumulated left to right
};

// argmin over k in (from, N] of mean(energies[from .. k-1]), largest k on ties.
inline Breakpoint next_breakpoint(std::span<const double> energies, std::size_t from) {
  Breakpoint best{from + 1, energies[from]};
  double best_len = 1.0;
  double running = energies[from];
  for (std::size_t k = from + 2; k <= energies.size(); ++k) {
    running += energies[k - 1];
    const double len = static_cast<double>(k - from);
    const double lhs = running * best_len;
    const double rhs = best.energy * len;
    if (lhs <= rhs + kTieRelTol * std::max(lhs, rhs)) {
      best = {k, running};
      best_len = len;
    }
  }
  return best;
}

// Appends the directional water-filling intervals of energies[from ..] to out,
// reporting breakpoints as offset + index.
inline void water_fill(std::span<const double> energies, std::size_t from, std::size_t offset,
                       double slot_duration, PowerAllocation& out) {
  std::size_t cur = from;
  while (cur < energies.size()) {
    const Breakpoint bp = next_breakpoint(energies, cur);
    out.breakpoints.push_back(offset + bp.index);
    out.powers.push_back(bp.energy / (static_cast<double>(bp.index - cur) * slot_duration));
    cur = bp.index;
  }
}

}  // namespace dwf_detail

/// Directional water-filling over the whole block (no training).
inline PowerAllocation dwf_allocate(const EnergyProfile& profile, const ChannelParams& params) {
  PowerAllocation out;
  out.start_slot = 0;
  dwf_detail::water_fill(profile.energies(), 0, 0, params.slot_duration, out);
  return out;
}

/// Directional water-filling over slots start_slot+1 .. N, with extra_energy
/// (leftover from training) added to the first usable arrival E_{start_slot}.
inline PowerAllocation dwf_suffix(const EnergyProfile& profile, std::size_t start_slot,
                                  double extra_energy, const ChannelParams& params) {
  const std::size_t n = profile.size();
  if (start_slot >= n) {
    throw std::invalid_argument("dwf_suffix: start_slot " + std::to_string(start_slot) +
                                " must be < N = " + std::to_string(n));
  }
  if (!(extra_energy >= 0.0) || !std::isfinite(extra_energy)) {
    throw std::invalid_argument("dwf_suffix: extra_energy must be finite and >= 0");
  }
  std::vector<double> suffix(profile.energies().begin() + static_cast<std::ptrdiff_t>(start_slot),
                             profile.energies().end());
  suffix.front() += extra_energy;
  PowerAllocation out;
  out.start_slot = start_slot;
  dwf_detail::water_fill(suffix, 0, start_slot, params.slot_duration, out);
  return out;
}

/// Allocation for data slots n_t+1 .. N derived from the no-training
/// allocation `base` instead of water-filling the suffix from scratch.
///
/// Leading intervals are recomputed from n_t until the recomputation lands on
/// one of base's breakpoints; from there on the suffix coincides with base.
/// When n_t sits inside a base interval this may take more than one
/// recomputed interval (e.g. energies [10,1,2,3], n_t = 1 yields three).
/// The result is identical to dwf_suffix(profile, n_t, 0, params).
inline PowerAllocation incremental_update(const PowerAllocation& base, const EnergyProfile& profile,
                                          std::size_t n_t, const ChannelParams& params) {
  const std::size_t n = profile.size();
  if (base.start_slot != 0 || base.breakpoints.empty() || base.breakpoints.back() != n ||
      base.powers.size() != base.breakpoints.size() ||
      !std::is_sorted(base.breakpoints.begin(), base.breakpoints.end(),
                      [](std::size_t a, std::size_t b) { return a <= b; })) {
    throw std::invalid_argument("incremental_update: base allocation does not cover the profile");
  }
  double consumed = 0.0;
  for (std::size_t i = 0; i < base.interval_count(); ++i) {
    consumed += base.powers[i] * static_cast<double>(base.interval_length(i)) * params.slot_duration;
  }
  if (std::abs(consumed - profile.total()) > 1e-9 * std::max(1.0, profile.total())) {
    throw std::invalid_argument("incremental_update: base allocation does not exhaust the profile");
  }
  if (n_t < 1 || n_t > n - 1) {
    throw std::invalid_argument("incremental_update: n_t must lie in [1, N-1]");
  }

  PowerAllocation out;
  out.start_slot = n_t;
  std::size_t cur = n_t;
  while (true) {
    const auto bp = dwf_detail::next_breakpoint(profile.energies(), cur);
    out.breakpoints.push_back(bp.index);
    out.powers.push_back(bp.energy / (static_cast<double>(bp.index - cur) * params.slot_duration));
    cur = bp.index;
    const auto it = std::lower_bound(base.breakpoints.begin(), base.breakpoints.end(), cur);
    if (it != base.breakpoints.end() && *it == cur) {
      const auto j = static_cast<std::size_t>(it - base.breakpoints.begin());
      out.breakpoints.insert(out.breakpoints.end(), base.breakpoints.begin() + j + 1,
                             base.breakpoints.end());
      out.powers.insert(out.powers.end(), base.powers.begin() + j + 1, base.powers.end());
      return out;
    }
  }
}

/// Training powers for period n_t: slots 1..n_t-1 spend their whole arrival,
/// slot n_t keeps e_te back for the data stage.
inline TrainingDecision training_split(const EnergyProfile& profile, std::size_t n_t, double e_te,
                                       const ChannelParams& params) {
  const std::size_t n = profile.size();
  if (n < 2 || n_t < 1 || n_t > n - 1) {
    throw std::invalid_argument("training_split: n_t = " + std::to_string(n_t) +
                                " outside [1, N-1] for N = " + std::to_string(n));
  }
  const double last_arrival = profile[n_t - 1];
  if (!(e_te >= 0.0) || e_te > last_arrival) {
    throw std::invalid_argument("training_split: e_te = " + std::to_string(e_te) +
                                " outside [0, E_{n_t-1}] = [0, " + std::to_string(last_arrival) +
                                "]");
  }
  TrainingDecision d;
  d.n_t = n_t;
  d.e_te = e_te;
  d.training_powers.reserve(n_t);
  for (std::size_t j = 1; j < n_t; ++j) {
    d.training_powers.push_back(profile[j - 1] / params.slot_duration);
  }
  d.training_powers.push_back((last_arrival - e_te) / params.slot_duration);
  d.training_energy_sum = profile.cumulative(n_t) - e_te;
  return d;
}

}  // namespace ehtrain

#endif  // EHTRAIN_DWF_HPP
