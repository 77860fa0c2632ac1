#ifndef EHTRAIN_POLICIES_HPP
#define EHTRAIN_POLICIES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ehtrain/dwf.hpp"
#include "ehtrain/energy_model.hpp"
#include "ehtrain/search.hpp"
#include "ehtrain/special_functions.hpp"
#include "ehtrain/throughput.hpp"

namespace ehtrain {

/// A training policy's decision for one block and the rate it achieves.
struct PolicyOutcome {
  std::string policy_id;
  std::size_t n_t = 0;
  double e_te = 0.0;
  TrainingDecision decision;
  PowerAllocation data_alloc;
  double rate = 0.0;  // bits/slot
  bool clamped = false;
};

/// Raised when a closed-form model quantity leaves its valid domain.
class ModelDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Runs a concrete (n_t, e_te) choice: training split, water-filled data
/// stage, block throughput.
inline PolicyOutcome execute_training(const EnergyProfile& profile, const ChannelParams& params,
                                      std::string policy_id, std::size_t n_t, double e_te) {
  PolicyOutcome out;
  out.policy_id = std::move(policy_id);
  out.n_t = n_t;
  out.e_te = e_te;
  out.decision = training_split(profile, n_t, e_te, params);
  out.data_alloc = dwf_suffix(profile, n_t, e_te, params);
  out.rate = block_throughput(profile, out.decision, out.data_alloc, params).bits_per_slot;
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive search
// ---------------------------------------------------------------------------

namespace policy_detail {

/// Rate of (n_t, e_te) candidates without materializing allocations.
///
/// The data-stage water-filling from slot s with leftover e is the lower
/// convex hull of the start point (s, A(s) - e) and the cumulative points
/// (l, A(l)), l > s. The hull of the points right of s is kept on a stack and
/// extended leftwards as s decreases, so training periods must be visited in
/// decreasing order. Each query only walks to the tangent vertex and then sums
/// over the remaining hull faces.
class SuffixHullEvaluator {
 public:
  SuffixHullEvaluator(const EnergyProfile& profile, const ChannelParams& params)
      : params_(params), n_(profile.size()), next_point_(profile.size()) {
    cum_.resize(n_ + 1);
    for (std::size_t l = 0; l <= n_; ++l) cum_[l] = profile.cumulative(l);
    hull_.reserve(n_);
  }

  void set_training_period(std::size_t s) {
    if (s < 1 || s >= n_ || s > next_point_) {
      throw std::logic_error("SuffixHullEvaluator: training periods must be visited in decreasing order");
    }
    while (next_point_ >= s + 1) {
      push(next_point_);
      --next_point_;
    }
    s_ = s;
  }

  double rate(double e_te) const {
    const double y0 = cum_[s_] - e_te;
    const double training_sum = y0 / params_.slot_duration;
    std::size_t i = hull_.size() - 1;
    while (i > 0) {
      const std::size_t v = hull_[i];
      const std::size_t w = hull_[i - 1];
      const double lhs = (cum_[v] - y0) * static_cast<double>(w - v);
      const double rhs = (cum_[w] - cum_[v]) * static_cast<double>(v - s_);
      if (lhs >= rhs) {
        --i;
      } else {
        break;
      }
    }
    const std::size_t v = hull_[i];
    double len = static_cast<double>(v - s_);
    double nats = len * slot_rate_term(k_factor((cum_[v] - y0) / (len * params_.slot_duration),
                                                training_sum, params_));
    for (std::size_t j = i; j > 0; --j) {
      const std::size_t a = hull_[j];
      const std::size_t b = hull_[j - 1];
      len = static_cast<double>(b - a);
      nats += len * slot_rate_term(k_factor((cum_[b] - cum_[a]) / (len * params_.slot_duration),
                                            training_sum, params_));
    }
    return std::numbers::log2e * nats / static_cast<double>(n_);
  }

 private:
  void push(std::size_t l) {
    while (hull_.size() >= 2) {
      const std::size_t b = hull_.back();
      const std::size_t c = hull_[hull_.size() - 2];
      const double lhs = (cum_[b] - cum_[l]) * static_cast<double>(c - b);
      const double rhs = (cum_[c] - cum_[b]) * static_cast<double>(b - l);
      if (lhs >= rhs) {
        hull_.pop_back();
      } else {
        break;
      }
    }
    hull_.push_back(l);
  }

  ChannelParams params_;
  std::size_t n_;
  std::size_t next_point_;
  std::size_t s_ = 0;
  std::vector<double> cum_;
  std::vector<std::size_t> hull_;  // back() is the leftmost vertex
};

}  // namespace policy_detail

struct ExhaustiveOptions {
  std::size_t ete_grid_points = 65;
  bool refine = true;  // golden-section pass around each period's best grid point
  double refine_rel_tol = 1e-6;
};

/// Best (n_t, e_te) over every n_t in [1, N-1] and a uniform grid of leftover
/// energies in [0, E_{n_t-1}] (endpoints included), optionally refined.
/// Ties go to the smaller n_t, then the smaller e_te.
inline PolicyOutcome optimal_exhaustive(const EnergyProfile& profile, const ChannelParams& params,
                                        const ExhaustiveOptions& options = {}) {
  const std::size_t n = profile.size();
  require_block_length(n, "optimal_exhaustive");
  if (options.ete_grid_points < 2) {
    throw std::invalid_argument("optimal_exhaustive: ete_grid_points must be >= 2");
  }
  policy_detail::SuffixHullEvaluator eval(profile, params);
  double best_rate = -1.0;
  std::size_t best_nt = 1;
  double best_ete = 0.0;

  for (std::size_t s = n - 1; s >= 1; --s) {
    eval.set_training_period(s);
    const double last = profile[s - 1];
    const std::size_t points = last > 0.0 ? options.ete_grid_points : 1;
    auto grid = [&](std::size_t g) {
      return g + 1 == points ? last : last * static_cast<double>(g) / static_cast<double>(points - 1);
    };
    double local_rate = -1.0;
    double local_ete = 0.0;
    std::size_t local_g = 0;
    for (std::size_t g = 0; g < points; ++g) {
      const double e = grid(g);
      const double r = eval.rate(e);
      if (r > local_rate) {
        local_rate = r;
        local_ete = e;
        local_g = g;
      }
    }
    if (options.refine && points > 1) {
      const double lo = grid(local_g == 0 ? 0 : local_g - 1);
      const double hi = grid(std::min(local_g + 1, points - 1));
      const ScalarOptimum opt = golden_section_maximize(
          [&](double e) { return eval.rate(e); }, lo, hi, options.refine_rel_tol * last);
      if (opt.value > local_rate) {
        local_rate = opt.value;
        local_ete = opt.x;
      }
    }
    if (local_rate >= best_rate) {
      best_rate = local_rate;
      best_nt = s;
      best_ete = local_ete;
    }
    if (s == 1) break;
  }
  return execute_training(profile, params, "optimal", best_nt, best_ete);
}

// ---------------------------------------------------------------------------
// Sub-optimal solution 1: fixed DWF powers, training at the average EH rate
// ---------------------------------------------------------------------------

/// Approximate training-period model: the no-training water-filling powers
/// P_i stay fixed and training is charged at the average EH rate P_H, giving
///   K_Si = sigma_h^4 P_i n P_H / (sigma^4 + sigma^2 sigma_h^2 P_i + sigma^2 sigma_h^2 n P_H)
/// and the objective (N - n)/N * sum_i M_i with M_i = exp(1/K_Si) E1(1/K_Si).
class FixedPowerModel {
 public:
  struct Interval {
    double length;
    double power;
  };

  FixedPowerModel(const PowerAllocation& dwf_powers, double p_bar_h, std::size_t n,
             const ChannelParams& params)
      : p_bar_h_(p_bar_h), n_(n), params_(params) {
    for (std::size_t i = 0; i < dwf_powers.interval_count(); ++i) {
      // Zero-power slots contribute nothing to the objective or its derivative.
      if (dwf_powers.powers[i] > 0.0) {
        intervals_.push_back(
            {static_cast<double>(dwf_powers.interval_length(i)), dwf_powers.powers[i]});
      }
    }
  }

  static FixedPowerModel from_profile(const EnergyProfile& profile, const ChannelParams& params) {
    return FixedPowerModel(dwf_allocate(profile, params), average_eh_rate(profile, params),
                      profile.size(), params);
  }

  double p_bar_h() const noexcept { return p_bar_h_; }
  std::size_t block_length() const noexcept { return n_; }
  const std::vector<Interval>& intervals() const noexcept { return intervals_; }
  bool degenerate() const noexcept { return intervals_.empty() || !(p_bar_h_ > 0.0); }

  double k_s(double power, double n_t) const {
    const double s2 = params_.sigma_sq;
    const double h2 = params_.sigma_h_sq;
    const double train = n_t * p_bar_h_;
    return h2 * h2 * power * train / (s2 * s2 + s2 * h2 * power + s2 * h2 * train);
  }

  double g(double power, double n_t) const {
    return params_.sigma_h_sq * p_bar_h_ * n_t / (params_.sigma_sq + params_.sigma_h_sq * power);
  }

  double m(double power, double n_t) const { return slot_rate_term(k_s(power, n_t)); }

  /// (N - n_t)/N * sum_i M_i.
  double objective(double n_t) const {
    double sum = 0.0;
    for (const auto& iv : intervals_) sum += iv.length * m(iv.power, n_t);
    return (static_cast<double>(n_) - n_t) / static_cast<double>(n_) * sum;
  }

  /// Stationarity condition in x = 1/n_t:
  ///   sum_i M_i [1 + (N/n_t - 1) sigma^2 / (sigma_h^2 P_i G_i)] - (N/n_t - 1)/(1 + G_i)
  /// with G_i = sigma_h^2 P_H n_t / (sigma^2 + sigma_h^2 P_i). Its sign is the
  /// sign of d(objective)/dx, so it is negative while lengthening training helps.
  double stationarity(double n_t) const {
    const double r = static_cast<double>(n_) / n_t - 1.0;
    double sum = 0.0;
    for (const auto& iv : intervals_) {
      const double gi = g(iv.power, n_t);
      const double mi = m(iv.power, n_t);
      sum += iv.length * (mi * (1.0 + r * params_.sigma_sq / (params_.sigma_h_sq * iv.power * gi)) -
                          r / (1.0 + gi));
    }
    return sum;
  }

  /// M_i^A = exp(sigma^2/(sigma_h^2 P_i)) E1(sigma^2/(sigma_h^2 P_i)).
  double asymptotic_term(double power) const {
    return exp_e1(params_.sigma_sq / (params_.sigma_h_sq * power));
  }

  /// W = sum_i M_i^A / sum_i (sigma^4 + sigma^2 sigma_h^2 P_i)/(sigma^2 sigma_h^2 P_H)
  ///                          * (1 - sigma^2 M_i^A / (sigma_h^2 P_i))
  double w() const {
    const double s2 = params_.sigma_sq;
    const double h2 = params_.sigma_h_sq;
    double num = 0.0;
    double den = 0.0;
    for (const auto& iv : intervals_) {
      const double ma = asymptotic_term(iv.power);
      num += iv.length * ma;
      den += iv.length * (s2 * s2 + s2 * h2 * iv.power) / (s2 * h2 * p_bar_h_) *
             (1.0 - s2 * ma / (h2 * iv.power));
    }
    return num / den;
  }

 private:
  double p_bar_h_;
  std::size_t n_;
  ChannelParams params_;
  std::vector<Interval> intervals_;
};

struct RootOptions {
  double x_tolerance = 1e-10;
};

namespace policy_detail {

/// Continuous maximizer of a training-period objective that is concave in
/// x = 1/n over n in [1, N-1], from the sign of its stationarity condition
/// (negative while the objective still grows with n). Falls back to the better
/// endpoint when the condition does not change sign.
template <class Stationarity, class Objective>
double continuous_training_root(std::size_t n, Stationarity&& stationarity, Objective&& objective,
                                const RootOptions& opts) {
  if (n <= 2) return 1.0;
  const double n_max = static_cast<double>(n - 1);
  auto in_x = [&](double x) { return stationarity(1.0 / x); };
  const double x_lo = 1.0 / n_max;  // long training
  const double x_hi = 1.0;          // one slot
  const double at_long = in_x(x_lo);
  const double at_short = in_x(x_hi);
  if (at_short < 0.0 && at_long > 0.0) {
    return 1.0 / bisect_sign_change(in_x, x_lo, x_hi, opts.x_tolerance);
  }
  return objective(1.0) >= objective(n_max) ? 1.0 : n_max;
}

/// Integer neighbour of a continuous optimum with the larger objective,
/// clamped to [1, N-1]; the smaller one wins ties.
template <class Objective>
std::size_t discretize_training_period(double root, std::size_t n, Objective&& objective) {
  const double n_max = static_cast<double>(n - 1);
  const double lo = std::clamp(std::floor(root), 1.0, n_max);
  const double hi = std::clamp(std::ceil(root), 1.0, n_max);
  const double chosen = objective(hi) > objective(lo) ? hi : lo;
  return static_cast<std::size_t>(chosen);
}

}  // namespace policy_detail

/// Continuous stationary point of the fixed-power approximation.
inline double fixed_power_continuous_root(const FixedPowerModel& ctx, const RootOptions& opts = {}) {
  return policy_detail::continuous_training_root(
      ctx.block_length(), [&](double nt) { return ctx.stationarity(nt); },
      [&](double nt) { return ctx.objective(nt); }, opts);
}

/// Sub-optimal solution 1: choose n_t from the fixed-power approximation of
/// the whole profile, then run it with no leftover training energy.
inline PolicyOutcome suboptimal_dwf_rate(const EnergyProfile& profile, const ChannelParams& params,
                                         const RootOptions& opts = {}) {
  const std::size_t n = profile.size();
  require_block_length(n, "suboptimal_dwf_rate");
  const FixedPowerModel ctx = FixedPowerModel::from_profile(profile, params);
  std::size_t n_t = 1;
  if (!ctx.degenerate()) {
    const double root = fixed_power_continuous_root(ctx, opts);
    n_t = policy_detail::discretize_training_period(
        root, n, [&](double nt) { return ctx.objective(nt); });
  }
  return execute_training(profile, params, "suboptimal_dwf_rate", n_t, 0.0);
}

struct AsymptoticPeriod {
  double n_t = 0.0;
  double alpha = 0.0;  // n_t / N
};

/// Large-N closed form n_t = 2N / (1 + sqrt(1 + 4 N W)).
/// Throws ModelDomainError when W is not finite and positive.
inline AsymptoticPeriod asymptotic_training_period(const FixedPowerModel& ctx) {
  if (ctx.intervals().empty()) {
    throw ModelDomainError("asymptotic_training_period: every water-filling power is zero");
  }
  const double w = ctx.w();
  if (!std::isfinite(w) || !(w > 0.0)) {
    throw ModelDomainError("asymptotic_training_period: W = " + std::to_string(w) +
                           " is not finite and positive");
  }
  const double n = static_cast<double>(ctx.block_length());
  AsymptoticPeriod out;
  out.alpha = 2.0 / (1.0 + std::sqrt(1.0 + 4.0 * n * w));
  out.n_t = n * out.alpha;
  return out;
}

inline AsymptoticPeriod asymptotic_training_period(const EnergyProfile& profile,
                                                   const ChannelParams& params) {
  return asymptotic_training_period(FixedPowerModel::from_profile(profile, params));
}

// ---------------------------------------------------------------------------
// Constant-rate harvesting and sub-optimal solution 2
// ---------------------------------------------------------------------------

namespace constant_rate {

/// Effective SNR when both training and data run at the EH rate p_h.
inline double k_con(double p_h, double n_t, const ChannelParams& params) {
  const double s2 = params.sigma_sq;
  const double h2 = params.sigma_h_sq;
  return h2 * h2 * p_h * p_h * n_t / (s2 * s2 + s2 * h2 * p_h * (1.0 + n_t));
}

inline double g_con(double p_h, double n_t, const ChannelParams& params) {
  return params.sigma_h_sq * p_h * n_t / (params.sigma_sq + params.sigma_h_sq * p_h);
}

/// Exact throughput fraction (N - n_t)/N * exp(1/K) E1(1/K), in nats/slot.
inline double objective(double p_h, std::size_t n, double n_t, const ChannelParams& params) {
  return (static_cast<double>(n) - n_t) / static_cast<double>(n) *
         slot_rate_term(k_con(p_h, n_t, params));
}

/// Stationarity condition of the constant-rate objective in x = 1/n_t.
inline double stationarity(double p_h, std::size_t n, double n_t, const ChannelParams& params) {
  const double r = static_cast<double>(n) / n_t - 1.0;
  const double g = g_con(p_h, n_t, params);
  const double m = slot_rate_term(k_con(p_h, n_t, params));
  return m * (1.0 + r * params.sigma_sq / (params.sigma_h_sq * p_h * g)) - r / (1.0 + g);
}

}  // namespace constant_rate

/// Optimal training period for a constant harvesting rate p_h.
inline std::size_t constant_rate_optimum(double p_h, std::size_t n, const ChannelParams& params,
                                         const RootOptions& opts = {}) {
  if (!(p_h > 0.0) || !std::isfinite(p_h)) {
    throw std::invalid_argument("constant_rate_optimum: p_h must be finite and > 0");
  }
  require_block_length(n, "constant_rate_optimum");
  auto objective = [&](double nt) { return constant_rate::objective(p_h, n, nt, params); };
  const double root = policy_detail::continuous_training_root(
      n, [&](double nt) { return constant_rate::stationarity(p_h, n, nt, params); }, objective,
      opts);
  return policy_detail::discretize_training_period(root, n, objective);
}

/// Sub-optimal solution 2: n_t from the constant-rate optimum at the block's
/// average harvesting rate, executed on the real profile.
inline PolicyOutcome suboptimal_constant_rate(const EnergyProfile& profile,
                                              const ChannelParams& params,
                                              const RootOptions& opts = {}) {
  const std::size_t n = profile.size();
  require_block_length(n, "suboptimal_constant_rate");
  const double p_hat = average_eh_rate(profile, params);
  const std::size_t n_t = p_hat > 0.0 ? constant_rate_optimum(p_hat, n, params, opts) : 1;
  return execute_training(profile, params, "suboptimal_constant_rate", n_t, 0.0);
}

// ---------------------------------------------------------------------------
// Fixed baselines and upper bounds
// ---------------------------------------------------------------------------

struct FixedSlots {
  std::size_t value = 30;
};
struct FixedRatio {
  double ratio = 0.04;
};
struct OneSlot {};
using FixedMode = std::variant<FixedSlots, FixedRatio, OneSlot>;

inline std::string fixed_policy_id(const FixedMode& mode) {
  struct Visitor {
    std::string operator()(const FixedSlots& m) const {
      return "fixed_slots_" + std::to_string(m.value);
    }
    std::string operator()(const FixedRatio& m) const {
      char buf[64];
      std::snprintf(buf, sizeof buf, "fixed_ratio_%g", m.ratio);
      return buf;
    }
    std::string operator()(const OneSlot&) const { return "one_slot"; }
  };
  return std::visit(Visitor{}, mode);
}

/// Profile-independent training period, clamped into [1, N-1]; `clamped`
/// reports whether the requested value had to move.
inline PolicyOutcome fixed_policy(const EnergyProfile& profile, const ChannelParams& params,
                                  const FixedMode& mode) {
  const std::size_t n = profile.size();
  require_block_length(n, "fixed_policy");
  long requested = 1;
  if (const auto* slots = std::get_if<FixedSlots>(&mode)) {
    if (slots->value < 1) throw std::invalid_argument("fixed_policy: fixed value must be >= 1");
    requested = static_cast<long>(slots->value);
  } else if (const auto* ratio = std::get_if<FixedRatio>(&mode)) {
    if (!(ratio->ratio > 0.0 && ratio->ratio < 1.0)) {
      throw std::invalid_argument("fixed_policy: ratio must lie in (0, 1)");
    }
    requested = std::lround(ratio->ratio * static_cast<double>(n));
  }
  const long n_t = std::clamp(requested, 1L, static_cast<long>(n - 1));
  PolicyOutcome out =
      execute_training(profile, params, fixed_policy_id(mode), static_cast<std::size_t>(n_t), 0.0);
  out.clamped = n_t != requested;
  return out;
}

/// Rate of a conventional (non-harvesting) node holding the same total energy
/// up front: one pilot slot, constant data power, best pilot/data split.
inline double upper_bound_non_eh(double total_energy, std::size_t n, const ChannelParams& params) {
  require_block_length(n, "upper_bound_non_eh");
  if (!(total_energy >= 0.0) || !std::isfinite(total_energy)) {
    throw std::invalid_argument("upper_bound_non_eh: total_energy must be finite and >= 0");
  }
  if (total_energy == 0.0) return 0.0;
  const double data_slots = static_cast<double>(n - 1);
  auto rate = [&](double rho) {
    const double s = rho * total_energy / params.slot_duration;
    const double p = (1.0 - rho) * total_energy / (data_slots * params.slot_duration);
    return data_slots / static_cast<double>(n) * std::numbers::log2e *
           slot_rate_term(k_factor(p, s, params));
  };
  return golden_section_maximize(rate, 0.0, 1.0, 1e-9).value;
}

/// Rate with perfect CSI under the same harvesting profile: no training,
/// water-filled powers over all N slots.
inline double upper_bound_perfect_csi(const EnergyProfile& profile, const ChannelParams& params) {
  return perfect_csi_throughput(dwf_allocate(profile, params), params).bits_per_slot;
}

}  // namespace ehtrain

#endif  // EHTRAIN_POLICIES_HPP
