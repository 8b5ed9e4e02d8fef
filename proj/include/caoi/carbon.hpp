#pragma once

// Carbon-footprint accounting under a time-varying carbon intensity and the
// arrival-rate bounds that a carbon budget induces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "caoi/error.hpp"
#include "caoi/units.hpp"

namespace caoi {

/// Calendar anchor of a monthly profile; only used to label CSV output.
struct YearMonth {
  int year;
  int month;  // 1..12
  friend bool operator==(const YearMonth&, const YearMonth&) = default;
};

struct CiSample {
  double start;  // seconds from profile origin
  double ci;     // gCO2eq/kWh
  friend bool operator==(const CiSample&, const CiSample&) = default;
};

/// Carbon intensity as a right-open step function on [0, horizon). Queries
/// past the horizon hold the last value; callers that must not extrapolate
/// check the horizon themselves.
class CiProfile {
 public:
  CiProfile(std::vector<CiSample> samples, double horizon, std::optional<YearMonth> origin = std::nullopt)
      : samples_(std::move(samples)), horizon_(horizon), origin_(origin) {
    if (samples_.empty()) throw ValidationError("profile", "at least one sample is required");
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw ValidationError("profile", "horizon must be positive");
    if (samples_.front().start != 0.0) throw ValidationError("profile", "first sample must start at 0");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!(s.ci > 0.0) || !std::isfinite(s.ci))
        throw ValidationError("sample " + std::to_string(i), "carbon intensity must be positive");
      if (i > 0 && !(s.start > samples_[i - 1].start))
        throw ValidationError("sample " + std::to_string(i), "start times must be strictly increasing");
      if (!(s.start < horizon_)) throw ValidationError("sample " + std::to_string(i), "start time beyond horizon");
    }
  }

  static CiProfile constant(double ci, double horizon) { return CiProfile({{0.0, ci}}, horizon); }

  const std::vector<CiSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double horizon() const { return horizon_; }
  const std::optional<YearMonth>& origin() const { return origin_; }

  double step_end(std::size_t i) const { return i + 1 < samples_.size() ? samples_[i + 1].start : horizon_; }
  double step_duration(std::size_t i) const { return step_end(i) - samples_[i].start; }

  std::size_t step_index(double t) const {
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double v, const CiSample& s) { return v < s.start; });
    return it == samples_.begin() ? 0 : static_cast<std::size_t>(std::distance(samples_.begin(), it)) - 1;
  }

  double value_at(double t) const { return samples_[step_index(t)].ci; }

  /// Exact integral of the step function over [a, b], gCO2eq/kWh * s.
  double integral(double a, double b) const {
    if (b <= a) return 0.0;
    double total = 0.0;
    for (std::size_t i = step_index(a); i < samples_.size(); ++i) {
      const double lo = std::max(a, samples_[i].start);
      const double hi = i + 1 < samples_.size() ? std::min(b, samples_[i + 1].start) : b;
      if (hi > lo) total += samples_[i].ci * (hi - lo);
      if (hi >= b) break;
    }
    return total;
  }

  /// Duration-weighted mean over [0, horizon).
  double long_term_average() const {
    double total = 0.0;
    for (std::size_t i = 0; i < samples_.size(); ++i) total += samples_[i].ci * step_duration(i);
    return total / horizon_;
  }

  /// The single step `i` as its own profile.
  CiProfile step(std::size_t i) const { return CiProfile::constant(samples_.at(i).ci, step_duration(i)); }

  friend bool operator==(const CiProfile& a, const CiProfile& b) {
    return a.samples_ == b.samples_ && a.horizon_ == b.horizon_;
  }

 private:
  std::vector<CiSample> samples_;
  double horizon_;
  std::optional<YearMonth> origin_;
};

/// Right-open piecewise-constant power draw in watts; the last step extends forever.
class PowerProfile {
 public:
  struct Step {
    double start;
    double watts;
  };

  explicit PowerProfile(std::vector<Step> steps) : steps_(std::move(steps)) {
    if (steps_.empty() || steps_.front().start != 0.0) throw DomainError("power profile must start at 0");
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      if (!(steps_[i].watts >= 0.0)) throw DomainError("power must be non-negative");
      if (i > 0 && !(steps_[i].start > steps_[i - 1].start)) throw DomainError("power steps must be increasing");
    }
  }

  static PowerProfile constant(double watts) { return PowerProfile({{0.0, watts}}); }

  const std::vector<Step>& steps() const { return steps_; }

 private:
  std::vector<Step> steps_;
};

/// Radio and energy parameters. The per-packet transmission time is derived
/// as mtu / rate so the two can never disagree.
struct EnergyModel {
  double p_t = 1.0;             // W
  double p_max = 1.0;           // W
  double mtu = 12000.0;         // bits
  double rate = 1e8;            // bits/s
  double bandwidth = 1e6;       // Hz
  double channel_gain = 1.0;    // |h|^2
  double noise_power = 1e-4;    // W

  static EnergyModel reference() { return {}; }

  double t_p() const { return mtu / rate; }
  double e_p_joules() const { return p_t * t_p(); }
  double e_p_kwh() const { return units::joules_to_kwh(e_p_joules()); }

  void validate() const {
    const std::pair<const char*, double> fields[] = {
        {"p_t", p_t},         {"p_max", p_max},           {"mtu", mtu},
        {"rate", rate},       {"bandwidth", bandwidth},   {"channel_gain", channel_gain},
        {"noise_power", noise_power}};
    for (const auto& [name, v] : fields)
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(name, "must be positive and finite");
    if (p_t > p_max) throw ValidationError("p_t", "transmit power exceeds p_max");
  }
};

/// Neumaier summation.
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      compensation_ += (sum_ - t) + x;
    else
      compensation_ += (x - t) + sum_;
    sum_ = t;
    return *this;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

/// Emissions recorded at non-decreasing instants. Totals use compensated
/// summation so that long runs of identical small charges add up exactly.
class CarbonLedger {
 public:
  struct Entry {
    double time;
    double emission;  // gCO2eq
  };

  void add(double time, double emission) {
    if (!(emission >= 0.0)) throw DomainError("emission must be non-negative");
    if (!entries_.empty() && time < entries_.back().time) throw DomainError("ledger entries must be time-ordered");
    entries_.push_back({time, emission});
    sum_ += emission;
    prefix_.push_back(prefix_.empty() ? total() : std::max(prefix_.back(), total()));
  }

  const std::vector<Entry>& entries() const { return entries_; }
  double total() const { return sum_.value(); }

  /// kappa(tau): everything recorded at or before tau.
  double cumulative(double tau) const {
    auto it = std::upper_bound(entries_.begin(), entries_.end(), tau,
                               [](double v, const Entry& e) { return v < e.time; });
    if (it == entries_.begin()) return 0.0;
    return prefix_[static_cast<std::size_t>(std::distance(entries_.begin(), it)) - 1];
  }

 private:
  std::vector<Entry> entries_;
  std::vector<double> prefix_;
  CompensatedSum sum_;
};

struct ConstraintSet {
  double budget_k = 5e-2;             // gCO2eq
  double horizon_tn = 3600.0;         // s
  std::optional<double> power_cap;    // W
  std::optional<double> snr_min;      // linear
  double success_prob_a = 1.0;

  void validate() const {
    if (!(budget_k >= 0.0) || !std::isfinite(budget_k)) throw ValidationError("budget_k", "must be non-negative");
    if (!(horizon_tn > 0.0) || !std::isfinite(horizon_tn)) throw ValidationError("horizon_tn", "must be positive");
    if (!(success_prob_a >= 0.0 && success_prob_a <= 1.0))
      throw ValidationError("success_prob_a", "must lie in [0, 1]");
    if (power_cap && !(*power_cap > 0.0)) throw ValidationError("power_cap", "must be positive");
    if (snr_min && !(*snr_min > 0.0)) throw ValidationError("snr_min", "must be positive");
  }
};

// ---------------------------------------------------------------------------
// Footprint

/// kappa(upto) = integral of xi(t) P(t) over [0, upto], evaluated on the
/// common refinement of both step functions.
inline double cumulative_cf(const CiProfile& profile, const PowerProfile& power, double upto) {
  if (upto > profile.horizon()) throw DomainError("cumulative_cf beyond profile horizon");
  if (!(upto > 0.0)) return 0.0;
  const auto& steps = power.steps();
  double joule_weighted = 0.0;  // (gCO2eq/kWh) * J
  for (std::size_t i = 0; i < steps.size() && steps[i].start < upto; ++i) {
    const double end = i + 1 < steps.size() ? std::min(steps[i + 1].start, upto) : upto;
    joule_weighted += steps[i].watts * profile.integral(steps[i].start, end);
  }
  return units::joules_to_kwh(joule_weighted);
}

/// Discretized long-run footprint xi_avg * E_p * a * lambda * t_N.
inline double avg_cf(double ci, const EnergyModel& energy, double lambda, const ConstraintSet& constraint) {
  return ci * energy.e_p_kwh() * constraint.success_prob_a * lambda * constraint.horizon_tn;
}

inline double avg_cf(const CiProfile& profile, const EnergyModel& energy, double lambda,
                     const ConstraintSet& constraint) {
  return avg_cf(profile.long_term_average(), energy, lambda, constraint);
}

// ---------------------------------------------------------------------------
// Arrival-rate bounds. Each is K / (t_N * xi * a * E) with E the per-packet
// energy in kWh; a = 0 admits any rate.

namespace detail {
inline double rate_bound(const ConstraintSet& c, double ci, double energy_kwh) {
  return c.budget_k / (c.horizon_tn * ci * c.success_prob_a * energy_kwh);
}
}  // namespace detail

inline double lambda_kappa(const ConstraintSet& constraint, double ci, const EnergyModel& energy) {
  return detail::rate_bound(constraint, ci, energy.e_p_kwh());
}

inline double lambda_kappa(const ConstraintSet& constraint, const CiProfile& profile, const EnergyModel& energy) {
  return lambda_kappa(constraint, profile.long_term_average(), energy);
}

inline double lambda_p_max(const ConstraintSet& constraint, double month_ci, const EnergyModel& energy) {
  if (!constraint.power_cap) throw MissingConstraint("power-constrained bound requires a power cap");
  const double e_kwh = units::joules_to_kwh(*constraint.power_cap * energy.t_p());
  return detail::rate_bound(constraint, month_ci, e_kwh);
}

/// Minimum link rate and transmit power implied by an SNR floor.
struct LinkFloor {
  double min_rate;   // bits/s, B log2(1 + SNR)
  double min_power;  // W, SNR sigma^2 / |h|^2
  double t_p;        // s, MTU / min_rate
};

inline LinkFloor min_rate_for_snr(const EnergyModel& energy, double snr_min) {
  if (!(snr_min > 0.0)) throw DomainError("SNR floor must be positive");
  const double rate = energy.bandwidth * std::log2(1.0 + snr_min);
  return {rate, snr_min * energy.noise_power / energy.channel_gain, energy.mtu / rate};
}

inline double lambda_qos_max(const ConstraintSet& constraint, double month_ci, const EnergyModel& energy,
                             std::optional<double> t_p_override = std::nullopt) {
  if (!constraint.snr_min) throw MissingConstraint("QoS-constrained bound requires an SNR floor");
  if (!(*constraint.snr_min > 0.0)) throw DomainError("SNR floor must be positive");
  const double p_min = *constraint.snr_min * energy.noise_power / energy.channel_gain;
  const double t_p = t_p_override ? *t_p_override : energy.t_p();
  return detail::rate_bound(constraint, month_ci, units::joules_to_kwh(p_min * t_p));
}

}  // namespace caoi
