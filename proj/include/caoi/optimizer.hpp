#pragma once

// The three constrained AoI-minimization problems (carbon budget, carbon
// budget with a power cap, carbon budget with an SNR floor) and the sweeps
// built on them. Every problem reduces to an arrival-rate bound fed into the
// piecewise constrained optima of queueing.hpp.

#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "caoi/carbon.hpp"
#include "caoi/error.hpp"
#include "caoi/queueing.hpp"
#include "caoi/units.hpp"

namespace caoi {

enum class Binding { None, CfBudget, Power, Qos, Infeasible };

inline std::string_view to_string(Binding b) {
  switch (b) {
    case Binding::None: return "none";
    case Binding::CfBudget: return "cf_budget";
    case Binding::Power: return "power";
    case Binding::Qos: return "qos";
    case Binding::Infeasible: return "infeasible";
  }
  return "?";
}

enum class Problem { Cf, Power, Qos };

/// How the service rate is picked once the arrival-rate bound is known.
///   Fixed:       mu is the caller's (hardware) rate, 1/T_p by default.
///   TrackOptRho: mu follows the bound so that rho stays at the discipline's optimum.
enum class MuRule { Fixed, TrackOptRho };

/// Where the per-packet transmission time comes from in the QoS problem.
///   FromSnr: T_p = MTU / R_min, so the SNR floor sets both power and service time.
///   Fixed:   T_p = MTU / R from the energy model.
enum class QosTiming { FromSnr, Fixed };

struct SolveOptions {
  Mode mode = Mode::Exact;
  SaturationEpsilon eps{};
  MuRule mu_rule = MuRule::Fixed;
  QosTiming qos_timing = QosTiming::FromSnr;
};

struct OptimizationResult {
  Discipline discipline;
  double lambda_star;
  double mu_star;
  double aoi;
  double cf;            // gCO2eq over t_N
  double lambda_bound;
  Binding binding_constraint;
  Mode mode;
};

/// Optimal operating point under an arrival-rate bound. `binding_kind` is
/// reported when the bound, rather than the unconstrained optimum, decides.
inline OptimizationResult solve_with_bound(Discipline discipline, double mu, double lambda_bound,
                                           Binding binding_kind, const SolveOptions& opt) {
  if (!(lambda_bound > 0.0) || std::isnan(lambda_bound))
    throw Infeasible("arrival-rate bound is not positive");
  if (!(mu > 0.0)) throw DomainError("service rate must be positive");

  OptimizationResult r{discipline, 0, 0, 0, 0, lambda_bound, Binding::None, opt.mode};
  const bool fcfs = discipline == Discipline::FcfsMm1;

  if (opt.mu_rule == MuRule::TrackOptRho) {
    if (!std::isfinite(lambda_bound)) throw DomainError("track_opt_rho needs a finite bound");
    const double rho = fcfs ? optimal_utilization_mm1() : optimal_utilization_mm1_star(opt.eps);
    r.lambda_star = lambda_bound;
    r.mu_star = lambda_bound / rho;
    if (fcfs)
      r.aoi = avg_aoi_mm1(r.lambda_star, r.mu_star);
    else
      r.aoi = constrained_aoi_mm1_star(lambda_bound, lambda_bound, opt.eps, opt.mode).aoi;
    r.binding_constraint = binding_kind;
    return r;
  }

  r.mu_star = mu;
  const ConstrainedAoi c =
      fcfs ? constrained_aoi_mm1(mu, lambda_bound, opt.mode)
           : constrained_aoi_mm1_star(optimal_utilization_mm1_star(opt.eps) * mu, lambda_bound, opt.eps, opt.mode, mu);
  r.lambda_star = c.lambda_used;
  r.aoi = c.aoi;
  r.binding_constraint = c.binding ? binding_kind : Binding::None;
  return r;
}

/// Carbon-budget problem at the given average carbon intensity.
inline OptimizationResult solve_cf_constrained(double mu, const ConstraintSet& constraint, double ci,
                                               const EnergyModel& energy, Discipline discipline,
                                               const SolveOptions& opt = {}) {
  constraint.validate();
  const double bound = lambda_kappa(constraint, ci, energy);
  auto r = solve_with_bound(discipline, mu, bound, Binding::CfBudget, opt);
  r.cf = avg_cf(ci, energy, r.lambda_star, constraint);
  return r;
}

inline OptimizationResult solve_cf_constrained(double mu, const ConstraintSet& constraint, const CiProfile& profile,
                                               const EnergyModel& energy, Discipline discipline,
                                               const SolveOptions& opt = {}) {
  return solve_cf_constrained(mu, constraint, profile.long_term_average(), energy, discipline, opt);
}

/// Carbon budget plus a transmit-power cap; transmits at P_T = power cap.
/// `mu` defaults to 1/T_p.
inline OptimizationResult solve_power_constrained(const ConstraintSet& constraint, double month_ci,
                                                  const EnergyModel& energy, Discipline discipline,
                                                  const SolveOptions& opt = {},
                                                  std::optional<double> mu = std::nullopt) {
  constraint.validate();
  if (!constraint.power_cap) throw MissingConstraint("power-constrained problem requires a power cap");
  if (*constraint.power_cap > energy.p_max) throw ValidationError("power_cap", "exceeds the radio's p_max");
  const double bound = lambda_p_max(constraint, month_ci, energy);
  auto r = solve_with_bound(discipline, mu.value_or(1.0 / energy.t_p()), bound, Binding::Power, opt);
  EnergyModel at_cap = energy;
  at_cap.p_t = *constraint.power_cap;
  r.cf = avg_cf(month_ci, at_cap, r.lambda_star, constraint);
  return r;
}

/// Carbon budget plus an SNR floor. The floor fixes the transmit power at
/// SNR sigma^2 / |h|^2 and, under QosTiming::FromSnr, the service rate at
/// R_min / MTU.
inline OptimizationResult solve_qos_constrained(const ConstraintSet& constraint, double month_ci,
                                                const EnergyModel& energy, Discipline discipline,
                                                const SolveOptions& opt = {}) {
  constraint.validate();
  if (!constraint.snr_min) throw MissingConstraint("QoS-constrained problem requires an SNR floor");
  const LinkFloor link = min_rate_for_snr(energy, *constraint.snr_min);
  const double t_p = opt.qos_timing == QosTiming::FromSnr ? link.t_p : energy.t_p();
  const double bound = lambda_qos_max(constraint, month_ci, energy, t_p);
  auto r = solve_with_bound(discipline, 1.0 / t_p, bound, Binding::Qos, opt);
  const double energy_kwh = units::joules_to_kwh(link.min_power * t_p);
  r.cf = month_ci * energy_kwh * constraint.success_prob_a * r.lambda_star * constraint.horizon_tn;
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

/// One point of a sweep. `aoi` is empty when the point is infeasible.
struct SweepRow {
  int month;  // 1..12, 0 when the row is not tied to a month
  double x;
  Discipline discipline;
  std::optional<double> aoi;
  double cf;
  double lambda_bound;
  Binding binding;
};

namespace detail {

inline void require_increasing(std::span<const double> grid, const char* what) {
  if (grid.empty()) throw DomainError(std::string(what) + " grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw DomainError(std::string(what) + " grid must be strictly increasing");
}

inline SweepRow to_row(int month, double x, const OptimizationResult& r) {
  return {month, x, r.discipline, r.aoi, r.cf, r.lambda_bound, r.binding_constraint};
}

inline SweepRow infeasible_row(int month, double x, Discipline d, double bound) {
  return {month, x, d, std::nullopt, 0.0, bound, Binding::Infeasible};
}

}  // namespace detail

/// Unconstrained AoI along an arrival-rate grid. The carbon budget only marks
/// rows whose rate exceeds lambda_kappa (binding = cf_budget); FCFS points at
/// rho >= 1 are marked infeasible.
inline std::vector<SweepRow> sweep_lambda(double mu, std::span<const double> lambda_grid,
                                          std::span<const Discipline> disciplines, double ci,
                                          const EnergyModel& energy, const ConstraintSet& constraint) {
  detail::require_increasing(lambda_grid, "lambda");
  if (!(lambda_grid.front() > 0.0)) throw DomainError("arrival rates must be positive");
  const double bound = lambda_kappa(constraint, ci, energy);
  std::vector<SweepRow> rows;
  for (double lambda : lambda_grid) {
    for (Discipline d : disciplines) {
      if (d == Discipline::FcfsMm1 && !(lambda < mu)) {
        rows.push_back(detail::infeasible_row(0, lambda, d, bound));
        continue;
      }
      const double aoi = d == Discipline::FcfsMm1 ? avg_aoi_mm1(lambda, mu) : avg_aoi_mm1_star(lambda, mu);
      rows.push_back({0, lambda, d, aoi, avg_cf(ci, energy, lambda, constraint), bound,
                      lambda > bound ? Binding::CfBudget : Binding::None});
    }
  }
  return rows;
}

/// Solves one problem at a single carbon intensity.
inline OptimizationResult solve_problem(Problem problem, double mu, const ConstraintSet& constraint, double ci,
                                        const EnergyModel& energy, Discipline d, const SolveOptions& opt) {
  switch (problem) {
    case Problem::Cf: return solve_cf_constrained(mu, constraint, ci, energy, d, opt);
    case Problem::Power: return solve_power_constrained(constraint, ci, energy, d, opt, mu);
    case Problem::Qos: return solve_qos_constrained(constraint, ci, energy, d, opt);
  }
  throw DomainError("unknown problem");
}

namespace detail {

inline SweepRow solve_row(Problem problem, int month, double x, double mu, const ConstraintSet& c, double ci,
                          const EnergyModel& energy, Discipline d, const SolveOptions& opt) {
  try {
    return to_row(month, x, solve_problem(problem, mu, c, ci, energy, d, opt));
  } catch (const Infeasible&) {
    return infeasible_row(month, x, d, 0.0);
  }
}

}  // namespace detail

/// AoI versus budget K. With `per_month` each profile step is solved as its
/// own month (surface view); otherwise the profile's long-term average is
/// used (single-curve view, month = 0). Rows are month-major, then K, then
/// discipline.
inline std::vector<SweepRow> sweep_cf_budget(Problem problem, double mu, std::span<const double> k_grid,
                                             const CiProfile& months, bool per_month,
                                             std::span<const Discipline> disciplines, const EnergyModel& energy,
                                             ConstraintSet base, const SolveOptions& opt) {
  detail::require_increasing(k_grid, "budget");
  if (k_grid.front() < 0.0) throw DomainError("budgets must be non-negative");
  std::vector<SweepRow> rows;
  const std::size_t n_months = per_month ? months.size() : 1;
  for (std::size_t m = 0; m < n_months; ++m) {
    const double ci = per_month ? months.samples()[m].ci : months.long_term_average();
    for (double k : k_grid) {
      base.budget_k = k;
      for (Discipline d : disciplines)
        rows.push_back(detail::solve_row(problem, per_month ? static_cast<int>(m) + 1 : 0, k, mu, base, ci, energy, d, opt));
    }
  }
  return rows;
}

/// Per-month optimum over a 12-step profile (x = month index).
inline std::vector<SweepRow> sweep_months(Problem problem, const ConstraintSet& constraint, const CiProfile& profile12,
                                          const EnergyModel& energy, std::span<const Discipline> disciplines,
                                          const SolveOptions& opt, std::optional<double> mu = std::nullopt) {
  if (profile12.size() != 12) throw DomainError("monthly sweep needs exactly 12 profile steps");
  std::vector<SweepRow> rows;
  const double service = mu.value_or(1.0 / energy.t_p());
  for (std::size_t m = 0; m < 12; ++m) {
    const int month = static_cast<int>(m) + 1;
    for (Discipline d : disciplines)
      rows.push_back(detail::solve_row(problem, month, month, service, constraint, profile12.samples()[m].ci, energy, d, opt));
  }
  return rows;
}

/// QoS problem over an SNR floor grid given in dB, one block per profile step.
inline std::vector<SweepRow> sweep_snr(const ConstraintSet& base, std::span<const double> snr_db_grid,
                                       const CiProfile& months, const EnergyModel& energy,
                                       std::span<const Discipline> disciplines, const SolveOptions& opt) {
  detail::require_increasing(snr_db_grid, "SNR");
  std::vector<SweepRow> rows;
  ConstraintSet c = base;
  for (std::size_t m = 0; m < months.size(); ++m) {
    for (double db : snr_db_grid) {
      c.snr_min = units::db_to_linear(db);
      for (Discipline d : disciplines)
        rows.push_back(detail::solve_row(Problem::Qos, static_cast<int>(m) + 1, db, 0.0, c, months.samples()[m].ci, energy, d, opt));
    }
  }
  return rows;
}

}  // namespace caoi
