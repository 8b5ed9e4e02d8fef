#pragma once

// Closed-form average age of information for the FCFS M/M/1 queue and the
// LCFS-preemptive M/M/1* queue, plus the utilizations that minimize them.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "caoi/error.hpp"

namespace caoi {

enum class Discipline { FcfsMm1, LcfsPreemptiveMm1Star };

/// `paper` evaluates the M/M/1* constrained optimum with the 2/lambda
/// approximation; `exact` uses 1/mu + 1/lambda.
enum class Mode { Paper, Exact };

inline std::string_view to_string(Discipline d) {
  return d == Discipline::FcfsMm1 ? "mm1" : "mm1star";
}

inline std::string_view to_string(Mode m) { return m == Mode::Paper ? "paper" : "exact"; }

inline std::optional<Discipline> parse_discipline(std::string_view s) {
  if (s == "mm1") return Discipline::FcfsMm1;
  if (s == "mm1star") return Discipline::LcfsPreemptiveMm1Star;
  return std::nullopt;
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "paper") return Mode::Paper;
  if (s == "exact") return Mode::Exact;
  return std::nullopt;
}

/// Arrival rate, service rate and queue discipline of a single-server queue.
class QueueSpec {
 public:
  QueueSpec(Discipline discipline, double lambda, double mu)
      : discipline_(discipline), lambda_(lambda), mu_(mu) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw DomainError("arrival rate must be positive and finite");
    if (!(mu > 0.0) || !std::isfinite(mu))
      throw DomainError("service rate must be positive and finite");
  }

  /// Same as the constructor but additionally rejects rho >= 1.
  static QueueSpec stable(Discipline discipline, double lambda, double mu) {
    QueueSpec q(discipline, lambda, mu);
    if (!(q.rho() < 1.0)) throw DomainError("utilization must be < 1 (rho = " + std::to_string(q.rho()) + ")");
    return q;
  }

  Discipline discipline() const { return discipline_; }
  double lambda() const { return lambda_; }
  double mu() const { return mu_; }
  double rho() const { return lambda_ / mu_; }

 private:
  Discipline discipline_;
  double lambda_;
  double mu_;
};

/// Near-saturation offset used for the M/M/1* optimum rho = 1 - epsilon.
class SaturationEpsilon {
 public:
  static constexpr double kDefault = 1e-3;

  constexpr SaturationEpsilon() = default;
  explicit SaturationEpsilon(double eps) : value_(eps) {
    if (!(eps > 0.0 && eps < 0.1)) throw DomainError("saturation epsilon must lie in (0, 0.1)");
  }

  constexpr double value() const { return value_; }

 private:
  double value_ = kDefault;
};

// ---------------------------------------------------------------------------
// Unconstrained closed forms

inline double avg_aoi_mm1(double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > 0.0)) throw DomainError("M/M/1 rates must be positive");
  const double rho = lambda / mu;
  if (!(rho < 1.0)) throw DomainError("M/M/1 requires rho < 1 (rho = " + std::to_string(rho) + ")");
  return (1.0 + 1.0 / rho + rho * rho / (1.0 - rho)) / mu;
}

/// Finite at rho >= 1; stability is only enforced through QueueSpec::stable.
inline double avg_aoi_mm1_star(double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > 0.0)) throw DomainError("M/M/1* rates must be positive");
  return 1.0 / mu + 1.0 / lambda;
}

inline double avg_aoi_mm1(const QueueSpec& q) { return avg_aoi_mm1(q.lambda(), q.mu()); }
inline double avg_aoi_mm1_star(const QueueSpec& q) { return avg_aoi_mm1_star(q.lambda(), q.mu()); }

inline double avg_aoi(const QueueSpec& q) {
  return q.discipline() == Discipline::FcfsMm1 ? avg_aoi_mm1(q) : avg_aoi_mm1_star(q);
}

// ---------------------------------------------------------------------------
// Optimal utilization

namespace detail {

inline double optimal_rho_quartic(double rho) {
  return (((rho - 2.0) * rho + 1.0) * rho - 2.0) * rho + 1.0;
}

inline double optimal_rho_quartic_derivative(double rho) {
  return ((4.0 * rho - 6.0) * rho + 2.0) * rho - 2.0;
}

// Safeguarded Newton on a sign-changing bracket: a Newton step is accepted
// only when it lands strictly inside the current bracket, otherwise bisect.
inline double solve_optimal_rho_mm1(double lo, double hi, double tol) {
  double f_lo = optimal_rho_quartic(lo);
  double f_hi = optimal_rho_quartic(hi);
  if (!(f_lo > 0.0 && f_hi < 0.0)) throw DomainError("optimal-utilization bracket does not change sign");

  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double fx = optimal_rho_quartic(x);
    if (fx == 0.0) return x;
    if (fx > 0.0)
      lo = x;
    else
      hi = x;
    if (hi - lo < tol && std::abs(fx) < tol) break;

    const double d = optimal_rho_quartic_derivative(x);
    double next = d != 0.0 ? x - fx / d : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < 1e-15) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

}  // namespace detail

/// Root in (0,1) of rho^4 - 2 rho^3 + rho^2 - 2 rho + 1, approximately 0.53101.
inline double optimal_utilization_mm1() {
  static const double root = detail::solve_optimal_rho_mm1(0.4, 0.7, 1e-9);
  return root;
}

inline double optimal_utilization_mm1_star(SaturationEpsilon eps = {}) { return 1.0 - eps.value(); }

// ---------------------------------------------------------------------------
// Constrained optima

struct ConstrainedAoi {
  double aoi;
  double lambda_used;
  bool binding;
};

/// FCFS optimum when the arrival rate may not exceed `lambda_bound`. The
/// closed form is exact, so both modes give the same answer. A bound equal
/// to the free optimum takes the slack branch.
inline ConstrainedAoi constrained_aoi_mm1(double mu, double lambda_bound, Mode mode = Mode::Exact) {
  (void)mode;
  if (!(mu > 0.0)) throw DomainError("service rate must be positive");
  if (!(lambda_bound > 0.0)) throw DomainError("arrival-rate bound must be positive");
  const double lambda_free = optimal_utilization_mm1() * mu;
  if (lambda_free <= lambda_bound) return {avg_aoi_mm1(lambda_free, mu), lambda_free, false};
  return {avg_aoi_mm1(lambda_bound, mu), lambda_bound, true};
}

/// LCFS-preemptive optimum. `lambda_free` is the unconstrained near-saturation
/// arrival rate. In exact mode the service rate is `mu` when given, otherwise
/// the saturation rule mu = lambda_used / (1 - eps).
inline ConstrainedAoi constrained_aoi_mm1_star(double lambda_free, double lambda_bound,
                                               SaturationEpsilon eps = {}, Mode mode = Mode::Exact,
                                               std::optional<double> mu = std::nullopt) {
  if (!(lambda_free > 0.0)) throw DomainError("free arrival rate must be positive");
  if (!(lambda_bound > 0.0)) throw DomainError("arrival-rate bound must be positive");
  if (mu && !(*mu > 0.0)) throw DomainError("service rate must be positive");

  const bool binding = lambda_bound < lambda_free;
  const double lambda_used = binding ? lambda_bound : lambda_free;
  if (mode == Mode::Paper) return {2.0 / lambda_used, lambda_used, binding};
  const double service = mu ? *mu : lambda_used / (1.0 - eps.value());
  return {avg_aoi_mm1_star(lambda_used, service), lambda_used, binding};
}

}  // namespace caoi
