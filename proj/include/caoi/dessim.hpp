#pragma once

// Event-driven simulation of a single status-update source feeding an FCFS
// M/M/1 queue or an LCFS-preemptive M/M/1* server. Serves as an independent
// oracle for the closed forms in queueing.hpp and as a carbon ledger under a
// time-varying carbon intensity.
//
// Runs accept arrivals on [0, horizon) and then drain: packets still queued or
// in service at the horizon complete (their transmissions count toward the
// last slot), but age is only integrated over [warmup, horizon].

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "caoi/carbon.hpp"
#include "caoi/error.hpp"
#include "caoi/queueing.hpp"
#include "caoi/units.hpp"

namespace caoi {

// ---------------------------------------------------------------------------
// Random streams

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// One named stream of a seeded run. mt19937_64's output sequence is fixed by
/// the standard and the variates below are computed by hand, so a seed gives
/// the same draws on every conforming platform.
class RandomStream {
 public:
  enum class Id : std::uint64_t { Interarrival = 1, Service = 2 };

  RandomStream(std::uint64_t seed, Id id)
      : engine_(splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(id) * 0xd1b54a32d192ed03ULL))) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Configuration and trace

enum class CfMode { ArrivalCharged, CompletionCharged, ServiceTimeCharged };

inline std::string_view to_string(CfMode m) {
  switch (m) {
    case CfMode::ArrivalCharged: return "arrival_charged";
    case CfMode::CompletionCharged: return "completion_charged";
    case CfMode::ServiceTimeCharged: return "service_time_charged";
  }
  return "?";
}

inline std::optional<CfMode> parse_cf_mode(std::string_view s) {
  if (s == "arrival_charged") return CfMode::ArrivalCharged;
  if (s == "completion_charged") return CfMode::CompletionCharged;
  if (s == "service_time_charged") return CfMode::ServiceTimeCharged;
  return std::nullopt;
}

struct SimConfig {
  QueueSpec spec;
  double horizon = 1e6;                 // s
  std::uint64_t seed = 1;
  std::optional<double> warmup{};       // s; defaults to 1% of horizon
  double slot_length = 3600.0;          // s
  CfMode cf_mode = CfMode::ArrivalCharged;
  std::optional<std::size_t> buffer{};  // waiting room excluding the server; empty = infinite
  bool record_resets = false;           // keep the age sawtooth corners (small runs only)

  double effective_warmup() const { return warmup.value_or(0.01 * horizon); }

  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive and finite");
    const double w = effective_warmup();
    if (!(w >= 0.0 && w < horizon)) throw ConfigError("warmup must lie in [0, horizon)");
    if (!(slot_length > 0.0) || slot_length > horizon) throw ConfigError("slot length must lie in (0, horizon]");
    if (spec.discipline() == Discipline::FcfsMm1 && !buffer && !(spec.rho() < 1.0))
      throw ConfigError("FCFS queue with infinite buffer is unstable at rho >= 1");
  }
};

/// One delivery: the age just before and just after the reset.
struct AgeReset {
  double time;
  double age_before;
  double age_after;
};

struct SimulationTrace {
  double time_avg_aoi = 0.0;
  std::vector<std::uint64_t> n_tx_per_slot;
  double empirical_a = 1.0;
  CarbonLedger ledger;
  std::uint64_t arrivals = 0;
  std::uint64_t completions = 0;
  std::uint64_t preemptions = 0;
  std::uint64_t drops = 0;
  double final_age = 0.0;   // age at the horizon
  double horizon = 0.0;
  double busy_time = 0.0;   // server busy time, including preempted partial service
  std::vector<AgeReset> resets;

  friend bool operator==(const SimulationTrace& a, const SimulationTrace& b) {
    auto same_ledger = [](const CarbonLedger& x, const CarbonLedger& y) {
      if (x.entries().size() != y.entries().size()) return false;
      for (std::size_t i = 0; i < x.entries().size(); ++i)
        if (x.entries()[i].time != y.entries()[i].time || x.entries()[i].emission != y.entries()[i].emission)
          return false;
      return true;
    };
    auto same_resets = [](const std::vector<AgeReset>& x, const std::vector<AgeReset>& y) {
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i].time != y[i].time || x[i].age_before != y[i].age_before || x[i].age_after != y[i].age_after)
          return false;
      return true;
    };
    return a.time_avg_aoi == b.time_avg_aoi && a.n_tx_per_slot == b.n_tx_per_slot &&
           a.empirical_a == b.empirical_a && same_ledger(a.ledger, b.ledger) && a.arrivals == b.arrivals &&
           a.completions == b.completions && a.preemptions == b.preemptions && a.drops == b.drops &&
           a.final_age == b.final_age && a.horizon == b.horizon && a.busy_time == b.busy_time &&
           same_resets(a.resets, b.resets);
  }
};

// ---------------------------------------------------------------------------
// Simulation

namespace detail {

class SlotLedger {
 public:
  SlotLedger(const CiProfile& profile, double slot, double horizon)
      : profile_(profile), slot_(slot), horizon_(horizon),
        n_slots_(static_cast<std::size_t>(std::ceil(horizon / slot))), emission_(n_slots_), counts_(n_slots_) {}

  std::size_t slot_of(double t) const {
    if (!(t < horizon_)) return n_slots_ - 1;
    return std::min(static_cast<std::size_t>(t / slot_), n_slots_ - 1);
  }

  void count_tx(double t) { ++counts_[slot_of(t)]; }

  void charge_instant(double t, double energy_kwh) { emission_[slot_of(t)] += profile_.value_at(t) * energy_kwh; }

  /// watts drawn on [a, b], split along slot boundaries.
  void charge_interval(double a, double b, double watts) {
    while (b > a) {
      const std::size_t k = slot_of(a);
      const double slot_end = k + 1 == n_slots_ ? b : std::min(b, static_cast<double>(k + 1) * slot_);
      const double end = slot_end > a ? slot_end : b;
      emission_[k] += units::joules_to_kwh(watts * profile_.integral(a, end));
      a = end;
    }
  }

  void finish(SimulationTrace& trace) const {
    trace.n_tx_per_slot = counts_;
    for (std::size_t k = 0; k < n_slots_; ++k)
      trace.ledger.add(std::min(static_cast<double>(k + 1) * slot_, horizon_), emission_[k].value());
  }

 private:
  const CiProfile& profile_;
  double slot_;
  double horizon_;
  std::size_t n_slots_;
  std::vector<CompensatedSum> emission_;
  std::vector<std::uint64_t> counts_;
};

}  // namespace detail

inline SimulationTrace run(const SimConfig& config, const CiProfile& profile, const EnergyModel& energy) {
  config.validate();
  if (profile.horizon() < config.horizon) throw ConfigError("carbon-intensity profile is shorter than the horizon");

  constexpr double kNever = std::numeric_limits<double>::infinity();
  const bool fcfs = config.spec.discipline() == Discipline::FcfsMm1;
  const double lambda = config.spec.lambda();
  const double mu = config.spec.mu();
  const double horizon = config.horizon;
  const double warmup = config.effective_warmup();
  const double e_kwh = energy.e_p_kwh();

  RandomStream arrivals_rng(config.seed, RandomStream::Id::Interarrival);
  RandomStream service_rng(config.seed, RandomStream::Id::Service);
  detail::SlotLedger slots(profile, config.slot_length, horizon);

  SimulationTrace trace;
  trace.horizon = horizon;

  // Age is t - freshest_gen; the integral of that line over [a, b] is exact.
  double freshest_gen = 0.0;
  double age_from = warmup;  // integrated up to here
  CompensatedSum age_area;
  auto integrate_age_to = [&](double t) {
    const double b = std::min(t, horizon);
    if (b > age_from) {
      age_area += (b - age_from) * (0.5 * (age_from + b) - freshest_gen);
      age_from = b;
    }
  };

  std::deque<double> waiting;  // generation times
  bool busy = false;
  double in_service_gen = 0.0;
  double service_started = 0.0;
  double next_arrival = arrivals_rng.exponential(lambda);
  double next_departure = kNever;

  auto start_service = [&](double t, double gen) {
    busy = true;
    in_service_gen = gen;
    service_started = t;
    next_departure = t + service_rng.exponential(mu);
  };
  auto end_service_segment = [&](double t) {
    trace.busy_time += t - service_started;
    if (config.cf_mode == CfMode::ServiceTimeCharged) slots.charge_interval(service_started, t, energy.p_t);
  };

  while (true) {
    const bool arrival_due = next_arrival < horizon && next_arrival <= next_departure;
    if (arrival_due) {
      const double t = next_arrival;
      ++trace.arrivals;
      if (config.cf_mode == CfMode::ArrivalCharged) slots.charge_instant(t, e_kwh);
      if (!busy) {
        start_service(t, t);
      } else if (!fcfs) {
        ++trace.preemptions;
        end_service_segment(t);
        start_service(t, t);
      } else if (!config.buffer || waiting.size() < *config.buffer) {
        waiting.push_back(t);
      } else {
        ++trace.drops;
      }
      next_arrival = t + arrivals_rng.exponential(lambda);
      continue;
    }
    if (next_departure == kNever) break;

    const double t = next_departure;
    const double gen = in_service_gen;
    integrate_age_to(t);
    if (gen > freshest_gen) {
      if (config.record_resets) trace.resets.push_back({t, t - freshest_gen, t - gen});
      freshest_gen = gen;
    }
    ++trace.completions;
    slots.count_tx(t);
    if (config.cf_mode == CfMode::CompletionCharged) slots.charge_instant(t, e_kwh);
    end_service_segment(t);
    busy = false;
    next_departure = kNever;
    if (fcfs && !waiting.empty()) {
      const double next_gen = waiting.front();
      waiting.pop_front();
      start_service(t, next_gen);
    }
  }
  integrate_age_to(horizon);

  trace.final_age = horizon - freshest_gen;
  trace.time_avg_aoi = age_area.value() / (horizon - warmup);
  trace.empirical_a =
      trace.arrivals == 0 ? 1.0 : static_cast<double>(trace.completions) / static_cast<double>(trace.arrivals);
  slots.finish(trace);
  return trace;
}

// ---------------------------------------------------------------------------
// Replications

struct ReplicationSummary {
  double mean_aoi;
  double ci95_halfwidth;  // normal approximation, 1.96 s / sqrt(n)
  double mean_a;
  double mean_cf;
  std::vector<SimulationTrace> traces;
};

/// Replication r runs with seed = base seed + r; aggregation folds in
/// replication order.
inline ReplicationSummary replicate(const SimConfig& config, const CiProfile& profile, const EnergyModel& energy,
                                    std::size_t n_reps) {
  if (n_reps < 2) throw ConfigError("at least two replications are needed for a confidence interval");
  ReplicationSummary s{0, 0, 0, 0, {}};
  s.traces.reserve(n_reps);
  for (std::size_t r = 0; r < n_reps; ++r) {
    SimConfig c = config;
    c.seed = config.seed + r;
    s.traces.push_back(run(c, profile, energy));
  }
  const double n = static_cast<double>(n_reps);
  for (const auto& t : s.traces) {
    s.mean_aoi += t.time_avg_aoi / n;
    s.mean_a += t.empirical_a / n;
    s.mean_cf += t.ledger.total() / n;
  }
  double ss = 0.0;
  for (const auto& t : s.traces) ss += (t.time_avg_aoi - s.mean_aoi) * (t.time_avg_aoi - s.mean_aoi);
  s.ci95_halfwidth = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return s;
}

/// Relative gap between the transmitted-packet total and a * lambda * horizon.
inline double empirical_packet_count_check(const SimulationTrace& trace, double lambda, double horizon) {
  std::uint64_t total = 0;
  for (auto c : trace.n_tx_per_slot) total += c;
  const double expected = lambda * horizon;
  return std::abs(static_cast<double>(total) - trace.empirical_a * expected) / expected;
}

}  // namespace caoi
