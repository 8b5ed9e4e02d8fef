#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "caoi/cidata.hpp"
#include "caoi/dessim.hpp"

using namespace caoi;
using Catch::Approx;

namespace {

constexpr Discipline kFcfs = Discipline::FcfsMm1;
constexpr Discipline kLcfs = Discipline::LcfsPreemptiveMm1Star;
const EnergyModel kEnergy = EnergyModel::reference();

SimConfig make(Discipline d, double lambda, double mu, double horizon, std::uint64_t seed = 42) {
  SimConfig c{QueueSpec(d, lambda, mu)};
  c.horizon = horizon;
  c.seed = seed;
  c.slot_length = std::min(3600.0, horizon);
  return c;
}

}  // namespace

TEST_CASE("random streams") {
  RandomStream a(7, RandomStream::Id::Interarrival), b(7, RandomStream::Id::Interarrival);
  RandomStream c(7, RandomStream::Id::Service);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    differs |= x != c.uniform();
  }
  CHECK(differs);
  RandomStream e(3, RandomStream::Id::Service);
  double sum = 0.0;
  for (int i = 0; i < 200000; ++i) sum += e.exponential(4.0);
  CHECK(sum / 200000 == Approx(0.25).epsilon(0.01));
}

TEST_CASE("time-average age matches closed forms") {
  const auto ci = CiProfile::constant(198.0, 3e6);
  SECTION("FCFS at rho = 0.5") {
    const auto t = run(make(kFcfs, 0.5, 1.0, 2e6), ci, kEnergy);
    CHECK(t.time_avg_aoi >= 3.43);
    CHECK(t.time_avg_aoi <= 3.57);
    CHECK(avg_aoi_mm1(0.5, 1.0) == Approx(3.5));
  }
  SECTION("LCFS at lambda = mu = 1") {
    const auto t = run(make(kLcfs, 1.0, 1.0, 2e6), ci, kEnergy);
    CHECK(t.time_avg_aoi >= 1.96);
    CHECK(t.time_avg_aoi <= 2.04);
  }
}

TEST_CASE("age area equals the sawtooth built from the resets") {
  auto cfg = make(kFcfs, 0.7, 1.0, 500.0, 9);
  cfg.warmup = 0.0;
  cfg.slot_length = 50.0;
  cfg.record_resets = true;
  const auto t = run(cfg, CiProfile::constant(198.0, 500.0), kEnergy);
  REQUIRE(t.resets.size() > 100);
  // trapezoids between consecutive corners; the age starts at 0 at time 0
  double area = 0.0, from = 0.0, age = 0.0;
  for (const auto& r : t.resets) {
    if (r.time >= cfg.horizon) break;
    CHECK(r.age_after < r.age_before);
    CHECK(r.age_after >= 0.0);
    CHECK(r.age_before == Approx(age + (r.time - from)).margin(1e-9));
    area += (r.time - from) * (age + 0.5 * (r.time - from));
    from = r.time;
    age = r.age_after;
  }
  area += (cfg.horizon - from) * (age + 0.5 * (cfg.horizon - from));
  CHECK(t.time_avg_aoi == Approx(area / cfg.horizon).epsilon(1e-12));
}

TEST_CASE("carbon ledger") {
  const auto ci = CiProfile::constant(198.0, 3e6);
  SECTION("arrival-charged total is ci * E_p * arrivals") {
    const auto t = run(make(kFcfs, 0.5, 1.0, 2e5), ci, kEnergy);
    CHECK(t.ledger.total() ==
          Approx(198.0 * kEnergy.e_p_kwh() * static_cast<double>(t.arrivals)).epsilon(1e-12));
    CHECK(t.ledger.entries().size() == t.n_tx_per_slot.size());
    CHECK(t.n_tx_per_slot.size() == static_cast<std::size_t>(std::ceil(2e5 / 3600.0)));
    CHECK(t.ledger.cumulative(2e5) == Approx(t.ledger.total()).epsilon(1e-12));
  }
  SECTION("slot ledger follows a stepped profile") {
    // ci halves at the midpoint; per-arrival charge is exact within a slot
    const CiProfile p({{0.0, 198.0}, {5e4, 99.0}}, 1e5);
    auto cfg = make(kLcfs, 2.0, 1.0, 1e5);
    cfg.slot_length = 1e4;
    const auto t = run(cfg, p, kEnergy);
    const auto& e = t.ledger.entries();
    REQUIRE(e.size() == 10);
    double first = 0.0, second = 0.0;
    for (std::size_t k = 0; k < 10; ++k) (k < 5 ? first : second) += e[k].emission;
    CHECK(second / first == Approx(0.5).epsilon(0.03));
    CHECK(first + second == Approx(t.ledger.total()).epsilon(1e-12));
  }
  SECTION("completion-charged is below arrival-charged when packets are lost") {
    auto cfg = make(kLcfs, 1.0, 1.0, 2e5);
    const auto arr = run(cfg, ci, kEnergy);
    cfg.cf_mode = CfMode::CompletionCharged;
    const auto done = run(cfg, ci, kEnergy);
    CHECK(done.ledger.total() < arr.ledger.total());
    CHECK(done.ledger.total() ==
          Approx(198.0 * kEnergy.e_p_kwh() * static_cast<double>(done.completions)).epsilon(1e-12));
  }
  SECTION("service-time charging counts preempted partial service") {
    auto cfg = make(kLcfs, 1.0, 1.0, 2e5);
    cfg.cf_mode = CfMode::CompletionCharged;
    const auto done = run(cfg, ci, kEnergy);
    cfg.cf_mode = CfMode::ServiceTimeCharged;
    const auto busy = run(cfg, ci, kEnergy);
    CHECK(busy.ledger.total() >= done.ledger.total());
    CHECK(busy.ledger.total() ==
          Approx(198.0 * units::joules_to_kwh(kEnergy.p_t * busy.busy_time)).epsilon(1e-9));
    // with t_p = 1/mu the two are equal in expectation for M/M/1*
    EnergyModel matched = kEnergy;
    matched.rate = matched.mtu * 1.0;
    const auto d2 = [&] {
      auto c = cfg;
      c.cf_mode = CfMode::CompletionCharged;
      return run(c, ci, matched);
    }();
    const auto b2 = run(cfg, ci, matched);
    CHECK(b2.ledger.total() == Approx(d2.ledger.total()).epsilon(0.02));
  }
}

TEST_CASE("empirical success probability") {
  const auto ci = CiProfile::constant(198.0, 3e6);
  SECTION("LCFS at lambda = mu keeps about half the packets") {
    const auto t = run(make(kLcfs, 1.0, 1.0, 2e5), ci, kEnergy);
    CHECK(t.empirical_a == Approx(0.5).margin(0.01));
    CHECK(t.completions + t.preemptions == t.arrivals);
  }
  SECTION("FCFS with infinite buffer delivers everything") {
    const auto t = run(make(kFcfs, 0.9, 1.0, 2e5), ci, kEnergy);
    CHECK(t.empirical_a == 1.0);
    CHECK(t.drops == 0);
  }
  SECTION("FCFS with a one-packet buffer drops") {
    auto cfg = make(kFcfs, 0.9, 1.0, 2e5);
    cfg.buffer = 1;
    const auto t = run(cfg, ci, kEnergy);
    CHECK(t.empirical_a < 1.0);
    CHECK(t.completions + t.drops == t.arrivals);
    // M/M/1/2 blocking probability rho^2 / (1 + rho + rho^2)
    CHECK(1.0 - t.empirical_a == Approx(0.81 / 2.71).margin(0.01));
  }
  SECTION("finite buffer allows rho >= 1") {
    auto cfg = make(kFcfs, 1.5, 1.0, 1e4);
    cfg.buffer = 3;
    CHECK_NOTHROW(run(cfg, ci, kEnergy));
  }
  SECTION("transmitted-packet totals match a * lambda * horizon") {
    const auto t = run(make(kLcfs, 1.0, 1.0, 2e5), ci, kEnergy);
    CHECK(empirical_packet_count_check(t, 1.0, 2e5) < 0.01);
  }
}

TEST_CASE("determinism") {
  const auto p = builtin_profile_si2024();
  auto cfg = make(kLcfs, 3.0, 2.0, 1e5, 11);
  cfg.cf_mode = CfMode::ServiceTimeCharged;
  const auto a = run(cfg, p, kEnergy);
  const auto b = run(cfg, p, kEnergy);
  CHECK(a == b);
  cfg.seed = 12;
  CHECK_FALSE(a == run(cfg, p, kEnergy));
}

TEST_CASE("replications") {
  const auto ci = CiProfile::constant(198.0, 3e6);
  const auto s = replicate(make(kFcfs, 0.5, 1.0, 2e5, 100), ci, kEnergy, 10);
  REQUIRE(s.traces.size() == 10);
  CHECK(s.ci95_halfwidth < 0.02 * s.mean_aoi);
  CHECK(std::abs(s.mean_aoi - 3.5) < 3 * s.ci95_halfwidth + 0.01);
  CHECK(s.traces[3] == run(make(kFcfs, 0.5, 1.0, 2e5, 103), ci, kEnergy));
  CHECK(s.mean_a == Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(replicate(make(kFcfs, 0.5, 1.0, 1e3), ci, kEnergy, 1), ConfigError);
}

TEST_CASE("configuration errors") {
  const auto ci = CiProfile::constant(198.0, 3e6);
  CHECK_THROWS_AS(run(make(kFcfs, 1.0, 1.0, 1e3), ci, kEnergy), ConfigError);
  CHECK_THROWS_AS(run(make(kFcfs, 2.0, 1.0, 1e3), ci, kEnergy), ConfigError);
  CHECK_NOTHROW(run(make(kLcfs, 2.0, 1.0, 1e3), ci, kEnergy));
  CHECK_THROWS_AS(run(make(kFcfs, 0.5, 1.0, 4e6), ci, kEnergy), ConfigError);
  auto cfg = make(kFcfs, 0.5, 1.0, 1e3);
  cfg.warmup = 1e3;
  CHECK_THROWS_AS(run(cfg, ci, kEnergy), ConfigError);
  cfg.warmup.reset();
  cfg.slot_length = 2e3;
  CHECK_THROWS_AS(run(cfg, ci, kEnergy), ConfigError);
  CHECK(parse_cf_mode("service_time_charged") == CfMode::ServiceTimeCharged);
  CHECK_FALSE(parse_cf_mode("bogus"));
}
