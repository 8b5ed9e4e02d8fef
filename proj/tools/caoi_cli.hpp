#pragma once

// Command-line front end: analyze, optimize, simulate, sweep and replay.
//
// Every command produces its data (CSV or JSON) plus a manifest holding the
// fully resolved argument list, seeds and SHA-256 digests of inputs and
// outputs. `caoi replay MANIFEST` re-runs the recorded command and checks the
// digests.

#include <openssl/evp.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "caoi/caoi.hpp"

namespace caoi::cli {

using Json = nlohmann::ordered_json;

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kMismatch = 1;
inline constexpr int kUsage = 2;
inline constexpr int kInfeasible = 3;
inline constexpr int kIo = 4;
}  // namespace exit_code

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HelpRequested : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Formatting and parsing helpers

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Mass in grams of CO2eq. Accepts a bare number (grams) or a g/mg/ug suffix.
inline double parse_mass_grams(const std::string& text, const std::string& flag) {
  static const std::pair<const char*, double> suffixes[] = {{"ug", 1e-6}, {"mg", 1e-3}, {"g", 1.0}};
  std::string number = text;
  double scale = 1.0;
  for (const auto& [suffix, factor] : suffixes) {
    const std::string s(suffix);
    if (text.size() > s.size() && text.compare(text.size() - s.size(), s.size(), s) == 0) {
      number = text.substr(0, text.size() - s.size());
      scale = factor;
      break;
    }
  }
  double v = 0.0;
  if (!caoi::detail::parse_double(number, v)) throw UsageError(flag + ": cannot parse mass '" + text + "'");
  return v * scale;
}

inline double parse_number(const std::string& text, const std::string& flag) {
  double v = 0.0;
  if (!caoi::detail::parse_double(text, v)) throw UsageError(flag + ": cannot parse number '" + text + "'");
  return v;
}

/// `a:b:n` -> n evenly spaced points from a to b inclusive.
inline std::vector<double> parse_grid(const std::string& text, const std::string& flag, bool mass = false) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
  if (c2 == std::string::npos) throw UsageError(flag + ": expected a:b:n, got '" + text + "'");
  const auto a_text = text.substr(0, c1);
  const auto b_text = text.substr(c1 + 1, c2 - c1 - 1);
  const double a = mass ? parse_mass_grams(a_text, flag) : parse_number(a_text, flag);
  const double b = mass ? parse_mass_grams(b_text, flag) : parse_number(b_text, flag);
  int n = 0;
  if (!caoi::detail::parse_int(text.substr(c2 + 1), n) || n < 1) throw UsageError(flag + ": point count must be >= 1");
  if (n > 1 && !(b > a)) throw UsageError(flag + ": grid end must exceed grid start");
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) grid[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / (n - 1);
  return grid;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Command plumbing

/// Resolved flags in emission order; doubles are stored with 17 digits so
/// that replaying them reproduces the same binary values.
class Params {
 public:
  void add(const std::string& name, const std::string& value) { items_.emplace_back(name, value); }
  void add(const std::string& name, double value) { add(name, fmt17(value)); }

  std::vector<std::string> to_args() const {
    std::vector<std::string> args;
    for (const auto& [k, v] : items_) {
      args.push_back("--" + k);
      args.push_back(v);
    }
    return args;
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

struct InputDigest {
  std::string role;
  std::string source;
  std::string sha256;
};

struct Outcome {
  int code = exit_code::kOk;
  std::string command;
  std::string primary;                  // CSV or JSON body
  std::optional<std::string> slots;     // simulate's per-slot CSV
  Params params;
  std::vector<InputDigest> inputs;
  std::vector<std::uint64_t> seeds;
};

struct CiSource {
  CiProfile profile;
  std::string source;
  std::string sha256;
};

inline std::string resolve_ci_arg(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv("CAOI_DEFAULT_CI"); env && *env) return env;
  return "builtin";
}

inline CiSource load_ci(const std::string& source) {
  if (source == "builtin") {
    auto profile = builtin_profile_si2024();
    std::ostringstream csv;
    write_ci_csv(csv, profile);
    return {std::move(profile), source, sha256_hex(csv.str())};
  }
  const std::string bytes = read_file(source);
  return {parse_ci_csv(bytes), source, sha256_hex(bytes)};
}

struct EnergyFlags {
  double p_t = 1.0;
  double mtu = 12000.0;
  double rate = 1e8;
  double bandwidth = 1e6;
  double channel_gain = 1.0;
  double noise_power = 1e-4;
  double success_prob = 1.0;

  void attach(CLI::App* app) {
    app->add_option("--p-t", p_t, "Transmit power, W")->capture_default_str();
    app->add_option("--mtu", mtu, "Packet size, bits")->capture_default_str();
    app->add_option("--rate", rate, "Link rate, bit/s")->capture_default_str();
    app->add_option("--bandwidth", bandwidth, "Bandwidth, Hz")->capture_default_str();
    app->add_option("--channel-gain", channel_gain, "Channel gain |h|^2")->capture_default_str();
    app->add_option("--noise-power", noise_power, "Noise power, W")->capture_default_str();
    app->add_option("--success-prob", success_prob, "Transmission success probability a")->capture_default_str();
  }

  EnergyModel model(std::optional<double> power_cap = std::nullopt) const {
    EnergyModel e{p_t, std::max(p_t, power_cap.value_or(p_t)), mtu, rate, bandwidth, channel_gain, noise_power};
    e.validate();
    return e;
  }

  void record(Params& p) const {
    p.add("p-t", p_t);
    p.add("mtu", mtu);
    p.add("rate", rate);
    p.add("bandwidth", bandwidth);
    p.add("channel-gain", channel_gain);
    p.add("noise-power", noise_power);
    p.add("success-prob", success_prob);
  }
};

inline std::vector<Discipline> models_from(const std::string& model) {
  if (model == "mm1") return {Discipline::FcfsMm1};
  if (model == "mm1star") return {Discipline::LcfsPreemptiveMm1Star};
  return {Discipline::FcfsMm1, Discipline::LcfsPreemptiveMm1Star};
}

inline std::string analyze_csv(const std::vector<SweepRow>& rows) {
  std::string out = "x,model,aoi_s,cf_g,lambda_bound,binding\n";
  for (const auto& r : rows) {
    out += fmt17(r.x) + ',' + std::string(to_string(r.discipline)) + ',' + (r.aoi ? fmt17(*r.aoi) : "") + ',' +
           fmt17(r.cf) + ',' + fmt17(r.lambda_bound) + ',' + std::string(to_string(r.binding)) + '\n';
  }
  return out;
}

inline std::string surface_csv(const std::vector<SweepRow>& rows) {
  std::string out = "month,x,model,aoi_s,binding\n";
  for (const auto& r : rows) {
    out += std::to_string(r.month) + ',' + fmt17(r.x) + ',' + std::string(to_string(r.discipline)) + ',' +
           (r.aoi ? fmt17(*r.aoi) : "") + ',' + std::string(to_string(r.binding)) + '\n';
  }
  return out;
}

inline bool all_infeasible(const std::vector<SweepRow>& rows) {
  for (const auto& r : rows)
    if (r.binding != Binding::Infeasible) return false;
  return true;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Commands. Each registers its flags and returns a closure producing an Outcome.

struct AnalyzeCmd {
  std::string model = "both";
  double mu = 1.0;
  std::string lambda_grid, k_grid, ci, mode = "paper", budget = "0.05";
  double tn = 3600.0, epsilon = SaturationEpsilon::kDefault;
  EnergyFlags energy;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "mm1, mm1star or both")->check(CLI::IsMember({"mm1", "mm1star", "both"}))->capture_default_str();
    app->add_option("--mu", mu, "Service rate, packets/s")->capture_default_str();
    auto* lg = app->add_option("--lambda-grid", lambda_grid, "Arrival-rate grid a:b:n");
    auto* kg = app->add_option("--k-grid", k_grid, "Budget grid a:b:n (g, or mg/ug suffix)");
    lg->excludes(kg);
    app->add_option("--ci", ci, "CI profile: CSV path or 'builtin'");
    app->add_option("--mode", mode, "paper or exact")->check(CLI::IsMember({"paper", "exact"}))->capture_default_str();
    app->add_option("--budget-k", budget, "Carbon budget for the lambda sweep")->capture_default_str();
    app->add_option("--tn", tn, "Accounting horizon t_N, s")->capture_default_str();
    app->add_option("--epsilon", epsilon, "M/M/1* saturation offset")->capture_default_str();
    energy.attach(app);
  }

  Outcome run() const {
    if (lambda_grid.empty() == k_grid.empty()) throw UsageError("--lambda-grid or --k-grid: exactly one is required");
    if (!(mu > 0.0)) throw UsageError("--mu: must be positive");
    Outcome o;
    o.command = "analyze";
    const auto src = load_ci(resolve_ci_arg(ci));
    o.inputs.push_back({"ci", src.source, src.sha256});
    const EnergyModel e = energy.model();
    ConstraintSet c;
    c.budget_k = parse_mass_grams(budget, "--budget-k");
    c.horizon_tn = tn;
    c.success_prob_a = energy.success_prob;
    c.validate();
    SolveOptions opt;
    opt.mode = *parse_mode(mode);
    opt.eps = SaturationEpsilon(epsilon);
    const auto models = models_from(model);

    std::vector<SweepRow> rows;
    if (!lambda_grid.empty()) {
      const auto grid = parse_grid(lambda_grid, "--lambda-grid");
      rows = sweep_lambda(mu, grid, models, src.profile.long_term_average(), e, c);
    } else {
      const auto grid = parse_grid(k_grid, "--k-grid", true);
      rows = sweep_cf_budget(Problem::Cf, mu, grid, src.profile, false, models, e, c, opt);
    }
    o.primary = analyze_csv(rows);
    if (all_infeasible(rows)) o.code = exit_code::kInfeasible;

    o.params.add("model", model);
    o.params.add("mu", mu);
    if (!lambda_grid.empty()) o.params.add("lambda-grid", lambda_grid);
    if (!k_grid.empty()) o.params.add("k-grid", k_grid);
    o.params.add("ci", src.source);
    o.params.add("mode", mode);
    o.params.add("budget-k", c.budget_k);
    o.params.add("tn", tn);
    o.params.add("epsilon", epsilon);
    energy.record(o.params);
    return o;
  }
};

struct OptimizeCmd {
  std::string problem, model = "mm1", mode = "exact", budget, ci, mu_rule = "fixed", qos_timing = "from_snr";
  double tn = 0.0, epsilon = SaturationEpsilon::kDefault;
  std::optional<double> mu, p_max, snr_min_db, ci_value;
  std::optional<int> month;
  EnergyFlags energy;

  void attach(CLI::App* app) {
    app->add_option("--problem", problem, "cf, power or qos")->required()->check(CLI::IsMember({"cf", "power", "qos"}));
    app->add_option("--budget-k", budget, "Carbon budget K (g, or mg/ug suffix)")->required();
    app->add_option("--tn", tn, "Accounting horizon t_N, s")->required();
    app->add_option("--model", model, "mm1 or mm1star")->check(CLI::IsMember({"mm1", "mm1star"}))->capture_default_str();
    app->add_option("--mode", mode, "paper or exact")->check(CLI::IsMember({"paper", "exact"}))->capture_default_str();
    app->add_option("--mu", mu, "Service rate, packets/s (default 1/T_p)");
    app->add_option("--p-max", p_max, "Transmit power cap, W");
    app->add_option("--snr-min-db", snr_min_db, "SNR floor, dB");
    auto* m = app->add_option("--month", month, "Month 1..12 of the CI profile")->check(CLI::Range(1, 12));
    auto* v = app->add_option("--ci-value", ci_value, "Carbon intensity, gCO2eq/kWh");
    m->excludes(v);
    app->add_option("--ci", ci, "CI profile: CSV path or 'builtin'");
    app->add_option("--mu-rule", mu_rule, "fixed or track_opt_rho")->check(CLI::IsMember({"fixed", "track_opt_rho"}))->capture_default_str();
    app->add_option("--qos-timing", qos_timing, "from_snr or fixed")->check(CLI::IsMember({"from_snr", "fixed"}))->capture_default_str();
    app->add_option("--epsilon", epsilon, "M/M/1* saturation offset")->capture_default_str();
    energy.attach(app);
  }

  Outcome run() const {
    Outcome o;
    o.command = "optimize";
    if (problem == "power" && !p_max) throw UsageError("--p-max: required for --problem power");
    if (problem == "qos" && !snr_min_db) throw UsageError("--snr-min-db: required for --problem qos");

    ConstraintSet c;
    c.budget_k = parse_mass_grams(budget, "--budget-k");
    c.horizon_tn = tn;
    c.success_prob_a = energy.success_prob;
    if (problem == "power") c.power_cap = *p_max;
    if (problem == "qos") c.snr_min = units::db_to_linear(*snr_min_db);
    c.validate();
    const EnergyModel e = energy.model(c.power_cap);

    double ci_used = 0.0;
    std::string ci_source;
    if (ci_value) {
      if (!(*ci_value > 0.0)) throw UsageError("--ci-value: must be positive");
      ci_used = *ci_value;
    } else {
      const auto src = load_ci(resolve_ci_arg(ci));
      o.inputs.push_back({"ci", src.source, src.sha256});
      ci_source = src.source;
      if (month) {
        if (static_cast<std::size_t>(*month) > src.profile.size())
          throw UsageError("--month: profile has only " + std::to_string(src.profile.size()) + " steps");
        ci_used = src.profile.samples()[static_cast<std::size_t>(*month - 1)].ci;
      } else {
        ci_used = src.profile.long_term_average();
      }
    }

    SolveOptions opt;
    opt.mode = *parse_mode(mode);
    opt.eps = SaturationEpsilon(epsilon);
    opt.mu_rule = mu_rule == "fixed" ? MuRule::Fixed : MuRule::TrackOptRho;
    opt.qos_timing = qos_timing == "from_snr" ? QosTiming::FromSnr : QosTiming::Fixed;
    const Discipline d = *parse_discipline(model);
    const double service = mu.value_or(1.0 / e.t_p());
    if (!(service > 0.0)) throw UsageError("--mu: must be positive");
    const Problem prob = problem == "cf" ? Problem::Cf : problem == "power" ? Problem::Power : Problem::Qos;

    Json j;
    try {
      const auto r = solve_problem(prob, service, c, ci_used, e, d, opt);
      j["status"] = "ok";
      j["problem"] = problem;
      j["model"] = model;
      j["mode"] = mode;
      j["lambda_star"] = r.lambda_star;
      j["mu_star"] = r.mu_star;
      j["rho"] = r.lambda_star / r.mu_star;
      j["aoi_s"] = r.aoi;
      j["cf_g"] = r.cf;
      j["budget_k_g"] = c.budget_k;
      j["lambda_bound"] = r.lambda_bound;
      j["binding"] = std::string(to_string(r.binding_constraint));
      j["ci_g_per_kwh"] = ci_used;
    } catch (const Infeasible& ex) {
      j = Json{{"status", "infeasible"}, {"problem", problem}, {"model", model}, {"reason", ex.what()}};
      o.code = exit_code::kInfeasible;
    }
    o.primary = dump(j);

    o.params.add("problem", problem);
    o.params.add("budget-k", c.budget_k);
    o.params.add("tn", tn);
    o.params.add("model", model);
    o.params.add("mode", mode);
    if (mu) o.params.add("mu", *mu);
    if (p_max) o.params.add("p-max", *p_max);
    if (snr_min_db) o.params.add("snr-min-db", *snr_min_db);
    if (ci_value) o.params.add("ci-value", *ci_value);
    if (month) o.params.add("month", std::to_string(*month));
    if (!ci_source.empty()) o.params.add("ci", ci_source);
    o.params.add("mu-rule", mu_rule);
    o.params.add("qos-timing", qos_timing);
    o.params.add("epsilon", epsilon);
    energy.record(o.params);
    return o;
  }
};

struct SimulateCmd {
  std::string model = "mm1", cf_mode = "arrival_charged", ci, buffer = "inf";
  double lambda = 0.0, mu = 0.0, horizon = 1e6, slot = 3600.0;
  std::optional<double> warmup;
  std::uint64_t seed = 1;
  std::size_t reps = 10;
  bool want_slots = false;
  EnergyFlags energy;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "mm1 or mm1star")->check(CLI::IsMember({"mm1", "mm1star"}))->capture_default_str();
    app->add_option("--lambda", lambda, "Arrival rate, packets/s")->required();
    app->add_option("--mu", mu, "Service rate, packets/s")->required();
    app->add_option("--horizon", horizon, "Simulated time, s")->capture_default_str();
    app->add_option("--seed", seed, "Base seed; replication r uses seed + r")->capture_default_str();
    app->add_option("--reps", reps, "Independent replications (>= 2)")->capture_default_str();
    app->add_option("--warmup", warmup, "Discarded prefix, s (default 1% of horizon)");
    app->add_option("--cf-mode", cf_mode, "arrival_charged, completion_charged or service_time_charged")
        ->check(CLI::IsMember({"arrival_charged", "completion_charged", "service_time_charged"}))
        ->capture_default_str();
    app->add_option("--ci", ci, "CI profile: CSV path or 'builtin'");
    app->add_option("--buffer", buffer, "Waiting room: 'inf' or a count")->capture_default_str();
    app->add_option("--slot", slot, "Slot length for per-slot counts, s")->capture_default_str();
    energy.attach(app);
  }

  Outcome run() const {
    Outcome o;
    o.command = "simulate";
    if (reps < 2) throw UsageError("--reps: at least 2 replications are required");
    std::optional<std::size_t> buffer_size;
    if (buffer != "inf") {
      int n = 0;
      if (!caoi::detail::parse_int(buffer, n)) throw UsageError("--buffer: expected 'inf' or a non-negative count");
      buffer_size = static_cast<std::size_t>(n);
    }
    const Discipline d = *parse_discipline(model);
    const auto src = load_ci(resolve_ci_arg(ci));
    o.inputs.push_back({"ci", src.source, src.sha256});
    const EnergyModel e = energy.model();

    SimConfig config{.spec = QueueSpec(d, lambda, mu),
                     .horizon = horizon,
                     .seed = seed,
                     .warmup = warmup,
                     .slot_length = slot,
                     .cf_mode = *parse_cf_mode(cf_mode),
                     .buffer = buffer_size};
    const auto summary = replicate(config, src.profile, e, reps);
    for (std::size_t r = 0; r < reps; ++r) o.seeds.push_back(seed + r);

    std::optional<double> closed_form;
    if (d == Discipline::LcfsPreemptiveMm1Star)
      closed_form = avg_aoi_mm1_star(lambda, mu);
    else if (lambda < mu)
      closed_form = avg_aoi_mm1(lambda, mu);

    std::uint64_t arrivals = 0, completions = 0, preemptions = 0, drops = 0;
    for (const auto& t : summary.traces) {
      arrivals += t.arrivals;
      completions += t.completions;
      preemptions += t.preemptions;
      drops += t.drops;
    }
    Json j;
    j["model"] = model;
    j["lambda"] = lambda;
    j["mu"] = mu;
    j["rho"] = lambda / mu;
    j["reps"] = reps;
    j["base_seed"] = seed;
    j["horizon_s"] = horizon;
    j["warmup_s"] = config.effective_warmup();
    j["cf_mode"] = cf_mode;
    j["buffer"] = buffer;
    j["mean_aoi_s"] = summary.mean_aoi;
    j["ci95_halfwidth_s"] = summary.ci95_halfwidth;
    j["empirical_a"] = summary.mean_a;
    j["total_cf_g"] = summary.mean_cf;
    j["arrivals"] = arrivals;
    j["completions"] = completions;
    j["preemptions"] = preemptions;
    j["drops"] = drops;
    if (closed_form) {
      j["closed_form_aoi_s"] = *closed_form;
      j["rel_dev_from_closed_form"] = std::abs(summary.mean_aoi - *closed_form) / *closed_form;
    } else {
      j["closed_form_aoi_s"] = nullptr;
      j["rel_dev_from_closed_form"] = nullptr;
    }
    o.primary = dump(j);

    std::string slots_csv = "rep,slot,t_end_s,n_tx,cf_g\n";
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& t = summary.traces[r];
      for (std::size_t k = 0; k < t.n_tx_per_slot.size(); ++k)
        slots_csv += std::to_string(r) + ',' + std::to_string(k) + ',' + fmt17(t.ledger.entries()[k].time) + ',' +
                     std::to_string(t.n_tx_per_slot[k]) + ',' + fmt17(t.ledger.entries()[k].emission) + '\n';
    }
    o.slots = std::move(slots_csv);

    o.params.add("model", model);
    o.params.add("lambda", lambda);
    o.params.add("mu", mu);
    o.params.add("horizon", horizon);
    o.params.add("seed", std::to_string(seed));
    o.params.add("reps", std::to_string(reps));
    o.params.add("warmup", config.effective_warmup());
    o.params.add("cf-mode", cf_mode);
    o.params.add("ci", src.source);
    o.params.add("buffer", buffer);
    o.params.add("slot", slot);
    energy.record(o.params);
    return o;
  }
};

struct SweepCmd {
  std::string surface, k_grid = "0.5mg:1mg:11", snr_grid = "-10:30:41", ci, model = "both", mode = "paper",
                       budget = "1e-4", problem = "power", qos_timing = "from_snr";
  double p_max = 1.0, tn = 3600.0, epsilon = SaturationEpsilon::kDefault;
  std::optional<double> mu, snr_min_db;
  EnergyFlags energy;

  void attach(CLI::App* app) {
    app->add_option("--surface", surface, "k (month x budget), snr (month x SNR floor) or months")
        ->required()
        ->check(CLI::IsMember({"k", "snr", "months"}));
    app->add_option("--k-grid", k_grid, "Budget grid a:b:n for --surface k")->capture_default_str();
    app->add_option("--snr-grid-db", snr_grid, "SNR floor grid a:b:n in dB for --surface snr")->capture_default_str();
    app->add_option("--ci", ci, "CI profile: CSV path or 'builtin'");
    app->add_option("--model", model, "mm1, mm1star or both")->check(CLI::IsMember({"mm1", "mm1star", "both"}))->capture_default_str();
    app->add_option("--mode", mode, "paper or exact")->check(CLI::IsMember({"paper", "exact"}))->capture_default_str();
    app->add_option("--budget-k", budget, "Carbon budget for --surface snr/months")->capture_default_str();
    app->add_option("--problem", problem, "power or qos, for --surface months")->check(CLI::IsMember({"power", "qos"}))->capture_default_str();
    app->add_option("--p-max", p_max, "Transmit power cap, W")->capture_default_str();
    app->add_option("--snr-min-db", snr_min_db, "SNR floor for --surface months --problem qos, dB");
    app->add_option("--tn", tn, "Accounting horizon t_N, s")->capture_default_str();
    app->add_option("--mu", mu, "Service rate for the power problem (default 1/T_p)");
    app->add_option("--qos-timing", qos_timing, "from_snr or fixed")->check(CLI::IsMember({"from_snr", "fixed"}))->capture_default_str();
    app->add_option("--epsilon", epsilon, "M/M/1* saturation offset")->capture_default_str();
    energy.attach(app);
  }

  Outcome run() const {
    Outcome o;
    o.command = "sweep";
    const auto src = load_ci(resolve_ci_arg(ci));
    o.inputs.push_back({"ci", src.source, src.sha256});
    ConstraintSet c;
    c.horizon_tn = tn;
    c.success_prob_a = energy.success_prob;
    c.budget_k = parse_mass_grams(budget, "--budget-k");
    c.power_cap = p_max;
    c.validate();
    const EnergyModel e = energy.model(c.power_cap);
    SolveOptions opt;
    opt.mode = *parse_mode(mode);
    opt.eps = SaturationEpsilon(epsilon);
    opt.qos_timing = qos_timing == "from_snr" ? QosTiming::FromSnr : QosTiming::Fixed;
    const auto models = models_from(model);
    const double service = mu.value_or(1.0 / e.t_p());

    std::vector<SweepRow> rows;
    o.params.add("surface", surface);
    if (surface == "k") {
      const auto grid = parse_grid(k_grid, "--k-grid", true);
      rows = sweep_cf_budget(Problem::Power, service, grid, src.profile, true, models, e, c, opt);
      o.params.add("k-grid", k_grid);
    } else if (surface == "snr") {
      const auto grid = parse_grid(snr_grid, "--snr-grid-db");
      rows = sweep_snr(c, grid, src.profile, e, models, opt);
      o.params.add("snr-grid-db", snr_grid);
    } else {
      if (problem == "qos") {
        if (!snr_min_db) throw UsageError("--snr-min-db: required for --surface months --problem qos");
        c.snr_min = units::db_to_linear(*snr_min_db);
        o.params.add("snr-min-db", *snr_min_db);
      }
      if (src.profile.size() != 12) throw UsageError("--ci: --surface months needs a 12-month profile");
      rows = sweep_months(problem == "qos" ? Problem::Qos : Problem::Power, c, src.profile, e, models, opt, service);
      o.params.add("problem", problem);
    }
    o.primary = surface_csv(rows);
    if (all_infeasible(rows)) o.code = exit_code::kInfeasible;

    o.params.add("ci", src.source);
    o.params.add("model", model);
    o.params.add("mode", mode);
    o.params.add("budget-k", c.budget_k);
    o.params.add("p-max", p_max);
    o.params.add("tn", tn);
    if (mu) o.params.add("mu", *mu);
    o.params.add("qos-timing", qos_timing);
    o.params.add("epsilon", epsilon);
    energy.record(o.params);
    return o;
  }
};

// ---------------------------------------------------------------------------
// Dispatch

/// Runs one data command on `args` (args[0] is the command name) without
/// touching the filesystem for outputs.
inline Outcome execute(const std::vector<std::string>& args) {
  CLI::App app{"Carbon-aware age-of-information toolkit", "caoi"};
  app.require_subcommand(1);
  AnalyzeCmd analyze;
  OptimizeCmd optimize;
  SimulateCmd simulate;
  SweepCmd sweep;
  analyze.attach(app.add_subcommand("analyze", "AoI/CF sweep over arrival rate or carbon budget"));
  optimize.attach(app.add_subcommand("optimize", "Solve one constrained AoI problem"));
  simulate.attach(app.add_subcommand("simulate", "Discrete-event simulation with replications"));
  sweep.attach(app.add_subcommand("sweep", "Month x budget / SNR surfaces"));

  std::vector<std::string> argv_store{"caoi"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::ostringstream help, ignored;
    app.exit(e, help, ignored);
    throw HelpRequested(help.str());
  } catch (const CLI::CallForAllHelp& e) {
    std::ostringstream help, ignored;
    app.exit(e, help, ignored);
    throw HelpRequested(help.str());
  }

  const auto name = app.get_subcommands().front()->get_name();
  if (name == "analyze") return analyze.run();
  if (name == "optimize") return optimize.run();
  if (name == "simulate") return simulate.run();
  return sweep.run();
}

inline Json manifest_json(const Outcome& o, const std::string& out_path, const std::optional<std::string>& slots_path) {
  Json j;
  j["tool"] = "caoi";
  j["version"] = kVersion;
  j["command"] = o.command;
  j["args"] = o.params.to_args();
  j["seeds"] = o.seeds;
  j["inputs"] = Json::array();
  for (const auto& in : o.inputs) j["inputs"].push_back({{"role", in.role}, {"source", in.source}, {"sha256", in.sha256}});
  j["outputs"] = Json::array();
  j["outputs"].push_back({{"role", "primary"}, {"path", out_path}, {"sha256", sha256_hex(o.primary)}});
  if (o.slots && slots_path)
    j["outputs"].push_back({{"role", "slots"}, {"path", *slots_path}, {"sha256", sha256_hex(*o.slots)}});
  return j;
}

/// Splits off the output-routing flags that are not part of the resolved
/// parameter set.
struct Routing {
  std::optional<std::string> out, manifest, slots_out;
};

inline std::vector<std::string> strip_routing(const std::vector<std::string>& args, Routing& routing) {
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    auto take = [&](std::optional<std::string>& slot, const std::string& flag) {
      if (a == flag) {
        if (i + 1 >= args.size()) throw UsageError(flag + ": missing value");
        slot = args[++i];
        return true;
      }
      if (a.rfind(flag + "=", 0) == 0) {
        slot = a.substr(flag.size() + 1);
        return true;
      }
      return false;
    };
    if (take(routing.out, "--out") || take(routing.manifest, "--manifest") || take(routing.slots_out, "--slots-out"))
      continue;
    rest.push_back(a);
  }
  return rest;
}

inline void emit(const Outcome& o, const Routing& routing, std::ostream& out, std::ostream& err) {
  const bool to_stdout = !routing.out || *routing.out == "-";
  if (to_stdout)
    out << o.primary;
  else
    write_file(*routing.out, o.primary);
  if (o.slots && routing.slots_out) write_file(*routing.slots_out, *o.slots);

  const auto manifest = dump(manifest_json(o, to_stdout ? "-" : *routing.out, routing.slots_out));
  if (routing.manifest)
    write_file(*routing.manifest, manifest);
  else if (!to_stdout)
    write_file(*routing.out + ".manifest.json", manifest);
  else
    err << manifest;
}

inline int replay(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Routing routing;
  const auto rest = strip_routing(args, routing);
  if (rest.size() != 1) throw UsageError("usage: caoi replay MANIFEST [--out PATH] [--slots-out PATH]");
  Json m;
  try {
    m = Json::parse(read_file(rest[0]));
  } catch (const Json::exception& e) {
    throw UsageError(std::string("manifest: ") + e.what());
  }
  std::vector<std::string> cmd{m.at("command").get<std::string>()};
  for (const auto& a : m.at("args")) cmd.push_back(a.get<std::string>());
  const Outcome o = execute(cmd);

  bool match = true;
  for (const auto& recorded : m.at("inputs")) {
    for (const auto& now : o.inputs)
      if (now.role == recorded.at("role").get<std::string>() && now.sha256 != recorded.at("sha256").get<std::string>()) {
        err << "replay: input '" << now.source << "' changed since the manifest was written\n";
        match = false;
      }
  }
  for (const auto& recorded : m.at("outputs")) {
    const auto role = recorded.at("role").get<std::string>();
    const std::string* body = role == "primary" ? &o.primary : (o.slots ? &*o.slots : nullptr);
    if (body && sha256_hex(*body) != recorded.at("sha256").get<std::string>()) {
      err << "replay: " << role << " output differs from the manifest\n";
      match = false;
    }
  }
  const bool to_stdout = !routing.out || *routing.out == "-";
  if (to_stdout)
    out << o.primary;
  else
    write_file(*routing.out, o.primary);
  if (o.slots && routing.slots_out) write_file(*routing.slots_out, *o.slots);
  if (!match) return exit_code::kMismatch;
  err << "replay: outputs match manifest\n";
  return o.code;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    if (!args.empty() && args[0] == "replay") return replay({args.begin() + 1, args.end()}, out, err);
    if (!args.empty() && args[0] == "--version") {
      out << "caoi " << kVersion << '\n';
      return exit_code::kOk;
    }
    Routing routing;
    const auto rest = strip_routing(args, routing);
    const Outcome o = execute(rest);
    emit(o, routing, out, err);
    return o.code;
  } catch (const HelpRequested& e) {
    out << e.what() << "\n  replay MANIFEST [--out PATH] [--slots-out PATH]\n";
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    err << "caoi: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const UsageError& e) {
    err << "caoi: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const IoError& e) {
    err << "caoi: " << e.what() << '\n';
    return exit_code::kIo;
  } catch (const Infeasible& e) {
    err << "caoi: infeasible: " << e.what() << '\n';
    return exit_code::kInfeasible;
  } catch (const caoi::Error& e) {
    err << "caoi: " << e.what() << '\n';
    return exit_code::kUsage;
  }
}

}  // namespace caoi::cli
