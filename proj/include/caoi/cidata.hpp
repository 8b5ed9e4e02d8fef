#pragma once

// Carbon-intensity profile ingestion, serialization and re-gridding.
//
// CSV layout:
//
//   # optional comment lines
//   period,ci_g_per_kwh
//   2024-01,228
//   2024-02,218
//
// `period` is either YYYY-MM or a month index 1..12, consistently across the
// file. Months are treated as equal-length steps of kMonthSeconds.

#include <array>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "caoi/carbon.hpp"
#include "caoi/error.hpp"

namespace caoi {

inline constexpr double kMonthSeconds = 365.0 * 86400.0 / 12.0;

// Synthetic monthly profile for 2024 (Jan..Dec). Not measured data: built so
// that the equal-weight annual mean is 198 gCO2eq/kWh with November the
// dirtiest month at 308/108 = 2.85x May, the cleanest.
inline constexpr std::array<double, 12> kSi2024SyntheticCi = {228, 218, 188, 148, 108, 128,
                                                              158, 178, 208, 248, 308, 258};

inline CiProfile builtin_profile_si2024() {
  std::vector<CiSample> samples;
  for (std::size_t m = 0; m < kSi2024SyntheticCi.size(); ++m)
    samples.push_back({static_cast<double>(m) * kMonthSeconds, kSi2024SyntheticCi[m]});
  return CiProfile(std::move(samples), 12.0 * kMonthSeconds, YearMonth{2024, 1});
}

struct CiParseOptions {
  bool require_twelve_months = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty() || s.size() > 9) return false;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const std::string buf(s);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(buf.c_str(), &end);
  return errno == 0 && end == buf.c_str() + buf.size() && std::isfinite(out);
}

struct ParsedPeriod {
  bool dated;
  int year;
  int month;
  long index() const { return dated ? static_cast<long>(year) * 12 + (month - 1) : month - 1; }
};

inline bool parse_period(std::string_view s, ParsedPeriod& out) {
  const auto dash = s.find('-');
  if (dash == std::string_view::npos) {
    int m = 0;
    if (!parse_int(s, m) || m < 1 || m > 12) return false;
    out = {false, 0, m};
    return true;
  }
  int y = 0, m = 0;
  if (dash != 4 || s.size() != 7 || !parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5), m)) return false;
  if (m < 1 || m > 12) return false;
  out = {true, y, m};
  return true;
}

inline std::string format_month(const YearMonth& origin, long offset) {
  const long idx = (origin.year == 0 ? 0L : static_cast<long>(origin.year) * 12) + origin.month - 1 + offset;
  char buf[32];
  if (origin.year == 0)
    std::snprintf(buf, sizeof buf, "%ld", idx + 1);
  else
    std::snprintf(buf, sizeof buf, "%04ld-%02ld", idx / 12, idx % 12 + 1);
  return buf;
}

}  // namespace detail

/// Parses a monthly CI CSV. Throws ParseError for malformed rows and
/// ValidationError (naming the period) for invariant breaches.
inline CiProfile parse_ci_csv(std::istream& in, CiParseOptions options = {}) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::pair<detail::ParsedPeriod, double>> rows;
  std::vector<std::string> labels;

  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (!have_header) {
      if (text != "period,ci_g_per_kwh") throw ParseError(line_no, "expected header 'period,ci_g_per_kwh'");
      have_header = true;
      continue;
    }
    const auto comma = text.find(',');
    if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos)
      throw ParseError(line_no, "expected exactly two fields");
    const auto period_text = detail::trim(text.substr(0, comma));
    const auto ci_text = detail::trim(text.substr(comma + 1));

    detail::ParsedPeriod period{};
    if (!detail::parse_period(period_text, period))
      throw ParseError(line_no, "bad period '" + std::string(period_text) + "'");
    double ci = 0.0;
    if (!detail::parse_double(ci_text, ci)) throw ParseError(line_no, "bad carbon intensity '" + std::string(ci_text) + "'");
    if (!rows.empty() && rows.front().first.dated != period.dated)
      throw ParseError(line_no, "mixed period formats");

    const std::string label(period_text);
    if (!(ci > 0.0)) throw ValidationError(label, "carbon intensity must be positive");
    if (!rows.empty()) {
      const long prev = rows.back().first.index();
      if (period.index() == prev) throw ValidationError(label, "duplicate period");
      if (period.index() < prev) throw ValidationError(label, "period out of order");
    }
    rows.emplace_back(period, ci);
    labels.push_back(label);
  }

  if (!have_header) throw ParseError(line_no, "missing header");
  if (rows.empty()) throw ValidationError("profile", "no data rows");

  const long first = rows.front().first.index();
  if (options.require_twelve_months) {
    if (rows.size() != 12) throw ValidationError("profile", "expected 12 months, found " + std::to_string(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].first.index() != first + static_cast<long>(i))
        throw ValidationError(labels[i], "missing month before this period");
  }

  std::vector<CiSample> samples;
  samples.reserve(rows.size());
  for (const auto& [period, ci] : rows)
    samples.push_back({static_cast<double>(period.index() - first) * kMonthSeconds, ci});
  const double horizon = static_cast<double>(rows.back().first.index() - first + 1) * kMonthSeconds;
  const auto& p0 = rows.front().first;
  return CiProfile(std::move(samples), horizon, YearMonth{p0.dated ? p0.year : 0, p0.month});
}

inline CiProfile parse_ci_csv(std::string_view text, CiParseOptions options = {}) {
  std::istringstream in{std::string(text)};
  return parse_ci_csv(in, options);
}

/// Writes a month-aligned profile in the parse_ci_csv format. Profiles
/// without a calendar origin are labeled with month indices starting at 1.
inline void write_ci_csv(std::ostream& out, const CiProfile& profile) {
  const YearMonth origin = profile.origin().value_or(YearMonth{0, 1});
  out << "period,ci_g_per_kwh\n";
  for (const auto& s : profile.samples()) {
    const double months = s.start / kMonthSeconds;
    if (months != std::round(months)) throw ValidationError("profile", "steps are not month-aligned");
    char ci[40];
    std::snprintf(ci, sizeof ci, "%.17g", s.ci);
    out << detail::format_month(origin, std::lround(months)) << ',' << ci << '\n';
  }
}

/// Re-expresses the profile on a grid of `slot_length` slots; each slot takes
/// the value in force at its start. The last slot is truncated at the horizon.
inline CiProfile resample(const CiProfile& profile, double slot_length) {
  if (!(slot_length > 0.0)) throw DomainError("slot length must be positive");
  if (slot_length > profile.horizon()) throw DomainError("slot grid exceeds profile horizon");
  std::vector<CiSample> samples;
  const auto n = static_cast<std::size_t>(std::ceil(profile.horizon() / slot_length));
  samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double start = static_cast<double>(k) * slot_length;
    if (!(start < profile.horizon())) break;
    samples.push_back({start, profile.value_at(start)});
  }
  return CiProfile(std::move(samples), profile.horizon(), profile.origin());
}

}  // namespace caoi
