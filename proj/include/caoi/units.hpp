#pragma once

#include <cmath>

namespace caoi::units {

// All internal quantities are SI. Carbon intensity stays in gCO2eq/kWh and
// meets joules only through these two functions.
inline constexpr double kJoulesPerKwh = 3.6e6;

constexpr double joules_to_kwh(double joules) { return joules / kJoulesPerKwh; }
constexpr double kwh_to_joules(double kwh) { return kwh * kJoulesPerKwh; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

}  // namespace caoi::units
