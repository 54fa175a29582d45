#pragma once

#include <cmath>

namespace dudesim {

// All powers in this codebase travel as dBm and all gains/losses as dB.
// Conversions to the linear domain (mW) happen only at the point of
// summation or SINR formation, never in stored state.

inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }

inline double lin_to_db(double lin) { return 10.0 * std::log10(lin); }

inline double dbm_to_mw(double dbm) { return db_to_lin(dbm); }

inline double mw_to_dbm(double mw) { return lin_to_db(mw); }

inline constexpr double kThermalNoiseDbmPerHz = -174.0;

// Receiver noise floor over one resource block, noise figure included.
inline double noise_per_rb_dbm(double rb_bandwidth_hz, double noise_figure_db) {
  return kThermalNoiseDbmPerHz + 10.0 * std::log10(rb_bandwidth_hz) + noise_figure_db;
}

}  // namespace dudesim
