// Decibel conversions, unit tags and physical constants shared by every module.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace cryorf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace constants {
inline constexpr double boltzmann_w_per_hz_k = 1.380649e-23;
inline constexpr double noise_reference_k = 290.0;   // IEEE reference temperature
inline constexpr double ln10 = 2.302585092994046;
} // namespace constants

enum class Unit { dB, dBm, dBm_per_Hz, kelvin, linear };

inline std::string to_string(Unit u) {
    switch (u) {
        case Unit::dB: return "dB";
        case Unit::dBm: return "dBm";
        case Unit::dBm_per_Hz: return "dBm_per_Hz";
        case Unit::kelvin: return "kelvin";
        case Unit::linear: return "linear";
    }
    return "unknown";
}

inline Unit unit_from_string(const std::string& s) {
    if (s == "dB") return Unit::dB;
    if (s == "dBm") return Unit::dBm;
    if (s == "dBm_per_Hz") return Unit::dBm_per_Hz;
    if (s == "kelvin") return Unit::kelvin;
    if (s == "linear") return Unit::linear;
    throw Error("unknown unit tag '" + s + "'");
}

// Power quantities use 10*log10, amplitude quantities (S-parameter
// magnitudes) use 20*log10.
enum class DbKind { power, amplitude };

inline double db_from_linear(double linear, DbKind kind = DbKind::power) {
    if (!(linear > 0.0))
        throw Error("dB conversion requires a positive linear value, got " +
                    std::to_string(linear));
    const double scale = (kind == DbKind::power) ? 10.0 : 20.0;
    return scale * std::log10(linear);
}

inline double linear_from_db(double db, DbKind kind = DbKind::power) {
    const double scale = (kind == DbKind::power) ? 10.0 : 20.0;
    return std::pow(10.0, db / scale);
}

inline double dbm_from_watts(double watts) {
    if (!(watts > 0.0))
        throw Error("dBm conversion requires positive power");
    return 10.0 * std::log10(watts * 1e3);
}

inline double watts_from_dbm(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

} // namespace cryorf
