// units.hpp — the single internal/external unit boundary.
// Internally everything is SI: seconds, and CBF in ml/g/s.
// Files and CLI output use ml/100g/min for CBF and seconds for ATT.
#pragma once

namespace asl::units {

// (ml/100g/min) = 6000 * (ml/g/s)
inline constexpr double kCbfExtPerInt = 6000.0;

inline constexpr double cbf_to_internal(double ext) { return ext / kCbfExtPerInt; }
inline constexpr double cbf_to_external(double internal) { return internal * kCbfExtPerInt; }

inline constexpr double ms_to_s(double ms) { return ms / 1000.0; }
inline constexpr double s_to_ms(double s) { return s * 1000.0; }

} // namespace asl::units
