#pragma once

#include <cmath>
#include <numbers>

#include "ledpose/errors.hpp"

namespace ledpose {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wraps an angle into (-pi, pi].
template <typename T>
T normalize_angle(T a) {
  if (!std::isfinite(a)) throw domain_error("normalize_angle: non-finite input");
  T r = std::remainder(a, static_cast<T>(kTwoPi));
  if (r <= static_cast<T>(-kPi)) r += static_cast<T>(kTwoPi);
  return r;
}

// Absolute circular distance between two angles, in [0, pi]. Symmetric.
template <typename T>
T angular_error(T a, T b) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw domain_error("angular_error: non-finite input");
  return std::abs(normalize_angle(a - b));
}

// Circular mean: atan2 of mean sine / mean cosine over the inputs.
template <typename Iter>
double circular_mean(Iter first, Iter last) {
  double ssum = 0.0, csum = 0.0;
  long n = 0;
  for (Iter it = first; it != last; ++it, ++n) {
    ssum += std::sin(static_cast<double>(*it));
    csum += std::cos(static_cast<double>(*it));
  }
  if (n == 0) throw domain_error("circular_mean: empty range");
  return std::atan2(ssum, csum);
}

template <typename T>
T rad_to_deg(T a) {
  return a * static_cast<T>(180.0 / kPi);
}

template <typename T>
T deg_to_rad(T a) {
  return a * static_cast<T>(kPi / 180.0);
}

}  // namespace ledpose
