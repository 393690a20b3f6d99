#pragma once

#include <cmath>
#include <string>

#include "ledpose/angles.hpp"
#include "ledpose/errors.hpp"
#include "ledpose/loss.hpp"
#include "ledpose/maps.hpp"

namespace ledpose {

struct PoseEstimate {
  double u = 0.0;
  double v = 0.0;
  double psi = 0.0;
  double peak = 0.0;  // max of the projection map, a detection confidence
};

enum class HeadingMode {
  paper_literal,  // mapsum(atan2(S,C) o P_n), then wrapped
  vector,         // atan2(mapsum(S o P_n), mapsum(C o P_n))
};

inline HeadingMode heading_mode_from_name(const std::string& s) {
  if (s == "paper-literal") return HeadingMode::paper_literal;
  if (s == "vector") return HeadingMode::vector;
  throw config_error("unknown decode mode: " + s);
}

inline const char* heading_mode_name(HeadingMode m) {
  return m == HeadingMode::paper_literal ? "paper-literal" : "vector";
}

// Argmax cell -> pixel coordinates at the cell center, clipped to the
// unpadded frame. Ties break to the row-major first occurrence.
template <typename T>
PoseEstimate decode_position(const Grid<T>& p, const MapGeometry& geom) {
  if (p.size() == 0) throw domain_error("decode_position: empty grid");
  int best_x = 0, best_y = 0;
  T best = p.at(0, 0);
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x)
      if (p.at(x, y) > best) {
        best = p.at(x, y);
        best_x = x;
        best_y = y;
      }
  PoseEstimate est;
  est.peak = static_cast<double>(best);
  double d = geom.d > 0 ? geom.d : 1;
  est.u = (best_x + 0.5) * d;
  est.v = (best_y + 0.5) * d;
  if (geom.image_w > 0) est.u = std::min(est.u, geom.image_w - 1.0);
  if (geom.image_h > 0) est.v = std::min(est.v, geom.image_h - 1.0);
  return est;
}

template <typename T>
double decode_heading(const Grid<T>& s, const Grid<T>& c, const Grid<T>& p_norm,
                      HeadingMode mode = HeadingMode::paper_literal) {
  if (!s.same_shape(c) || !s.same_shape(p_norm)) throw domain_error("decode_heading: shape mismatch");
  if (mode == HeadingMode::paper_literal) {
    double acc = 0.0;
    for (size_t i = 0; i < s.v.size(); ++i)
      acc += std::atan2(static_cast<double>(s.v[i]), static_cast<double>(c.v[i])) *
             static_cast<double>(p_norm.v[i]);
    return normalize_angle(acc);
  }
  double ssum = 0.0, csum = 0.0;
  for (size_t i = 0; i < s.v.size(); ++i) {
    ssum += static_cast<double>(s.v[i]) * static_cast<double>(p_norm.v[i]);
    csum += static_cast<double>(c.v[i]) * static_cast<double>(p_norm.v[i]);
  }
  if (std::abs(ssum) < 1e-8 && std::abs(csum) < 1e-8)
    throw eval_error("decode_heading: undefined heading (vector mode, both sums ~ 0)");
  return std::atan2(ssum, csum);
}

template <typename T>
PoseEstimate decode(const OutputMapsT<T>& maps, HeadingMode mode = HeadingMode::paper_literal,
                    double eps_norm = 1e-8) {
  maps.check_shapes();
  PoseEstimate est = decode_position(maps.p, maps.geom);
  Grid<T> p_norm = normalize_projection(maps.p, eps_norm);
  est.psi = decode_heading(maps.s, maps.c, p_norm, mode);
  return est;
}

}  // namespace ledpose
