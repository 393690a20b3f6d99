#pragma once

#include <cmath>
#include <vector>

#include "ledpose/angles.hpp"
#include "ledpose/errors.hpp"
#include "ledpose/grid.hpp"
#include "ledpose/maps.hpp"
#include "ledpose/types.hpp"

namespace ledpose {

struct LossConfig {
  double eps_norm = 1e-8;  // projection / weight normalization
  double eps_bce = 1e-7;   // prediction clamp inside BCE
  bool grad_through_weights = true;     // let dL/dPsi reach the S, C maps
  bool grad_through_projection = true;  // let dL/dP reach the P map
};

template <typename T>
T mapsum(const Grid<T>& g) {
  T acc{};
  for (T x : g.v) acc += x;
  return acc;
}

// P / (mapsum(P) + eps); uniform fallback when the map is all-but-zero.
template <typename T>
Grid<T> normalize_projection(const Grid<T>& p, double eps = 1e-8) {
  Grid<T> out(p.w, p.h);
  T total = mapsum(p);
  if (static_cast<double>(total) < eps) {
    T uniform = static_cast<T>(1.0 / static_cast<double>(p.size()));
    for (auto& x : out.v) x = uniform;
    return out;
  }
  T denom = total + static_cast<T>(eps);
  for (size_t i = 0; i < p.v.size(); ++i) out.v[i] = p.v[i] / denom;
  return out;
}

// Cellwise binary cross-entropy against one broadcast label.
template <typename T>
Grid<T> bce_map(const Grid<T>& pred, bool label, double eps = 1e-7) {
  Grid<T> out(pred.w, pred.h);
  const T lo = static_cast<T>(eps), hi = static_cast<T>(1.0 - eps);
  for (size_t i = 0; i < pred.v.size(); ++i) {
    T p = std::min(hi, std::max(lo, pred.v[i]));
    out.v[i] = label ? -std::log(p) : -std::log(static_cast<T>(1) - p);
  }
  return out;
}

inline double led_phase(int l, int n) { return kTwoPi * (l - 1) / n; }

// Per-cell, per-LED visibility weights from the viewing-angle map.
// Raw cosines are clamped at zero before normalizing so weights stay in
// [0,1] and sum to one per cell; fully occluded cells fall back to uniform.
template <typename T>
std::vector<Grid<T>> led_weight(const Grid<T>& psi, int n, double eps = 1e-8) {
  if (n < 2) throw domain_error("led_weight: need n >= 2");
  std::vector<Grid<T>> w(static_cast<size_t>(n), Grid<T>(psi.w, psi.h));
  for (size_t i = 0; i < psi.v.size(); ++i) {
    T total{};
    for (int l = 1; l <= n; ++l) {
      T raw = std::max<T>(std::cos(psi.v[i] + static_cast<T>(led_phase(l, n))), T{});
      w[static_cast<size_t>(l - 1)].v[i] = raw;
      total += raw;
    }
    if (static_cast<double>(total) < eps) {
      for (int l = 0; l < n; ++l) w[static_cast<size_t>(l)].v[i] = static_cast<T>(1.0 / n);
    } else {
      T denom = total + static_cast<T>(eps);
      for (int l = 0; l < n; ++l) w[static_cast<size_t>(l)].v[i] /= denom;
    }
  }
  return w;
}

template <typename T>
Grid<T> viewing_angle_map(const Grid<T>& s, const Grid<T>& c) {
  Grid<T> psi(s.w, s.h);
  for (size_t i = 0; i < s.v.size(); ++i) psi.v[i] = std::atan2(s.v[i], c.v[i]);
  return psi;
}

template <typename T>
struct LossBreakdown {
  T total{};
  Grid<T> led_bce_mean;  // (1/n) sum_l BCE(L_l, y_l), cellwise
  Grid<T> masked;        // P_n o led_bce_mean, cellwise
  Grid<T> p_norm;
  Grid<T> psi;
  std::vector<Grid<T>> weights;
};

template <typename T>
LossBreakdown<T> total_loss_detailed(const OutputMapsT<T>& maps, const LedStates& labels,
                                     const LossConfig& cfg = {}) {
  maps.check_shapes();
  const int n = maps.n_leds();
  if (labels.n() != n) throw domain_error("total_loss: labels/maps LED count mismatch");

  LossBreakdown<T> out;
  out.p_norm = normalize_projection(maps.p, cfg.eps_norm);
  out.psi = viewing_angle_map(maps.s, maps.c);
  out.weights = led_weight(out.psi, n, cfg.eps_norm);
  out.led_bce_mean = Grid<T>(maps.w(), maps.h());
  out.masked = Grid<T>(maps.w(), maps.h());

  T total{};
  for (int l = 1; l <= n; ++l) {
    Grid<T> bce = bce_map(maps.led[static_cast<size_t>(l - 1)], labels.get(l), cfg.eps_bce);
    const Grid<T>& w = out.weights[static_cast<size_t>(l - 1)];
    for (size_t i = 0; i < bce.v.size(); ++i) {
      out.led_bce_mean.v[i] += bce.v[i] / static_cast<T>(n);
      total += bce.v[i] * out.p_norm.v[i] * w.v[i] / static_cast<T>(n);
    }
  }
  for (size_t i = 0; i < out.masked.v.size(); ++i) out.masked.v[i] = out.p_norm.v[i] * out.led_bce_mean.v[i];
  out.total = total;
  return out;
}

template <typename T>
T total_loss(const OutputMapsT<T>& maps, const LedStates& labels, const LossConfig& cfg = {}) {
  return total_loss_detailed(maps, labels, cfg).total;
}

template <typename T>
struct MapsGrad {
  T loss{};
  Grid<T> dp;
  Grid<T> ds;
  Grid<T> dc;
  std::vector<Grid<T>> dled;
};

// Analytic gradients of the complete loss w.r.t. every map cell.
//
// With A_c = (1/n) sum_l bce_lc W_lc and S_P = mapsum(P):
//   dL/dP_c   = (A_c - L) / (S_P + eps)
//   dL/dL_lc  = (1/n) Pn_c W_lc (p - y) / (p (1 - p))
//   dL/dPsi_c = (1/n) Pn_c sum_l bce_lc dW_lc/dPsi_c
// and Psi = atan2(S, C) gives dPsi/dS = C/(S^2+C^2), dPsi/dC = -S/(S^2+C^2).
template <typename T>
MapsGrad<T> loss_gradients(const OutputMapsT<T>& maps, const LedStates& labels, const LossConfig& cfg = {}) {
  maps.check_shapes();
  const int n = maps.n_leds();
  if (labels.n() != n) throw domain_error("loss_gradients: labels/maps LED count mismatch");
  const int w = maps.w(), h = maps.h();
  const size_t cells = maps.p.size();

  MapsGrad<T> g;
  g.dp = Grid<T>(w, h);
  g.ds = Grid<T>(w, h);
  g.dc = Grid<T>(w, h);
  g.dled.assign(static_cast<size_t>(n), Grid<T>(w, h));

  Grid<T> p_norm = normalize_projection(maps.p, cfg.eps_norm);
  Grid<T> psi = viewing_angle_map(maps.s, maps.c);
  const T psum = mapsum(maps.p);
  const bool p_degenerate = static_cast<double>(psum) < cfg.eps_norm;

  const T lo = static_cast<T>(cfg.eps_bce), hi = static_cast<T>(1.0 - cfg.eps_bce);
  std::vector<T> raw(static_cast<size_t>(n)), draw(static_cast<size_t>(n)), bce(static_cast<size_t>(n)),
      wgt(static_cast<size_t>(n));

  T loss{};
  Grid<T> a_cell(w, h);  // per-cell mean weighted BCE
  for (size_t i = 0; i < cells; ++i) {
    // weights and their Psi-derivative at this cell
    T total_raw{}, total_draw{};
    for (int l = 0; l < n; ++l) {
      T ang = psi.v[i] + static_cast<T>(led_phase(l + 1, n));
      T cosv = std::cos(ang);
      bool lit = cosv > T{};
      raw[static_cast<size_t>(l)] = lit ? cosv : T{};
      draw[static_cast<size_t>(l)] = lit ? -std::sin(ang) : T{};
      total_raw += raw[static_cast<size_t>(l)];
      total_draw += draw[static_cast<size_t>(l)];
    }
    const bool w_degenerate = static_cast<double>(total_raw) < cfg.eps_norm;
    const T denom = total_raw + static_cast<T>(cfg.eps_norm);

    T a{};
    T dpsi{};
    for (int l = 0; l < n; ++l) {
      const bool y = labels.get(l + 1);
      T pred = maps.led[static_cast<size_t>(l)].v[i];
      T pc = std::min(hi, std::max(lo, pred));
      bce[static_cast<size_t>(l)] = y ? -std::log(pc) : -std::log(static_cast<T>(1) - pc);
      wgt[static_cast<size_t>(l)] =
          w_degenerate ? static_cast<T>(1.0 / n) : raw[static_cast<size_t>(l)] / denom;
      a += bce[static_cast<size_t>(l)] * wgt[static_cast<size_t>(l)] / static_cast<T>(n);

      // dL/dLed: clamp kills the gradient outside (lo, hi)
      T dbce{};
      if (pred > lo && pred < hi) dbce = (pc - static_cast<T>(y ? 1 : 0)) / (pc * (static_cast<T>(1) - pc));
      g.dled[static_cast<size_t>(l)].v[i] =
          p_norm.v[i] * wgt[static_cast<size_t>(l)] * dbce / static_cast<T>(n);

      if (!w_degenerate) {
        T dw = (draw[static_cast<size_t>(l)] * denom - raw[static_cast<size_t>(l)] * total_draw) /
               (denom * denom);
        dpsi += bce[static_cast<size_t>(l)] * dw / static_cast<T>(n);
      }
    }
    a_cell.v[i] = a;
    loss += p_norm.v[i] * a;

    if (cfg.grad_through_weights) {
      T s = maps.s.v[i], c = maps.c.v[i];
      T norm2 = s * s + c * c;
      if (static_cast<double>(norm2) > 1e-12) {
        T dpsi_total = p_norm.v[i] * dpsi;
        g.ds.v[i] = dpsi_total * c / norm2;
        g.dc.v[i] = -dpsi_total * s / norm2;
      }
    }
  }

  if (cfg.grad_through_projection && !p_degenerate) {
    T denom = psum + static_cast<T>(cfg.eps_norm);
    for (size_t i = 0; i < cells; ++i) g.dp.v[i] = (a_cell.v[i] - loss) / denom;
  }

  g.loss = loss;
  return g;
}

}  // namespace ledpose
