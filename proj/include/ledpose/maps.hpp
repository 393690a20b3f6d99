#pragma once

#include <vector>

#include "ledpose/errors.hpp"
#include "ledpose/grid.hpp"

namespace ledpose {

// How map cells relate to pixels of the original (unpadded) frame.
struct MapGeometry {
  int d = 8;        // downsampling factor
  int image_w = 0;  // unpadded frame size
  int image_h = 0;
};

// The model's four output families on a shared w x h grid:
// p in [0,1], s and c in [-1,1], led[l] in [0,1].
template <typename T>
struct OutputMapsT {
  Grid<T> p;
  Grid<T> s;
  Grid<T> c;
  std::vector<Grid<T>> led;
  MapGeometry geom;

  int w() const { return p.w; }
  int h() const { return p.h; }
  int n_leds() const { return static_cast<int>(led.size()); }

  static OutputMapsT zeros(int w, int h, int n, MapGeometry geom = {}) {
    OutputMapsT m;
    m.p = Grid<T>(w, h);
    m.s = Grid<T>(w, h);
    m.c = Grid<T>(w, h);
    m.led.assign(static_cast<size_t>(n), Grid<T>(w, h));
    m.geom = geom;
    return m;
  }

  void check_shapes() const {
    if (!p.same_shape(s) || !p.same_shape(c)) throw domain_error("OutputMaps: shape mismatch");
    for (const auto& g : led)
      if (!p.same_shape(g)) throw domain_error("OutputMaps: LED map shape mismatch");
    if (led.empty()) throw domain_error("OutputMaps: no LED maps");
  }
};

using OutputMaps = OutputMapsT<float>;

}  // namespace ledpose
