#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "ledpose/errors.hpp"

namespace ledpose {

// Dense w x h grid of scalars. (x, y) indexing with x = column, y = row;
// storage is row-major over y.
template <typename T>
struct Grid {
  int w = 0;
  int h = 0;
  std::vector<T> v;

  Grid() = default;
  Grid(int w_, int h_, T fill = T{}) : w(w_), h(h_), v(static_cast<size_t>(w_) * h_, fill) {
    if (w_ <= 0 || h_ <= 0) throw domain_error("Grid: non-positive dimensions");
  }

  T& at(int x, int y) { return v[static_cast<size_t>(y) * w + x]; }
  const T& at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }

  size_t size() const { return v.size(); }
  bool same_shape(const Grid& o) const { return w == o.w && h == o.h; }

  template <typename U>
  Grid<U> cast() const {
    Grid<U> g;
    g.w = w;
    g.h = h;
    g.v.resize(v.size());
    std::transform(v.begin(), v.end(), g.v.begin(), [](T x) { return static_cast<U>(x); });
    return g;
  }
};

}  // namespace ledpose
