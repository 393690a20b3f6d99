#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ledpose/errors.hpp"

namespace ledpose {

using Rgb = std::array<float, 3>;

// RGB image with values in [0, 1]. Interleaved row-major storage.
struct Image {
  int w = 0;
  int h = 0;
  std::vector<float> px;  // size w*h*3

  Image() = default;
  Image(int w_, int h_, Rgb fill = {0.f, 0.f, 0.f}) : w(w_), h(h_) {
    if (w_ < 1 || h_ < 1) throw domain_error("Image: non-positive dimensions");
    px.resize(static_cast<size_t>(w_) * h_ * 3);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) set(x, y, fill);
  }

  size_t idx(int x, int y) const { return (static_cast<size_t>(y) * w + x) * 3; }

  Rgb get(int x, int y) const {
    size_t i = idx(x, y);
    return {px[i], px[i + 1], px[i + 2]};
  }
  void set(int x, int y, const Rgb& c) {
    size_t i = idx(x, y);
    px[i] = c[0];
    px[i + 1] = c[1];
    px[i + 2] = c[2];
  }
  bool inside(int x, int y) const { return x >= 0 && x < w && y >= 0 && y < h; }

  void clamp01() {
    for (float& v : px) v = std::clamp(v, 0.0f, 1.0f);
  }
};

inline uint8_t quantize8(float v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

// Binary PPM (P6, maxval 255).
inline void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dataset_error(dataset_error::kind::missing_file, "cannot open for write: " + path.string());
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<uint8_t> buf(img.px.size());
  for (size_t i = 0; i < img.px.size(); ++i) buf[i] = quantize8(img.px[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw dataset_error(dataset_error::kind::missing_file, "short write: " + path.string());
}

inline Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dataset_error(dataset_error::kind::missing_file, "cannot open: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw dataset_error(dataset_error::kind::malformed_label, "not a P6 ppm: " + path.string());
  int w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  in.get();  // single whitespace after header
  if (w < 1 || h < 1 || maxval != 255)
    throw dataset_error(dataset_error::kind::malformed_label, "bad ppm header: " + path.string());
  Image img;
  img.w = w;
  img.h = h;
  img.px.resize(static_cast<size_t>(w) * h * 3);
  std::vector<uint8_t> buf(img.px.size());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(in.gcount()) != buf.size())
    throw dataset_error(dataset_error::kind::malformed_label, "truncated ppm: " + path.string());
  for (size_t i = 0; i < buf.size(); ++i) img.px[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

}  // namespace ledpose
