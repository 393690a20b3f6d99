#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>

#include "ledpose/dataset.hpp"
#include "ledpose/decoder.hpp"
#include "ledpose/image.hpp"
#include "ledpose/loss.hpp"
#include "ledpose/model.hpp"

namespace ledpose {

namespace inspect_detail {

inline Rgb heat_color(float t) {  // black -> red -> yellow -> white
  t = std::clamp(t, 0.0f, 1.0f);
  return {std::min(1.0f, 3 * t), std::clamp(3 * t - 1, 0.0f, 1.0f), std::clamp(3 * t - 2, 0.0f, 1.0f)};
}

inline Rgb angle_color(double a, float value) {  // hue wheel scaled by value
  double h = (a + kPi) / kTwoPi * 6.0;
  int i = static_cast<int>(h) % 6;
  float f = static_cast<float>(h - std::floor(h));
  float p = 0, q = 1 - f, t = f;
  float rgb[6][3] = {{1, t, p}, {q, 1, p}, {p, 1, t}, {p, q, 1}, {t, p, 1}, {1, p, q}};
  return {rgb[i][0] * value, rgb[i][1] * value, rgb[i][2] * value};
}

inline Image upscale_grid(const Grid<float>& g, int factor, bool is_angle, const Grid<float>* gate) {
  Image img(g.w * factor, g.h * factor);
  float max_v = 1e-9f;
  if (!is_angle)
    for (float v : g.v) max_v = std::max(max_v, v);
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      Rgb c;
      if (is_angle) {
        float gatev = gate ? std::min(1.0f, gate->at(x, y) * static_cast<float>(gate->size()) * 0.5f) : 1.0f;
        c = angle_color(g.at(x, y), 0.25f + 0.75f * gatev);
      } else {
        c = heat_color(g.at(x, y) / max_v);
      }
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) img.set(x * factor + dx, y * factor + dy, c);
    }
  return img;
}

inline void draw_cross(Image& img, double u, double v, const Rgb& color, int arm = 6) {
  int cx = static_cast<int>(u), cy = static_cast<int>(v);
  for (int d = -arm; d <= arm; ++d) {
    if (img.inside(cx + d, cy)) img.set(cx + d, cy, color);
    if (img.inside(cx, cy + d)) img.set(cx, cy + d, color);
  }
}

inline void draw_box(Image& img, double u, double v, double half, const Rgb& color) {
  int x0 = static_cast<int>(u - half), x1 = static_cast<int>(u + half);
  int y0 = static_cast<int>(v - half), y1 = static_cast<int>(v + half);
  for (int x = x0; x <= x1; ++x) {
    if (img.inside(x, y0)) img.set(x, y0, color);
    if (img.inside(x, y1)) img.set(x, y1, color);
  }
  for (int y = y0; y <= y1; ++y) {
    if (img.inside(x0, y)) img.set(x0, y, color);
    if (img.inside(x1, y)) img.set(x1, y, color);
  }
}

}  // namespace inspect_detail

// Writes side-by-side diagnostic panels for one sample: the input frame, the
// projection-map heatmap, the viewing-angle map, per-LED maps, and a pose
// overlay (ground truth box; decoded crosshair when a model is given).
inline std::vector<std::filesystem::path> inspect_sample(const Dataset& ds, const std::string& id,
                                                         const std::optional<FcnModel>& model,
                                                         const std::filesystem::path& out_prefix) {
  const SampleRecord* rec = nullptr;
  for (const auto& r : ds.records())
    if (r.id == id) rec = &r;
  if (!rec) throw dataset_error(dataset_error::kind::missing_file, "no sample with id " + id);

  Image img = ds.load_image(*rec);
  std::vector<std::filesystem::path> written;
  std::filesystem::create_directories(out_prefix.parent_path().empty() ? "." : out_prefix.parent_path());

  auto emit = [&](const std::string& name, const Image& panel) {
    std::filesystem::path p = out_prefix.string() + "_" + name + ".ppm";
    write_ppm(panel, p);
    written.push_back(p);
  };

  emit("input", img);

  Image overlay = img;
  if (rec->pose.visible)
    inspect_detail::draw_box(overlay, rec->pose.u, rec->pose.v, rec->pose.scale, {0.1f, 1.0f, 0.1f});

  if (model) {
    OutputMaps maps = model->forward(img);
    int d = maps.geom.d;
    Grid<float> p_norm = normalize_projection(maps.p);
    Grid<float> psi = viewing_angle_map(maps.s, maps.c);
    emit("p_map", inspect_detail::upscale_grid(maps.p, d, false, nullptr));
    emit("psi_map", inspect_detail::upscale_grid(psi, d, true, &p_norm));
    for (int l = 0; l < maps.n_leds(); ++l)
      emit("led" + std::to_string(l + 1),
           inspect_detail::upscale_grid(maps.led[static_cast<size_t>(l)], d, false, nullptr));
    PoseEstimate est = decode(maps);
    inspect_detail::draw_cross(overlay, est.u, est.v, {1.0f, 0.2f, 1.0f});
  }
  emit("overlay", overlay);
  return written;
}

}  // namespace ledpose
