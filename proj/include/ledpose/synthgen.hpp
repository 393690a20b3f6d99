#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include <json.hpp>

#include "ledpose/angles.hpp"
#include "ledpose/dataset.hpp"
#include "ledpose/errors.hpp"
#include "ledpose/image.hpp"
#include "ledpose/parallel.hpp"
#include "ledpose/rng.hpp"
#include "ledpose/types.hpp"

namespace ledpose {

// Appearance of the toy robot and its surroundings. LEDs sit on a ring at
// equal angular spacing by default; offsets are radians in the robot frame.
struct RobotRenderSpec {
  Rgb body_color{0.42f, 0.47f, 0.55f};
  Rgb marker_color{0.95f, 0.86f, 0.20f};
  Rgb led_on_color{1.00f, 0.12f, 0.08f};
  Rgb led_off_color{0.22f, 0.04f, 0.04f};
  double body_half_size = 18.0;  // fallback radius when a pose carries no scale
  std::vector<double> led_offsets{0.0, kPi / 2, kPi, 3 * kPi / 2};
  int distractor_count = 8;
  double noise_amplitude = 0.05;
  double led_ring = 0.62;  // LED ring radius as a fraction of body radius

  int n_leds() const { return static_cast<int>(led_offsets.size()); }

  void validate() const {
    if (body_half_size < 4.0) throw domain_error("render spec: body half-size below 4 px");
    if (led_offsets.size() < 2) throw domain_error("render spec: need at least 2 LEDs");
    for (size_t a = 0; a < led_offsets.size(); ++a)
      for (size_t b = a + 1; b < led_offsets.size(); ++b)
        if (angular_error(led_offsets[a], led_offsets[b]) < 1e-6)
          throw domain_error("render spec: duplicate LED offsets");
    if (distractor_count < 0) throw domain_error("render spec: negative distractor count");
    if (noise_amplitude < 0 || noise_amplitude > 1) throw domain_error("render spec: bad noise amplitude");
  }

  nlohmann::json to_json() const {
    auto rgb = [](const Rgb& c) { return nlohmann::json::array({c[0], c[1], c[2]}); };
    return {{"body_color", rgb(body_color)},       {"marker_color", rgb(marker_color)},
            {"led_on_color", rgb(led_on_color)},   {"led_off_color", rgb(led_off_color)},
            {"body_half_size", body_half_size},    {"led_offsets", led_offsets},
            {"distractor_count", distractor_count}, {"noise_amplitude", noise_amplitude},
            {"led_ring", led_ring}};
  }
  static RobotRenderSpec from_json(const nlohmann::json& j) {
    RobotRenderSpec s;
    auto rgb = [&j](const char* key, Rgb fallback) {
      if (!j.contains(key)) return fallback;
      auto a = j.at(key);
      return Rgb{a.at(0).get<float>(), a.at(1).get<float>(), a.at(2).get<float>()};
    };
    s.body_color = rgb("body_color", s.body_color);
    s.marker_color = rgb("marker_color", s.marker_color);
    s.led_on_color = rgb("led_on_color", s.led_on_color);
    s.led_off_color = rgb("led_off_color", s.led_off_color);
    if (j.contains("body_half_size")) s.body_half_size = j.at("body_half_size").get<double>();
    if (j.contains("led_offsets")) s.led_offsets = j.at("led_offsets").get<std::vector<double>>();
    if (j.contains("distractor_count")) s.distractor_count = j.at("distractor_count").get<int>();
    if (j.contains("noise_amplitude")) s.noise_amplitude = j.at("noise_amplitude").get<double>();
    if (j.contains("led_ring")) s.led_ring = j.at("led_ring").get<double>();
    s.validate();
    return s;
  }
};

// Data-collection protocol knobs: frame rate, LED toggle clock, roam area
// (via the visibility target), and the apparent-size range.
struct EpisodeConfig {
  double fps = 3.0;
  double led_toggle_period_s = 5.0;
  double length_s = 100.0;
  double visibility_target = 0.22;
  int width = 320;
  int height = 180;
  double scale_min = 8.0;
  double scale_max = 40.0;
  uint64_t seed = 1;

  // random-walk rates
  double speed_std = 70.0;      // px/s, stationary std of the velocity walk
  double speed_damping = 0.6;   // 1/s
  double psi_rate = 1.2;        // rad/sqrt(s)
  double log_scale_rate = 0.35; // 1/sqrt(s)

  long frame_count() const { return std::lround(fps * length_s); }
  int toggle_frames() const { return std::max(1, static_cast<int>(std::lround(fps * led_toggle_period_s))); }

  void validate() const {
    if (fps <= 0) throw config_error("episode: fps must be positive");
    if (led_toggle_period_s <= 0) throw config_error("episode: toggle period must be positive");
    if (length_s <= 0) throw config_error("episode: length must be positive");
    if (visibility_target <= 0 || visibility_target >= 1)
      throw config_error("episode: visibility target must be in (0,1)");
    if (width < 32 || height < 32) throw config_error("episode: frame below 32x32");
    if (scale_min < 4 || scale_max < scale_min) throw config_error("episode: bad scale range");
  }

  nlohmann::json to_json() const {
    return {{"fps", fps},
            {"led_toggle_period_s", led_toggle_period_s},
            {"length_s", length_s},
            {"visibility_target", visibility_target},
            {"width", width},
            {"height", height},
            {"scale_min", scale_min},
            {"scale_max", scale_max},
            {"seed", seed},
            {"speed_std", speed_std},
            {"speed_damping", speed_damping},
            {"psi_rate", psi_rate},
            {"log_scale_rate", log_scale_rate}};
  }
  static EpisodeConfig from_json(const nlohmann::json& j) {
    EpisodeConfig c;
    auto opt = [&j](const char* k, auto& field) {
      if (j.contains(k)) field = j.at(k).template get<std::decay_t<decltype(field)>>();
    };
    opt("fps", c.fps);
    opt("led_toggle_period_s", c.led_toggle_period_s);
    opt("length_s", c.length_s);
    opt("visibility_target", c.visibility_target);
    opt("width", c.width);
    opt("height", c.height);
    opt("scale_min", c.scale_min);
    opt("scale_max", c.scale_max);
    opt("seed", c.seed);
    opt("speed_std", c.speed_std);
    opt("speed_damping", c.speed_damping);
    opt("psi_rate", c.psi_rate);
    opt("log_scale_rate", c.log_scale_rate);
    c.validate();
    return c;
  }
};

// An LED faces the camera iff its shifted cosine is positive. l is 1-based.
inline bool led_visible(double psi, int l, int n = 4) {
  if (!std::isfinite(psi)) throw domain_error("led_visible: non-finite psi");
  if (l < 1 || l > n) throw domain_error("led_visible: LED index out of range");
  return std::cos(psi + kTwoPi * (l - 1) / n) > 0.0;
}

namespace render_detail {

inline void fill_disc(Image& img, double cx, double cy, double r, const Rgb& color) {
  int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(cx + r)));
  int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(cy + r)));
  double r2 = r * r;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r2) img.set(x, y, color);
    }
}

inline void fill_rect(Image& img, int rx, int ry, int rw, int rh, const Rgb& color) {
  int x0 = std::max(0, rx), y0 = std::max(0, ry);
  int x1 = std::min(img.w - 1, rx + rw - 1), y1 = std::min(img.h - 1, ry + rh - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) img.set(x, y, color);
}

inline double color_dist(const Rgb& a, const Rgb& b) {
  return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

// muted random color kept away from the LED and body palette so the label
// scan stays unambiguous
inline Rgb random_safe_color(std::mt19937_64& rng, const RobotRenderSpec& spec) {
  std::uniform_real_distribution<float> u(0.12f, 0.88f);
  for (int tries = 0; tries < 64; ++tries) {
    Rgb c{u(rng), u(rng), u(rng)};
    if (color_dist(c, spec.led_on_color) >= 0.30 && color_dist(c, spec.led_off_color) >= 0.30 &&
        color_dist(c, spec.body_color) >= 0.20 && color_dist(c, spec.marker_color) >= 0.20)
      return c;
  }
  return Rgb{0.5f, 0.5f, 0.5f};
}

}  // namespace render_detail

// Image-plane placement of LED l: offsets rotate with psi, +y points toward
// the camera. Returned in pixels relative to the body center.
inline std::array<double, 2> led_image_offset(double psi, double offset, double ring_radius) {
  return {ring_radius * std::sin(psi + offset), ring_radius * std::cos(psi + offset)};
}

inline double led_blob_radius(double scale, double cos_vis) {
  return std::max(1.8, std::min(0.26 * scale, scale * (0.16 + 0.10 * std::max(0.0, cos_vis))));
}

// Renders one frame. Deterministic for a given (pose, leds, spec, rng state):
// background gradient, clutter rectangles, LED-colored distractor blobs kept
// clear of the robot, then the robot body, front marker, and camera-facing
// LED blobs. Off-frame robots leave only background and distractors.
inline Image render_sample(const GroundTruthPose& pose, const LedStates& leds,
                           const RobotRenderSpec& spec, int width, int height, std::mt19937_64& rng) {
  spec.validate();
  if (leds.n() != spec.n_leds()) throw domain_error("render_sample: LED count mismatch");

  using namespace render_detail;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Rgb bg0 = random_safe_color(rng, spec), bg1 = random_safe_color(rng, spec);
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      float t = 0.5f * (static_cast<float>(x) / width + static_cast<float>(y) / height);
      img.set(x, y, {bg0[0] + (bg1[0] - bg0[0]) * t, bg0[1] + (bg1[1] - bg0[1]) * t,
                     bg0[2] + (bg1[2] - bg0[2]) * t});
    }

  int n_rects = 3;
  for (int i = 0; i < n_rects; ++i) {
    Rgb c = random_safe_color(rng, spec);
    int rw = static_cast<int>((0.08 + 0.30 * unit(rng)) * width);
    int rh = static_cast<int>((0.08 + 0.30 * unit(rng)) * height);
    int rx = static_cast<int>(unit(rng) * width) - rw / 2;
    int ry = static_cast<int>(unit(rng) * height) - rh / 2;
    fill_rect(img, rx, ry, rw, rh, c);
  }

  const double s = pose.scale > 0 ? pose.scale : spec.body_half_size;
  if (s < 4.0) throw domain_error("render_sample: degenerate body size");

  // LED-colored blobs off the robot body; they carry no state information
  for (int i = 0; i < spec.distractor_count; ++i) {
    double r = 2.0 + 4.0 * unit(rng);
    double cx = 0, cy = 0;
    bool placed = false;
    for (int tries = 0; tries < 50 && !placed; ++tries) {
      cx = unit(rng) * width;
      cy = unit(rng) * height;
      if (!pose.visible) {
        placed = true;
      } else {
        double dx = cx - pose.u, dy = cy - pose.v;
        placed = std::sqrt(dx * dx + dy * dy) >= 1.9 * s + r + 2.0;
      }
    }
    if (!placed) continue;
    bool on = unit(rng) < 0.5;
    fill_disc(img, cx, cy, r, on ? spec.led_on_color : spec.led_off_color);
  }

  if (pose.visible) {
    const double u = pose.u, v = pose.v, psi = pose.psi;
    fill_disc(img, u, v, s, spec.body_color);

    // front-face wedge: always drawn (top-down view), continuous heading cue
    {
      int x0 = std::max(0, static_cast<int>(std::floor(u - s - 1)));
      int x1 = std::min(width - 1, static_cast<int>(std::ceil(u + s + 1)));
      int y0 = std::max(0, static_cast<int>(std::floor(v - s - 1)));
      int y1 = std::min(height - 1, static_cast<int>(std::ceil(v + s + 1)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          double dx = x + 0.5 - u, dy = y + 0.5 - v;
          double rad = std::sqrt(dx * dx + dy * dy);
          if (rad < 0.55 * s || rad > s) continue;
          double ang = std::atan2(dx, dy);  // 0 points toward the camera (+y)
          if (angular_error(ang, psi) < 0.45) img.set(x, y, spec.marker_color);
        }
    }

    for (int l = 1; l <= spec.n_leds(); ++l) {
      double cosv = std::cos(psi + spec.led_offsets[static_cast<size_t>(l - 1)]);
      if (cosv <= 0.0) continue;  // occluded by the body
      auto off = led_image_offset(psi, spec.led_offsets[static_cast<size_t>(l - 1)], spec.led_ring * s);
      double r = led_blob_radius(s, cosv);
      fill_disc(img, u + off[0], v + off[1], r, leds.get(l) ? spec.led_on_color : spec.led_off_color);
    }
  }

  if (spec.noise_amplitude > 0) {
    std::uniform_real_distribution<float> noise(-static_cast<float>(spec.noise_amplitude),
                                                static_cast<float>(spec.noise_amplitude));
    for (float& p : img.px) p = std::clamp(p + noise(rng), 0.0f, 1.0f);
  }
  return img;
}

struct FrameLabel {
  GroundTruthPose pose;
  LedStates leds;
};

// Smooth roam: damped-velocity walk for position over an inflated region
// (sized so the in-frame fraction matches the visibility target), wrapped
// diffusion for psi, reflected log-space diffusion for scale. LED states are
// i.i.d. fair coins redrawn every toggle period.
inline std::vector<FrameLabel> simulate_labels(const EpisodeConfig& cfg, const RobotRenderSpec& spec,
                                               long frames) {
  cfg.validate();
  spec.validate();
  std::mt19937_64 rng = make_rng(cfg.seed, 0x57414C4BULL);  // walk stream
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double lambda = 1.0 / std::sqrt(cfg.visibility_target);
  const double mx = 0.5 * (lambda - 1.0) * cfg.width;
  const double my = 0.5 * (lambda - 1.0) * cfg.height;
  const double x_lo = -mx, x_hi = cfg.width + mx;
  const double y_lo = -my, y_hi = cfg.height + my;

  const double dt = 1.0 / cfg.fps;
  const double sqdt = std::sqrt(dt);
  const double eta = cfg.speed_std * std::sqrt(2.0 * cfg.speed_damping);

  double x = x_lo + unit(rng) * (x_hi - x_lo);
  double y = y_lo + unit(rng) * (y_hi - y_lo);
  double vx = cfg.speed_std * gauss(rng), vy = cfg.speed_std * gauss(rng);
  double psi = -kPi + unit(rng) * kTwoPi;
  const double z_lo = std::log(cfg.scale_min), z_hi = std::log(cfg.scale_max);
  double z = z_lo + unit(rng) * (z_hi - z_lo);

  auto reflect = [](double& p, double& vel, double lo, double hi) {
    for (int guard = 0; guard < 8; ++guard) {
      if (p < lo) {
        p = 2 * lo - p;
        vel = -vel;
      } else if (p > hi) {
        p = 2 * hi - p;
        vel = -vel;
      } else {
        return;
      }
    }
    p = std::clamp(p, lo, hi);
  };
  auto reflect_scalar = [](double& p, double lo, double hi) {
    for (int guard = 0; guard < 8; ++guard) {
      if (p < lo)
        p = 2 * lo - p;
      else if (p > hi)
        p = 2 * hi - p;
      else
        return;
    }
    p = std::clamp(p, lo, hi);
  };

  const int toggle = cfg.toggle_frames();
  LedStates leds(spec.n_leds());

  std::vector<FrameLabel> out;
  out.reserve(static_cast<size_t>(frames));
  for (long t = 0; t < frames; ++t) {
    if (t % toggle == 0)
      for (int l = 1; l <= spec.n_leds(); ++l) leds.set(l, unit(rng) < 0.5);

    FrameLabel f;
    f.leds = leds;
    f.pose.u = x;
    f.pose.v = y;
    f.pose.psi = normalize_angle(psi);
    f.pose.scale = std::exp(z);
    f.pose.visible = (x >= 0 && x < cfg.width && y >= 0 && y < cfg.height);
    out.push_back(f);

    vx += -cfg.speed_damping * vx * dt + eta * sqdt * gauss(rng);
    vy += -cfg.speed_damping * vy * dt + eta * sqdt * gauss(rng);
    x += vx * dt;
    y += vy * dt;
    reflect(x, vx, x_lo, x_hi);
    reflect(y, vy, y_lo, y_hi);
    psi += cfg.psi_rate * sqdt * gauss(rng);
    z += cfg.log_scale_rate * sqdt * gauss(rng);
    reflect_scalar(z, z_lo, z_hi);
  }
  return out;
}

inline constexpr uint64_t kRenderStreamBase = 0x1000000ULL;

inline Image render_frame(const EpisodeConfig& cfg, const RobotRenderSpec& spec, const FrameLabel& f,
                          long index) {
  std::mt19937_64 rng = make_rng(cfg.seed, kRenderStreamBase + static_cast<uint64_t>(index));
  return render_sample(f.pose, f.leds, spec, cfg.width, cfg.height, rng);
}

// In-memory episode; suits tests and small runs. Rendering is parallel over
// samples with per-sample RNG streams, so results are worker-count invariant.
inline std::vector<Sample> simulate_episode(const EpisodeConfig& cfg, const RobotRenderSpec& spec,
                                            int workers = 1) {
  std::vector<FrameLabel> labels = simulate_labels(cfg, spec, cfg.frame_count());
  std::vector<Sample> out(labels.size());
  parallel_for(static_cast<long>(labels.size()), workers, [&](long i) {
    out[static_cast<size_t>(i)].image = render_frame(cfg, spec, labels[static_cast<size_t>(i)], i);
    out[static_cast<size_t>(i)].leds = labels[static_cast<size_t>(i)].leds;
    out[static_cast<size_t>(i)].pose = labels[static_cast<size_t>(i)].pose;
  });
  return out;
}

inline std::array<long, 3> split_sizes(long n, const std::array<double, 3>& ratios) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-6) throw config_error("split ratios must sum to 1");
  long n0 = std::lround(ratios[0] * n);
  long n1 = std::lround(ratios[1] * n);
  if (n0 + n1 > n) n1 = n - n0;
  return {n0, n1, n - n0 - n1};
}

// Deterministic disjoint exhaustive split assignment by shuffled index.
inline std::vector<Split> make_split_assignment(long n, const std::array<double, 3>& ratios,
                                                uint64_t seed) {
  auto sizes = split_sizes(n, ratios);
  std::vector<long> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0L);
  std::mt19937_64 rng = make_rng(seed, 0x53504C49ULL);  // split stream
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Split> out(static_cast<size_t>(n), Split::train);
  long pos = 0;
  for (int s = 0; s < 3; ++s)
    for (long k = 0; k < sizes[static_cast<size_t>(s)]; ++k)
      out[static_cast<size_t>(idx[static_cast<size_t>(pos++)])] = static_cast<Split>(s);
  return out;
}

inline void make_splits(std::vector<Sample>& samples, const std::array<double, 3>& ratios, uint64_t seed) {
  auto assign = make_split_assignment(static_cast<long>(samples.size()), ratios, seed);
  for (size_t i = 0; i < samples.size(); ++i) samples[i].split = assign[i];
}

struct GenerateConfig {
  EpisodeConfig episode;
  RobotRenderSpec spec;
  std::array<double, 3> split_ratios{0.886, 0.076, 0.038};
  long total_samples = 0;  // when positive, overrides episode.length_s

  long frames() const {
    return total_samples > 0 ? total_samples : episode.frame_count();
  }

  nlohmann::json to_json() const {
    return {{"episode", episode.to_json()},
            {"render", spec.to_json()},
            {"split_ratios", split_ratios},
            {"total_samples", total_samples}};
  }
  static GenerateConfig from_json(const nlohmann::json& j) {
    GenerateConfig c;
    if (j.contains("episode")) c.episode = EpisodeConfig::from_json(j.at("episode"));
    if (j.contains("render")) c.spec = RobotRenderSpec::from_json(j.at("render"));
    if (j.contains("split_ratios")) {
      auto r = j.at("split_ratios").get<std::vector<double>>();
      if (r.size() != 3) throw config_error("split_ratios must have 3 entries");
      c.split_ratios = {r[0], r[1], r[2]};
    }
    if (j.contains("total_samples")) c.total_samples = j.at("total_samples").get<long>();
    return c;
  }
};

// Streams a full dataset to disk without holding the images in memory.
inline DatasetManifest generate_dataset(const GenerateConfig& cfg, const std::filesystem::path& dir,
                                        int workers = 1) {
  const long n = cfg.frames();
  std::vector<FrameLabel> labels = simulate_labels(cfg.episode, cfg.spec, n);
  std::vector<Split> splits = make_split_assignment(n, cfg.split_ratios, cfg.episode.seed);

  std::filesystem::create_directories(dir / "images");
  DatasetManifest m;
  m.seed = cfg.episode.seed;
  m.n_leds = cfg.spec.n_leds();
  m.width = cfg.episode.width;
  m.height = cfg.episode.height;

  std::ofstream lf(dir / "labels.jsonl");
  if (!lf) throw dataset_error(dataset_error::kind::missing_file, "cannot write labels.jsonl");
  for (long i = 0; i < n; ++i) {
    SampleRecord r{sample_id(i), labels[static_cast<size_t>(i)].leds, labels[static_cast<size_t>(i)].pose,
                   splits[static_cast<size_t>(i)]};
    lf << label_to_json(r).dump() << "\n";
    int si = static_cast<int>(r.split);
    m.counts[si]++;
    if (r.pose.visible) m.visible_counts[si]++;
  }
  lf.close();

  const long chunk = 256;
  std::vector<Image> buf;
  for (long base = 0; base < n; base += chunk) {
    long cnt = std::min(chunk, n - base);
    buf.assign(static_cast<size_t>(cnt), Image());
    parallel_for(cnt, workers, [&](long k) {
      buf[static_cast<size_t>(k)] = render_frame(cfg.episode, cfg.spec, labels[static_cast<size_t>(base + k)],
                                                 base + k);
    });
    for (long k = 0; k < cnt; ++k)
      write_ppm(buf[static_cast<size_t>(k)], dir / "images" / (sample_id(base + k) + ".ppm"));
  }

  std::ofstream mf(dir / "manifest.json");
  mf << m.to_json().dump(2) << "\n";
  return m;
}

// ---- label/render consistency auditing ----------------------------------

struct AuditResult {
  bool pass = true;
  std::string detail;
};

// Verifies that a color scan at each in-frame LED ring position finds a lit
// blob exactly for the LEDs that are labeled on and face the camera.
inline AuditResult audit_led_consistency(const Image& img, const GroundTruthPose& pose,
                                         const LedStates& leds, const RobotRenderSpec& spec) {
  AuditResult res;
  if (!pose.visible) return res;
  const double s = pose.scale > 0 ? pose.scale : spec.body_half_size;
  const double tol = 0.10;
  for (int l = 1; l <= spec.n_leds(); ++l) {
    double cosv = std::cos(pose.psi + spec.led_offsets[static_cast<size_t>(l - 1)]);
    bool facing = cosv > 0.0;
    auto off = led_image_offset(pose.psi, spec.led_offsets[static_cast<size_t>(l - 1)], spec.led_ring * s);
    double cx = pose.u + off[0], cy = pose.v + off[1];
    double r = facing ? led_blob_radius(s, cosv) : led_blob_radius(s, 0.0);
    double scan_r = std::max(1.5, 0.8 * r);
    if (cx - scan_r < 0 || cx + scan_r >= img.w || cy - scan_r < 0 || cy + scan_r >= img.h)
      continue;  // blob (or its expected spot) clipped by the frame: cannot assert
    int on_hits = 0, off_hits = 0;
    int x0 = static_cast<int>(std::floor(cx - scan_r)), x1 = static_cast<int>(std::ceil(cx + scan_r));
    int y0 = static_cast<int>(std::floor(cy - scan_r)), y1 = static_cast<int>(std::ceil(cy + scan_r));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy > scan_r * scan_r) continue;
        Rgb c = img.get(x, y);
        if (render_detail::color_dist(c, spec.led_on_color) < tol) ++on_hits;
        if (render_detail::color_dist(c, spec.led_off_color) < tol) ++off_hits;
      }
    bool expect_on = facing && leds.get(l);
    bool expect_off = facing && !leds.get(l);
    bool found_on = on_hits >= 3;
    bool found_off = off_hits >= 3;
    if (found_on != expect_on || found_off != expect_off) {
      res.pass = false;
      res.detail = "LED " + std::to_string(l) + ": expected on=" + std::to_string(expect_on) +
                   " off=" + std::to_string(expect_off) + ", scan on_hits=" + std::to_string(on_hits) +
                   " off_hits=" + std::to_string(off_hits);
      return res;
    }
  }
  return res;
}

// Centroid of body/marker-colored pixels near the labeled center; meaningful
// for robots fully inside the frame.
inline AuditResult audit_body_centroid(const Image& img, const GroundTruthPose& pose,
                                       const RobotRenderSpec& spec) {
  AuditResult res;
  if (!pose.visible) return res;
  const double s = pose.scale > 0 ? pose.scale : spec.body_half_size;
  const double tol = 0.10;
  double wsum = 0, xsum = 0, ysum = 0;
  int x0 = std::max(0, static_cast<int>(pose.u - 1.5 * s)), x1 = std::min(img.w - 1, static_cast<int>(pose.u + 1.5 * s));
  int y0 = std::max(0, static_cast<int>(pose.v - 1.5 * s)), y1 = std::min(img.h - 1, static_cast<int>(pose.v + 1.5 * s));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      Rgb c = img.get(x, y);
      if (render_detail::color_dist(c, spec.body_color) < tol ||
          render_detail::color_dist(c, spec.marker_color) < tol) {
        wsum += 1;
        xsum += x + 0.5;
        ysum += y + 0.5;
      }
    }
  if (wsum < 10) {
    res.pass = false;
    res.detail = "no body pixels found";
    return res;
  }
  double dx = xsum / wsum - pose.u, dy = ysum / wsum - pose.v;
  if (std::sqrt(dx * dx + dy * dy) > 2.0) {
    res.pass = false;
    res.detail = "centroid off by " + std::to_string(std::sqrt(dx * dx + dy * dy)) + " px";
  }
  return res;
}

}  // namespace ledpose
