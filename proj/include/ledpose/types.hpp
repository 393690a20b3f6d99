#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ledpose/angles.hpp"
#include "ledpose/errors.hpp"
#include "ledpose/image.hpp"

namespace ledpose {

enum class Split : uint8_t { train = 0, val = 1, test = 2 };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw dataset_error(dataset_error::kind::malformed_label, "unknown split: " + s);
}

// Per-LED on/off states, indexed 1..n externally and 0..n-1 in storage.
struct LedStates {
  std::vector<uint8_t> on;

  LedStates() = default;
  explicit LedStates(int n) : on(static_cast<size_t>(n), 0) {}

  int n() const { return static_cast<int>(on.size()); }
  bool get(int l) const {  // 1-based
    if (l < 1 || l > n()) throw domain_error("LedStates: index out of range");
    return on[static_cast<size_t>(l - 1)] != 0;
  }
  void set(int l, bool value) {
    if (l < 1 || l > n()) throw domain_error("LedStates: index out of range");
    on[static_cast<size_t>(l - 1)] = value ? 1 : 0;
  }
  bool operator==(const LedStates&) const = default;
};

// Held-out supervision: image-space position (u, v), planar viewing
// direction psi in (-pi, pi], visibility flag, apparent radius in pixels.
struct GroundTruthPose {
  double u = 0.0;
  double v = 0.0;
  double psi = 0.0;
  bool visible = false;
  double scale = 0.0;
};

struct Sample {
  Image image;
  LedStates leds;
  GroundTruthPose pose;
  Split split = Split::train;

  void validate() const {
    if (image.w < 32 || image.h < 32) throw domain_error("Sample: image below 32x32");
    if (pose.visible && (pose.u < 0 || pose.u >= image.w || pose.v < 0 || pose.v >= image.h))
      throw domain_error("Sample: visible pose outside frame");
    if (std::abs(normalize_angle(pose.psi) - pose.psi) > 1e-12)
      throw domain_error("Sample: psi not normalized");
  }
};

// What the training loop is allowed to see. Pose fields are stripped at the
// type level, not merely by convention.
struct TrainSample {
  Image image;
  LedStates leds;
};

}  // namespace ledpose
