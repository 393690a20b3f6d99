#pragma once

#include <filesystem>
#include <string>

#include "ledpose/dataset.hpp"
#include "ledpose/model.hpp"
#include "ledpose/synthgen.hpp"
#include "ledpose/train.hpp"

namespace test_util {

inline std::filesystem::path fresh_dir(const std::string& tag) {
  std::filesystem::path p = std::filesystem::temp_directory_path() / ("ledpose_test_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// small desk-corner dataset: quick to render and to train a few steps on
inline ledpose::GenerateConfig small_gen_config(long samples, uint64_t seed, double visibility = 0.5,
                                                int width = 96, int height = 64) {
  ledpose::GenerateConfig g;
  g.episode.width = width;
  g.episode.height = height;
  g.episode.scale_min = 6;
  g.episode.scale_max = 14;
  g.episode.visibility_target = visibility;
  g.episode.seed = seed;
  g.spec.distractor_count = 4;
  g.split_ratios = {0.7, 0.15, 0.15};
  g.total_samples = samples;
  return g;
}

inline ledpose::Dataset small_dataset(const std::string& tag, long samples, uint64_t seed,
                                      double visibility = 0.5, int width = 96, int height = 64) {
  auto dir = fresh_dir(tag);
  ledpose::generate_dataset(small_gen_config(samples, seed, visibility, width, height), dir, 1);
  return ledpose::Dataset::open(dir);
}

inline ledpose::ModelConfig small_model_config() {
  ledpose::ModelConfig m;
  m.stage_channels = {8, 12, 16};
  m.trunk_channels = 24;
  m.trunk_dilation = 2;
  return m;
}

}  // namespace test_util
