#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ledpose/errors.hpp"
#include "ledpose/model.hpp"
#include "ledpose/synthgen.hpp"
#include "ledpose/train.hpp"

namespace ledpose {

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Full reproducible-run description: dataset generation, model, training,
// evaluation, and which baselines to build.
struct RunConfig {
  uint64_t seed = 1;
  GenerateConfig gen;
  ModelConfig model;
  TrainConfig train;
  std::vector<std::string> pipeline_models{"dummy", "pretext", "upperbound"};
  std::vector<std::string> decode_modes{"paper-literal", "vector"};

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"dataset", gen.to_json()},
            {"model", model.to_json()},
            {"train", train.to_json()},
            {"pipeline", {{"models", pipeline_models}, {"decode_modes", decode_modes}}}};
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("dataset")) c.gen = GenerateConfig::from_json(j.at("dataset"));
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("pipeline")) {
      const auto& p = j.at("pipeline");
      if (p.contains("models")) c.pipeline_models = p.at("models").get<std::vector<std::string>>();
      if (p.contains("decode_modes")) c.decode_modes = p.at("decode_modes").get<std::vector<std::string>>();
    }
    for (const auto& m : c.pipeline_models)
      if (m != "dummy" && m != "pretext" && m != "upperbound")
        throw config_error("pipeline: unknown model " + m);
    for (const auto& m : c.decode_modes) heading_mode_from_name(m);
    // one seed drives everything unless sub-configs override it explicitly
    if (!j.contains("dataset") || !j.at("dataset").contains("episode") ||
        !j.at("dataset").at("episode").contains("seed"))
      c.gen.episode.seed = c.seed;
    if (!j.contains("model") || !j.at("model").contains("seed")) c.model.seed = c.seed;
    if (!j.contains("train") || !j.at("train").contains("seed")) c.train.seed = c.seed;
    return c;
  }

  std::string hash() const { return hash_hex(fnv1a64(to_json().dump())); }
};

// Dotted-path overrides: "train.steps=5000" patches /train/steps. Values are
// parsed as JSON when possible, kept as strings otherwise.
inline void apply_override(nlohmann::json& j, const std::string& dotted, const std::string& value) {
  std::string pointer = "/";
  for (char c : dotted) pointer += (c == '.') ? '/' : c;
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;
  }
  try {
    j[nlohmann::json::json_pointer(pointer)] = parsed;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("bad override path '" + dotted + "': " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path,
                                 const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("unparseable config " + path.string() + ": " + e.what());
  }
  for (const auto& [k, v] : overrides) apply_override(j, k, v);
  if (const char* env = std::getenv("LEDSSL_SEED")) {
    try {
      j["seed"] = std::stoull(env);
    } catch (const std::exception&) {
      throw config_error("LEDSSL_SEED is not an integer");
    }
    // the env override wins everywhere the seed was not explicitly pinned
    for (const char* section : {"dataset", "model", "train"})
      if (j.contains(section)) {
        if (section == std::string("dataset")) {
          if (j[section].contains("episode")) j[section]["episode"].erase("seed");
        } else {
          j[section].erase("seed");
        }
      }
  }
  return RunConfig::from_json(j);
}

}  // namespace ledpose
