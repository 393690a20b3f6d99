#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ledpose/errors.hpp"
#include "ledpose/image.hpp"
#include "ledpose/types.hpp"

namespace ledpose {

namespace fs = std::filesystem;
using nlohmann::json;

// On-disk layout: manifest.json, labels.jsonl (one object per sample, in id
// order), images/<id>.ppm. Images are 8-bit PPM; labels are exact.

struct DatasetManifest {
  int n_leds = 4;
  int width = 0;
  int height = 0;
  std::array<long, 3> counts{0, 0, 0};          // train, val, test
  std::array<long, 3> visible_counts{0, 0, 0};  // train, val, test
  uint64_t seed = 0;

  long total() const { return counts[0] + counts[1] + counts[2]; }
  long total_visible() const { return visible_counts[0] + visible_counts[1] + visible_counts[2]; }

  json to_json() const {
    return json{{"n_leds", n_leds},
                {"width", width},
                {"height", height},
                {"counts", {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}}},
                {"visible_counts",
                 {{"train", visible_counts[0]}, {"val", visible_counts[1]}, {"test", visible_counts[2]}}},
                {"seed", seed}};
  }

  static DatasetManifest from_json(const json& j) {
    DatasetManifest m;
    try {
      m.n_leds = j.at("n_leds").get<int>();
      m.width = j.at("width").get<int>();
      m.height = j.at("height").get<int>();
      for (int s = 0; s < 3; ++s) {
        const char* name = split_name(static_cast<Split>(s));
        m.counts[s] = j.at("counts").at(name).get<long>();
        m.visible_counts[s] = j.at("visible_counts").at(name).get<long>();
      }
      m.seed = j.at("seed").get<uint64_t>();
    } catch (const json::exception& e) {
      throw dataset_error(dataset_error::kind::bad_manifest, std::string("bad manifest: ") + e.what());
    }
    return m;
  }
};

// Label-side view of one sample; the image stays on disk until asked for.
struct SampleRecord {
  std::string id;
  LedStates leds;
  GroundTruthPose pose;
  Split split = Split::train;
};

inline std::string sample_id(long index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06ld", index);
  return buf;
}

inline json label_to_json(const SampleRecord& r) {
  json leds = json::array();
  for (int l = 1; l <= r.leds.n(); ++l) leds.push_back(r.leds.get(l) ? 1 : 0);
  return json{{"id", r.id},          {"leds", leds},
              {"u", r.pose.u},       {"v", r.pose.v},
              {"psi", r.pose.psi},   {"visible", r.pose.visible},
              {"scale", r.pose.scale}, {"split", split_name(r.split)}};
}

inline SampleRecord label_from_json(const json& j) {
  SampleRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    auto leds = j.at("leds");
    r.leds = LedStates(static_cast<int>(leds.size()));
    for (size_t i = 0; i < leds.size(); ++i) r.leds.set(static_cast<int>(i) + 1, leds[i].get<int>() != 0);
    r.pose.u = j.at("u").get<double>();
    r.pose.v = j.at("v").get<double>();
    r.pose.psi = j.at("psi").get<double>();
    r.pose.visible = j.at("visible").get<bool>();
    r.pose.scale = j.at("scale").get<double>();
    r.split = split_from_name(j.at("split").get<std::string>());
  } catch (const json::exception& e) {
    throw dataset_error(dataset_error::kind::malformed_label, std::string("bad label: ") + e.what());
  }
  return r;
}

inline DatasetManifest write_dataset(const std::vector<Sample>& samples, const fs::path& dir,
                                     uint64_t seed = 0, int n_leds_hint = 4) {
  fs::create_directories(dir / "images");
  DatasetManifest m;
  m.seed = seed;
  m.n_leds = samples.empty() ? n_leds_hint : samples.front().leds.n();
  std::ofstream labels(dir / "labels.jsonl");
  if (!labels) throw dataset_error(dataset_error::kind::missing_file, "cannot write labels.jsonl");
  for (size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    s.validate();
    if (m.width == 0) {
      m.width = s.image.w;
      m.height = s.image.h;
    }
    SampleRecord r{sample_id(static_cast<long>(i)), s.leds, s.pose, s.split};
    labels << label_to_json(r).dump() << "\n";
    write_ppm(s.image, dir / "images" / (r.id + ".ppm"));
    int si = static_cast<int>(s.split);
    m.counts[si]++;
    if (s.pose.visible) m.visible_counts[si]++;
  }
  std::ofstream mf(dir / "manifest.json");
  mf << m.to_json().dump(2) << "\n";
  return m;
}

// Random-access dataset handle. Labels live in memory, images are loaded on
// demand; concurrent read-only use is safe.
class Dataset {
 public:
  static Dataset open(const fs::path& dir) {
    Dataset ds;
    ds.dir_ = dir;
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw dataset_error(dataset_error::kind::missing_file, "missing manifest.json in " + dir.string());
    json mj;
    try {
      mf >> mj;
    } catch (const json::exception& e) {
      throw dataset_error(dataset_error::kind::bad_manifest, std::string("unparseable manifest: ") + e.what());
    }
    ds.manifest_ = DatasetManifest::from_json(mj);

    std::ifstream lf(dir / "labels.jsonl");
    if (!lf) throw dataset_error(dataset_error::kind::missing_file, "missing labels.jsonl in " + dir.string());
    std::string line;
    long lineno = 0;
    while (std::getline(lf, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw dataset_error(dataset_error::kind::malformed_label,
                            "labels.jsonl line " + std::to_string(lineno) + ": " + e.what());
      }
      ds.records_.push_back(label_from_json(j));
    }
    if (static_cast<long>(ds.records_.size()) != ds.manifest_.total())
      throw dataset_error(dataset_error::kind::count_mismatch,
                          "manifest counts " + std::to_string(ds.manifest_.total()) + " != labels " +
                              std::to_string(ds.records_.size()));
    for (const auto& r : ds.records_)
      if (!fs::exists(ds.image_path(r)))
        throw dataset_error(dataset_error::kind::count_mismatch, "missing image for id " + r.id);
    return ds;
  }

  const DatasetManifest& manifest() const { return manifest_; }
  const std::vector<SampleRecord>& records() const { return records_; }
  const fs::path& dir() const { return dir_; }

  fs::path image_path(const SampleRecord& r) const { return dir_ / "images" / (r.id + ".ppm"); }
  Image load_image(const SampleRecord& r) const { return read_ppm(image_path(r)); }

  std::vector<long> split_indices(Split s) const {
    std::vector<long> out;
    for (size_t i = 0; i < records_.size(); ++i)
      if (records_[i].split == s) out.push_back(static_cast<long>(i));
    return out;
  }

  Sample load_sample(long index) const {
    const SampleRecord& r = records_.at(static_cast<size_t>(index));
    return Sample{load_image(r), r.leds, r.pose, r.split};
  }

 private:
  fs::path dir_;
  DatasetManifest manifest_;
  std::vector<SampleRecord> records_;
};

inline std::vector<Sample> read_dataset(const fs::path& dir) {
  Dataset ds = Dataset::open(dir);
  std::vector<Sample> out;
  out.reserve(ds.records().size());
  for (size_t i = 0; i < ds.records().size(); ++i) out.push_back(ds.load_sample(static_cast<long>(i)));
  return out;
}

// Training-side view over the train split. Yields image + LED states only;
// the optional visibility filter never leaves this class.
class TrainView {
 public:
  TrainView(const Dataset& ds, bool include_invisible = true) : ds_(&ds) {
    for (size_t i = 0; i < ds.records().size(); ++i) {
      const SampleRecord& r = ds.records()[i];
      if (r.split != Split::train) continue;
      if (!include_invisible && !r.pose.visible) continue;
      indices_.push_back(static_cast<long>(i));
    }
  }

  long size() const { return static_cast<long>(indices_.size()); }

  TrainSample get(long i) const {
    const SampleRecord& r = ds_->records()[static_cast<size_t>(indices_.at(static_cast<size_t>(i)))];
    return TrainSample{ds_->load_image(r), r.leds};
  }

 private:
  const Dataset* ds_;
  std::vector<long> indices_;
};

}  // namespace ledpose
