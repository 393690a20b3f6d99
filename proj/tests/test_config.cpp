#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <fstream>

#include "ledpose/config.hpp"
#include "ledpose/pipeline.hpp"
#include "test_util.hpp"

using namespace ledpose;

namespace {

std::filesystem::path write_config(const std::string& tag, const nlohmann::json& j) {
  auto dir = test_util::fresh_dir("cfg_" + tag);
  auto path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

}  // namespace

TEST_CASE("run config defaults and nested seed propagation", "[config]") {
  auto path = write_config("defaults", nlohmann::json{{"seed", 9}});
  RunConfig cfg = load_run_config(path);
  CHECK(cfg.seed == 9);
  CHECK(cfg.gen.episode.seed == 9);
  CHECK(cfg.model.seed == 9);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.train.replicas == 3);
  CHECK(cfg.gen.episode.visibility_target == 0.22);
  CHECK(cfg.pipeline_models == std::vector<std::string>{"dummy", "pretext", "upperbound"});
}

TEST_CASE("dotted-path overrides patch nested keys", "[config]") {
  auto path = write_config("overrides", nlohmann::json{{"seed", 1}});
  RunConfig cfg = load_run_config(path, {{"train.steps", "5000"},
                                         {"dataset.episode.fps", "6"},
                                         {"train.lr_schedule", "\"constant\""},
                                         {"model.trunk_channels", "48"}});
  CHECK(cfg.train.steps == 5000);
  CHECK(cfg.gen.episode.fps == 6.0);
  CHECK(cfg.train.lr_schedule == "constant");
  CHECK(cfg.model.trunk_channels == 48);
}

TEST_CASE("LEDSSL_SEED env var overrides the config seed", "[config]") {
  auto path = write_config("env", nlohmann::json{{"seed", 5}});
  setenv("LEDSSL_SEED", "77", 1);
  RunConfig cfg = load_run_config(path);
  unsetenv("LEDSSL_SEED");
  CHECK(cfg.seed == 77);
  CHECK(cfg.gen.episode.seed == 77);
  CHECK(cfg.train.seed == 77);

  setenv("LEDSSL_SEED", "not_a_number", 1);
  CHECK_THROWS_AS(load_run_config(path), config_error);
  unsetenv("LEDSSL_SEED");
}

TEST_CASE("config hash is stable and sensitive", "[config]") {
  auto path = write_config("hash", nlohmann::json{{"seed", 5}});
  RunConfig a = load_run_config(path);
  RunConfig b = load_run_config(path);
  CHECK(a.hash() == b.hash());
  RunConfig c = load_run_config(path, {{"train.steps", "123"}});
  CHECK(a.hash() != c.hash());
}

TEST_CASE("invalid configs are rejected", "[config]") {
  CHECK_THROWS_AS(load_run_config(write_config("badjson", nlohmann::json{}).parent_path() / "missing.json"),
                  config_error);
  auto bad_model = write_config("badmodel", nlohmann::json{{"pipeline", {{"models", {"nonsense"}}}}});
  CHECK_THROWS_AS(load_run_config(bad_model), config_error);
  auto bad_ratio =
      write_config("badratio", nlohmann::json{{"dataset", {{"split_ratios", {0.5, 0.1, 0.1}}}}});
  CHECK_THROWS_AS([&] {
    RunConfig cfg = load_run_config(bad_ratio);
    generate_dataset(cfg.gen, test_util::fresh_dir("never"), 1);
  }(), config_error);
}

TEST_CASE("pipeline runs end to end and caches completed stages", "[config]") {
  nlohmann::json j{
      {"seed", 3},
      {"dataset",
       {{"total_samples", 60},
        {"split_ratios", {0.6, 0.2, 0.2}},
        {"episode",
         {{"width", 96}, {"height", 64}, {"scale_min", 6}, {"scale_max", 12}, {"visibility_target", 0.5}}}}},
      {"model", {{"stage_channels", {6, 10}}, {"trunk_channels", 12}, {"trunk_dilation", 1}}},
      {"train", {{"batch_size", 4}, {"steps", 6}, {"val_every", 3}, {"replicas", 1}}},
      {"pipeline", {{"models", {"dummy", "pretext"}}}}};
  auto path = write_config("pipeline", j);
  RunConfig cfg = load_run_config(path);
  auto out_root = test_util::fresh_dir("pipeline_out");

  PipelineResult first = run_pipeline(cfg, out_root, 1);
  CHECK(first.executed.size() >= 3);  // dataset, train, report
  CHECK(std::filesystem::exists(first.report_dir / "report.txt"));
  CHECK(std::filesystem::exists(first.report_dir / "report.csv"));
  CHECK(std::filesystem::exists(first.report_dir / "table_plot.svg"));
  CHECK(std::filesystem::exists(out_root / "run_config.json"));
  CHECK(std::filesystem::exists(out_root / "runs" / "dummy.json"));

  PipelineResult second = run_pipeline(cfg, out_root, 1);
  CHECK(second.executed.empty());
  CHECK(second.skipped.size() >= first.executed.size());

  // changed config forces the affected stages to rebuild
  RunConfig cfg2 = load_run_config(path, {{"train.steps", "8"}});
  PipelineResult third = run_pipeline(cfg2, out_root, 1);
  CHECK(!third.executed.empty());
  bool dataset_rebuilt = false;
  for (const auto& s : third.executed) dataset_rebuilt |= s == "dataset";
  CHECK_FALSE(dataset_rebuilt);  // dataset config unchanged, stays cached
}

TEST_CASE("cli exit codes distinguish error families", "[config]") {
  const char* bin = std::getenv("LEDPOSE_BIN");
  if (!bin) {
    SKIP("LEDPOSE_BIN not set");
  }
  auto dir = test_util::fresh_dir("cli_codes");
  auto cfg_path = dir / "cfg.json";
  std::ofstream(cfg_path) << "{ not json";
  std::string cmd = std::string(bin) + " generate --config " + cfg_path.string() + " --out " +
                    (dir / "out").string() + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);  // config error

  // corrupted dataset manifest: dataset error, distinct from training failure
  auto ds_dir = dir / "ds";
  std::filesystem::create_directories(ds_dir);
  std::ofstream(ds_dir / "manifest.json") << "{ nope";
  std::ofstream(cfg_path) << "{}";
  cmd = std::string(bin) + " train --config " + cfg_path.string() + " --dataset " + ds_dir.string() +
        " --out " + (dir / "run").string() + " >/dev/null 2>&1";
  rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 3);
}
