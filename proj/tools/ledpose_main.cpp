#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ledpose/config.hpp"
#include "ledpose/dataset.hpp"
#include "ledpose/eval.hpp"
#include "ledpose/inspect.hpp"
#include "ledpose/pipeline.hpp"
#include "ledpose/synthgen.hpp"
#include "ledpose/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDataset = 3;
constexpr int kExitTrain = 4;
constexpr int kExitEval = 5;

// remaining args of the form "--a.b.c value" become config overrides
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.find('.') == std::string::npos)
      throw ledpose::config_error("unrecognized argument: " + a);
    std::string key = a.substr(2);
    std::string value;
    auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ledpose::config_error("missing value for override " + a);
      value = extras[++i];
    }
    out.emplace_back(key, value);
  }
  return out;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"LED-state self-supervised robot detection and heading estimation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, dataset_dir, run_dir, model_kind = "pretext", sample_id, ckpt_path;
  int workers = 1;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("--config", config_path, "run config JSON")->required();
  gen->add_option("--out", out_dir, "output dataset directory")->required();
  gen->add_option("--workers", workers, "render workers");
  gen->allow_extras();

  auto* train = app.add_subcommand("train", "Train one model on a dataset");
  train->add_option("--config", config_path)->required();
  train->add_option("--dataset", dataset_dir)->required();
  train->add_option("--model", model_kind, "pretext|upperbound");
  train->add_option("--out", run_dir, "run directory")->required();
  train->add_option("--workers", workers);
  train->allow_extras();

  auto* eval = app.add_subcommand("evaluate", "Evaluate a trained run on the test split");
  eval->add_option("--run", run_dir)->required();
  eval->add_option("--dataset", dataset_dir)->required();
  eval->add_option("--out", out_dir)->required();
  eval->add_option("--workers", workers);

  auto* report = app.add_subcommand("report", "Aggregate pipeline runs into the comparison report");
  report->add_option("--config", config_path)->required();
  report->add_option("--out", out_dir, "pipeline output root")->required();
  report->add_option("--workers", workers);
  report->allow_extras();

  auto* pipeline = app.add_subcommand("pipeline", "generate -> train -> evaluate -> report");
  pipeline->add_option("--config", config_path)->required();
  pipeline->add_option("--out", out_dir, "output root (defaults to config stem)");
  pipeline->add_option("--workers", workers);
  pipeline->allow_extras();

  auto* inspect = app.add_subcommand("inspect", "Dump annotated panels for one sample");
  inspect->add_option("--dataset", dataset_dir)->required();
  inspect->add_option("--id", sample_id)->required();
  inspect->add_option("--checkpoint", ckpt_path, "optional model checkpoint");
  inspect->add_option("--out", out_dir, "output path prefix")->required();

  CLI11_PARSE(app, argc, argv);

  using namespace ledpose;

  if (gen->parsed()) {
    RunConfig cfg = load_run_config(config_path, parse_overrides(gen->remaining()));
    DatasetManifest m = generate_dataset(cfg.gen, out_dir, workers);
    std::printf("generated %ld samples (%ld visible) into %s\n", m.total(), m.total_visible(),
                out_dir.c_str());
    return kExitOk;
  }
  if (train->parsed()) {
    RunConfig cfg = load_run_config(config_path, parse_overrides(train->remaining()));
    Dataset ds = Dataset::open(dataset_dir);
    TrainConfig tc = cfg.train;
    tc.workers = workers;
    TrainOutcome out = train_model(train_kind_from_name(model_kind), ds, cfg.model, tc, run_dir);
    std::printf("trained %s: best val E_uv %.2f px at step %llu; metrics at %s\n", model_kind.c_str(),
                out.best_val_e_uv, static_cast<unsigned long long>(out.best_step),
                out.metrics_csv.string().c_str());
    return kExitOk;
  }
  if (eval->parsed()) {
    Dataset ds = Dataset::open(dataset_dir);
    FcnModel model = FcnModel::load(std::filesystem::path(run_dir) / "ckpt_best.bin");
    std::vector<ReportRow> rows;
    for (const char* mode_name : {"paper-literal", "vector"}) {
      EvalResult r = evaluate_model(model, ds, Split::test, heading_mode_from_name(mode_name), workers);
      ReportRow row;
      row.model = run_dir;
      row.decode_mode = mode_name;
      row.e_uv_replicas = {r.median_e_uv};
      row.e_psi_replicas = {r.median_e_psi_deg};
      row.pooled_e_uv = r.median_e_uv;
      row.pooled_e_psi = r.median_e_psi_deg;
      row.n_visible = r.n_visible;
      rows.push_back(row);
    }
    double audit = detection_audit(model, ds, Split::test, workers);
    make_report(rows, ReportMeta{dataset_dir, "-"}, out_dir);
    std::printf("E_uv %.2f px, E_psi %.2f deg (paper-literal), detection audit %.3f; report in %s\n",
                rows[0].mean_e_uv(), rows[0].mean_e_psi(), audit, out_dir.c_str());
    return kExitOk;
  }
  if (report->parsed() || pipeline->parsed()) {
    auto* cmd = report->parsed() ? report : pipeline;
    RunConfig cfg = load_run_config(config_path, parse_overrides(cmd->remaining()));
    if (out_dir.empty()) out_dir = std::filesystem::path(config_path).stem().string() + "_out";
    PipelineResult res = run_pipeline(cfg, out_dir, workers);
    std::printf("pipeline done: %zu stages run, %zu cached; report in %s\n", res.executed.size(),
                res.skipped.size(), res.report_dir.string().c_str());
    return kExitOk;
  }
  if (inspect->parsed()) {
    Dataset ds = Dataset::open(dataset_dir);
    std::optional<FcnModel> model;
    if (!ckpt_path.empty()) model = FcnModel::load(ckpt_path);
    auto files = inspect_sample(ds, sample_id, model, out_dir);
    for (const auto& f : files) std::printf("%s\n", f.string().c_str());
    return kExitOk;
  }
  return kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ledpose::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ledpose::dataset_error& e) {
    std::fprintf(stderr, "dataset error: %s\n", e.what());
    return kExitDataset;
  } catch (const ledpose::train_error& e) {
    std::fprintf(stderr, "training error: %s\n", e.what());
    return kExitTrain;
  } catch (const ledpose::eval_error& e) {
    std::fprintf(stderr, "evaluation error: %s\n", e.what());
    return kExitEval;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
}
