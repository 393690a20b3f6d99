#include <catch2/catch_amalgamated.hpp>
#include <fstream>
#include <random>

#include "ledpose/train.hpp"
#include "test_util.hpp"

using namespace ledpose;

TEST_CASE("fit_dummy means and circular mean", "[train]") {
  auto dir = test_util::fresh_dir("dummy_fit");
  std::vector<Sample> samples;
  auto add = [&](double u, double v, double psi, bool visible) {
    Sample s;
    s.image = Image(64, 48);
    s.leds = LedStates(4);
    s.pose = GroundTruthPose{u, v, normalize_angle(psi), visible, 8.0};
    s.split = Split::train;
    samples.push_back(s);
  };
  add(100, 30, kPi - 0.1, true);
  add(200, 50, -kPi + 0.1, true);
  add(500, 500, 0.0, false);  // invisible: ignored by the fit
  // make the invisible sample's pose legal for serialization
  samples.back().pose.u = -10;
  samples.back().pose.v = -10;
  write_dataset(samples, dir);
  Dataset ds = Dataset::open(dir);

  DummyModel d = fit_dummy(ds);
  CHECK(d.mean_u == 150.0);
  CHECK(d.mean_v == 40.0);
  CHECK_THAT(angular_error(d.psi, kPi), Catch::Matchers::WithinAbs(0.0, 1e-9));  // wraps to pi, not 0
}

TEST_CASE("fit_dummy single sample and empty split", "[train]") {
  auto dir = test_util::fresh_dir("dummy_single");
  std::vector<Sample> samples;
  Sample s;
  s.image = Image(64, 48);
  s.leds = LedStates(4);
  s.pose = GroundTruthPose{31.0, 17.0, 0.4, true, 8.0};
  s.split = Split::train;
  samples.push_back(s);
  write_dataset(samples, dir);
  Dataset ds = Dataset::open(dir);
  DummyModel d = fit_dummy(ds);
  CHECK(d.mean_u == 31.0);
  CHECK(d.mean_v == 17.0);
  CHECK_THAT(d.psi, Catch::Matchers::WithinAbs(0.4, 1e-12));

  auto dir2 = test_util::fresh_dir("dummy_none");
  samples[0].pose.visible = false;
  samples[0].pose.u = -5;
  write_dataset(samples, dir2);
  Dataset ds2 = Dataset::open(dir2);
  CHECK_THROWS_AS(fit_dummy(ds2), train_error);
}

TEST_CASE("supervised loss: exact prediction is near zero, invisible masks heading", "[train]") {
  OutputMapsT<double> maps = OutputMapsT<double>::zeros(6, 4, 4, MapGeometry{8, 48, 32});
  GroundTruthPose pose{20.0, 12.0, 0.9, true, 6.0};  // cell (2, 1)
  LedStates labels(4);
  labels.set(2, true);

  for (auto& v : maps.p.v) v = 0.0;
  maps.p.at(2, 1) = 1.0;
  for (auto& v : maps.s.v) v = 0.31;  // junk away from the target cell is fine for S/C
  for (auto& v : maps.c.v) v = -0.77;
  maps.s.at(2, 1) = std::sin(0.9);
  maps.c.at(2, 1) = std::cos(0.9);
  for (int l = 1; l <= 4; ++l)
    for (auto& v : maps.led[static_cast<size_t>(l - 1)].v) v = labels.get(l) ? 1.0 : 0.0;

  auto g = supervised_loss_gradients(maps, pose, labels);
  CHECK(g.loss <= 1e-6);

  GroundTruthPose off = pose;
  off.visible = false;
  auto maps2 = maps;
  for (auto& v : maps2.p.v) v = 0.0;  // matching all-zero target
  auto g_off = supervised_loss_gradients(maps2, off, labels);
  auto maps3 = maps2;
  for (auto& v : maps3.s.v) v = -0.9;  // heading maps must not matter at all
  for (auto& v : maps3.c.v) v = 0.1;
  auto g_off2 = supervised_loss_gradients(maps3, off, labels);
  CHECK(g_off.loss == g_off2.loss);
  for (double v : g_off.ds.v) CHECK(v == 0.0);
  for (double v : g_off.dc.v) CHECK(v == 0.0);
}

TEST_CASE("supervised gradients match finite differences", "[train]") {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> up(0.1, 0.9);
  std::uniform_real_distribution<double> u11(-0.8, 0.8);
  OutputMapsT<double> maps = OutputMapsT<double>::zeros(4, 4, 4, MapGeometry{8, 32, 32});
  for (auto& v : maps.p.v) v = up(rng);
  for (auto& v : maps.s.v) v = u11(rng);
  for (auto& v : maps.c.v) v = u11(rng);
  for (auto& g : maps.led)
    for (auto& v : g.v) v = up(rng);
  GroundTruthPose pose{17.0, 9.0, -1.3, true, 5.0};
  LedStates labels(4);
  labels.set(1, true);
  labels.set(3, true);

  auto g = supervised_loss_gradients(maps, pose, labels);
  const double step = 1e-6;
  auto fd_check = [&](Grid<double>& target, const Grid<double>& analytic) {
    for (size_t i = 0; i < target.v.size(); ++i) {
      double keep = target.v[i];
      target.v[i] = keep + step;
      double up_l = supervised_loss_gradients(maps, pose, labels).loss;
      target.v[i] = keep - step;
      double down_l = supervised_loss_gradients(maps, pose, labels).loss;
      target.v[i] = keep;
      double fd = (up_l - down_l) / (2 * step);
      CHECK_THAT(analytic.v[i], Catch::Matchers::WithinAbs(fd, 1e-5 + 1e-4 * std::abs(fd)));
    }
  };
  fd_check(maps.p, g.dp);
  fd_check(maps.s, g.ds);
  fd_check(maps.c, g.dc);
  for (int l = 0; l < 4; ++l) fd_check(maps.led[static_cast<size_t>(l)], g.dled[static_cast<size_t>(l)]);
}

TEST_CASE("divergence guard trips on non-finite loss", "[train]") {
  CHECK_NOTHROW(ensure_finite_loss(0.3, 10, "pretext", 1));
  CHECK_THROWS_AS(ensure_finite_loss(std::nan(""), 10, "pretext", 1), train_error);
  CHECK_THROWS_AS(ensure_finite_loss(std::numeric_limits<double>::infinity(), 2, "upperbound", 3),
                  train_error);
}

TEST_CASE("one training step is deterministic and worker-count invariant", "[train]") {
  Dataset ds = test_util::small_dataset("train_det", 60, 51);
  ModelConfig mc = test_util::small_model_config();
  TrainConfig tc;
  tc.batch_size = 8;
  tc.steps = 3;
  tc.val_every = 3;
  tc.seed = 5;

  auto dir1 = test_util::fresh_dir("train_det_r1");
  auto dir2 = test_util::fresh_dir("train_det_r2");
  auto dir3 = test_util::fresh_dir("train_det_r3");
  train_pretext(ds, mc, tc, dir1);
  train_pretext(ds, mc, tc, dir2);
  TrainConfig tc_workers = tc;
  tc_workers.workers = 4;
  train_pretext(ds, mc, tc_workers, dir3);

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(dir1 / "metrics.csv") == slurp(dir2 / "metrics.csv"));
  CHECK(slurp(dir1 / "ckpt_last.bin") == slurp(dir2 / "ckpt_last.bin"));
  CHECK(slurp(dir1 / "metrics.csv") == slurp(dir3 / "metrics.csv"));
  CHECK(slurp(dir1 / "ckpt_last.bin") == slurp(dir3 / "ckpt_last.bin"));

  // different seed, different parameters
  TrainConfig tc_other = tc;
  tc_other.seed = 6;
  auto dir4 = test_util::fresh_dir("train_det_r4");
  train_pretext(ds, mc, tc_other, dir4);
  CHECK(slurp(dir1 / "ckpt_last.bin") != slurp(dir4 / "ckpt_last.bin"));
}

TEST_CASE("metrics csv has one row per step and checkpoints exist", "[train]") {
  Dataset ds = test_util::small_dataset("train_metrics", 50, 53);
  ModelConfig mc = test_util::small_model_config();
  TrainConfig tc;
  tc.batch_size = 4;
  tc.steps = 5;
  tc.val_every = 2;
  TrainOutcome out = train_upperbound(ds, mc, tc, test_util::fresh_dir("train_metrics_run"));

  std::ifstream in(out.metrics_csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,loss,val_E_uv,val_E_psi");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 5);
  CHECK(std::filesystem::exists(out.best_checkpoint));
  CHECK(std::filesystem::exists(out.last_checkpoint));
  CHECK(std::filesystem::exists(out.best_checkpoint.string() + ".json"));
}

TEST_CASE("pretext training overfits a 32-sample dataset", "[train_slow]") {
  // visibility-heavy tiny world so LED states are mostly readable from pixels
  Dataset ds = test_util::small_dataset("overfit", 46, 57, 0.9);
  // 32 train samples at the default 0.7 ratio
  REQUIRE(ds.manifest().counts[0] == 32);

  ModelConfig mc = test_util::small_model_config();
  TrainConfig tc;
  tc.batch_size = 8;
  tc.steps = 2000;
  tc.lr = 2e-3;
  tc.val_every = 500;
  tc.seed = 2;
  TrainOutcome out = train_pretext(ds, mc, tc, test_util::fresh_dir("overfit_run"));

  double early = loss_moving_average(out.metrics_csv, 200);
  double late = loss_moving_average(out.metrics_csv, 2000);
  INFO("early " << early << " late " << late << " final " << out.final_loss);
  CHECK(late < early);
  CHECK(late < 0.02);
  CHECK(late < std::log(2.0) / 4);  // beats the constant-prediction plateau
}
