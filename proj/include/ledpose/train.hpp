#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ledpose/angles.hpp"
#include "ledpose/dataset.hpp"
#include "ledpose/decoder.hpp"
#include "ledpose/errors.hpp"
#include "ledpose/eval.hpp"
#include "ledpose/loss.hpp"
#include "ledpose/model.hpp"
#include "ledpose/parallel.hpp"
#include "ledpose/rng.hpp"

namespace ledpose {

struct TrainConfig {
  int batch_size = 32;
  long steps = 3000;
  double lr = 1e-3;
  std::string lr_schedule = "cosine";  // or "constant"
  std::string optimizer = "adam";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 1;
  int replicas = 3;
  bool train_on_invisible = true;
  LossConfig loss;  // eps values + gradient-flow flags
  long val_every = 250;
  std::string decode_mode = "paper-literal";  // used for model selection
  int workers = 1;

  void validate() const {
    if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
    if (steps < 1) throw config_error("train: steps must be >= 1");
    if (lr <= 0) throw config_error("train: lr must be positive");
    if (replicas < 1) throw config_error("train: replicas must be >= 1");
    if (lr_schedule != "cosine" && lr_schedule != "constant")
      throw config_error("train: unknown lr schedule " + lr_schedule);
    if (optimizer != "adam") throw config_error("train: unknown optimizer " + optimizer);
    if (val_every < 1) throw config_error("train: val_every must be >= 1");
    heading_mode_from_name(decode_mode);
  }

  double lr_at(long step) const {
    if (lr_schedule == "constant") return lr;
    double t = static_cast<double>(step) / static_cast<double>(std::max<long>(1, steps));
    return lr * 0.5 * (1.0 + std::cos(kPi * std::min(1.0, t)));
  }

  nlohmann::json to_json() const {
    return {{"batch_size", batch_size},
            {"steps", steps},
            {"lr", lr},
            {"lr_schedule", lr_schedule},
            {"optimizer", optimizer},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps},
            {"seed", seed},
            {"replicas", replicas},
            {"train_on_invisible", train_on_invisible},
            {"eps_norm", loss.eps_norm},
            {"eps_bce", loss.eps_bce},
            {"grad_through_weights", loss.grad_through_weights},
            {"grad_through_projection", loss.grad_through_projection},
            {"val_every", val_every},
            {"decode_mode", decode_mode},
            {"workers", workers}};
  }
  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    auto opt = [&j](const char* k, auto& field) {
      if (j.contains(k)) field = j.at(k).template get<std::decay_t<decltype(field)>>();
    };
    opt("batch_size", c.batch_size);
    opt("steps", c.steps);
    opt("lr", c.lr);
    opt("lr_schedule", c.lr_schedule);
    opt("optimizer", c.optimizer);
    opt("adam_beta1", c.adam_beta1);
    opt("adam_beta2", c.adam_beta2);
    opt("adam_eps", c.adam_eps);
    opt("seed", c.seed);
    opt("replicas", c.replicas);
    opt("train_on_invisible", c.train_on_invisible);
    opt("eps_norm", c.loss.eps_norm);
    opt("eps_bce", c.loss.eps_bce);
    opt("grad_through_weights", c.loss.grad_through_weights);
    opt("grad_through_projection", c.loss.grad_through_projection);
    opt("val_every", c.val_every);
    opt("decode_mode", c.decode_mode);
    opt("workers", c.workers);
    c.validate();
    return c;
  }
};

// Adaptive-moment SGD over the model's parameter tensors.
class Adam {
 public:
  Adam(double beta1, double beta2, double eps) : b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(std::vector<std::vector<float>*> params, std::vector<std::vector<float>*> grads, double lr) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->size(), 0.0f);
        v_.emplace_back(p->size(), 0.0f);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, t_);
    const double bc2 = 1.0 - std::pow(b2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      auto& g = *grads[i];
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t q = 0; q < p.size(); ++q) {
        m[q] = static_cast<float>(b1_ * m[q] + (1.0 - b1_) * g[q]);
        v[q] = static_cast<float>(b2_ * v[q] + (1.0 - b2_) * g[q] * g[q]);
        double mh = m[q] / bc1, vh = v[q] / bc2;
        p[q] -= static_cast<float>(lr * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

 private:
  double b1_, b2_, eps_;
  long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// ---- Upperbound supervised loss -------------------------------------------
//
// BCE between P and a one-hot target at the ground-truth cell (all-zeros
// when the robot is out of frame), squared error on (S, C) against
// (sin psi, cos psi) at the robot cell for visible samples, and the LED BCE
// restricted to that cell.
template <typename T>
MapsGrad<T> supervised_loss_gradients(const OutputMapsT<T>& maps, const GroundTruthPose& pose,
                                      const LedStates& labels, double eps_bce = 1e-7) {
  maps.check_shapes();
  const int w = maps.w(), h = maps.h(), n = maps.n_leds();
  const size_t cells = maps.p.size();
  MapsGrad<T> g;
  g.dp = Grid<T>(w, h);
  g.ds = Grid<T>(w, h);
  g.dc = Grid<T>(w, h);
  g.dled.assign(static_cast<size_t>(n), Grid<T>(w, h));

  int cx = -1, cy = -1;
  if (pose.visible) {
    int d = maps.geom.d > 0 ? maps.geom.d : 1;
    cx = std::clamp(static_cast<int>(pose.u / d), 0, w - 1);
    cy = std::clamp(static_cast<int>(pose.v / d), 0, h - 1);
  }

  const T lo = static_cast<T>(eps_bce), hi = static_cast<T>(1.0 - eps_bce);
  T loss{};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T target = (pose.visible && x == cx && y == cy) ? static_cast<T>(1) : T{};
      T p = std::min(hi, std::max(lo, maps.p.at(x, y)));
      loss += (target > T{} ? -std::log(p) : -std::log(static_cast<T>(1) - p)) / static_cast<T>(cells);
      g.dp.at(x, y) = (p - target) / (p * (static_cast<T>(1) - p)) / static_cast<T>(cells);
    }

  if (pose.visible) {
    T ts = static_cast<T>(std::sin(pose.psi)), tc = static_cast<T>(std::cos(pose.psi));
    T s = maps.s.at(cx, cy), c = maps.c.at(cx, cy);
    loss += (s - ts) * (s - ts) + (c - tc) * (c - tc);
    g.ds.at(cx, cy) = 2 * (s - ts);
    g.dc.at(cx, cy) = 2 * (c - tc);

    for (int l = 0; l < n; ++l) {
      bool y = labels.get(l + 1);
      T p = std::min(hi, std::max(lo, maps.led[static_cast<size_t>(l)].at(cx, cy)));
      loss += (y ? -std::log(p) : -std::log(static_cast<T>(1) - p)) / static_cast<T>(n);
      g.dled[static_cast<size_t>(l)].at(cx, cy) =
          (p - static_cast<T>(y ? 1 : 0)) / (p * (static_cast<T>(1) - p)) / static_cast<T>(n);
    }
  }
  g.loss = loss;
  return g;
}

// ---- training loops --------------------------------------------------------

enum class TrainKind { pretext, upperbound };

inline const char* train_kind_name(TrainKind k) { return k == TrainKind::pretext ? "pretext" : "upperbound"; }
inline TrainKind train_kind_from_name(const std::string& s) {
  if (s == "pretext") return TrainKind::pretext;
  if (s == "upperbound") return TrainKind::upperbound;
  throw config_error("unknown model kind: " + s);
}

// Divergence guard: a non-finite batch loss aborts the run with a diagnostic.
inline void ensure_finite_loss(double loss, long step, const char* kind, uint64_t seed) {
  if (!std::isfinite(loss))
    throw train_error("training diverged: non-finite loss at step " + std::to_string(step) + " (" +
                      kind + ", seed " + std::to_string(seed) + ")");
}

struct TrainOutcome {
  uint64_t best_step = 0;
  double best_val_e_uv = std::numeric_limits<double>::infinity();
  double best_val_e_psi = std::numeric_limits<double>::infinity();
  double final_loss = 0.0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path metrics_csv;
};

namespace train_detail {

// Pretext batches come from the pose-stripped TrainView; Upperbound needs
// the pose labels, so it draws from the records directly.
struct BatchSource {
  const Dataset* ds = nullptr;
  std::vector<long> indices;  // dataset indices of eligible train samples

  BatchSource(const Dataset& dataset, bool include_invisible) : ds(&dataset) {
    for (size_t i = 0; i < dataset.records().size(); ++i) {
      const SampleRecord& r = dataset.records()[i];
      if (r.split != Split::train) continue;
      if (!include_invisible && !r.pose.visible) continue;
      indices.push_back(static_cast<long>(i));
    }
  }
  long size() const { return static_cast<long>(indices.size()); }
};

}  // namespace train_detail

// Shared loop for both training kinds. Per-sample gradients go to per-slot
// buffers and are reduced in sample order, so results do not depend on the
// worker count.
inline TrainOutcome train_model(TrainKind kind, const Dataset& ds, const ModelConfig& model_cfg,
                                const TrainConfig& cfg, const std::filesystem::path& run_dir) {
  cfg.validate();
  if (ds.manifest().n_leds != model_cfg.n_leds)
    throw config_error("train: dataset/model LED count mismatch");
  std::filesystem::create_directories(run_dir);

  // Pretext reads pose-free training samples through TrainView; the view is
  // also the leakage boundary audited by tests.
  train_detail::BatchSource source(ds, cfg.train_on_invisible);
  TrainView view(ds, cfg.train_on_invisible);
  if (source.size() < 1) throw train_error("train: empty training split");
  if (kind == TrainKind::pretext && view.size() != source.size())
    throw train_error("train: train view / batch source disagree");

  std::vector<long> val_visible;
  for (long i : ds.split_indices(Split::val))
    if (ds.records()[static_cast<size_t>(i)].pose.visible) val_visible.push_back(i);

  FcnModel model = FcnModel::init(model_cfg, cfg.seed);
  Adam opt(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  HeadingMode sel_mode = heading_mode_from_name(cfg.decode_mode);

  const int batch = cfg.batch_size;
  const int workers = std::max(1, cfg.workers);
  std::vector<ModelGrads<float>> slot_grads(static_cast<size_t>(batch));
  for (auto& g : slot_grads) g = model.make_grads();
  std::vector<double> slot_loss(static_cast<size_t>(batch), 0.0);
  std::vector<FcnWorkspace<float>> ws(static_cast<size_t>(workers));
  ModelGrads<float> total = model.make_grads();

  std::mt19937_64 batch_rng = make_rng(cfg.seed, 0xBA7C4ULL);
  std::uniform_int_distribution<long> pick(0, source.size() - 1);

  TrainOutcome out;
  out.metrics_csv = run_dir / "metrics.csv";
  out.best_checkpoint = run_dir / "ckpt_best.bin";
  out.last_checkpoint = run_dir / "ckpt_last.bin";
  std::ofstream metrics(out.metrics_csv);
  metrics << "step,loss,val_E_uv,val_E_psi\n";
  double last_val_euv = std::numeric_limits<double>::quiet_NaN();
  double last_val_epsi = std::numeric_limits<double>::quiet_NaN();

  auto run_validation = [&](long step) {
    if (val_visible.empty()) return;
    EvalResult r = evaluate_model(model, ds, Split::val, sel_mode, workers);
    last_val_euv = r.median_e_uv;
    last_val_epsi = r.median_e_psi_deg;
    if (r.median_e_uv < out.best_val_e_uv) {
      out.best_val_e_uv = r.median_e_uv;
      out.best_val_e_psi = r.median_e_psi_deg;
      out.best_step = static_cast<uint64_t>(step);
      model.save(out.best_checkpoint, static_cast<uint64_t>(step));
    }
  };

  for (long step = 1; step <= cfg.steps; ++step) {
    std::vector<long> chosen(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) chosen[static_cast<size_t>(b)] = pick(batch_rng);

    parallel_for_wid(batch, workers, [&](long b, int wid) {
      slot_grads[static_cast<size_t>(b)].zero();
      FcnWorkspace<float>& w = ws[static_cast<size_t>(wid)];
      long src = chosen[static_cast<size_t>(b)];
      if (kind == TrainKind::pretext) {
        TrainSample ts = view.get(src);
        OutputMaps maps = model.forward(ts.image, w);
        MapsGrad<float> mg = loss_gradients(maps, ts.leds, cfg.loss);
        slot_loss[static_cast<size_t>(b)] = mg.loss;
        model.backward(maps, mg, w, slot_grads[static_cast<size_t>(b)]);
      } else {
        const SampleRecord& rec = ds.records()[static_cast<size_t>(source.indices[static_cast<size_t>(src)])];
        Image img = ds.load_image(rec);
        OutputMaps maps = model.forward(img, w);
        MapsGrad<float> mg = supervised_loss_gradients(maps, rec.pose, rec.leds, cfg.loss.eps_bce);
        slot_loss[static_cast<size_t>(b)] = mg.loss;
        model.backward(maps, mg, w, slot_grads[static_cast<size_t>(b)]);
      }
    });

    total.zero();
    double loss = 0.0;
    for (int b = 0; b < batch; ++b) {
      total.add(slot_grads[static_cast<size_t>(b)]);
      loss += slot_loss[static_cast<size_t>(b)];
    }
    loss /= batch;
    total.scale(1.0f / static_cast<float>(batch));

    ensure_finite_loss(loss, step, train_kind_name(kind), cfg.seed);

    opt.step(model.param_tensors(), model.grad_tensors(total), cfg.lr_at(step));

    if (step % cfg.val_every == 0 || step == cfg.steps) run_validation(step);
    metrics << step << "," << loss << "," << last_val_euv << "," << last_val_epsi << "\n";
    out.final_loss = loss;
  }
  metrics.close();

  model.save(out.last_checkpoint, static_cast<uint64_t>(cfg.steps));
  if (!std::filesystem::exists(out.best_checkpoint)) {
    // no validation visible samples: keep the final parameters as "best"
    model.save(out.best_checkpoint, static_cast<uint64_t>(cfg.steps));
    out.best_step = static_cast<uint64_t>(cfg.steps);
  }

  nlohmann::json summary{{"kind", train_kind_name(kind)},
                         {"best_step", out.best_step},
                         {"best_val_e_uv", out.best_val_e_uv},
                         {"best_val_e_psi", out.best_val_e_psi},
                         {"final_loss", out.final_loss},
                         {"steps", cfg.steps},
                         {"seed", cfg.seed}};
  std::ofstream sf(run_dir / "summary.json");
  sf << summary.dump(2) << "\n";
  return out;
}

inline TrainOutcome train_pretext(const Dataset& ds, const ModelConfig& m, const TrainConfig& c,
                                  const std::filesystem::path& run_dir) {
  return train_model(TrainKind::pretext, ds, m, c, run_dir);
}
inline TrainOutcome train_upperbound(const Dataset& ds, const ModelConfig& m, const TrainConfig& c,
                                     const std::filesystem::path& run_dir) {
  return train_model(TrainKind::upperbound, ds, m, c, run_dir);
}

// Mean position and circular-mean heading over visible training samples.
inline DummyModel fit_dummy(const Dataset& ds) {
  double su = 0, sv = 0;
  std::vector<double> psis;
  long n = 0;
  for (long i : ds.split_indices(Split::train)) {
    const SampleRecord& r = ds.records()[static_cast<size_t>(i)];
    if (!r.pose.visible) continue;
    su += r.pose.u;
    sv += r.pose.v;
    psis.push_back(r.pose.psi);
    ++n;
  }
  if (n == 0) throw train_error("fit_dummy: no visible training samples");
  DummyModel d;
  d.mean_u = su / static_cast<double>(n);
  d.mean_v = sv / static_cast<double>(n);
  d.psi = circular_mean(psis.begin(), psis.end());
  return d;
}

// 100-step moving average of the loss column at a given step (inclusive),
// read back from a metrics.csv produced by train_model.
inline double loss_moving_average(const std::filesystem::path& metrics_csv, long at_step,
                                  long window = 100) {
  std::ifstream in(metrics_csv);
  if (!in) throw eval_error("missing metrics csv: " + metrics_csv.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> losses;
  while (std::getline(in, line)) {
    size_t c1 = line.find(',');
    size_t c2 = line.find(',', c1 + 1);
    losses.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
  }
  if (at_step > static_cast<long>(losses.size())) at_step = static_cast<long>(losses.size());
  long lo = std::max<long>(0, at_step - window);
  double acc = 0;
  for (long i = lo; i < at_step; ++i) acc += losses[static_cast<size_t>(i)];
  return acc / static_cast<double>(at_step - lo);
}

}  // namespace ledpose
