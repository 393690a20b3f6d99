#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ledpose/errors.hpp"
#include "ledpose/image.hpp"
#include "ledpose/loss.hpp"
#include "ledpose/maps.hpp"
#include "ledpose/rng.hpp"

namespace ledpose {

template <typename T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, T{}) {}

  T& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
  const T& at(int ch, int y, int x) const { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
  size_t size() const { return v.size(); }
};

struct ModelConfig {
  std::vector<int> stage_channels{12, 24, 40};  // one stride-2 conv per entry
  int trunk_channels = 56;                      // stride-1 dilated conv at grid resolution
  int trunk_dilation = 2;
  int n_leds = 4;
  double leaky_slope = 0.1;
  uint64_t seed = 1;

  int downsampling() const { return 1 << static_cast<int>(stage_channels.size()); }

  // Square receptive field, in input pixels, of one output cell.
  int receptive_field() const {
    int rf = 1, jump = 1;
    for (size_t i = 0; i < stage_channels.size(); ++i) {
      rf += 2 * jump;
      jump *= 2;
    }
    rf += 2 * trunk_dilation * jump;
    return rf;
  }

  void validate() const {
    if (stage_channels.empty() || stage_channels.size() > 6)
      throw config_error("model: stage_channels must have 1..6 entries");
    for (int c : stage_channels)
      if (c < 1 || c > 512) throw config_error("model: stage channel width out of range");
    if (trunk_channels < 1 || trunk_channels > 1024) throw config_error("model: bad trunk_channels");
    if (trunk_dilation < 1 || trunk_dilation > 8) throw config_error("model: bad trunk_dilation");
    if (n_leds < 2 || n_leds > 32) throw config_error("model: n_leds out of range");
    if (leaky_slope < 0 || leaky_slope >= 1) throw config_error("model: bad leaky_slope");
  }

  nlohmann::json to_json() const {
    return {{"stage_channels", stage_channels}, {"trunk_channels", trunk_channels},
            {"trunk_dilation", trunk_dilation}, {"n_leds", n_leds},
            {"leaky_slope", leaky_slope},       {"seed", seed}};
  }
  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    if (j.contains("stage_channels")) c.stage_channels = j.at("stage_channels").get<std::vector<int>>();
    if (j.contains("trunk_channels")) c.trunk_channels = j.at("trunk_channels").get<int>();
    if (j.contains("trunk_dilation")) c.trunk_dilation = j.at("trunk_dilation").get<int>();
    if (j.contains("n_leds")) c.n_leds = j.at("n_leds").get<int>();
    if (j.contains("leaky_slope")) c.leaky_slope = j.at("leaky_slope").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    c.validate();
    return c;
  }
};

namespace detail {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using EMatRowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct ConvLayer {
  int in_c = 0, out_c = 0, k = 3, stride = 1, dilation = 1, pad = 1;
  std::vector<T> weight;  // [out_c][in_c * k * k]
  std::vector<T> bias;    // [out_c]

  int patch() const { return in_c * k * k; }
  int out_dim(int in) const { return (in + 2 * pad - ((k - 1) * dilation + 1)) / stride + 1; }

  void init(std::mt19937_64& rng) {
    weight.assign(static_cast<size_t>(out_c) * patch(), T{});
    bias.assign(static_cast<size_t>(out_c), T{});
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / patch()));
    for (auto& x : weight) x = static_cast<T>(dist(rng));
  }

  void im2col(const Tensor<T>& x, EMat<T>& cols, int oh, int ow) const {
    cols.setZero(patch(), static_cast<Eigen::Index>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T* col = cols.col(static_cast<Eigen::Index>(oy) * ow + ox).data();
        int q = 0;
        for (int ic = 0; ic < in_c; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            int iy = oy * stride - pad + ky * dilation;
            if (iy < 0 || iy >= x.h) {
              q += k;
              continue;
            }
            const T* row = &x.v[(static_cast<size_t>(ic) * x.h + iy) * x.w];
            for (int kx = 0; kx < k; ++kx, ++q) {
              int ix = ox * stride - pad + kx * dilation;
              if (ix >= 0 && ix < x.w) col[q] = row[ix];
            }
          }
        }
      }
    }
  }

  void col2im(const EMat<T>& dcols, Tensor<T>& dx, int oh, int ow) const {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T* col = dcols.col(static_cast<Eigen::Index>(oy) * ow + ox).data();
        int q = 0;
        for (int ic = 0; ic < in_c; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            int iy = oy * stride - pad + ky * dilation;
            if (iy < 0 || iy >= dx.h) {
              q += k;
              continue;
            }
            T* row = &dx.v[(static_cast<size_t>(ic) * dx.h + iy) * dx.w];
            for (int kx = 0; kx < k; ++kx, ++q) {
              int ix = ox * stride - pad + kx * dilation;
              if (ix >= 0 && ix < dx.w) row[ix] += col[q];
            }
          }
        }
      }
    }
  }

  // y = W * cols + b; cols is cached by the caller for the backward pass.
  void forward(const Tensor<T>& x, Tensor<T>& y, EMat<T>& cols) const {
    int oh = out_dim(x.h), ow = out_dim(x.w);
    y = Tensor<T>(out_c, oh, ow);
    im2col(x, cols, oh, ow);
    Eigen::Map<const EMatRowMajor<T>> wm(weight.data(), out_c, patch());
    Eigen::Map<EMatRowMajor<T>> ym(y.v.data(), out_c, static_cast<Eigen::Index>(oh) * ow);
    ym.noalias() = wm * cols;
    for (int oc = 0; oc < out_c; ++oc) ym.row(oc).array() += bias[static_cast<size_t>(oc)];
  }

  void backward(const EMat<T>& cols, const Tensor<T>& dy, Tensor<T>& dx, std::vector<T>& dweight,
                std::vector<T>& dbias, bool need_dx) const {
    int oh = dy.h, ow = dy.w;
    Eigen::Map<const EMatRowMajor<T>> dym(dy.v.data(), out_c, static_cast<Eigen::Index>(oh) * ow);
    Eigen::Map<EMatRowMajor<T>> dwm(dweight.data(), out_c, patch());
    dwm.noalias() += dym * cols.transpose();
    for (int oc = 0; oc < out_c; ++oc) dbias[static_cast<size_t>(oc)] += dym.row(oc).sum();
    if (!need_dx) return;
    Eigen::Map<const EMatRowMajor<T>> wm(weight.data(), out_c, patch());
    EMat<T> dcols = wm.transpose() * dym;
    col2im(dcols, dx, oh, ow);
  }
};

}  // namespace detail

// Per-layer parameter gradients, shaped like the model's layers.
template <typename T>
struct ModelGrads {
  std::vector<std::vector<T>> dweight;
  std::vector<std::vector<T>> dbias;

  void add(const ModelGrads& o) {
    for (size_t i = 0; i < dweight.size(); ++i) {
      for (size_t q = 0; q < dweight[i].size(); ++q) dweight[i][q] += o.dweight[i][q];
      for (size_t q = 0; q < dbias[i].size(); ++q) dbias[i][q] += o.dbias[i][q];
    }
  }
  void scale(T a) {
    for (auto& w : dweight)
      for (auto& x : w) x *= a;
    for (auto& b : dbias)
      for (auto& x : b) x *= a;
  }
  void zero() {
    for (auto& w : dweight) std::fill(w.begin(), w.end(), T{});
    for (auto& b : dbias) std::fill(b.begin(), b.end(), T{});
  }
};

// Everything forward() cached that backward() needs, per sample. Reusable
// across calls; each worker owns one.
template <typename T>
struct FcnWorkspace {
  std::vector<Tensor<T>> acts;              // acts[0] = padded input, acts[i+1] = conv i output
  std::vector<detail::EMat<T>> cols;        // im2col buffer per conv
  Tensor<T> head;                           // raw head logits
  detail::EMat<T> head_cols;
};

// Fully convolutional network: per stride-2 stage one 3x3 conv + leaky ReLU,
// one dilated 3x3 trunk conv at grid resolution, and a 1x1 head producing
// (P, S, C, L_1..L_n) with sigmoid/tanh/sigmoid squashing.
template <typename T>
class FcnModelT {
 public:
  FcnModelT() = default;

  static FcnModelT init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    FcnModelT m;
    m.cfg_ = cfg;
    m.cfg_.seed = seed;
    std::mt19937_64 rng = make_rng(seed, 0xC0DEC0DEULL);
    int in_c = 3;
    for (int oc : cfg.stage_channels) {
      detail::ConvLayer<T> layer;
      layer.in_c = in_c;
      layer.out_c = oc;
      layer.k = 3;
      layer.stride = 2;
      layer.pad = 1;
      layer.init(rng);
      m.layers_.push_back(std::move(layer));
      in_c = oc;
    }
    detail::ConvLayer<T> trunk;
    trunk.in_c = in_c;
    trunk.out_c = cfg.trunk_channels;
    trunk.k = 3;
    trunk.stride = 1;
    trunk.dilation = cfg.trunk_dilation;
    trunk.pad = cfg.trunk_dilation;
    trunk.init(rng);
    m.layers_.push_back(std::move(trunk));

    detail::ConvLayer<T> head;
    head.in_c = cfg.trunk_channels;
    head.out_c = 3 + cfg.n_leds;
    head.k = 1;
    head.stride = 1;
    head.pad = 0;
    head.init(rng);
    m.head_ = std::move(head);
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  int downsampling() const { return cfg_.downsampling(); }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n + head_.weight.size() + head_.bias.size();
  }

  ModelGrads<T> make_grads() const {
    ModelGrads<T> g;
    for (const auto& l : layers_) {
      g.dweight.emplace_back(l.weight.size(), T{});
      g.dbias.emplace_back(l.bias.size(), T{});
    }
    g.dweight.emplace_back(head_.weight.size(), T{});
    g.dbias.emplace_back(head_.bias.size(), T{});
    return g;
  }

  // Parameter access for the optimizer: layer weights then biases, head last.
  std::vector<std::vector<T>*> param_tensors() {
    std::vector<std::vector<T>*> out;
    for (auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    out.push_back(&head_.weight);
    out.push_back(&head_.bias);
    return out;
  }
  std::vector<std::vector<T>*> grad_tensors(ModelGrads<T>& g) const {
    std::vector<std::vector<T>*> out;
    for (size_t i = 0; i < g.dweight.size(); ++i) {
      out.push_back(&g.dweight[i]);
      out.push_back(&g.dbias[i]);
    }
    return out;
  }

  OutputMapsT<T> forward(const Image& img, FcnWorkspace<T>& ws) const {
    if (img.w < 32 || img.h < 32) throw domain_error("forward: image below 32x32");
    const int d = downsampling();
    const int pw = (img.w + d - 1) / d * d;
    const int ph = (img.h + d - 1) / d * d;

    ws.acts.resize(layers_.size() + 1);
    ws.cols.resize(layers_.size());

    // center pixel values; right/bottom padding stays zero
    Tensor<T>& input = ws.acts[0];
    input = Tensor<T>(3, ph, pw);
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        size_t i = img.idx(x, y);
        input.at(0, y, x) = static_cast<T>(img.px[i] - 0.5f);
        input.at(1, y, x) = static_cast<T>(img.px[i + 1] - 0.5f);
        input.at(2, y, x) = static_cast<T>(img.px[i + 2] - 0.5f);
      }

    const T slope = static_cast<T>(cfg_.leaky_slope);
    for (size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].forward(ws.acts[i], ws.acts[i + 1], ws.cols[i]);
      for (auto& x : ws.acts[i + 1].v)
        if (x < T{}) x *= slope;
    }
    head_.forward(ws.acts.back(), ws.head, ws.head_cols);

    return squash(ws.head, img.w, img.h);
  }

  OutputMapsT<T> forward(const Image& img) const {
    FcnWorkspace<T> ws;
    return forward(img, ws);
  }

  // Backward from gradients w.r.t. the squashed maps. Accumulates into g.
  void backward(const OutputMapsT<T>& maps, const MapsGrad<T>& mg, FcnWorkspace<T>& ws,
                ModelGrads<T>& g) const {
    const int gw = maps.w(), gh = maps.h();
    Tensor<T> dhead(head_.out_c, gh, gw);
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) {
        T p = maps.p.at(x, y);
        dhead.at(0, y, x) = mg.dp.at(x, y) * p * (static_cast<T>(1) - p);
        T s = maps.s.at(x, y);
        dhead.at(1, y, x) = mg.ds.at(x, y) * (static_cast<T>(1) - s * s);
        T c = maps.c.at(x, y);
        dhead.at(2, y, x) = mg.dc.at(x, y) * (static_cast<T>(1) - c * c);
        for (int l = 0; l < cfg_.n_leds; ++l) {
          T q = maps.led[static_cast<size_t>(l)].at(x, y);
          dhead.at(3 + l, y, x) = mg.dled[static_cast<size_t>(l)].at(x, y) * q * (static_cast<T>(1) - q);
        }
      }

    size_t li = layers_.size();
    Tensor<T> dx(ws.acts.back().c, ws.acts.back().h, ws.acts.back().w);
    head_.backward(ws.head_cols, dhead, dx, g.dweight[li], g.dbias[li], true);

    const T slope = static_cast<T>(cfg_.leaky_slope);
    for (size_t i = layers_.size(); i-- > 0;) {
      // leaky ReLU derivative from the post-activation sign
      Tensor<T>& y = ws.acts[i + 1];
      for (size_t q = 0; q < y.v.size(); ++q)
        if (y.v[q] < T{}) dx.v[q] *= slope;
      Tensor<T> dprev;
      bool need_dx = i > 0;
      if (need_dx) dprev = Tensor<T>(ws.acts[i].c, ws.acts[i].h, ws.acts[i].w);
      layers_[i].backward(ws.cols[i], dx, dprev, g.dweight[i], g.dbias[i], need_dx);
      dx = std::move(dprev);
    }
  }

  void save(const std::filesystem::path& base, uint64_t step) const {
    std::ofstream out(base, std::ios::binary);
    if (!out) throw train_error("cannot write checkpoint: " + base.string());
    const char magic[4] = {'L', 'P', 'F', 'C'};
    out.write(magic, 4);
    uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    auto dump = [&out](const std::vector<T>& v) {
      uint64_t n = v.size();
      out.write(reinterpret_cast<const char*>(&n), 8);
      std::vector<float> f(v.begin(), v.end());
      out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * 4));
    };
    uint64_t tensors = 2 * (layers_.size() + 1);
    out.write(reinterpret_cast<const char*>(&tensors), 8);
    for (const auto& l : layers_) {
      dump(l.weight);
      dump(l.bias);
    }
    dump(head_.weight);
    dump(head_.bias);

    nlohmann::json side{{"model", cfg_.to_json()}, {"seed", cfg_.seed}, {"step", step}};
    std::ofstream sf(base.string() + ".json");
    sf << side.dump(2) << "\n";
  }

  static FcnModelT load(const std::filesystem::path& base, uint64_t* step_out = nullptr) {
    std::ifstream sf(base.string() + ".json");
    if (!sf) throw train_error("missing checkpoint sidecar: " + base.string() + ".json");
    nlohmann::json side;
    sf >> side;
    ModelConfig cfg = ModelConfig::from_json(side.at("model"));
    FcnModelT m = init(cfg, side.at("seed").get<uint64_t>());
    if (step_out) *step_out = side.value("step", 0ULL);

    std::ifstream in(base, std::ios::binary);
    if (!in) throw train_error("missing checkpoint blob: " + base.string());
    char magic[4];
    in.read(magic, 4);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (std::string(magic, 4) != "LPFC" || version != 1)
      throw train_error("bad checkpoint header: " + base.string());
    uint64_t tensors = 0;
    in.read(reinterpret_cast<char*>(&tensors), 8);
    auto slurp = [&in, &base](std::vector<T>& v) {
      uint64_t n = 0;
      in.read(reinterpret_cast<char*>(&n), 8);
      if (n != v.size()) throw train_error("checkpoint shape mismatch: " + base.string());
      std::vector<float> f(n);
      in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(n * 4));
      if (!in) throw train_error("truncated checkpoint: " + base.string());
      std::copy(f.begin(), f.end(), v.begin());
    };
    if (tensors != 2 * (m.layers_.size() + 1)) throw train_error("checkpoint tensor count mismatch");
    for (auto& l : m.layers_) {
      slurp(l.weight);
      slurp(l.bias);
    }
    slurp(m.head_.weight);
    slurp(m.head_.bias);
    return m;
  }

 private:
  OutputMapsT<T> squash(const Tensor<T>& head, int image_w, int image_h) const {
    const int gw = head.w, gh = head.h;
    OutputMapsT<T> maps = OutputMapsT<T>::zeros(gw, gh, cfg_.n_leds,
                                                MapGeometry{downsampling(), image_w, image_h});
    auto sigmoid = [](T z) { return static_cast<T>(1) / (static_cast<T>(1) + std::exp(-z)); };
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) {
        maps.p.at(x, y) = sigmoid(head.at(0, y, x));
        maps.s.at(x, y) = std::tanh(head.at(1, y, x));
        maps.c.at(x, y) = std::tanh(head.at(2, y, x));
        for (int l = 0; l < cfg_.n_leds; ++l)
          maps.led[static_cast<size_t>(l)].at(x, y) = sigmoid(head.at(3 + l, y, x));
      }
    return maps;
  }

  ModelConfig cfg_;
  std::vector<detail::ConvLayer<T>> layers_;
  detail::ConvLayer<T> head_;
};

using FcnModel = FcnModelT<float>;

}  // namespace ledpose
