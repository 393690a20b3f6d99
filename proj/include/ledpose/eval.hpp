#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ledpose/angles.hpp"
#include "ledpose/dataset.hpp"
#include "ledpose/decoder.hpp"
#include "ledpose/errors.hpp"
#include "ledpose/model.hpp"
#include "ledpose/parallel.hpp"

namespace ledpose {

// Median with the lower-middle element on even counts; keeps values exact in
// integer-pixel regimes.
inline double median_lower(std::vector<double> v) {
  if (v.empty()) throw eval_error("median of empty list");
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

struct SampleError {
  double e_uv = 0.0;       // pixels
  double e_psi_deg = 0.0;  // degrees
};

inline SampleError pose_error(const PoseEstimate& est, const GroundTruthPose& gt) {
  SampleError e;
  double dx = est.u - gt.u, dy = est.v - gt.v;
  e.e_uv = std::sqrt(dx * dx + dy * dy);
  e.e_psi_deg = rad_to_deg(angular_error(est.psi, gt.psi));
  return e;
}

struct EvalResult {
  double median_e_uv = 0.0;
  double median_e_psi_deg = 0.0;
  long n_visible = 0;
  std::vector<SampleError> errors;  // per visible sample, in split order
};

inline EvalResult summarize_errors(std::vector<SampleError> errors) {
  if (errors.empty()) throw eval_error("evaluate: no visible samples in split");
  EvalResult r;
  std::vector<double> euv, epsi;
  for (const auto& e : errors) {
    euv.push_back(e.e_uv);
    epsi.push_back(e.e_psi_deg);
  }
  r.median_e_uv = median_lower(euv);
  r.median_e_psi_deg = median_lower(epsi);
  r.n_visible = static_cast<long>(errors.size());
  r.errors = std::move(errors);
  return r;
}

// Metrics over the visible samples of a split, for a model checkpoint.
inline EvalResult evaluate_model(const FcnModel& model, const Dataset& ds, Split split,
                                 HeadingMode mode, int workers = 1) {
  std::vector<long> vis;
  for (long i : ds.split_indices(split))
    if (ds.records()[static_cast<size_t>(i)].pose.visible) vis.push_back(i);
  if (vis.empty()) throw eval_error("evaluate: no visible samples in split");

  std::vector<SampleError> errors(vis.size());
  std::vector<FcnWorkspace<float>> ws(static_cast<size_t>(std::max(1, workers)));
  parallel_for_wid(static_cast<long>(vis.size()), workers, [&](long k, int wid) {
    const SampleRecord& rec = ds.records()[static_cast<size_t>(vis[static_cast<size_t>(k)])];
    Image img = ds.load_image(rec);
    OutputMaps maps = model.forward(img, ws[static_cast<size_t>(wid)]);
    PoseEstimate est = decode(maps, mode);
    errors[static_cast<size_t>(k)] = pose_error(est, rec.pose);
  });
  return summarize_errors(std::move(errors));
}

// The label-free baseline: constant mean position and circular-mean heading.
struct DummyModel {
  double mean_u = 0.0;
  double mean_v = 0.0;
  double psi = 0.0;

  PoseEstimate predict() const { return PoseEstimate{mean_u, mean_v, psi, 1.0}; }

  nlohmann::json to_json() const { return {{"mean_u", mean_u}, {"mean_v", mean_v}, {"psi", psi}}; }
  static DummyModel from_json(const nlohmann::json& j) {
    return DummyModel{j.at("mean_u").get<double>(), j.at("mean_v").get<double>(),
                      j.at("psi").get<double>()};
  }
};

inline EvalResult evaluate_dummy(const DummyModel& dummy, const Dataset& ds, Split split) {
  std::vector<SampleError> errors;
  for (long i : ds.split_indices(split)) {
    const SampleRecord& rec = ds.records()[static_cast<size_t>(i)];
    if (!rec.pose.visible) continue;
    errors.push_back(pose_error(dummy.predict(), rec.pose));
  }
  return summarize_errors(std::move(errors));
}

// Fraction of visible samples whose decoded position lands inside the robot
// box (half-side = apparent radius).
inline double detection_audit(const FcnModel& model, const Dataset& ds, Split split, int workers = 1) {
  std::vector<long> vis;
  for (long i : ds.split_indices(split))
    if (ds.records()[static_cast<size_t>(i)].pose.visible) vis.push_back(i);
  if (vis.empty()) return 0.0;
  std::vector<uint8_t> hit(vis.size(), 0);
  std::vector<FcnWorkspace<float>> ws(static_cast<size_t>(std::max(1, workers)));
  parallel_for_wid(static_cast<long>(vis.size()), workers, [&](long k, int wid) {
    const SampleRecord& rec = ds.records()[static_cast<size_t>(vis[static_cast<size_t>(k)])];
    OutputMaps maps = model.forward(ds.load_image(rec), ws[static_cast<size_t>(wid)]);
    PoseEstimate est = decode_position(maps.p, maps.geom);
    double s = rec.pose.scale;
    hit[static_cast<size_t>(k)] = (std::abs(est.u - rec.pose.u) <= s && std::abs(est.v - rec.pose.v) <= s) ? 1 : 0;
  });
  long hits = 0;
  for (uint8_t h : hit) hits += h;
  return static_cast<double>(hits) / static_cast<double>(vis.size());
}

// ---- report assembly -----------------------------------------------------

// One table row: a model under one decode mode, aggregated across replicas.
struct ReportRow {
  std::string model;        // "Dummy Mean", "Pretext", "Upperbound"
  std::string decode_mode;  // "paper-literal", "vector", or "n/a"
  std::vector<double> e_uv_replicas;
  std::vector<double> e_psi_replicas;
  double pooled_e_uv = std::numeric_limits<double>::quiet_NaN();
  double pooled_e_psi = std::numeric_limits<double>::quiet_NaN();
  long n_visible = 0;

  double mean_e_uv() const { return mean(e_uv_replicas); }
  double mean_e_psi() const { return mean(e_psi_replicas); }
  double ci_e_uv() const { return ci_half_width(e_uv_replicas); }
  double ci_e_psi() const { return ci_half_width(e_psi_replicas); }

  static double mean(const std::vector<double>& v) {
    if (v.empty()) throw eval_error("report row without replicas");
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
  // 95% normal-approximation confidence interval half-width: 1.960 * sd / sqrt(k).
  static double ci_half_width(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v), acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    double sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
    return 1.960 * sd / std::sqrt(static_cast<double>(v.size()));
  }
};

struct ReportMeta {
  std::string dataset_id;
  std::string config_hash;
};

inline std::string format_row_txt(const ReportRow& r) {
  std::ostringstream os;
  os << std::left << std::setw(12) << r.model << std::setw(15) << r.decode_mode << std::right
     << std::fixed << std::setprecision(1) << std::setw(8) << r.mean_e_uv() << " +-" << std::setw(6)
     << r.ci_e_uv() << std::setw(8) << r.mean_e_psi() << " +-" << std::setw(6) << r.ci_e_psi()
     << std::setw(8) << r.n_visible;
  return os.str();
}

inline void write_report_txt(const std::vector<ReportRow>& rows, const ReportMeta& meta,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "Median image-space position error E_uv [px] and heading error E_psi [deg]\n";
  out << "on visible test samples; mean +- 95% CI across replicas.\n";
  out << "dataset: " << meta.dataset_id << "  config: " << meta.config_hash << "\n\n";
  out << std::left << std::setw(12) << "Model" << std::setw(15) << "Decode" << std::right
      << std::setw(8) << "E_uv" << std::setw(9) << "CI" << std::setw(8) << "E_psi" << std::setw(9)
      << "CI" << std::setw(8) << "n_vis" << "\n";
  for (const auto& r : rows) out << format_row_txt(r) << "\n";
}

inline void write_report_csv(const std::vector<ReportRow>& rows, const ReportMeta& meta,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "model,decode_mode,e_uv_mean,e_uv_ci95,e_psi_mean,e_psi_ci95,e_uv_pooled,e_psi_pooled,"
         "replicas,n_visible,dataset,config_hash\n";
  for (const auto& r : rows) {
    out << r.model << "," << r.decode_mode << "," << r.mean_e_uv() << "," << r.ci_e_uv() << ","
        << r.mean_e_psi() << "," << r.ci_e_psi() << "," << r.pooled_e_uv << "," << r.pooled_e_psi
        << "," << r.e_uv_replicas.size() << "," << r.n_visible << "," << meta.dataset_id << ","
        << meta.config_hash << "\n";
  }
}

// Point plot of E_uv with 95% CI whiskers, one row per table entry.
inline void write_report_svg(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
  const int width = 560, row_h = 34, top = 48, left = 150, plot_w = 360;
  int height = top + row_h * static_cast<int>(rows.size()) + 40;
  double max_val = 1.0;
  for (const auto& r : rows) max_val = std::max(max_val, r.mean_e_uv() + r.ci_e_uv());
  double sx = plot_w / (max_val * 1.1);

  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "' font-family='sans-serif' font-size='12'>\n";
  out << "<text x='" << left << "' y='18'>E_uv [px], point = replica mean, whiskers = 95% CI</text>\n";
  // axis
  int axis_y = top + row_h * static_cast<int>(rows.size());
  out << "<line x1='" << left << "' y1='" << axis_y << "' x2='" << left + plot_w << "' y2='" << axis_y
      << "' stroke='black'/>\n";
  int ticks = 6;
  for (int t = 0; t <= ticks; ++t) {
    double val = max_val * 1.1 * t / ticks;
    int x = left + static_cast<int>(val * sx);
    out << "<line x1='" << x << "' y1='" << axis_y << "' x2='" << x << "' y2='" << axis_y + 5
        << "' stroke='black'/>\n";
    out << "<text x='" << x - 8 << "' y='" << axis_y + 18 << "'>" << std::fixed
        << std::setprecision(0) << val << "</text>\n";
  }
  const char* colors[] = {"#888888", "#0072B2", "#CA1963", "#E69F00", "#009E73", "#56B4E9"};
  for (size_t i = 0; i < rows.size(); ++i) {
    const ReportRow& r = rows[i];
    int cy = top + row_h * static_cast<int>(i) + row_h / 2;
    const char* col = colors[i % 6];
    out << "<text x='8' y='" << cy + 4 << "'>" << r.model << " (" << r.decode_mode << ")</text>\n";
    double m = r.mean_e_uv(), ci = r.ci_e_uv();
    int x0 = left + static_cast<int>((m - ci) * sx);
    int x1 = left + static_cast<int>((m + ci) * sx);
    int xm = left + static_cast<int>(m * sx);
    out << "<line x1='" << x0 << "' y1='" << cy << "' x2='" << x1 << "' y2='" << cy << "' stroke='"
        << col << "'/>\n";
    out << "<line x1='" << x0 << "' y1='" << cy - 5 << "' x2='" << x0 << "' y2='" << cy + 5
        << "' stroke='" << col << "'/>\n";
    out << "<line x1='" << x1 << "' y1='" << cy - 5 << "' x2='" << x1 << "' y2='" << cy + 5
        << "' stroke='" << col << "'/>\n";
    out << "<circle cx='" << xm << "' cy='" << cy << "' r='4' fill='" << col << "'/>\n";
  }
  out << "</svg>\n";
}

// Canonical row order: Dummy Mean, Pretext, Upperbound; then by decode mode.
inline void sort_report_rows(std::vector<ReportRow>& rows) {
  auto rank = [](const std::string& m) {
    if (m == "Dummy Mean") return 0;
    if (m == "Pretext") return 1;
    if (m == "Upperbound") return 2;
    return 3;
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const ReportRow& a, const ReportRow& b) {
    if (rank(a.model) != rank(b.model)) return rank(a.model) < rank(b.model);
    return a.decode_mode < b.decode_mode;
  });
}

inline void make_report(std::vector<ReportRow> rows, const ReportMeta& meta,
                        const std::filesystem::path& out_dir) {
  if (rows.empty()) throw eval_error("make_report: no rows");
  sort_report_rows(rows);
  std::filesystem::create_directories(out_dir);
  write_report_txt(rows, meta, out_dir / "report.txt");
  write_report_csv(rows, meta, out_dir / "report.csv");
  write_report_svg(rows, out_dir / "table_plot.svg");
}

}  // namespace ledpose
