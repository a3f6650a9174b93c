#include "emlang/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "emlang/metrics.hpp"

namespace emlang {

namespace {

struct MetricDef {
  std::string name;
  double (*get)(const RunRecord&);
  bool lower_is_better;
};

const std::vector<MetricDef>& metric_defs() {
  static const std::vector<MetricDef> defs = {
      {"acc_train", [](const RunRecord& r) { return r.metrics->acc_train; }, false},
      {"acc_val", [](const RunRecord& r) { return r.metrics->acc_val; }, false},
      {"acc_test", [](const RunRecord& r) { return r.metrics->acc_test; }, false},
      {"precision", [](const RunRecord& r) { return r.metrics->precision; }, false},
      {"recall", [](const RunRecord& r) { return r.metrics->recall; }, false},
      {"entropy",
       [](const RunRecord& r) { return r.metrics->residual_entropy; }, true},
  };
  return defs;
}

using CellKey = std::pair<int, std::int64_t>;  // (bits, param_count)

struct Grid {
  std::vector<int> bits;                 // sorted ascending
  std::vector<std::int64_t> params;      // sorted ascending
  std::map<CellKey, std::vector<const RunRecord*>> cells;
};

Grid build_grid(const std::vector<const RunRecord*>& finals) {
  Grid grid;
  std::set<int> bits;
  std::set<std::int64_t> params;
  for (const RunRecord* r : finals) {
    bits.insert(r->latent_bits);
    params.insert(r->param_count);
    grid.cells[{r->latent_bits, r->param_count}].push_back(r);
  }
  grid.bits.assign(bits.begin(), bits.end());
  grid.params.assign(params.begin(), params.end());
  return grid;
}

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

void write_grid_csv(const std::filesystem::path& path, const Grid& grid,
                    const MetricDef& metric, const std::string& agg) {
  std::ofstream out(path);
  if (!out) throw io_error("report: cannot write " + path.string());
  out << "bits\\params";
  for (std::int64_t p : grid.params) out << "," << p;
  out << "\n";
  for (int b : grid.bits) {
    out << b;
    for (std::int64_t p : grid.params) {
      out << ",";
      const auto it = grid.cells.find({b, p});
      if (it == grid.cells.end()) {
        out << "";
        continue;
      }
      std::vector<double> values;
      for (const RunRecord* r : it->second) values.push_back(metric.get(*r));
      double v = 0.0;
      if (agg == "best")
        v = metric.lower_is_better
                ? *std::min_element(values.begin(), values.end())
                : *std::max_element(values.begin(), values.end());
      else if (agg == "worst")
        v = metric.lower_is_better
                ? *std::max_element(values.begin(), values.end())
                : *std::min_element(values.begin(), values.end());
      else if (agg == "mean") {
        for (double x : values) v += x;
        v /= static_cast<double>(values.size());
      } else {  // std
        double mean = 0.0;
        for (double x : values) mean += x;
        mean /= static_cast<double>(values.size());
        for (double x : values) v += (x - mean) * (x - mean);
        v = std::sqrt(v / static_cast<double>(values.size()));
      }
      out << format_value(v);
    }
    out << "\n";
  }
}

void write_efficacy_csv(const std::filesystem::path& path, const Grid& grid,
                        double threshold) {
  std::ofstream out(path);
  if (!out) throw io_error("report: cannot write " + path.string());
  out << "bits\\params";
  for (std::int64_t p : grid.params) out << "," << p;
  out << "\n";
  for (int b : grid.bits) {
    out << b;
    for (std::int64_t p : grid.params) {
      out << ",";
      const auto it = grid.cells.find({b, p});
      if (it == grid.cells.end()) continue;
      std::vector<double> accs;
      for (const RunRecord* r : it->second)
        accs.push_back(r->metrics->acc_train);
      out << format_value(efficacy(accs, threshold));
    }
    out << "\n";
  }
}

// --- tiny SVG helpers --------------------------------------------------------

std::string color_ramp(double v) {  // 0 -> dark blue, 1 -> yellow
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(68 + v * (253 - 68)));
  const int g = static_cast<int>(std::lround(1 + v * (231 - 1)));
  const int b = static_cast<int>(std::lround(84 + v * (37 - 84)));
  std::ostringstream out;
  out << "rgb(" << r << "," << g << "," << b << ")";
  return out.str();
}

void write_heatmap_svg(const std::filesystem::path& path, const Grid& grid,
                       const MetricDef& metric) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::map<CellKey, double> best;
  for (const auto& [key, runs] : grid.cells) {
    std::vector<double> values;
    for (const RunRecord* r : runs) values.push_back(metric.get(*r));
    const double v = metric.lower_is_better
                         ? *std::min_element(values.begin(), values.end())
                         : *std::max_element(values.begin(), values.end());
    best[key] = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) hi = lo + 1.0;

  const int cell = 48, margin = 80;
  const int width = margin + cell * static_cast<int>(grid.params.size()) + 20;
  const int height = margin + cell * static_cast<int>(grid.bits.size()) + 20;
  std::ofstream out(path);
  if (!out) throw io_error("report: cannot write " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n";
  out << "<text x='10' y='20' font-size='14'>" << metric.name
      << " (best over seeds)</text>\n";
  for (std::size_t j = 0; j < grid.params.size(); ++j)
    out << "<text x='" << margin + cell * j + 4 << "' y='" << margin - 8
        << "' font-size='9'>" << grid.params[j] << "</text>\n";
  for (std::size_t i = 0; i < grid.bits.size(); ++i) {
    out << "<text x='" << margin - 30 << "' y='" << margin + cell * i + 28
        << "' font-size='11'>" << grid.bits[i] << "b</text>\n";
    for (std::size_t j = 0; j < grid.params.size(); ++j) {
      const auto it = best.find({grid.bits[i], grid.params[j]});
      if (it == best.end()) continue;
      const double norm = (it->second - lo) / (hi - lo);
      out << "<rect x='" << margin + cell * j << "' y='" << margin + cell * i
          << "' width='" << cell - 2 << "' height='" << cell - 2 << "' fill='"
          << color_ramp(metric.lower_is_better ? 1.0 - norm : norm) << "'/>\n";
      out << "<text x='" << margin + cell * j + 3 << "' y='"
          << margin + cell * i + 28 << "' font-size='9' fill='white'>"
          << format_value(it->second) << "</text>\n";
    }
  }
  out << "</svg>\n";
}

void write_histogram_svg(const std::filesystem::path& path, const Grid& grid,
                         const MetricDef& metric) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [key, runs] : grid.cells)
    for (const RunRecord* r : runs) {
      lo = std::min(lo, metric.get(*r));
      hi = std::max(hi, metric.get(*r));
    }
  if (!(hi > lo)) hi = lo + 1.0;
  constexpr int kBins = 8;

  const int panel_w = 90, panel_h = 70, margin = 70;
  const int width = margin + panel_w * static_cast<int>(grid.params.size()) + 20;
  const int height = margin + panel_h * static_cast<int>(grid.bits.size()) + 20;
  std::ofstream out(path);
  if (!out) throw io_error("report: cannot write " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n";
  out << "<text x='10' y='20' font-size='14'>" << metric.name
      << " per-cell histograms (range " << format_value(lo) << " to "
      << format_value(hi) << ")</text>\n";
  for (std::size_t j = 0; j < grid.params.size(); ++j)
    out << "<text x='" << margin + panel_w * j << "' y='" << margin - 8
        << "' font-size='9'>" << grid.params[j] << "</text>\n";
  for (std::size_t i = 0; i < grid.bits.size(); ++i) {
    out << "<text x='" << margin - 40 << "' y='" << margin + panel_h * i + 35
        << "' font-size='11'>" << grid.bits[i] << "b</text>\n";
    for (std::size_t j = 0; j < grid.params.size(); ++j) {
      const auto it = grid.cells.find({grid.bits[i], grid.params[j]});
      if (it == grid.cells.end()) continue;
      std::vector<int> bins(kBins, 0);
      int peak = 1;
      for (const RunRecord* r : it->second) {
        const double norm = (metric.get(*r) - lo) / (hi - lo);
        const int bin =
            std::min(kBins - 1, static_cast<int>(norm * kBins));
        peak = std::max(peak, ++bins[bin]);
      }
      const int x0 = margin + panel_w * static_cast<int>(j);
      const int y0 = margin + panel_h * static_cast<int>(i);
      out << "<rect x='" << x0 << "' y='" << y0 << "' width='" << panel_w - 8
          << "' height='" << panel_h - 12
          << "' fill='none' stroke='#ccc'/>\n";
      const double bar_w = static_cast<double>(panel_w - 8) / kBins;
      for (int bin = 0; bin < kBins; ++bin) {
        if (bins[bin] == 0) continue;
        const double frac = static_cast<double>(bins[bin]) / peak;
        const double bar_h = frac * (panel_h - 14);
        out << "<rect x='" << x0 + bin * bar_w << "' y='"
            << y0 + (panel_h - 12) - bar_h << "' width='" << bar_w - 1
            << "' height='" << bar_h << "' fill='#4477aa'/>\n";
      }
    }
  }
  out << "</svg>\n";
}

void write_scatter_svg(const std::filesystem::path& path,
                       const std::vector<const RunRecord*>& finals) {
  const int size = 420, margin = 50;
  std::ofstream out(path);
  if (!out) throw io_error("report: cannot write " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size
      << "' height='" << size << "'>\n";
  out << "<text x='10' y='20' font-size='13'>residual entropy vs (train - val)"
         " accuracy</text>\n";
  out << "<line x1='" << margin << "' y1='" << size - margin << "' x2='"
      << size - 10 << "' y2='" << size - margin << "' stroke='black'/>\n";
  out << "<line x1='" << margin << "' y1='" << size - margin << "' x2='"
      << margin << "' y2='30' stroke='black'/>\n";
  out << "<text x='" << size / 2 << "' y='" << size - 14
      << "' font-size='11'>train - val accuracy</text>\n";
  out << "<text x='6' y='" << size / 2 << "' font-size='11'>entropy</text>\n";
  const double plot = size - margin - 40;
  for (const RunRecord* r : finals) {
    const double overfit =
        std::clamp(r->metrics->acc_train - r->metrics->acc_val, 0.0, 1.0);
    const double entropy = std::clamp(r->metrics->residual_entropy, 0.0, 1.0);
    const double x = margin + overfit * plot;
    const double y = (size - margin) - entropy * plot;
    out << "<circle cx='" << x << "' cy='" << y
        << "' r='4' fill='#cc3311' fill-opacity='0.6'/>\n";
  }
  out << "</svg>\n";
}

}  // namespace

ReportSummary write_report(const std::vector<RunRecord>& records,
                           const std::filesystem::path& out_dir) {
  if (records.empty()) throw std::invalid_argument("report: no records");
  std::filesystem::create_directories(out_dir);

  std::vector<const RunRecord*> finals;
  int failed = 0;
  for (const RunRecord& r : records) {
    if (!r.final_record) continue;
    if (r.status != "ok" || !r.metrics) {
      ++failed;
      continue;
    }
    finals.push_back(&r);
  }
  ReportSummary summary;
  summary.runs = static_cast<int>(finals.size());
  summary.failed_runs = failed;
  if (finals.empty())
    throw std::invalid_argument("report: no completed runs with metrics");

  const Grid grid = build_grid(finals);
  for (const MetricDef& metric : metric_defs()) {
    for (const std::string agg : {"best", "worst", "mean", "std"}) {
      const auto path =
          out_dir / ("grid_" + metric.name + "_" + agg + ".csv");
      write_grid_csv(path, grid, metric, agg);
      summary.files.push_back(path);
    }
    const auto heat = out_dir / ("heatmap_" + metric.name + ".svg");
    write_heatmap_svg(heat, grid, metric);
    summary.files.push_back(heat);
    const auto hist = out_dir / ("hist_" + metric.name + ".svg");
    write_histogram_svg(hist, grid, metric);
    summary.files.push_back(hist);
  }
  const auto efficacy_path = out_dir / "efficacy.csv";
  write_efficacy_csv(efficacy_path, grid, 0.99);
  summary.files.push_back(efficacy_path);
  const auto scatter = out_dir / "scatter_entropy_overfit.svg";
  write_scatter_svg(scatter, finals);
  summary.files.push_back(scatter);
  return summary;
}

ReportSummary write_report_from_dir(const std::filesystem::path& records_dir,
                                    const std::filesystem::path& out_dir) {
  return write_report(load_records_dir(records_dir), out_dir);
}

}  // namespace emlang
