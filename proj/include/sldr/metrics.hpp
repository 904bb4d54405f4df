#pragma once

// metrics.csv reading and writing, learning-curve SVG rendering and episode
// trace CSV.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sldr/errors.hpp"
#include "sldr/stats.hpp"
#include "sldr/trainer.hpp"

namespace sldr {

inline constexpr std::string_view kMetricsHeader =
    "epoch,success_rate,critic_loss,sld_critic_loss,inv_dyn_loss,wall_seconds";

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string metrics_line(const MetricsRow& r) {
  return std::to_string(r.epoch) + "," + format_real(r.test_success_rate) + "," +
         format_real(r.critic_loss) + "," + format_real(r.sld_critic_loss) + "," +
         format_real(r.inv_dyn_loss) + "," + format_real(r.wall_seconds);
}

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kMetricsHeader);
  out += "\n";
  for (const MetricsRow& r : rows) out += metrics_line(r) + "\n";
  return out;
}

inline std::vector<MetricsRow> parse_metrics_csv(std::string_view text,
                                                 const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw FormatError(source + ": missing or unexpected metrics header");
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6)
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected 6 columns");
    MetricsRow r;
    try {
      std::size_t used = 0;
      r.epoch = std::stoi(cells[0], &used);
      if (used != cells[0].size()) throw std::invalid_argument("epoch");
      double* fields[] = {&r.test_success_rate, &r.critic_loss, &r.sld_critic_loss,
                          &r.inv_dyn_loss, &r.wall_seconds};
      for (int i = 0; i < 5; ++i) {
        *fields[i] = std::stod(cells[static_cast<std::size_t>(i + 1)], &used);
        if (used != cells[static_cast<std::size_t>(i + 1)].size())
          throw std::invalid_argument("value");
      }
    } catch (const std::exception&) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": malformed number");
    }
    if (r.test_success_rate < 0.0 || r.test_success_rate > 1.0)
      throw FormatError(source + ":" + std::to_string(line_no) +
                        ": success rate outside [0, 1]");
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_metrics_csv(ss.str(), path);
}

// Appends rows one at a time, flushing after each.
class MetricsWriter {
 public:
  // Starts a fresh file, or keeps the rows with epoch <= keep_through.
  MetricsWriter(const std::string& path, int keep_through = -1) : path_(path) {
    std::vector<MetricsRow> kept;
    if (keep_through >= 0) {
      for (const MetricsRow& r : read_metrics_csv(path))
        if (r.epoch <= keep_through) kept.push_back(r);
    }
    out_.open(path, std::ios::trunc);
    if (!out_) throw FormatError("cannot write '" + path + "'");
    out_ << metrics_csv(kept);
    out_.flush();
  }

  void append(const MetricsRow& r) {
    out_ << metrics_line(r) << "\n";
    out_.flush();
    if (!out_) throw FormatError("write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

// ---- learning-curve plot ----

struct CurveGroup {
  std::string label;
  std::vector<std::vector<MetricsRow>> runs;
};

struct CurveBand {
  std::string label;
  std::vector<int> epochs;
  std::vector<Spread> success;
};

inline CurveBand curve_band(const CurveGroup& g) {
  const SeedStudy s = aggregate_runs(g.runs);
  return {g.label, s.epochs, s.success};
}

// Standalone SVG: x is the epoch, y the success rate on [0, 1]; one median
// polyline and one shaded interquartile polygon per group.
inline std::string render_learning_curves(const std::vector<CurveBand>& bands,
                                          const std::string& title = "") {
  if (bands.empty()) throw ArgumentError("plot: no curve to draw");
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#ff7f0e", "#9467bd", "#8c564b"};
  const double W = 640, H = 400, left = 60, right = 160, top = 30, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  int e_min = 0, e_max = 1;
  bool first = true;
  for (const CurveBand& b : bands) {
    if (b.epochs.empty()) throw ArgumentError("plot: group '" + b.label + "' is empty");
    for (int e : b.epochs) {
      e_min = first ? e : std::min(e_min, e);
      e_max = first ? e : std::max(e_max, e);
      first = false;
    }
  }
  const double span = e_max > e_min ? e_max - e_min : 1.0;
  auto px = [&](int e) { return left + pw * (e - e_min) / span; };
  auto py = [&](double y) { return top + ph * (1.0 - y); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    o << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  o << "<g stroke=\"#444\" fill=\"none\">\n"
    << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left + pw << "\" y2=\""
    << py(0) << "\"/>\n"
    << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\""
    << py(1) << "\"/>\n</g>\n";
  o << "<g font-size=\"11\" fill=\"#444\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = i / 4.0;
    o << "<text x=\"" << left - 8 << "\" y=\"" << num(py(y) + 4)
      << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
  }
  o << "<text x=\"" << left << "\" y=\"" << py(0) + 18 << "\" text-anchor=\"middle\">"
    << e_min << "</text>\n"
    << "<text x=\"" << left + pw << "\" y=\"" << py(0) + 18 << "\" text-anchor=\"middle\">"
    << e_max << "</text>\n"
    << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\">epoch</text>\n"
    << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 "
    << top + ph / 2 << ")\" text-anchor=\"middle\">success rate</text>\n</g>\n";
  for (std::size_t g = 0; g < bands.size(); ++g) {
    const CurveBand& b = bands[g];
    const char* color = kColors[g % std::size(kColors)];
    o << "<g class=\"group\" data-label=\"" << b.label << "\">\n";
    o << "<polygon class=\"iqr\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < b.epochs.size(); ++i)
      o << num(px(b.epochs[i])) << "," << num(py(b.success[i].q75)) << " ";
    for (std::size_t i = b.epochs.size(); i-- > 0;)
      o << num(px(b.epochs[i])) << "," << num(py(b.success[i].q25)) << " ";
    o << "\"/>\n";
    o << "<polyline class=\"median\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < b.epochs.size(); ++i)
      o << num(px(b.epochs[i])) << "," << num(py(b.success[i].median)) << " ";
    o << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(g);
    o << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 32
      << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
      << b.label << "</text>\n</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// ---- episode traces ----

struct TraceStep {
  Vector s;
  Vector a;
  double r = -1.0;
  Vector q;
  Vector achieved;
  Vector desired;
};

inline std::string trace_csv(TaskId task, std::uint64_t seed, int horizon,
                             const std::vector<TraceStep>& steps) {
  std::ostringstream o;
  o << "# task=" << task_name(task) << " seed=" << seed << " horizon=" << horizon << "\n";
  if (steps.empty()) return o.str();
  const TraceStep& f = steps.front();
  auto names = [&](const char* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) o << "," << p << i;
  };
  o << "t";
  names("s", f.s.size());
  names("a", f.a.size());
  o << ",r";
  names("q", f.q.size());
  names("achieved", f.achieved.size());
  names("desired", f.desired.size());
  o << "\n";
  auto cells = [&](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) o << "," << format_real(v(i));
  };
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const TraceStep& st = steps[t];
    o << t;
    cells(st.s);
    cells(st.a);
    o << "," << format_real(st.r);
    cells(st.q);
    cells(st.achieved);
    cells(st.desired);
    o << "\n";
  }
  return o.str();
}

}  // namespace sldr
