#include "vlb/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "vlb/error.hpp"

namespace vlb {

namespace {

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c",
                                              "#9467bd", "#ff7f0e", "#8c564b"};

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Plot frame with linear axes.
class SvgPlot {
 public:
  SvgPlot(double x_min, double x_max, double y_min, double y_max)
      : x0_(x_min), x1_(x_max > x_min ? x_max : x_min + 1.0),
        y0_(y_min), y1_(y_max > y_min ? y_max : y_min + 1.0) {}

  double sx(double x) const { return kLeft + (x - x0_) / (x1_ - x0_) * (kWidth - kLeft - kRight); }
  double sy(double y) const {
    return kHeight - kBottom - (y - y0_) / (y1_ - y0_) * (kHeight - kTop - kBottom);
  }

  void frame(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
    body_ << "<rect x='" << kLeft << "' y='" << kTop << "' width='" << kWidth - kLeft - kRight
          << "' height='" << kHeight - kTop - kBottom << "' fill='none' stroke='#444'/>\n"
          << "<text x='" << kWidth / 2 << "' y='20' text-anchor='middle' font-size='14'>"
          << xml_escape(title) << "</text>\n"
          << "<text x='" << kWidth / 2 << "' y='" << kHeight - 8
          << "' text-anchor='middle' font-size='12'>" << xml_escape(xlabel) << "</text>\n"
          << "<text x='14' y='" << kHeight / 2 << "' text-anchor='middle' font-size='12' "
          << "transform='rotate(-90 14 " << kHeight / 2 << ")'>" << xml_escape(ylabel) << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
      const double y = y0_ + (y1_ - y0_) * i / 4.0;
      body_ << "<text x='" << kLeft - 6 << "' y='" << px(sy(y) + 4)
            << "' text-anchor='end' font-size='10'>" << px(y) << "</text>\n";
    }
  }

  void x_tick(double x, const std::string& label) {
    body_ << "<text x='" << px(sx(x)) << "' y='" << kHeight - kBottom + 14
          << "' text-anchor='middle' font-size='10'>" << xml_escape(label) << "</text>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                bool dashed = false) {
    body_ << "<polyline fill='none' stroke='" << color << "' stroke-width='2'"
          << (dashed ? " stroke-dasharray='6,4'" : "") << " points='";
    for (const auto& [x, y] : pts) body_ << px(sx(x)) << ',' << px(sy(y)) << ' ';
    body_ << "'/>\n";
  }

  void dot(double x, double y, const std::string& color, double r = 3.5, double opacity = 1.0) {
    body_ << "<circle cx='" << px(sx(x)) << "' cy='" << px(sy(y)) << "' r='" << r << "' fill='"
          << color << "' fill-opacity='" << opacity << "'/>\n";
  }

  void legend(int row, const std::string& label, const std::string& color) {
    const double y = kTop + 14 + 16 * row;
    body_ << "<rect x='" << kWidth - kRight - 130 << "' y='" << y - 9
          << "' width='10' height='10' fill='" << color << "'/>\n"
          << "<text x='" << kWidth - kRight - 115 << "' y='" << y
          << "' font-size='11'>" << xml_escape(label) << "</text>\n";
  }

  static constexpr double kPlotWidth = 640 - 60 - 20;
  static constexpr double kPlotHeight = 420 - 30 - 50;

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
        << "' viewBox='0 0 " << kWidth << ' ' << kHeight << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  static constexpr int kWidth = 640;
  static constexpr int kHeight = 420;
  static constexpr int kLeft = 60;
  static constexpr int kRight = 20;
  static constexpr int kTop = 30;
  static constexpr int kBottom = 50;
  double x0_, x1_, y0_, y1_;
  std::ostringstream body_;
};

}  // namespace

Report build_report(const ResultSet& results) {
  if (!results.has_baseline())
    throw Error(ErrorCode::MissingBaseline, "result set has no odometry-only episodes");

  const std::vector<SummaryRow> rows = summarize(results);
  const std::vector<std::string> methods = results.methods();
  const auto& values = results.axis_values;
  const SummaryRow& base = rows.back();  // summarize() appends the baseline last

  std::map<std::pair<std::string, std::string>, const SummaryRow*> cell;
  for (const SummaryRow& r : rows) cell[{r.method, r.axis_value}] = &r;
  auto find = [&](const std::string& m, const std::string& v) -> const SummaryRow* {
    const auto it = cell.find({m, v});
    return it == cell.end() ? nullptr : it->second;
  };

  Report rep;
  rep.summary = summary_csv(rows);

  std::ostringstream ft, rt;
  ft << "method";
  rt << "method";
  for (const std::string& v : values) {
    ft << ',' << v;
    rt << ',' << v;
  }
  ft << '\n';
  rt << '\n';
  for (const std::string& m : methods) {
    ft << m;
    rt << m;
    for (const std::string& v : values) {
      const SummaryRow* r = find(m, v);
      ft << ',' << (r ? format_number(r->failure_rate) : std::string());
      rt << ',';
      if (r && r->recall)
        rt << pct((*r->recall)[0]) << '/' << pct((*r->recall)[1]) << '/' << pct((*r->recall)[2]);
    }
    ft << '\n';
    rt << '\n';
  }
  ft << kBaselineMethod;
  for (std::size_t i = 0; i < values.size(); ++i) ft << ',' << format_number(base.failure_rate);
  ft << '\n';
  rep.failure_table = ft.str();
  rep.recall_table = rt.str();

  std::ostringstream fs, sc;
  fs << "axis_value,method,failure_rate,baseline_failure_rate\n";
  sc << "method,axis_value,recall_T1,failure_rate\n";
  for (const std::string& m : methods) {
    for (const std::string& v : values) {
      const SummaryRow* r = find(m, v);
      if (!r) continue;
      fs << v << ',' << m << ',' << format_number(r->failure_rate) << ','
         << format_number(base.failure_rate) << '\n';
      sc << m << ',' << v << ',' << (r->recall ? format_number((*r->recall)[0]) : std::string())
         << ',' << format_number(r->failure_rate) << '\n';
    }
  }
  rep.failure_series = fs.str();
  rep.recall_scatter = sc.str();

  std::ostringstream cl, rc;
  cl << "method,axis_value,episode_index,x,y,arc_length,cause\n";
  for (const EpisodeRecord& e : results.episodes)
    for (const FailureEvent& f : e.failures)
      cl << e.method << ',' << e.axis_value << ',' << e.episode_index << ','
         << format_number(f.position.x()) << ',' << format_number(f.position.y()) << ','
         << format_number(f.arc_length) << ',' << to_string(f.cause) << '\n';
  rc << "x,y\n";
  for (const Vec2& p : results.route) rc << format_number(p.x()) << ',' << format_number(p.y()) << '\n';
  rep.crash_locations = cl.str();
  rep.route = rc.str();

  // Failure rate over the axis.
  double f_max = base.failure_rate;
  for (const SummaryRow& r : rows) f_max = std::max(f_max, r.failure_rate);
  {
    SvgPlot plot(-0.5, static_cast<double>(values.size()) - 0.5, 0.0, f_max * 1.1);
    plot.frame("Failure rate over " + results.axis, results.axis, "failures / km");
    for (std::size_t i = 0; i < values.size(); ++i) plot.x_tick(static_cast<double>(i), values[i]);
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const std::string color = kPalette[mi % kPalette.size()];
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i = 0; i < values.size(); ++i)
        if (const SummaryRow* r = find(methods[mi], values[i]))
          pts.emplace_back(static_cast<double>(i), r->failure_rate);
      plot.polyline(pts, color);
      for (const auto& [x, y] : pts) plot.dot(x, y, color);
      plot.legend(static_cast<int>(mi), methods[mi], color);
    }
    plot.polyline({{-0.5, base.failure_rate}, {static_cast<double>(values.size()) - 0.5, base.failure_rate}},
                  "#555", true);
    plot.legend(static_cast<int>(methods.size()), kBaselineMethod, "#555");
    rep.failure_svg = plot.str();
  }
  {
    SvgPlot plot(0.0, 1.0, 0.0, f_max * 1.1);
    plot.frame("Failure rate against recall T1", "recall T1", "failures / km");
    for (int i = 0; i <= 4; ++i) plot.x_tick(i / 4.0, px(i / 4.0));
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const std::string color = kPalette[mi % kPalette.size()];
      for (const std::string& v : values)
        if (const SummaryRow* r = find(methods[mi], v); r && r->recall)
          plot.dot((*r->recall)[0], r->failure_rate, color);
      plot.legend(static_cast<int>(mi), methods[mi], color);
    }
    plot.polyline({{0.0, base.failure_rate}, {1.0, base.failure_rate}}, "#555", true);
    rep.scatter_svg = plot.str();
  }
  {
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!results.route.empty()) {
      x0 = x1 = results.route.front().x();
      y0 = y1 = results.route.front().y();
      for (const Vec2& p : results.route) {
        x0 = std::min(x0, p.x()); x1 = std::max(x1, p.x());
        y0 = std::min(y0, p.y()); y1 = std::max(y1, p.y());
      }
    }
    const double pad = 0.05 * std::max(x1 - x0, y1 - y0) + 1.0;
    x0 -= pad; x1 += pad; y0 -= pad; y1 += pad;
    // Equal scale on both axes.
    const double aspect = SvgPlot::kPlotWidth / SvgPlot::kPlotHeight;
    if ((x1 - x0) / (y1 - y0) < aspect) {
      const double grow = (aspect * (y1 - y0) - (x1 - x0)) / 2.0;
      x0 -= grow; x1 += grow;
    } else {
      const double grow = ((x1 - x0) / aspect - (y1 - y0)) / 2.0;
      y0 -= grow; y1 += grow;
    }
    SvgPlot plot(x0, x1, y0, y1);
    plot.frame("Crash locations", "x [m]", "y [m]");
    std::vector<std::pair<double, double>> line;
    for (const Vec2& p : results.route) line.emplace_back(p.x(), p.y());
    plot.polyline(line, "#999");
    std::vector<std::string> order = methods;
    order.push_back(kBaselineMethod);
    for (std::size_t mi = 0; mi < order.size(); ++mi) {
      const std::string color = order[mi] == kBaselineMethod ? "#555" : kPalette[mi % kPalette.size()];
      for (const EpisodeRecord& e : results.episodes)
        if (e.method == order[mi])
          for (const FailureEvent& f : e.failures) plot.dot(f.position.x(), f.position.y(), color, 3.0, 0.4);
      plot.legend(static_cast<int>(mi), order[mi], color);
    }
    rep.crash_svg = plot.str();
  }
  return rep;
}

void write_report(const Report& report, const std::filesystem::path& dir, bool svg) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
  };
  put("summary.csv", report.summary);
  put("failure_table.csv", report.failure_table);
  put("recall_table.csv", report.recall_table);
  put("failure_vs_axis.csv", report.failure_series);
  put("recall_vs_failure.csv", report.recall_scatter);
  put("crash_locations.csv", report.crash_locations);
  put("route.csv", report.route);
  if (svg) {
    put("failure_vs_axis.svg", report.failure_svg);
    put("recall_vs_failure.svg", report.scatter_svg);
    put("crash_locations.svg", report.crash_svg);
  }
}

}  // namespace vlb
