#include "kktplan/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>

namespace kktplan {

namespace {

constexpr double kSize = 600.0;
constexpr double kMargin = 40.0;

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
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

// Affine map from a data rectangle to a pixel rectangle, y pointing up.
struct Frame {
  double x0, x1, y0, y1;      // data
  double left, top, w, h;     // pixels
  double X(double x) const { return left + (x - x0) / (x1 - x0) * w; }
  double Y(double y) const { return top + h - (y - y0) / (y1 - y0) * h; }
};

double safe_span(double lo, double hi) { return hi > lo ? hi - lo : 1.0; }

void rect(std::ostringstream& os, const Frame& f, const Box& b, const char* cls) {
  const double xa = std::clamp(b.lo(0), f.x0, f.x1), xb = std::clamp(b.hi(0), f.x0, f.x1);
  const double ya = std::clamp(b.lo(1), f.y0, f.y1), yb = std::clamp(b.hi(1), f.y0, f.y1);
  if (!(xb >= xa && yb >= ya)) return;
  os << "<rect class=\"" << cls << "\" x=\"" << px(f.X(xa)) << "\" y=\"" << px(f.Y(yb)) << "\" width=\""
     << px(f.X(xb) - f.X(xa)) << "\" height=\"" << px(f.Y(ya) - f.Y(yb)) << "\"/>\n";
}

void band(std::ostringstream& os, const Frame& f, double lo, double hi, const char* cls) {
  const double a = std::clamp(lo, f.y0, f.y1), b = std::clamp(hi, f.y0, f.y1);
  if (!(b >= a)) return;
  os << "<rect class=\"" << cls << "\" x=\"" << px(f.left) << "\" y=\"" << px(f.Y(b)) << "\" width=\"" << px(f.w)
     << "\" height=\"" << px(f.Y(a) - f.Y(b)) << "\"/>\n";
}

std::string points_attr(const Frame& f, const std::vector<std::pair<double, double>>& pts) {
  std::string s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ' ';
    s += px(f.X(pts[i].first)) + "," + px(f.Y(pts[i].second));
  }
  return s;
}

std::string path_attr(const Frame& f, const std::vector<std::pair<double, double>>& pts) {
  std::string s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s += i ? " L" : "M";
    s += px(f.X(pts[i].first)) + " " + px(f.Y(pts[i].second));
  }
  return s;
}

void axes(std::ostringstream& os, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  os << "<rect class=\"axes\" x=\"" << px(f.left) << "\" y=\"" << px(f.top) << "\" width=\"" << px(f.w)
     << "\" height=\"" << px(f.h) << "\"/>\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", f.x0);
  os << "<text x=\"" << px(f.left) << "\" y=\"" << px(f.top + f.h + 14) << "\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.3g", f.x1);
  os << "<text x=\"" << px(f.left + f.w) << "\" y=\"" << px(f.top + f.h + 14) << "\" text-anchor=\"end\">" << buf
     << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.3g", f.y0);
  os << "<text x=\"" << px(f.left - 4) << "\" y=\"" << px(f.top + f.h) << "\" text-anchor=\"end\">" << buf
     << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.3g", f.y1);
  os << "<text x=\"" << px(f.left - 4) << "\" y=\"" << px(f.top + 10) << "\" text-anchor=\"end\">" << buf
     << "</text>\n";
  os << "<text x=\"" << px(f.left + f.w / 2) << "\" y=\"" << px(f.top + f.h + 28) << "\" text-anchor=\"middle\">"
     << escape(xlabel) << "</text>\n";
  os << "<text x=\"" << px(f.left - 28) << "\" y=\"" << px(f.top + f.h / 2) << "\" text-anchor=\"middle\">"
     << escape(ylabel) << "</text>\n";
}

const char* kStyle =
    "<style>\n"
    ".axes{fill:none;stroke:#222;stroke-width:1}\n"
    ".known{fill:#555;stroke:none}\n"
    ".gunsafe{fill:#b03030;fill-opacity:0.8;stroke:none}\n"
    ".punsafe{fill:#f0a0a0;fill-opacity:0.5;stroke:none}\n"
    ".demo{fill:none;stroke:#2060c0;stroke-width:2}\n"
    ".plan{fill:none;stroke:#20a040;stroke-width:2}\n"
    ".contingency{fill:none;stroke:#e08020;stroke-width:1.5;stroke-dasharray:5,3}\n"
    ".trace{fill:none;stroke:#000;stroke-width:1.5}\n"
    ".violation{fill:#d00;stroke:none}\n"
    "text{font-family:sans-serif;font-size:11px}\n"
    "</style>\n";

std::vector<std::pair<double, double>> xy(const Dynamics& dyn, const std::vector<Point>& states) {
  std::vector<std::pair<double, double>> out;
  for (const auto& x : states) {
    const Point p = dyn.position(x);
    out.emplace_back(p[0], p[1]);
  }
  return out;
}

std::vector<std::pair<double, double>> coordinate(const Dynamics& dyn, const std::vector<Point>& states,
                                                  std::size_t c) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t t = 0; t < states.size(); ++t) out.emplace_back(static_cast<double>(t), dyn.position(states[t])[c]);
  return out;
}

// Shading from every position block of the model.
void shade(const PlotInput& in, const std::function<void(const Box&, const char*)>& draw) {
  if (in.f_theta.empty()) return;
  const Scenario& sc = *in.scenario;
  for (std::size_t b = 0; b < sc.model.blocks().size(); ++b) {
    const ConstraintBlock& blk = sc.model.block(b);
    if (blk.phi != PhiKind::StateProjection || blk.kappa_dim != sc.task.dynamics.dim) continue;
    const GuaranteedSets g = guaranteed_sets(in.f_theta, sc.model, b);
    for (const auto& box : g.possibly_unsafe) draw(box, "punsafe");
    for (const auto& box : g.g_unsafe) draw(box, "gunsafe");
  }
}

}  // namespace

std::string render_svg(const PlotInput& in) {
  if (!in.scenario) throw ValidationError("scenario", "plot needs a scenario");
  const Scenario& sc = *in.scenario;
  const Dynamics& dyn = sc.task.dynamics;
  const Box& sb = dyn.state_bounds;
  std::ostringstream os;

  if (dyn.dim == 2) {
    Frame f{sb.lo(0), sb.lo(0) + safe_span(sb.lo(0), sb.hi(0)), sb.lo(1), sb.lo(1) + safe_span(sb.lo(1), sb.hi(1)),
            kMargin, kMargin, kSize - 2 * kMargin, kSize - 2 * kMargin};
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
       << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n"
       << kStyle;
    if (!in.title.empty()) {
      os << "<text x=\"" << px(kSize / 2) << "\" y=\"20\" text-anchor=\"middle\">" << escape(in.title) << "</text>\n";
    }
    shade(in, [&](const Box& b, const char* cls) { rect(os, f, b, cls); });
    for (const auto& b : sc.task.known_unsafe) rect(os, f, b, "known");
    for (const auto& d : sc.demos) os << "<polyline class=\"demo\" points=\"" << points_attr(f, xy(dyn, d.states)) << "\"/>\n";
    for (const auto& c : in.contingencies) {
      os << "<path class=\"contingency\" d=\"" << path_attr(f, xy(dyn, c.states)) << "\"/>\n";
    }
    for (const auto& p : in.plans) os << "<path class=\"plan\" d=\"" << path_attr(f, xy(dyn, p.states)) << "\"/>\n";
    if (!in.trace.empty()) {
      os << "<polyline class=\"trace\" points=\"" << points_attr(f, xy(dyn, in.trace)) << "\"/>\n";
    }
    for (const auto& v : in.violations) {
      const Point p = dyn.position(v);
      os << "<circle class=\"violation\" cx=\"" << px(f.X(p[0])) << "\" cy=\"" << px(f.Y(p[1])) << "\" r=\"4\"/>\n";
    }
    axes(os, f, "x0", "x1");
    os << "</svg>\n";
    return os.str();
  }

  // One panel per position coordinate against the step index.
  std::size_t steps = sc.task.horizon;
  for (const auto& d : sc.demos) steps = std::max(steps, d.states.size());
  for (const auto& p : in.plans) steps = std::max(steps, p.states.size());
  steps = std::max(steps, in.trace.size());
  const double panel_h = 220.0;
  const double height = kMargin + static_cast<double>(dyn.dim) * (panel_h + kMargin);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << px(height)
     << "\" viewBox=\"0 0 " << kSize << ' ' << px(height) << "\">\n"
     << kStyle;
  if (!in.title.empty()) {
    os << "<text x=\"" << px(kSize / 2) << "\" y=\"20\" text-anchor=\"middle\">" << escape(in.title) << "</text>\n";
  }
  for (std::size_t c = 0; c < dyn.dim; ++c) {
    Frame f{0.0, static_cast<double>(std::max<std::size_t>(steps, 2) - 1), sb.lo(c), sb.lo(c) + safe_span(sb.lo(c), sb.hi(c)),
            kMargin, kMargin + static_cast<double>(c) * (panel_h + kMargin), kSize - 2 * kMargin, panel_h};
    if (dyn.dim == 1) {
      for (const auto& b : sc.task.known_unsafe) band(os, f, b.lo(0), b.hi(0), "known");
    }
    for (const auto& d : sc.demos) {
      os << "<polyline class=\"demo\" points=\"" << points_attr(f, coordinate(dyn, d.states, c)) << "\"/>\n";
    }
    for (const auto& p : in.contingencies) {
      os << "<path class=\"contingency\" d=\"" << path_attr(f, coordinate(dyn, p.states, c)) << "\"/>\n";
    }
    for (const auto& p : in.plans) {
      os << "<path class=\"plan\" d=\"" << path_attr(f, coordinate(dyn, p.states, c)) << "\"/>\n";
    }
    if (!in.trace.empty()) {
      os << "<polyline class=\"trace\" points=\"" << points_attr(f, coordinate(dyn, in.trace, c)) << "\"/>\n";
    }
    axes(os, f, "step", "x" + std::to_string(c));
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace kktplan
