#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fpforge/perturb.hpp"

namespace fpforge {

namespace {

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

void polyline(std::ostringstream& svg, const std::vector<double>& xs,
              const std::vector<double>& ys, double x0, double x1, double y0, double y1,
              double px0, double px1, double py0, double py1, const std::string& color) {
  svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
  for (size_t i = 0; i < xs.size(); ++i) {
    double tx = (xs[i] - x0) / (x1 - x0);
    double ty = (ys[i] - y0) / (y1 - y0);
    svg << fmt(px0 + tx * (px1 - px0)) << "," << fmt(py0 + ty * (py1 - py0)) << " ";
  }
  svg << "\"/>\n";
  for (size_t i = 0; i < xs.size(); ++i) {
    double tx = (xs[i] - x0) / (x1 - x0);
    double ty = (ys[i] - y0) / (y1 - y0);
    svg << "<circle cx=\"" << fmt(px0 + tx * (px1 - px0)) << "\" cy=\""
        << fmt(py0 + ty * (py1 - py0)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }
}

}  // namespace

std::string emit_plot(const SweepResult& sweep, const std::string& out_path,
                      double threshold) {
  const int W = 640, H = 480;
  const double px0 = 70, px1 = W - 30, py0 = H - 50, py1 = 40;  // y flipped
  double x0 = sweep.grid.front(), x1 = sweep.grid.back();
  if (x1 == x0) x1 = x0 + 1;

  // Left axis always covers accuracy [0,1]; a dB-scaled reference series gets
  // its own normalization onto the same panel.
  bool ref_is_db = sweep.reference_label.find("psnr") != std::string::npos;
  double ry0 = 0, ry1 = 1;
  if (ref_is_db && !sweep.reference.empty()) {
    ry0 = *std::min_element(sweep.reference.begin(), sweep.reference.end()) - 1.0;
    ry1 = *std::max_element(sweep.reference.begin(), sweep.reference.end()) + 1.0;
  }

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << perturb_kind_name(sweep.kind) << "</text>\n";

  // Axes.
  svg << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1 << "\" y2=\"" << py0
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0 << "\" y2=\"" << py1
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double v = i / 5.0;
    double y = py0 + v * (py1 - py0);
    svg << "<text x=\"" << px0 - 8 << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(v) << "</text>\n";
    svg << "<line x1=\"" << px0 - 4 << "\" y1=\"" << fmt(y) << "\" x2=\"" << px0
        << "\" y2=\"" << fmt(y) << "\" stroke=\"black\"/>\n";
  }
  for (size_t i = 0; i < sweep.grid.size(); ++i) {
    double tx = (sweep.grid[i] - x0) / (x1 - x0);
    double x = px0 + tx * (px1 - px0);
    svg << "<text x=\"" << fmt(x) << "\" y=\"" << py0 + 18
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(sweep.grid[i]) << "</text>\n";
  }
  svg << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << perturb_kind_name(sweep.kind)
      << " magnitude</text>\n";
  svg << "<text x=\"18\" y=\"" << (py0 + py1) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 18 "
      << (py0 + py1) / 2 << ")\">bit accuracy</text>\n";

  // Threshold line.
  {
    double y = py0 + threshold * (py1 - py0);
    svg << "<line x1=\"" << px0 << "\" y1=\"" << fmt(y) << "\" x2=\"" << px1 << "\" y2=\""
        << fmt(y) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    svg << "<text x=\"" << px1 - 4 << "\" y=\"" << fmt(y - 5)
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"gray\">threshold " << fmt(threshold)
        << "</text>\n";
  }

  polyline(svg, sweep.grid, sweep.generated_acc, x0, x1, 0, 1, px0, px1, py0, py1, "red");
  if (!sweep.reference.empty()) {
    polyline(svg, sweep.grid, sweep.reference, x0, x1, ry0, ry1, px0, px1, py0, py1, "blue");
  }
  svg << "<text x=\"" << px0 + 10 << "\" y=\"" << py1 + 14
      << "\" font-size=\"11\" fill=\"red\">generated</text>\n";
  svg << "<text x=\"" << px0 + 10 << "\" y=\"" << py1 + 28 << "\" font-size=\"11\" fill=\"blue\">"
      << (sweep.reference_label.empty() ? "reference" : sweep.reference_label) << "</text>\n";
  svg << "</svg>\n";

  std::ofstream f(out_path, std::ios::trunc);
  if (!f) throw IoError("emit_plot: cannot write " + out_path);
  f << svg.str();
  return out_path;
}

}  // namespace fpforge
