#pragma once

// Minimal SVG document builder: rectangles, polylines, circles and text.
// Coordinates are user units; `plot` maps a data window onto a pixel frame.

#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "delayflow/csv.hpp"

namespace delayflow::svg {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

class Document {
 public:
  Document(double width, double height) : width_(width), height_(height) {}

  void rect(double x, double y, double w, double h, const std::string& fill) {
    body_ << "<rect x=\"" << csv::num(x) << "\" y=\"" << csv::num(y) << "\" width=\"" << csv::num(w)
          << "\" height=\"" << csv::num(h) << "\" fill=\"" << fill << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 1.5,
                const std::string& dash = "") {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << csv::num(width) << '"';
    if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << '"';
    body_ << " points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k) body_ << ' ';
      body_ << csv::num(pts[k].first) << ',' << csv::num(pts[k].second);
    }
    body_ << "\"/>\n";
  }

  void circle(double x, double y, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << csv::num(x) << "\" cy=\"" << csv::num(y) << "\" r=\"" << csv::num(r) << "\" fill=\""
          << fill << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, double size = 12.0, const std::string& anchor = "start") {
    body_ << "<text x=\"" << csv::num(x) << "\" y=\"" << csv::num(y) << "\" font-size=\"" << csv::num(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  void write(std::ostream& os) const {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << csv::num(width_) << "\" height=\""
       << csv::num(height_) << "\" viewBox=\"0 0 " << csv::num(width_) << ' ' << csv::num(height_) << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << body_.str() << "</svg>\n";
  }

  double width() const noexcept { return width_; }
  double height() const noexcept { return height_; }

 private:
  double width_, height_;
  std::ostringstream body_;
};

// Linear map from a data window [x0,x1]x[y0,y1] to a frame with y pointing up.
struct Frame {
  double left = 60, top = 20, width = 480, height = 360;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }

  void axes(Document& doc, const std::string& xlabel, const std::string& ylabel) const {
    doc.polyline({{left, top}, {left, top + height}, {left + width, top + height}}, "black", 1.0);
    doc.text(left, top + height + 16, csv::num(x0), 10, "middle");
    doc.text(left + width, top + height + 16, csv::num(x1), 10, "middle");
    doc.text(left - 6, top + height, csv::num(y0), 10, "end");
    doc.text(left - 6, top + 10, csv::num(y1), 10, "end");
    doc.text(left + width / 2, top + height + 34, xlabel, 12, "middle");
    doc.text(14, top + height / 2, ylabel, 12, "middle");
  }
};

}  // namespace delayflow::svg
