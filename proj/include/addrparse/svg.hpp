#pragma once

#include <cstdio>
#include <string>
#include <string_view>

namespace addrparse::svg {

// Fixed two-decimal coordinates keep output byte-stable.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(std::string_view s) {
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

// Categorical palette, cycled.
inline const char* color(std::size_t i) {
  static constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                             "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
                                             "#1f77b4", "#8c564b", "#17becf", "#bcbd22", "#7f7f7f"};
  return kPalette[i % (sizeof kPalette / sizeof *kPalette)];
}

class Document {
 public:
  Document(double width, double height) : width_(width), height_(height) {}

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view cls = {}) {
    body_ += "<rect";
    if (!cls.empty()) body_ += " class=\"" + std::string(cls) + "\"";
    body_ += " x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
             "\" fill=\"" + std::string(fill) + "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#333") {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
             "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"1\"/>\n";
  }

  void circle(double cx, double cy, double r, std::string_view fill, std::string_view cls = {}) {
    body_ += "<circle";
    if (!cls.empty()) body_ += " class=\"" + std::string(cls) + "\"";
    body_ += " cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" + std::string(fill) +
             "\" fill-opacity=\"0.75\"/>\n";
  }

  void text(double x, double y, std::string_view content, std::string_view anchor = "start", double size = 11,
            double rotate = 0) {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" + num(size) +
             "\" text-anchor=\"" + std::string(anchor) + "\"";
    if (rotate != 0) body_ += " transform=\"rotate(" + num(rotate) + " " + num(x) + " " + num(y) + ")\"";
    body_ += ">" + escape(content) + "</text>\n";
  }

  std::string str() const {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(width_) + "\" height=\"" +
           num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) + "\">\n"
           "<rect x=\"0\" y=\"0\" width=\"" + num(width_) + "\" height=\"" + num(height_) + "\" fill=\"#ffffff\"/>\n" +
           body_ + "</svg>\n";
  }

 private:
  double width_, height_;
  std::string body_;
};

}  // namespace addrparse::svg
