#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "addrparse/dataset.hpp"
#include "addrparse/metrics.hpp"
#include "addrparse/model.hpp"
#include "addrparse/pca.hpp"
#include "addrparse/svg.hpp"

namespace addrparse {

// ---------------------------------------------------------------------------
// Label frequency chart

struct HistogramBar {
  std::string label;
  std::size_t count;
};

// Entity-level bars (B-X and I-X pooled, O kept as "O"), tallest first,
// ties by label.
inline std::vector<HistogramBar> histogram_bars(const std::map<TagId, std::size_t>& hist, const TagSchema& schema) {
  if (hist.empty()) throw EmptyInput("histogram is empty");
  std::vector<HistogramBar> bars;
  for (const auto& [label, count] : entity_histogram(hist, schema)) bars.push_back({label, count});
  std::sort(bars.begin(), bars.end(), [](const HistogramBar& a, const HistogramBar& b) {
    return a.count != b.count ? a.count > b.count : a.label < b.label;
  });
  return bars;
}

inline std::string plot_label_histogram(const std::map<TagId, std::size_t>& hist, const TagSchema& schema) {
  const auto bars = histogram_bars(hist, schema);
  const double left = 60, top = 40, plot_h = 300, bar_w = 36, gap = 12;
  const double width = left + static_cast<double>(bars.size()) * (bar_w + gap) + 20;
  const double height = top + plot_h + 110;
  const double max_count = static_cast<double>(bars.front().count);
  svg::Document doc(width, height);
  doc.text(width / 2, 22, "Label frequencies", "middle", 14);
  doc.line(left, top, left, top + plot_h);
  doc.line(left, top + plot_h, width - 10, top + plot_h);
  for (int t = 0; t <= 4; ++t) {
    const double y = top + plot_h - plot_h * t / 4.0;
    doc.text(left - 6, y + 4, std::to_string(static_cast<long long>(std::llround(max_count * t / 4.0))), "end", 10);
  }
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = max_count > 0 ? plot_h * static_cast<double>(bars[i].count) / max_count : 0.0;
    const double x = left + gap / 2 + static_cast<double>(i) * (bar_w + gap);
    doc.rect(x, top + plot_h - h, bar_w, h, svg::color(0), "bar");
    doc.text(x + bar_w / 2, top + plot_h - h - 4, std::to_string(bars[i].count), "middle", 9);
    doc.text(x + bar_w / 2, top + plot_h + 12, bars[i].label, "end", 10, -45);
  }
  return doc.str();
}

// ---------------------------------------------------------------------------
// Comparison table (one row per variant x head)

struct ComparisonRow {
  std::string variant;
  HeadKind head = HeadKind::kLinear;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double sample_accuracy = 0.0;  // fraction in [0, 1]
  double token_accuracy = 0.0;   // fraction in [0, 1]
};

inline ComparisonRow comparison_row(const std::string& variant, HeadKind head, const EvalReport& r) {
  return {variant, head, r.macro.precision, r.macro.recall, r.macro.f1, r.sample_accuracy / 100.0,
          r.token_accuracy / 100.0};
}

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  std::string to_markdown() const {
    std::string out =
        "| Model | Precision (macro) | Recall (macro) | F1 (macro) | Accuracy (Per Sample) | Accuracy (Per Token) |\n"
        "|---|---|---|---|---|---|\n";
    char buf[256];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "| %s_%s | %.3f | %.3f | %.3f | %.3f | %.3f |\n", r.variant.c_str(),
                    to_string(r.head).c_str(), r.macro_precision, r.macro_recall, r.macro_f1, r.sample_accuracy,
                    r.token_accuracy);
      out += buf;
    }
    return out;
  }

  std::string to_csv() const {
    std::string out = "variant,head,macro_precision,macro_recall,macro_f1,sample_accuracy,token_accuracy\n";
    char buf[256];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.variant.c_str(),
                    to_string(r.head).c_str(), r.macro_precision, r.macro_recall, r.macro_f1, r.sample_accuracy,
                    r.token_accuracy);
      out += buf;
    }
    return out;
  }

  static ComparisonTable parse_csv(const std::string& text) {
    ComparisonTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line_no == 1 || line.empty()) continue;
      std::vector<std::string> cols;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cols.push_back(cell);
      if (cols.size() != 7) throw ParseError(line_no, "expected 7 comparison columns");
      try {
        t.rows.push_back({cols[0], parse_head_kind(cols[1]), std::stod(cols[2]), std::stod(cols[3]),
                          std::stod(cols[4]), std::stod(cols[5]), std::stod(cols[6])});
      } catch (const std::invalid_argument&) {
        throw ParseError(line_no, "non-numeric metric");
      } catch (const ConfigError& e) {
        throw ParseError(line_no, e.what());
      }
    }
    return t;
  }
};

struct HeadPair {
  std::string variant;
  double linear;
  double mlp;
};

// Per-token accuracy of LINEAR and MLP per variant, in first-appearance order.
inline std::vector<HeadPair> head_pairs(const ComparisonTable& table) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<const ComparisonRow*, const ComparisonRow*>> by_variant;
  for (const auto& r : table.rows) {
    if (!by_variant.count(r.variant)) order.push_back(r.variant);
    auto& slot = by_variant[r.variant];
    (r.head == HeadKind::kLinear ? slot.first : slot.second) = &r;
  }
  std::vector<HeadPair> pairs;
  for (const auto& v : order) {
    const auto& [lin, mlp] = by_variant[v];
    if (!lin || !mlp) throw PairingError("variant '" + v + "' lacks a LINEAR/MLP pair");
    pairs.push_back({v, lin->token_accuracy, mlp->token_accuracy});
  }
  if (pairs.empty()) throw PairingError("comparison table is empty");
  return pairs;
}

inline std::string plot_head_comparison(const ComparisonTable& table) {
  const auto pairs = head_pairs(table);
  const double left = 60, top = 40, plot_h = 260, bar_w = 28, group_gap = 36;
  const double group_w = 2 * bar_w + group_gap;
  const double width = left + static_cast<double>(pairs.size()) * group_w + 140;
  const double height = top + plot_h + 60;
  svg::Document doc(width, height);
  doc.text(width / 2, 22, "Per-token accuracy: LINEAR vs MLP head", "middle", 14);
  doc.line(left, top, left, top + plot_h);
  doc.line(left, top + plot_h, width - 130, top + plot_h);
  for (int t = 0; t <= 5; ++t) {
    const double y = top + plot_h - plot_h * t / 5.0;
    char label[16];
    std::snprintf(label, sizeof label, "%.1f", t / 5.0);
    doc.text(left - 6, y + 4, label, "end", 10);
  }
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  for (std::size_t g = 0; g < pairs.size(); ++g) {
    const double x0 = left + group_gap / 2 + static_cast<double>(g) * group_w;
    const double values[2] = {clamp01(pairs[g].linear), clamp01(pairs[g].mlp)};
    for (int k = 0; k < 2; ++k) {
      const double h = plot_h * values[k];
      const double x = x0 + k * bar_w;
      doc.rect(x, top + plot_h - h, bar_w - 2, h, svg::color(static_cast<std::size_t>(k)), "bar");
      char label[16];
      std::snprintf(label, sizeof label, "%.3f", values[k]);
      doc.text(x + bar_w / 2 - 1, top + plot_h - h - 4, label, "middle", 8);
    }
    doc.text(x0 + bar_w, top + plot_h + 16, pairs[g].variant, "middle", 11);
  }
  const double lx = width - 120;
  doc.rect(lx, top, 12, 12, svg::color(0));
  doc.text(lx + 18, top + 10, "LINEAR", "start", 11);
  doc.rect(lx, top + 20, 12, 12, svg::color(1));
  doc.text(lx + 18, top + 30, "MLP", "start", 11);
  return doc.str();
}

// Text lines describing, per variant, whether the MLP head beat the linear one.
inline std::string head_observations(const ComparisonTable& table) {
  std::string out;
  char buf[256];
  for (const auto& p : head_pairs(table)) {
    const double diff = p.mlp - p.linear;
    std::snprintf(buf, sizeof buf, "%s: MLP %.4f vs LINEAR %.4f per-token accuracy (%+.4f) -> %s\n", p.variant.c_str(),
                  p.mlp, p.linear, diff, diff > 0 ? "MLP head ahead" : diff < 0 ? "LINEAR head ahead" : "tie");
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Token representation export and PCA scatter

inline std::string representations_csv(const Representations& reps, const TagSchema& schema) {
  std::string out;
  for (Eigen::Index c = 0; c < reps.vectors.cols(); ++c) out += "d" + std::to_string(c) + ",";
  out += "tag\n";
  char buf[40];
  for (Eigen::Index r = 0; r < reps.vectors.rows(); ++r) {
    for (Eigen::Index c = 0; c < reps.vectors.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g,", reps.vectors(r, c));
      out += buf;
    }
    out += schema.tag_name(reps.gold[static_cast<std::size_t>(r)]) + "\n";
  }
  return out;
}

inline Representations parse_representations_csv(const std::string& text, const TagSchema& schema) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  Representations reps;
  std::size_t line_no = 0, width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (line_no == 1) {
      if (cols.size() < 2 || cols.back() != "tag") throw ParseError(1, "expected d0..dN,tag header");
      width = cols.size() - 1;
      continue;
    }
    if (cols.size() != width + 1) throw ParseError(line_no, "wrong column count");
    std::vector<double> v;
    try {
      for (std::size_t c = 0; c < width; ++c) v.push_back(std::stod(cols[c]));
      reps.gold.push_back(schema.tag_id(cols.back()));
    } catch (const std::invalid_argument&) {
      throw ParseError(line_no, "non-numeric value");
    } catch (const UnknownTag& e) {
      throw ParseError(line_no, e.what());
    }
    rows.push_back(std::move(v));
  }
  reps.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) reps.vectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return reps;
}

// Scatter of the top-2 principal components, colored by entity type.
inline std::string plot_pca(const PcaResult& pca, const std::vector<TagId>& gold, const TagSchema& schema) {
  if (gold.size() != static_cast<std::size_t>(pca.coords.rows())) throw ShapeError("one gold tag per PCA row required");
  const double size = 420, margin = 40, legend_w = 150;
  svg::Document doc(size + legend_w, size + 30);
  doc.text((size + legend_w) / 2, 20, "Token representations (PCA)", "middle", 14);
  const auto& c = pca.coords;
  const double xmin = c.col(0).minCoeff(), xmax = c.col(0).maxCoeff();
  const double ymin = c.col(1).minCoeff(), ymax = c.col(1).maxCoeff();
  auto sx = [&](double v) { return margin + (xmax > xmin ? (v - xmin) / (xmax - xmin) : 0.5) * (size - 2 * margin); };
  auto sy = [&](double v) { return size - margin + 10 - (ymax > ymin ? (v - ymin) / (ymax - ymin) : 0.5) * (size - 2 * margin); };
  doc.line(margin, size - margin + 10, size - margin, size - margin + 10);
  doc.line(margin, 30, margin, size - margin + 10);
  doc.text(size / 2, size + 20, "PC1", "middle", 11);
  doc.text(14, size / 2, "PC2", "middle", 11, -90);
  auto group = [&](TagId t) -> std::size_t {
    const auto e = schema.entity_of(t);
    return e ? *e + 1 : 0;
  };
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    doc.circle(sx(c(r, 0)), sy(c(r, 1)), 2.5, svg::color(group(gold[static_cast<std::size_t>(r)])), "point");
  }
  std::vector<bool> present(schema.num_entity_types() + 1, false);
  for (TagId t : gold) present[group(t)] = true;
  double ly = 40;
  for (std::size_t g = 0; g < present.size(); ++g) {
    if (!present[g]) continue;
    doc.rect(size + 10, ly - 9, 10, 10, svg::color(g));
    doc.text(size + 26, ly, g == 0 ? std::string("O") : schema.entity_types()[g - 1].name, "start", 10);
    ly += 16;
  }
  return doc.str();
}

}  // namespace addrparse
