#pragma once

#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "addrparse/error.hpp"
#include "addrparse/schema.hpp"

namespace addrparse {

using TagSequences = std::vector<std::vector<TagId>>;

// Rows = gold tag, columns = predicted tag.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_tags) : n_(num_tags), counts_(num_tags * num_tags, 0) {}

  std::size_t num_tags() const noexcept { return n_; }
  std::size_t at(TagId gold, TagId pred) const { return counts_[index(gold, pred)]; }
  void add(TagId gold, TagId pred) { ++counts_[index(gold, pred)]; }

  std::size_t total() const {
    std::size_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  std::size_t trace() const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < n_; ++i) s += counts_[i * n_ + i];
    return s;
  }
  std::size_t row_sum(TagId gold) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += counts_[index(gold, static_cast<TagId>(p))];
    return s;
  }
  std::size_t col_sum(TagId pred) const {
    std::size_t s = 0;
    for (std::size_t g = 0; g < n_; ++g) s += counts_[index(static_cast<TagId>(g), pred)];
    return s;
  }
  std::size_t tp(TagId t) const { return at(t, t); }
  std::size_t fp(TagId t) const { return col_sum(t) - tp(t); }
  std::size_t fn(TagId t) const { return row_sum(t) - tp(t); }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t index(TagId g, TagId p) const {
    if (g < 0 || p < 0 || static_cast<std::size_t>(g) >= n_ || static_cast<std::size_t>(p) >= n_) {
      throw UnknownTag("tag id outside confusion matrix");
    }
    return static_cast<std::size_t>(g) * n_ + static_cast<std::size_t>(p);
  }

  std::size_t n_;
  std::vector<std::size_t> counts_;
};

inline void check_aligned(const TagSequences& gold, const TagSequences& pred) {
  if (gold.size() != pred.size()) {
    throw AlignmentError("gold has " + std::to_string(gold.size()) + " samples, prediction has " +
                         std::to_string(pred.size()));
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) throw AlignmentError("length mismatch in sample " + std::to_string(i));
  }
}

inline ConfusionMatrix confusion(const TagSequences& gold, const TagSequences& pred, std::size_t num_tags) {
  check_aligned(gold, pred);
  ConfusionMatrix cm(num_tags);
  for (std::size_t s = 0; s < gold.size(); ++s) {
    for (std::size_t i = 0; i < gold[s].size(); ++i) cm.add(gold[s][i], pred[s][i]);
  }
  return cm;
}

inline ConfusionMatrix confusion(const TagSequences& gold, const TagSequences& pred, const TagSchema& schema) {
  return confusion(gold, pred, schema.num_tags());
}

// 100 * N / S, where a sample counts only if every token is right.
inline double sample_accuracy(const TagSequences& gold, const TagSequences& pred) {
  check_aligned(gold, pred);
  if (gold.empty()) throw EmptyEval("no samples to evaluate");
  std::size_t correct = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) correct += gold[s] == pred[s];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(gold.size());
}

// 100 * C / T over tokens pooled across samples.
inline double token_accuracy(const TagSequences& gold, const TagSequences& pred) {
  check_aligned(gold, pred);
  std::size_t correct = 0, total = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    for (std::size_t i = 0; i < gold[s].size(); ++i) correct += gold[s][i] == pred[s][i];
    total += gold[s].size();
  }
  if (total == 0) throw EmptyEval("no tokens to evaluate");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

struct TagScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // TP + FP == 0
  bool recall_undefined = false;     // TP + FN == 0
};

struct MacroScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<TagScore> per_tag;
};

// Unweighted means over every tag of the matrix, absent tags included.
// A zero denominator yields 0 for that tag's score.
inline MacroScores macro_scores(const ConfusionMatrix& cm) {
  MacroScores out;
  const std::size_t n = cm.num_tags();
  for (std::size_t i = 0; i < n; ++i) {
    const TagId t = static_cast<TagId>(i);
    const double tp = static_cast<double>(cm.tp(t));
    const double fp = static_cast<double>(cm.fp(t));
    const double fn = static_cast<double>(cm.fn(t));
    TagScore s;
    s.precision_undefined = tp + fp == 0.0;
    s.recall_undefined = tp + fn == 0.0;
    s.precision = s.precision_undefined ? 0.0 : tp / (tp + fp);
    s.recall = s.recall_undefined ? 0.0 : tp / (tp + fn);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    out.precision += s.precision;
    out.recall += s.recall;
    out.f1 += s.f1;
    out.per_tag.push_back(s);
  }
  out.precision /= static_cast<double>(n);
  out.recall /= static_cast<double>(n);
  out.f1 /= static_cast<double>(n);
  return out;
}

struct EvalReport {
  double sample_accuracy = 0.0;  // percent
  double token_accuracy = 0.0;   // percent
  std::size_t sample_count = 0;
  std::size_t token_count = 0;
  std::size_t label_count = 0;
  MacroScores macro;
  ConfusionMatrix confusion{0};
};

inline EvalReport evaluate(const TagSequences& gold, const TagSequences& pred, const TagSchema& schema) {
  EvalReport r;
  r.confusion = confusion(gold, pred, schema);
  r.sample_accuracy = sample_accuracy(gold, pred);
  r.token_accuracy = token_accuracy(gold, pred);
  r.sample_count = gold.size();
  r.token_count = r.confusion.total();
  r.label_count = schema.num_tags();
  r.macro = macro_scores(r.confusion);
  return r;
}

// One row per tag, then summary rows keyed in the `tag` column.
inline std::string report_csv(const EvalReport& r, const TagSchema& schema) {
  std::string out = "tag,precision,recall,f1,tp,fp,fn,support,undefined\n";
  char buf[256];
  for (std::size_t i = 0; i < r.macro.per_tag.size(); ++i) {
    const TagId t = static_cast<TagId>(i);
    const auto& s = r.macro.per_tag[i];
    std::string undefined;
    if (s.precision_undefined) undefined += "precision";
    if (s.recall_undefined) undefined += undefined.empty() ? "recall" : "|recall";
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%zu,%zu,%zu,%zu,%s\n", schema.tag_name(t).c_str(), s.precision,
                  s.recall, s.f1, r.confusion.tp(t), r.confusion.fp(t), r.confusion.fn(t), r.confusion.row_sum(t),
                  undefined.c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "macro_precision,%.6f,,,,,,,\nmacro_recall,,%.6f,,,,,,\nmacro_f1,,,%.6f,,,,,\n"
                "sample_accuracy_pct,%.4f,,,,,,%zu,\ntoken_accuracy_pct,%.4f,,,,,,%zu,\n",
                r.macro.precision, r.macro.recall, r.macro.f1, r.sample_accuracy, r.sample_count, r.token_accuracy,
                r.token_count);
  out += buf;
  return out;
}

}  // namespace addrparse
