#pragma once

// Brute-force reference for the token metrics: counts straight from the tag
// sequences with no confusion matrix in between.

#include <algorithm>
#include <vector>

#include "addrparse/metrics.hpp"
#include "addrparse/rng.hpp"

namespace addrparse::testing {

struct OracleMetrics {
  double sample_acc = 0, token_acc = 0, macro_p = 0, macro_r = 0, macro_f1 = 0;
};

inline OracleMetrics oracle_metrics(const TagSequences& gold, const TagSequences& pred, int num_tags) {
  OracleMetrics o;
  long perfect = 0, correct = 0, total = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    bool all = true;
    for (std::size_t i = 0; i < gold[s].size(); ++i) {
      ++total;
      if (gold[s][i] == pred[s][i]) {
        ++correct;
      } else {
        all = false;
      }
    }
    perfect += all;
  }
  o.sample_acc = 100.0 * perfect / static_cast<double>(gold.size());
  o.token_acc = 100.0 * correct / static_cast<double>(total);
  for (int t = 0; t < num_tags; ++t) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t s = 0; s < gold.size(); ++s) {
      for (std::size_t i = 0; i < gold[s].size(); ++i) {
        const bool g = gold[s][i] == t, p = pred[s][i] == t;
        tp += g && p;
        fp += !g && p;
        fn += g && !p;
      }
    }
    const double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    o.macro_p += prec;
    o.macro_r += rec;
    o.macro_f1 += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  }
  o.macro_p /= num_tags;
  o.macro_r /= num_tags;
  o.macro_f1 /= num_tags;
  return o;
}

// Random aligned instance; `noise` is the chance a prediction is replaced.
inline std::pair<TagSequences, TagSequences> random_instance(Rng& rng, int num_tags, std::size_t max_samples,
                                                             std::size_t max_len, double noise) {
  TagSequences gold, pred;
  const std::size_t n = 1 + rng.below(max_samples);
  // Skewed tag usage so some tags go missing and zero-division paths fire.
  const int used = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(num_tags)));
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t len = 1 + rng.below(max_len);
    std::vector<TagId> g(len), p(len);
    for (std::size_t i = 0; i < len; ++i) {
      g[i] = static_cast<TagId>(rng.below(static_cast<std::uint64_t>(used)));
      p[i] = rng.bernoulli(noise) ? static_cast<TagId>(rng.below(static_cast<std::uint64_t>(num_tags))) : g[i];
    }
    gold.push_back(std::move(g));
    pred.push_back(std::move(p));
  }
  return {gold, pred};
}

}  // namespace addrparse::testing
