#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "addrparse/error.hpp"
#include "addrparse/rng.hpp"
#include "addrparse/schema.hpp"
#include "addrparse/turkish_text.hpp"

namespace addrparse {

inline constexpr std::size_t kMaxSequenceLength = 256;

// One address query: normalized tokens with aligned IOB tags.
struct AddressSample {
  std::vector<NormalizedText> tokens;
  std::vector<TagId> tags;

  std::size_t size() const noexcept { return tokens.size(); }
  friend bool operator==(const AddressSample&, const AddressSample&) = default;
};

// Throws SchemaError (with `index` as the sample position) if the sample
// breaks a length, alignment, token or IOB invariant.
inline void check_sample(const AddressSample& s, const TagSchema& schema, std::size_t index = 0) {
  if (s.tokens.empty()) throw SchemaError(index, "empty sample");
  if (s.tokens.size() != s.tags.size()) throw SchemaError(index, "token/tag count mismatch");
  if (s.tokens.size() > kMaxSequenceLength) {
    throw SchemaError(index, "sample longer than " + std::to_string(kMaxSequenceLength) + " tokens");
  }
  for (const auto& t : s.tokens) {
    if (t.empty() || t.str().find_first_of(" \t\n\r") != std::string::npos) {
      throw SchemaError(index, "token is empty or contains whitespace");
    }
  }
  if (auto v = validate_iob(std::span<const TagId>(s.tags), schema)) {
    throw SchemaError(index, "IOB violation at token " + std::to_string(v->index) + ": " + v->message);
  }
}

inline AddressSample make_sample(const std::vector<std::string>& tokens,
                                 const std::vector<std::string>& tags, const TagSchema& schema) {
  AddressSample s;
  s.tokens = normalize_sample(tokens);
  for (const auto& t : tags) s.tags.push_back(schema.tag_id(t));
  check_sample(s, schema);
  return s;
}

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

// round-half-up(0.7 n) for training; validation takes the odd remainder sample.
inline SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.train = (7 * n + 5) / 10;
  const std::size_t rest = n - s.train;
  s.validation = (rest + 1) / 2;
  s.test = rest / 2;
  return s;
}

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

inline SplitIndices split_indices(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw TooSmall("need at least 10 samples to split, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5b1175));
  rng.shuffle(order);
  const SplitSizes sz = split_sizes(n);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sz.train));
  out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(sz.train),
                        order.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.validation));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.validation), order.end());
  return out;
}

struct DatasetSplits {
  std::vector<AddressSample> train, validation, test;
};

inline DatasetSplits split_dataset(const std::vector<AddressSample>& samples, std::uint64_t seed) {
  const SplitIndices idx = split_indices(samples.size(), seed);
  auto gather = [&](const std::vector<std::size_t>& ids) {
    std::vector<AddressSample> out;
    out.reserve(ids.size());
    for (auto i : ids) out.push_back(samples[i]);
    return out;
  };
  return {gather(idx.train), gather(idx.validation), gather(idx.test)};
}

// Tag id -> count over all token positions. Ordered so iteration is deterministic.
inline std::map<TagId, std::size_t> label_histogram(const std::vector<AddressSample>& samples) {
  std::map<TagId, std::size_t> hist;
  for (const auto& s : samples) {
    for (TagId t : s.tags) ++hist[t];
  }
  return hist;
}

// Collapses B-X/I-X into X. O is reported under "O".
inline std::map<std::string, std::size_t> entity_histogram(const std::map<TagId, std::size_t>& tag_hist,
                                                           const TagSchema& schema) {
  std::map<std::string, std::size_t> out;
  for (const auto& [tag, count] : tag_hist) {
    const auto e = schema.entity_of(tag);
    out[e ? schema.entity_types()[*e].name : std::string("O")] += count;
  }
  return out;
}

}  // namespace addrparse
