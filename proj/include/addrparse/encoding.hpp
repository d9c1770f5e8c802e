#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "addrparse/dataset.hpp"

namespace addrparse {

// Word-level vocabulary built from the training split. PAD = 0, UNK = 1,
// remaining ids assigned in byte order of the token text.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary() : tokens_{"<pad>", "<unk>"} { rebuild_index(); }

  static Vocabulary build(const std::vector<AddressSample>& train, int min_count = 1) {
    if (train.empty()) throw EmptyTrain("cannot build a vocabulary from an empty training split");
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    std::map<std::string, int> counts;
    for (const auto& s : train) {
      for (const auto& t : s.tokens) ++counts[t.str()];
    }
    Vocabulary v;
    for (const auto& [tok, n] : counts) {
      if (n >= min_count) v.tokens_.push_back(tok);
    }
    v.rebuild_index();
    return v;
  }

  std::size_t size() const noexcept { return tokens_.size(); }

  int id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }
  int id(const NormalizedText& token) const { return id(token.view()); }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  // "token<TAB>id" per line.
  std::string to_text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      out += tokens_[i];
      out += '\t';
      out += std::to_string(i);
      out += '\n';
    }
    return out;
  }

  static Vocabulary parse(std::string_view text) {
    std::vector<std::pair<int, std::string>> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos) throw ParseError(line_no, "expected token<TAB>id");
      int id = 0;
      try {
        id = std::stoi(line.substr(tab + 1));
      } catch (const std::exception&) {
        throw ParseError(line_no, "bad vocabulary id");
      }
      rows.emplace_back(id, line.substr(0, tab));
    }
    std::sort(rows.begin(), rows.end());
    Vocabulary v;
    v.tokens_.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].first != static_cast<int>(i)) throw FormatError("vocabulary ids are not contiguous from 0");
      v.tokens_.push_back(rows[i].second);
    }
    if (v.tokens_.size() < 2) throw FormatError("vocabulary must contain PAD and UNK");
    v.rebuild_index();
    if (v.index_.size() != v.tokens_.size()) throw FormatError("duplicate vocabulary token");
    return v;
  }

  // FNV-1a over the persisted text form; stored in checkpoints.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : to_text()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Padded [rows x cols] id matrices, row-major.
struct Batch {
  static constexpr int kIgnore = -100;

  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> token_ids;
  std::vector<int> tag_ids;
  std::vector<std::uint8_t> mask;

  int token(std::size_t r, std::size_t c) const { return token_ids[r * cols + c]; }
  int tag(std::size_t r, std::size_t c) const { return tag_ids[r * cols + c]; }
  bool real(std::size_t r, std::size_t c) const { return mask[r * cols + c] != 0; }

  std::size_t length(std::size_t r) const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < cols; ++c) n += mask[r * cols + c];
    return n;
  }

  std::size_t real_count() const {
    std::size_t n = 0;
    for (auto m : mask) n += m;
    return n;
  }
};

// Dynamic padding: width is the longest sample in the batch.
inline Batch encode_batch(const std::vector<AddressSample>& samples, const Vocabulary& vocab,
                          const TagSchema& schema) {
  Batch b;
  b.rows = samples.size();
  for (const auto& s : samples) {
    if (s.size() > kMaxSequenceLength) {
      throw TooLong("sample of " + std::to_string(s.size()) + " tokens exceeds " +
                    std::to_string(kMaxSequenceLength));
    }
    b.cols = std::max(b.cols, s.size());
  }
  b.token_ids.assign(b.rows * b.cols, Vocabulary::kPad);
  b.tag_ids.assign(b.rows * b.cols, Batch::kIgnore);
  b.mask.assign(b.rows * b.cols, 0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const auto& s = samples[r];
    for (std::size_t c = 0; c < s.size(); ++c) {
      if (!schema.contains(s.tags[c])) throw UnknownTag("unknown tag id " + std::to_string(s.tags[c]));
      b.token_ids[r * b.cols + c] = vocab.id(s.tokens[c]);
      b.tag_ids[r * b.cols + c] = s.tags[c];
      b.mask[r * b.cols + c] = 1;
    }
  }
  return b;
}

struct DecodedRow {
  std::vector<int> token_ids;
  std::vector<TagId> tags;
};

inline std::vector<DecodedRow> decode_batch(const Batch& b) {
  std::vector<DecodedRow> out(b.rows);
  for (std::size_t r = 0; r < b.rows; ++r) {
    for (std::size_t c = 0; c < b.cols; ++c) {
      if (!b.real(r, c)) continue;
      out[r].token_ids.push_back(b.token(r, c));
      out[r].tags.push_back(b.tag(r, c));
    }
  }
  return out;
}

}  // namespace addrparse
