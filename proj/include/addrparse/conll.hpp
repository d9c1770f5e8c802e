#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "addrparse/dataset.hpp"

namespace addrparse {

namespace detail {

inline bool is_blank_char(char c) { return c == ' ' || c == '\t' || c == '\r'; }

inline std::vector<std::string_view> split_columns(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_blank_char(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_blank_char(line[i])) ++i;
    if (i > start) cols.push_back(line.substr(start, i - start));
  }
  return cols;
}

}  // namespace detail

// Two whitespace-separated columns per line (token, tag); a blank line ends
// a sample. A trailing sample without the closing blank line is accepted.
// kTagsOnly skips the IOB well-formedness check, for model predictions.
enum class ConllCheck { kStrict, kTagsOnly };

inline std::vector<AddressSample> parse_conll(std::string_view text, const TagSchema& schema,
                                              ConllCheck check = ConllCheck::kStrict) {
  std::vector<AddressSample> samples;
  AddressSample current;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (current.tokens.empty()) return;
    if (check == ConllCheck::kStrict) {
      check_sample(current, schema, samples.size());
    } else if (current.tokens.size() > kMaxSequenceLength) {
      throw SchemaError(samples.size(), "sample longer than 256 tokens");
    }
    samples.push_back(std::move(current));
    current = AddressSample{};
  };

  std::size_t pos = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    const auto cols = detail::split_columns(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols.size() != 2) {
      throw ParseError(line_no, "expected 2 columns (token, tag), got " + std::to_string(cols.size()));
    }
    TagId tag;
    try {
      tag = schema.tag_id(cols[1]);
    } catch (const UnknownTag& e) {
      throw ParseError(line_no, e.what());
    }
    current.tokens.push_back(turkish_lowercase(cols[0]));
    current.tags.push_back(tag);
  }
  flush();
  return samples;
}

// Canonical form: single TAB separator, blank line after every sample, no BOM.
inline std::string write_conll(const std::vector<AddressSample>& samples, const TagSchema& schema) {
  std::string out;
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += s.tokens[i].str();
      out += '\t';
      out += schema.tag_name(s.tags[i]);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

}  // namespace addrparse
