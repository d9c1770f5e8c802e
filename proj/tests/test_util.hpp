#pragma once

#include <string>
#include <vector>

#include "addrparse/dataset.hpp"
#include "addrparse/rng.hpp"

namespace addrparse::testing {

// Random UTF-8 string over all scalar values, biased toward Latin, Turkish
// letters and combining marks so casing and composition paths get exercised.
inline std::string random_unicode(Rng& rng, std::size_t max_len) {
  static const std::vector<char32_t> interesting = {U'I', U'i', U'İ', U'ı', U'Ş', U'ş', U'Ğ', U'ğ', U'Ü', U'ü',
                                                    U'Ö', U'ö', U'Ç', U'ç', 0x0307, 0x0301, 0x0308, 0x0327,
                                                    U'Σ', U'ς', U'ẞ', U'Ǆ', U'ǅ', U' ', U'A', U'Z'};
  std::string out;
  const std::size_t len = rng.below(max_len + 1);
  for (std::size_t k = 0; k < len; ++k) {
    char32_t cp;
    const auto bucket = rng.below(4);
    if (bucket == 0) {
      cp = rng.pick(interesting);
    } else if (bucket == 1) {
      cp = static_cast<char32_t>(0x20 + rng.below(0x250 - 0x20));
    } else {
      do {
        cp = static_cast<char32_t>(rng.below(0x110000));
      } while (cp >= 0xD800 && cp <= 0xDFFF);
    }
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  return out;
}

inline std::vector<AddressSample> poi_example(const TagSchema& schema) {
  return {make_sample({"nike", "store", "hagia", "sofia"}, {"B-POI", "I-POI", "B-POI", "I-POI"}, schema)};
}

}  // namespace addrparse::testing
