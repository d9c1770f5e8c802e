#pragma once

#include <compare>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "addrparse/error.hpp"

namespace addrparse {

// UTF-8 text that is NFC-normalized and lowercased under Turkish casing.
// Only turkish_lowercase() can produce one.
class NormalizedText {
 public:
  NormalizedText() = default;

  const std::string& str() const noexcept { return text_; }
  std::string_view view() const noexcept { return text_; }
  bool empty() const noexcept { return text_.empty(); }

  friend bool operator==(const NormalizedText&, const NormalizedText&) = default;
  friend auto operator<=>(const NormalizedText&, const NormalizedText&) = default;

 private:
  explicit NormalizedText(std::string text) : text_(std::move(text)) {}
  friend NormalizedText turkish_lowercase(std::string_view raw);

  std::string text_;
};

namespace detail {

inline const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || norm == nullptr) {
    throw Error("ICU NFC normalizer unavailable");
  }
  return *norm;
}

inline icu::UnicodeString nfc_normalize(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc().normalize(s, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  return out;
}

}  // namespace detail

// NFC, then the two Turkish dotted/dotless overrides (I -> ı, İ -> i), then
// root-locale full lowercase, then NFC again so the result is an NFC fixed
// point. Invalid UTF-8 sequences become U+FFFD.
inline NormalizedText turkish_lowercase(std::string_view raw) {
  icu::UnicodeString u = detail::nfc_normalize(
      icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size()))));
  for (int32_t i = 0; i < u.length(); ++i) {
    const char16_t c = u.charAt(i);
    if (c == u'I') {
      u.setCharAt(i, u'ı');
    } else if (c == u'İ') {
      u.setCharAt(i, u'i');
    }
  }
  u.toLower(icu::Locale::getRoot());
  u = detail::nfc_normalize(u);
  std::string out;
  u.toUTF8String(out);
  return NormalizedText(std::move(out));
}

// True when `text` is already a fixed point of turkish_lowercase.
inline bool is_normalized(std::string_view text) {
  return turkish_lowercase(text).view() == text;
}

inline std::vector<NormalizedText> normalize_sample(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw EmptySample("sample has no tokens");
  std::vector<NormalizedText> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(turkish_lowercase(t));
  return out;
}

}  // namespace addrparse

template <>
struct std::hash<addrparse::NormalizedText> {
  std::size_t operator()(const addrparse::NormalizedText& t) const noexcept {
    return std::hash<std::string>{}(t.str());
  }
};
