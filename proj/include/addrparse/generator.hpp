#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "addrparse/dataset.hpp"
#include "addrparse/rng.hpp"

namespace addrparse {

namespace gazetteer {

inline const std::vector<std::string>& cities() {
  static const std::vector<std::string> v = {
      "istanbul", "ankara",  "izmir",     "bursa",   "antalya",   "adana",   "konya",
      "gaziantep", "mersin", "kayseri",   "eskişehir", "diyarbakır", "samsun", "denizli",
      "trabzon",  "malatya", "sakarya",   "kocaeli", "tekirdağ",  "muğla",   "aydın",
      "balıkesir", "manisa", "hatay",     "erzurum", "van",       "sivas",   "çanakkale",
      "edirne",   "rize",    "ordu",      "bolu",    "ısparta",   "çorum",   "düzce"};
  return v;
}

// Multi-token spellings users type for some cities.
inline const std::vector<std::string>& split_cities() {
  static const std::vector<std::string> v = {"kahraman maraş", "şanlı urfa", "afyon karahisar"};
  return v;
}

inline const std::vector<std::string>& districts() {
  static const std::vector<std::string> v = {
      "kadıköy",  "beşiktaş", "üsküdar",  "şişli",     "bakırköy", "ataşehir", "maltepe",
      "kartal",   "pendik",   "sarıyer",  "beylikdüzü", "esenyurt", "çankaya",  "keçiören",
      "yenimahalle", "etimesgut", "mamak", "sincan",   "bornova",  "karşıyaka", "buca",
      "konak",    "çiğli",    "nilüfer",  "osmangazi", "yıldırım", "muratpaşa", "konyaaltı",
      "kepez",    "seyhan",   "çukurova", "selçuklu",  "meram",    "şahinbey", "melikgazi",
      "odunpazarı", "tepebaşı", "ilkadım", "pamukkale", "ortahisar", "bodrum",  "fethiye",
      "marmaris", "alanya",   "manavgat"};
  return v;
}

inline const std::vector<std::string>& split_districts() {
  static const std::vector<std::string> v = {"merkez efendi", "yeni mahalle", "bahçeli evler"};
  return v;
}

// Shared by neighborhoods, streets, avenues, sites and buildings so that the
// suffix word decides the entity type.
inline const std::vector<std::string>& place_names() {
  static const std::vector<std::string> v = {
      "atatürk",  "cumhuriyet", "istiklal", "gazi",    "fatih",    "barbaros", "inönü",
      "yıldız",   "çamlık",     "bağlar",   "gül",     "lale",     "menekşe",  "papatya",
      "zafer",    "millet",     "hürriyet", "yavuz selim", "mimar sinan", "piri reis",
      "kazım karabekir", "fevzi çakmak", "mevlana", "yunus emre", "akasya", "ıhlamur",
      "çınar",    "söğüt",      "zeytin",   "kartal",  "doğan",    "ada",      "deniz",
      "güneş",    "bahar",      "pınar",    "esentepe", "levent",  "moda",     "kemeraltı",
      "ilkbahar", "selvi",      "orhan gazi", "osman gazi", "şehitler", "ışık", "umut"};
  return v;
}

inline const std::vector<std::string>& village_names() {
  static const std::vector<std::string> v = {"karaağaç", "kızılcaören", "yeşilköy", "çamlıca",
                                             "dereköy",  "sarıkaya",    "akpınar",  "kocatepe",
                                             "yassıören", "gökçeli",    "aşağı kayabaşı",
                                             "yukarı ovacık"};
  return v;
}

inline const std::vector<std::string>& pois() {
  static const std::vector<std::string> v = {
      "migros",           "bim",               "a101",            "şok market",
      "carrefoursa",      "starbucks",         "kahve dünyası",   "nike store",
      "hagia sofia",      "ayasofya camii",    "galata kulesi",   "kız kulesi",
      "forum istanbul avm", "cevahir avm",     "optimum avm",     "agora avm",
      "şehir hastanesi",  "devlet hastanesi",  "acıbadem hastanesi", "memorial hastanesi",
      "anadolu lisesi",   "fen lisesi",        "boğaziçi üniversitesi", "ege üniversitesi",
      "ziraat bankası",   "iş bankası",        "garanti bankası", "ptt",
      "belediye binası",  "adliye",            "emniyet müdürlüğü", "otogar",
      "havalimanı",       "tren garı",         "metro istasyonu", "marmaray durağı",
      "vapur iskelesi",   "mc donalds",        "burger king",     "dominos pizza",
      "teknosa",          "mediamarkt",        "koton",           "lc waikiki",
      "hilton oteli",     "divan oteli",       "kent parkı",      "sahil parkı",
      "spor salonu",      "yüzme havuzu",      "eczane",          "çarşı",
      "kapalı çarşı",     "mısır çarşısı",     "atatürk havalimanı", "gazi parkı"};
  return v;
}

inline const std::vector<std::string>& connectors() {
  static const std::vector<std::string> v = {"yanı", "karşısı", "arkası", "civarı", "yakını",
                                             "önü",  "ve",      "/",      "-",      "bitişiği"};
  return v;
}

inline const std::vector<std::string>& countries() {
  static const std::vector<std::string> v = {"türkiye", "türkiye", "türkiye cumhuriyeti", "tr"};
  return v;
}

}  // namespace gazetteer

namespace detail {

inline std::vector<std::string> words(const std::string& phrase) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < phrase.size()) {
    const std::size_t j = phrase.find(' ', i);
    const std::size_t end = j == std::string::npos ? phrase.size() : j;
    if (end > i) out.push_back(phrase.substr(i, end - i));
    i = end + 1;
  }
  return out;
}

class SampleBuilder {
 public:
  explicit SampleBuilder(const TagSchema& schema) : schema_(schema) {}

  void entity(const std::string& type, const std::vector<std::string>& tokens) {
    const std::size_t e = schema_.entity_index(type);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      TagId tag = schema_.begin_tag(e);
      if (i > 0) {
        const auto inside = schema_.inside_tag(e);
        if (!inside) throw ConfigError("entity type " + type + " is single-token in this schema");
        tag = *inside;
      }
      tokens_.push_back(tokens[i]);
      tags_.push_back(tag);
    }
  }

  void outside(const std::string& token) {
    tokens_.push_back(token);
    tags_.push_back(TagSchema::kOutside);
  }

  bool empty() const { return tokens_.empty(); }

  AddressSample finish() && {
    AddressSample s;
    s.tokens = normalize_sample(tokens_);
    s.tags = std::move(tags_);
    check_sample(s, schema_);
    return s;
  }

 private:
  const TagSchema& schema_;
  std::vector<std::string> tokens_;
  std::vector<TagId> tags_;
};

using Segment = std::pair<std::string, std::vector<std::string>>;

inline std::vector<std::string> with_suffix(Rng& rng, const std::vector<std::string>& names,
                                            const std::vector<std::string>& suffixes) {
  auto out = words(rng.pick(names));
  out.push_back(rng.pick(suffixes));
  return out;
}

inline AddressSample generate_one(Rng& rng, const TagSchema& schema) {
  namespace gz = gazetteer;
  // Detail segments (inside a site or building) and the administrative tail.
  std::vector<Segment> detail, street_part, admin;
  Segment poi;
  bool has_poi = false;

  if (rng.bernoulli(0.85)) {
    poi = {"POI", words(rng.pick(gz::pois()))};
    has_poi = true;
  }
  if (rng.bernoulli(0.12)) detail.push_back({"SITE", with_suffix(rng, gz::place_names(), {"sitesi", "sitesi", "evleri"})});
  if (rng.bernoulli(0.15)) detail.push_back({"BUILDING", with_suffix(rng, gz::place_names(), {"apartmanı", "apt.", "plaza"})});
  if (rng.bernoulli(0.09)) {
    const std::vector<std::string> letters = {"a", "b", "c", "d", "e", "f"};
    std::string block = rng.pick(letters);
    if (rng.bernoulli(0.3)) block += std::to_string(1 + rng.below(4));
    detail.push_back({"BLOCK", {block + "-blok"}});
  }
  if (rng.bernoulli(0.08)) detail.push_back({"FLOOR", {"kat:" + std::to_string(1 + rng.below(12))}});
  if (rng.bernoulli(0.04)) detail.push_back({"DOOR", {"no:" + std::to_string(1 + rng.below(80))}});

  if (rng.bernoulli(0.35)) street_part.push_back({"STREET", with_suffix(rng, gz::place_names(), {"sokak", "sokağı", "sk."})});
  if (rng.bernoulli(0.30)) street_part.push_back({"AVENUE", with_suffix(rng, gz::place_names(), {"caddesi", "cad.", "bulvarı"})});
  if (rng.bernoulli(0.45)) street_part.push_back({"NEIGHBORHOOD", with_suffix(rng, gz::place_names(), {"mahallesi", "mah.", "mahallesi"})});
  if (rng.bernoulli(0.10)) street_part.push_back({"VILLAGE", with_suffix(rng, gz::village_names(), {"köyü", "köyü", "köy"})});

  if (rng.bernoulli(0.50)) {
    admin.push_back({"DISTRICT", words(rng.bernoulli(0.08) ? rng.pick(gz::split_districts()) : rng.pick(gz::districts()))});
  }
  if (rng.bernoulli(0.55)) {
    admin.push_back({"CITY", words(rng.bernoulli(0.06) ? rng.pick(gz::split_cities()) : rng.pick(gz::cities()))});
  }
  if (rng.bernoulli(0.08)) {
    const std::uint64_t plate = 1 + rng.below(81);
    std::string code = (plate < 10 ? "0" : "") + std::to_string(plate);
    for (int i = 0; i < 3; ++i) code += static_cast<char>('0' + rng.below(10));
    admin.push_back({"POSTCODE", {code}});
  }
  if (rng.bernoulli(0.12)) admin.push_back({"COUNTRY", words(rng.pick(gz::countries()))});
  if (rng.bernoulli(0.15) && admin.size() >= 2) std::swap(admin[0], admin[1]);

  SampleBuilder b(schema);
  const bool poi_last = has_poi && rng.bernoulli(0.3);
  if (has_poi && !poi_last) {
    b.entity(poi.first, poi.second);
    if (rng.bernoulli(0.25)) b.outside(rng.pick(gz::connectors()));
  }
  for (const auto& [type, toks] : detail) b.entity(type, toks);
  for (const auto& [type, toks] : street_part) b.entity(type, toks);
  for (const auto& [type, toks] : admin) b.entity(type, toks);
  if (poi_last) {
    if (rng.bernoulli(0.25)) b.outside(rng.pick(gz::connectors()));
    b.entity(poi.first, poi.second);
  }
  if (b.empty()) b.entity("POI", words(rng.pick(gz::pois())));
  return std::move(b).finish();
}

}  // namespace detail

// Synthetic Turkish address queries. Sample i depends only on (seed, i), so a
// smaller dataset is a prefix of a larger one with the same seed.
inline std::vector<AddressSample> generate_dataset(std::uint64_t seed, long long size,
                                                   const TagSchema& schema) {
  if (size < 1) throw InvalidSize("dataset size must be >= 1, got " + std::to_string(size));
  std::vector<AddressSample> out;
  out.reserve(static_cast<std::size_t>(size));
  for (long long i = 0; i < size; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(detail::generate_one(rng, schema));
  }
  return out;
}

}  // namespace addrparse
