#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "addrparse/error.hpp"

namespace addrparse {

using TagId = int;

struct EntityType {
  std::string name;
  bool multi_token = true;

  friend bool operator==(const EntityType&, const EntityType&) = default;
};

// Entity inventory and its IOB2 expansion. Tag ids: O = 0, then for each
// entity type in declaration order B-X followed by I-X (multi-token types only).
class TagSchema {
 public:
  static constexpr TagId kOutside = 0;

  explicit TagSchema(std::vector<EntityType> types) : types_(std::move(types)) {
    if (types_.empty()) throw ConfigError("schema has no entity types");
    tags_.push_back("O");
    for (std::size_t t = 0; t < types_.size(); ++t) {
      const std::string& name = types_[t].name;
      if (!valid_type_name(name)) throw ConfigError("invalid entity type name '" + name + "'");
      for (std::size_t u = 0; u < t; ++u) {
        if (types_[u].name == name) throw ConfigError("duplicate entity type '" + name + "'");
      }
      begin_.push_back(static_cast<TagId>(tags_.size()));
      tags_.push_back("B-" + name);
      if (types_[t].multi_token) {
        inside_.push_back(static_cast<TagId>(tags_.size()));
        tags_.push_back("I-" + name);
      } else {
        inside_.push_back(-1);
      }
    }
    entity_of_.assign(tags_.size(), -1);
    for (std::size_t t = 0; t < types_.size(); ++t) {
      entity_of_[begin_[t]] = static_cast<int>(t);
      if (inside_[t] >= 0) entity_of_[inside_[t]] = static_cast<int>(t);
    }
    for (std::size_t i = 0; i < tags_.size(); ++i) index_.emplace(tags_[i], static_cast<TagId>(i));
  }

  std::size_t num_tags() const noexcept { return tags_.size(); }
  std::size_t num_entity_types() const noexcept { return types_.size(); }
  const std::vector<EntityType>& entity_types() const noexcept { return types_; }
  const std::vector<std::string>& tag_names() const noexcept { return tags_; }

  const std::string& tag_name(TagId id) const {
    check_id(id);
    return tags_[static_cast<std::size_t>(id)];
  }

  TagId tag_id(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw UnknownTag("unknown tag '" + std::string(name) + "'");
    return it->second;
  }

  bool contains(TagId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tags_.size();
  }

  // Entity-type index of a B-/I- tag; nullopt for O.
  std::optional<std::size_t> entity_of(TagId id) const {
    check_id(id);
    const int e = entity_of_[static_cast<std::size_t>(id)];
    if (e < 0) return std::nullopt;
    return static_cast<std::size_t>(e);
  }

  bool is_inside(TagId id) const {
    const auto e = entity_of(id);
    return e && inside_[*e] == id;
  }

  TagId begin_tag(std::size_t entity) const { return begin_.at(entity); }

  // I- tag of a multi-token entity type, nullopt for single-token types.
  std::optional<TagId> inside_tag(std::size_t entity) const {
    const TagId id = inside_.at(entity);
    if (id < 0) return std::nullopt;
    return id;
  }

  std::size_t entity_index(std::string_view name) const {
    for (std::size_t t = 0; t < types_.size(); ++t) {
      if (types_[t].name == name) return t;
    }
    throw UnknownTag("unknown entity type '" + std::string(name) + "'");
  }

  // One entity type per line, "*" suffix marks single-token-only types.
  std::string to_text() const {
    std::string out;
    for (const auto& t : types_) {
      out += t.name;
      if (!t.multi_token) out += '*';
      out += '\n';
    }
    return out;
  }

  static TagSchema parse(std::string_view text) {
    std::vector<EntityType> types;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto last = line.find_last_not_of(" \t\r");
      std::string name = line.substr(first, last - first + 1);
      bool multi = true;
      if (name.back() == '*') {
        multi = false;
        name.pop_back();
      }
      types.push_back({std::move(name), multi});
    }
    return TagSchema(std::move(types));
  }

  friend bool operator==(const TagSchema& a, const TagSchema& b) { return a.types_ == b.types_; }

 private:
  static bool valid_type_name(std::string_view s) {
    if (s.empty() || !(s[0] >= 'A' && s[0] <= 'Z')) return false;
    for (char c : s) {
      if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_')) return false;
    }
    return true;
  }

  void check_id(TagId id) const {
    if (!contains(id)) throw UnknownTag("unknown tag id " + std::to_string(id));
  }

  std::vector<EntityType> types_;
  std::vector<std::string> tags_;
  std::vector<TagId> begin_;
  std::vector<TagId> inside_;
  std::vector<int> entity_of_;
  std::unordered_map<std::string, TagId> index_;
};

// 14 address entity types; BLOCK, FLOOR, DOOR and POSTCODE are single-token,
// giving 1 + 14 + 10 = 25 IOB tags.
inline TagSchema default_schema() {
  return TagSchema({
      {"COUNTRY", true},   {"CITY", true},   {"DISTRICT", true}, {"NEIGHBORHOOD", true},
      {"VILLAGE", true},   {"STREET", true}, {"AVENUE", true},   {"BUILDING", true},
      {"SITE", true},      {"BLOCK", false}, {"FLOOR", false},   {"DOOR", false},
      {"POSTCODE", false}, {"POI", true},
  });
}

struct IobViolation {
  std::size_t index;
  std::string message;
};

// nullopt when every I-X directly follows B-X or I-X of the same type.
inline std::optional<IobViolation> validate_iob(std::span<const TagId> tags, const TagSchema& schema) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!schema.contains(tags[i])) throw UnknownTag("unknown tag id " + std::to_string(tags[i]));
  }
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!schema.is_inside(tags[i])) continue;
    const auto type = schema.entity_of(tags[i]);
    if (i == 0) {
      return IobViolation{i, schema.tag_name(tags[i]) + " opens the sequence"};
    }
    const auto prev = schema.entity_of(tags[i - 1]);
    if (!prev || *prev != *type) {
      return IobViolation{i, schema.tag_name(tags[i]) + " follows " + schema.tag_name(tags[i - 1])};
    }
  }
  return std::nullopt;
}

inline std::optional<IobViolation> validate_iob(const std::vector<std::string>& tags,
                                                const TagSchema& schema) {
  std::vector<TagId> ids;
  ids.reserve(tags.size());
  for (const auto& t : tags) ids.push_back(schema.tag_id(t));
  return validate_iob(std::span<const TagId>(ids), schema);
}

}  // namespace addrparse
