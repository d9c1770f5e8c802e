#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "addrparse/error.hpp"
#include "addrparse/hpo.hpp"
#include "addrparse/model.hpp"

namespace addrparse {

// Line-oriented "key = value" text grouped under "[section]" headers.
// '#' starts a comment line.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::string_view text) {
    KeyValueFile f;
    std::istringstream in{std::string(text)};
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ParseError(line_no, "unterminated section header");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
      const std::string key = trim(t.substr(0, eq));
      if (key.empty()) throw ParseError(line_no, "empty key");
      f.values_[section + "." + key] = trim(t.substr(eq + 1));
    }
    return f;
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    auto it = values_.find(section + "." + key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_or(const std::string& section, const std::string& key, std::string fallback) const {
    return get(section, key).value_or(std::move(fallback));
  }

  long long get_int(const std::string& section, const std::string& key, long long fallback) const {
    const auto v = get(section, key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const long long n = std::stoll(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing");
      return n;
    } catch (const std::exception&) {
      throw ConfigError("[" + section + "] " + key + " is not an integer: '" + *v + "'");
    }
  }

  static std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

 private:
  static std::string trim(std::string_view s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string_view::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return std::string(s.substr(a, b - a + 1));
  }

  std::map<std::string, std::string> values_;
};

struct ExperimentManifest {
  std::optional<std::filesystem::path> schema_path;  // nullopt: built-in schema
  // Either generator settings or explicit split files.
  std::uint64_t generator_seed = 42;
  long long generator_size = 1248;
  std::uint64_t split_seed = 42;
  std::optional<std::filesystem::path> train_path, validation_path, test_path;

  std::vector<std::string> variants = {"small", "distil", "base"};
  std::vector<HeadKind> heads = {HeadKind::kLinear, HeadKind::kMlp};

  SearchSpace space;
  int n_trials = 40;
  std::uint64_t master_seed = 1;
  int max_epochs = 10;
  int patience = 2;
  unsigned threads = 0;

  std::filesystem::path output_dir = "out";

  // Relative paths resolve against `base_dir` (the manifest's directory).
  static ExperimentManifest parse(std::string_view text, const std::filesystem::path& base_dir = ".") {
    const auto kv = KeyValueFile::parse(text);
    ExperimentManifest m;
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() ? path : base_dir / path;
    };
    const std::string schema = kv.get_or("data", "schema", "default");
    if (schema != "default") m.schema_path = resolve(schema);
    m.generator_seed = static_cast<std::uint64_t>(kv.get_int("data", "seed", 42));
    m.generator_size = kv.get_int("data", "size", 1248);
    m.split_seed = static_cast<std::uint64_t>(kv.get_int("data", "split_seed", static_cast<long long>(m.generator_seed)));
    const auto train = kv.get("data", "train"), val = kv.get("data", "validation"), test = kv.get("data", "test");
    if (train || val || test) {
      if (!(train && val && test)) throw ConfigError("[data] needs all of train, validation and test paths");
      m.train_path = resolve(*train);
      m.validation_path = resolve(*val);
      m.test_path = resolve(*test);
    }
    if (auto v = kv.get("variants", "names")) m.variants = KeyValueFile::split_list(*v);
    if (auto v = kv.get("variants", "heads")) {
      m.heads.clear();
      for (const auto& h : KeyValueFile::split_list(*v)) m.heads.push_back(parse_head_kind(h));
    }
    for (const auto& v : m.variants) variant(v);  // validates names
    if (m.variants.empty() || m.heads.empty()) throw ConfigError("manifest selects no variants or heads");
    m.n_trials = static_cast<int>(kv.get_int("search", "n_trials", 40));
    m.master_seed = static_cast<std::uint64_t>(kv.get_int("search", "master_seed", 1));
    m.max_epochs = static_cast<int>(kv.get_int("search", "max_epochs", 10));
    m.patience = static_cast<int>(kv.get_int("search", "patience", 2));
    m.threads = static_cast<unsigned>(kv.get_int("search", "threads", 0));
    const std::string sampling = kv.get_or("search", "lr_sampling", "log");
    if (sampling != "log" && sampling != "linear") throw ConfigError("lr_sampling must be log or linear");
    m.space.log_uniform_lr = sampling == "log";
    m.output_dir = resolve(kv.get_or("output", "dir", "out"));
    if (m.n_trials < 1 || m.max_epochs < 1 || m.patience < 1) throw ConfigError("search settings must be positive");
    return m;
  }

  void check_paths() const {
    for (const auto* p : {&schema_path, &train_path, &validation_path, &test_path}) {
      if (*p && !std::filesystem::exists(**p)) throw ConfigError("manifest path not found: " + (*p)->string());
    }
  }
};

}  // namespace addrparse
