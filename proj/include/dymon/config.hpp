#pragma once

#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dymon/errors.hpp"

namespace dymon {

// Flat "key = value" document with '#' comments.
class ExperimentConfig {
 public:
  static ExperimentConfig parse(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream iss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(iss, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw config_error("config line " + std::to_string(lineno) +
                           ": expected 'key = value'");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty() || value.empty())
        throw config_error("config line " + std::to_string(lineno) +
                           ": empty key or value");
      if (cfg.entries_.count(key))
        throw config_error("config line " + std::to_string(lineno) +
                           ": duplicate key '" + key + "'");
      cfg.entries_[key] = {value, lineno};
    }
    return cfg;
  }

  // Unknown keys are rejected with their line number; missing required
  // keys are named.
  void validate_keys(const std::set<std::string>& allowed,
                     const std::set<std::string>& required) const {
    for (const auto& [key, entry] : entries_) {
      if (!allowed.count(key))
        throw config_error("config line " + std::to_string(entry.lineno) +
                           ": unknown key '" + key + "'");
    }
    for (const auto& key : required) {
      if (!entries_.count(key))
        throw config_error("config: missing required key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
      throw config_error("config: missing key '" + key + "'");
    return it->second.value;
  }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
  }

  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long long get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
      std::size_t used = 0;
      const long long n = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
      return n;
    } catch (const std::exception&) {
      throw config_error("config: key '" + key + "' is not an integer: '" +
                         v + "'");
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::size_t get_count(const std::string& key) const {
    const long long n = get_int(key);
    if (n < 0)
      throw config_error("config: key '" + key + "' must be nonnegative");
    return static_cast<std::size_t>(n);
  }

  std::size_t get_count(const std::string& key, std::size_t fallback) const {
    return has(key) ? get_count(key) : fallback;
  }

  // comma-separated list of counts, e.g. "hidden = 8,16,8"
  std::vector<std::size_t> get_count_list(const std::string& key) const {
    const std::string v = get_string(key);
    std::vector<std::size_t> out;
    std::string cur;
    auto flush = [&]() {
      const std::string t = trim(cur);
      cur.clear();
      if (t.empty())
        throw config_error("config: key '" + key + "' has an empty entry");
      try {
        std::size_t used = 0;
        const long long n = std::stoll(t, &used);
        if (used != t.size() || n < 1) throw std::invalid_argument("bad");
        out.push_back(static_cast<std::size_t>(n));
      } catch (const std::exception&) {
        throw config_error("config: key '" + key +
                           "' must be a comma-separated list of counts");
      }
    };
    for (char ch : v) {
      if (ch == ',')
        flush();
      else
        cur.push_back(ch);
    }
    flush();
    return out;
  }

 private:
  struct Entry {
    std::string value;
    std::size_t lineno = 0;
  };

  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  double parse_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
      return d;
    } catch (const std::exception&) {
      throw config_error("config: key '" + key + "' is not a number: '" + v +
                         "'");
    }
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace dymon
