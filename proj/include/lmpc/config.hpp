#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lmpc/chain.hpp"
#include "lmpc/error.hpp"
#include "lmpc/prf.hpp"

namespace lmpc {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Flat `key = value` settings. `#` starts a comment; lists are comma-separated.
class Config {
 public:
  static Config parse(std::string_view text) {
    Config cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
      ++line_no;
      const auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorKind::config, "line " + std::to_string(line_no) + ": expected key = value");
      }
      const auto key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw Error(ErrorKind::config, "line " + std::to_string(line_no) + ": empty key");
      cfg.values_[std::string(key)] = std::string(detail::trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::config, "cannot read config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  const std::string& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw Error(ErrorKind::config, "missing config key '" + key + "'");
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }

  std::uint64_t get_u64(const std::string& key) const { return to_u64(key, get(key)); }

  std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
  }

  bool get_bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorKind::config, "key '" + key + "' expects true or false");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::string_view rest = get(key);
    while (true) {
      const auto comma = rest.find(',');
      const auto item = detail::trim(rest.substr(0, comma));
      if (item.empty()) throw Error(ErrorKind::config, "empty item in list '" + key + "'");
      out.emplace_back(item);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  std::vector<std::uint64_t> get_u64_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const auto& item : get_list(key)) out.push_back(to_u64(key, item));
    return out;
  }

  static std::uint64_t to_u64(const std::string& key, std::string_view text) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorKind::config, "key '" + key + "' expects a decimal integer, got '" + std::string(text) + "'");
    }
    return value;
  }

 private:
  std::map<std::string, std::string> values_;
};

/// Parameters from n, u, v, w, m, s, q, d. u defaults to floor(n/3). A key
/// holding a list is read by its first item.
inline Parameters parameters_from(const Config& cfg) {
  auto first = [&](const std::string& key, std::uint64_t fallback) -> std::uint64_t {
    if (!cfg.has(key)) return fallback;
    const auto items = cfg.get_list(key);
    if (items.front() == "auto") return fallback;
    return Config::to_u64(key, items.front());
  };
  Parameters p;
  const std::uint64_t n = first("n", p.n);
  if (n == 0 || n > 64) throw Error(ErrorKind::config, "n must be in 1..64");
  p.n = static_cast<unsigned>(n);
  p.u = static_cast<unsigned>(first("u", p.n / 3));
  p.v = first("v", p.v);
  p.w = first("w", p.w);
  p.m = first("m", p.m);
  p.s = first("s", p.s);
  p.q = first("q", p.q);
  p.d = static_cast<unsigned>(first("d", p.d));
  return p;
}

}  // namespace lmpc
