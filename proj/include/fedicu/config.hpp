#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fedicu/errors.hpp"

// Flat, line-oriented key=value configuration with dotted section keys
// (e.g. federation.max_rounds=100). '#' starts a comment; later assignments
// override earlier ones. Precedence is resolved by the caller as
// defaults < config file < command-line overrides.

namespace fedicu {

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = detail::trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        out[key] = value;
    }
    return out;
}

inline ConfigMap parse_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config file " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str(), path);
}

// Rejects any key outside the allowed set (typo protection).
inline void require_known_keys(const ConfigMap& config, const std::set<std::string>& allowed,
                               const std::string& origin) {
    for (const auto& [key, value] : config) {
        (void)value;
        if (!allowed.count(key)) throw ConfigError(origin + ": unknown config key '" + key + "'");
    }
}

// Sorted key=value snapshot proving the fully resolved configuration.
inline void write_config_snapshot(const ConfigMap& config, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write config snapshot " + path);
    for (const auto& [key, value] : config) f << key << '=' << value << '\n';
    if (!f) throw ConfigError("write failed for " + path);
}

inline double config_double(const ConfigMap& config, const std::string& key, double fallback) {
    const auto it = config.find(key);
    if (it == config.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad number '" + it->second + "'");
    }
}

inline long long config_int(const ConfigMap& config, const std::string& key, long long fallback) {
    const auto it = config.find(key);
    if (it == config.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad integer '" + it->second + "'");
    }
}

inline bool config_bool(const ConfigMap& config, const std::string& key, bool fallback) {
    const auto it = config.find(key);
    if (it == config.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + it->second + "'");
}

inline std::string config_string(const ConfigMap& config, const std::string& key,
                                 const std::string& fallback) {
    const auto it = config.find(key);
    return it == config.end() ? fallback : it->second;
}

}  // namespace fedicu
