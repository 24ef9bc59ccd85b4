#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace sgtn {

/// Flat UTF-8 `key = value` configuration with `#` comments. Later
/// assignments win, so CLI overrides are just later `set` calls.
class Config {
public:
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("config: key '" + key + "' is not a number: " + it->second);
        }
    }

    long get_long(const std::string& key, long fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const long v = std::stol(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("config: key '" + key + "' is not an integer: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::invalid_argument("config: key '" + key + "' is not a boolean: " + it->second);
    }

    const std::map<std::string, std::string>& items() const { return kv_; }

    std::string echo() const {
        std::ostringstream ss;
        for (const auto& [k, v] : kv_) ss << k << " = " << v << "\n";
        return ss.str();
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open config " + path);
        Config c;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                const auto e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            if (trim(line).empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                            ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": empty key");
            c.set(key, value);
        }
        return c;
    }

private:
    std::map<std::string, std::string> kv_;
};

} // namespace sgtn
