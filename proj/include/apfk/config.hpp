#pragma once

// Flat sectioned text configuration: "[section]" headers, "key = value"
// lines, '#' comments, repeated keys collected in order. Values that need
// several fields (terms, levels, interaction records) use semicolon-separated
// records. Errors carry the [section].key path.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "apfk/errors.hpp"

namespace apfk {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_fields(const std::string& value, char sep = ';') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(value);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    return out;
}

class ConfigFile {
public:
    static ConfigFile parse(std::istream& in) {
        ConfigFile cfg;
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw config_error("config line " + std::to_string(lineno) +
                                       ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                cfg.sections_[section];
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw config_error("config line " + std::to_string(lineno) +
                                   ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw config_error("config line " + std::to_string(lineno) + ": empty key");
            cfg.sections_[section].emplace_back(key, value);
        }
        return cfg;
    }

    static ConfigFile load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw config_error("cannot open config file " + path.string());
        return parse(in);
    }

    bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

    bool has(const std::string& section, const std::string& key) const {
        auto it = sections_.find(section);
        if (it == sections_.end()) return false;
        return std::any_of(it->second.begin(), it->second.end(),
                           [&](const auto& kv) { return kv.first == key; });
    }

    // All values of a repeated key, in file order.
    std::vector<std::string> values(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        auto it = sections_.find(section);
        if (it == sections_.end()) return out;
        for (const auto& [k, v] : it->second)
            if (k == key) out.push_back(v);
        return out;
    }

    std::string get_string(const std::string& section, const std::string& key) const {
        auto vals = values(section, key);
        if (vals.empty()) throw config_error(path(section, key) + ": missing");
        return vals.back();
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        auto vals = values(section, key);
        return vals.empty() ? fallback : vals.back();
    }

    double get_double(const std::string& section, const std::string& key) const {
        return to_double(section, key, get_string(section, key));
    }
    double get_double(const std::string& section, const std::string& key, double fallback) const {
        auto vals = values(section, key);
        return vals.empty() ? fallback : to_double(section, key, vals.back());
    }

    int get_int(const std::string& section, const std::string& key) const {
        return to_int(section, key, get_string(section, key));
    }
    int get_int(const std::string& section, const std::string& key, int fallback) const {
        auto vals = values(section, key);
        return vals.empty() ? fallback : to_int(section, key, vals.back());
    }

    // Space-separated list of doubles.
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const {
        std::istringstream in(get_string(section, key));
        std::vector<double> out;
        std::string tok;
        while (in >> tok) out.push_back(to_double(section, key, tok));
        if (out.empty()) throw config_error(path(section, key) + ": empty list");
        return out;
    }

    static std::string path(const std::string& section, const std::string& key) {
        return "[" + section + "]." + key;
    }

    double to_double(const std::string& section, const std::string& key,
                     const std::string& text) const {
        try {
            std::size_t pos = 0;
            double v = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument("trailing text");
            return v;
        } catch (const std::exception&) {
            throw config_error(path(section, key) + ": not a number: '" + text + "'");
        }
    }

    int to_int(const std::string& section, const std::string& key, const std::string& text) const {
        try {
            std::size_t pos = 0;
            int v = std::stoi(text, &pos);
            if (pos != text.size()) throw std::invalid_argument("trailing text");
            return v;
        } catch (const std::exception&) {
            throw config_error(path(section, key) + ": not an integer: '" + text + "'");
        }
    }

private:
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
};

} // namespace apfk
