#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nhw/ensembles.hpp"

namespace nhw {

/// Flat INI configuration: [section] headers, key = value lines, '#' or ';' comments.
class Config {
public:
    static Config parse(std::istream& in, const std::string& origin = "<config>") {
        Config cfg;
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
                section = lower(trim(line.substr(1, line.size() - 2)));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos || section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value inside a section");
            cfg.values_[section][lower(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        return parse(in, path);
    }

    /// NHW_<SECTION>_<KEY> overrides an existing or new key; NHW_SEED, NHW_WORKERS, NHW_OUT map to [run].
    void apply_env(char** envp) {
        if (!envp) return;
        for (char** e = envp; *e; ++e) {
            const std::string kv(*e);
            if (kv.rfind("NHW_", 0) != 0) continue;
            const auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const std::string name = lower(kv.substr(4, eq - 4)), value = kv.substr(eq + 1);
            if (name == "seed" || name == "workers" || name == "out") {
                values_["run"][name] = value;
                continue;
            }
            const auto us = name.find('_');
            if (us == std::string::npos || us == 0 || us + 1 >= name.size()) continue;
            values_[name.substr(0, us)][name.substr(us + 1)] = value;
        }
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        values_[lower(section)][lower(key)] = value;
    }

    bool has(const std::string& section, const std::string& key) const {
        const auto s = values_.find(section);
        return s != values_.end() && s->second.count(key);
    }

    std::string get(const std::string& section, const std::string& key) const {
        if (!has(section, key)) throw ConfigError("missing required field '" + section + "." + key + "'");
        return values_.at(section).at(key);
    }
    std::string get(const std::string& section, const std::string& key, const std::string& def) const {
        return has(section, key) ? values_.at(section).at(key) : def;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return to_double(section, key, get(section, key));
    }
    double get_double(const std::string& section, const std::string& key, double def) const {
        return has(section, key) ? get_double(section, key) : def;
    }
    long get_long(const std::string& section, const std::string& key) const {
        return to_long(section, key, get(section, key));
    }
    long get_long(const std::string& section, const std::string& key, long def) const {
        return has(section, key) ? get_long(section, key) : def;
    }
    std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t def) const {
        if (!has(section, key)) return def;
        const std::string v = get(section, key);
        try {
            std::size_t pos = 0;
            const auto r = std::stoull(v, &pos, 0);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("field '" + section + "." + key + "' is not an unsigned integer: '" + v + "'");
        }
    }
    bool get_bool(const std::string& section, const std::string& key, bool def) const {
        if (!has(section, key)) return def;
        const std::string v = lower(get(section, key));
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("field '" + section + "." + key + "' is not a boolean: '" + v + "'");
    }
    std::vector<double> get_list(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get(section, key));
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(to_double(section, key, trim(item)));
        return out;
    }

    /// Canonical "section.key=value" lines, sorted.
    std::string canonical() const {
        std::string s;
        for (const auto& [sec, kv] : values_)
            for (const auto& [k, v] : kv) s += sec + "." + k + "=" + v + "\n";
        return s;
    }

    const std::map<std::string, std::map<std::string, std::string>>& values() const { return values_; }

    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }
    static std::string lower(std::string s) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        return s;
    }

private:
    static double to_double(const std::string& section, const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const double r = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("field '" + section + "." + key + "' is not a number: '" + v + "'");
        }
    }
    static long to_long(const std::string& section, const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const long r = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("field '" + section + "." + key + "' is not an integer: '" + v + "'");
        }
    }

    std::map<std::string, std::map<std::string, std::string>> values_;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline Field parse_field(const std::string& s) {
    if (s == "real") return Field::real;
    if (s == "complex") return Field::complex;
    throw ConfigError("field must be 'real' or 'complex', got '" + s + "'");
}

/// [ensemble] field, N, law, t, normalized.
inline EnsembleSpec ensemble_from(const Config& c) {
    EnsembleSpec s;
    s.field = parse_field(c.get("ensemble", "field", "complex"));
    const long N = c.get_long("ensemble", "n");
    if (N < 1) throw ConfigError("field 'ensemble.n' must be >= 1");
    s.N = static_cast<int>(N);
    s.law.kind = parse_law_kind(c.get("ensemble", "law", "gaussian"));
    if (s.law.kind == LawKind::two_point_matched)
        throw ConfigError("field 'ensemble.law': two-point-matched laws are produced by compare-pair, not configured");
    s.t = c.get_double("ensemble", "t", 0.0);
    s.normalized = c.get_bool("ensemble", "normalized", false);
    validate(s);
    return s;
}

}  // namespace nhw
