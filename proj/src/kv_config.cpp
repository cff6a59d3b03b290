#include "debias/kv_config.hpp"

#include "debias/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace debias {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

static std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

KvConfig KvConfig::parse_string(const std::string& text, const std::string& origin) {
    KvConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(origin + ":" + std::to_string(lineno) +
                                  ": expected `key = value`, got: " + t);
        }
        std::string key = trim(t.substr(0, eq));
        std::string val = unquote(trim(t.substr(eq + 1)));
        if (key.empty()) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        cfg.entries_[key] = val;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path.string());
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KvConfig::get_str(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ValidationError(origin_ + ": missing required key `" + key + "`");
    }
    return it->second;
}

std::string KvConfig::get_str(const std::string& key, const std::string& dflt) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? dflt : it->second;
}

std::int64_t KvConfig::get_int(const std::string& key) const {
    const std::string v = get_str(key);
    char* end = nullptr;
    long long n = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
        throw ValidationError(origin_ + ": key `" + key + "` is not an integer: " + v);
    }
    return n;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t dflt) const {
    return has(key) ? get_int(key) : dflt;
}

double KvConfig::get_double(const std::string& key) const {
    const std::string v = get_str(key);
    char* end = nullptr;
    double d = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
        throw ValidationError(origin_ + ": key `" + key + "` is not a number: " + v);
    }
    return d;
}

double KvConfig::get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
    if (!has(key)) return {};
    std::vector<std::string> out;
    for (const std::string& part : split(get_str(key), ',')) {
        std::string t = trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

} // namespace debias
