#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace debias {

// Minimal `key = value` config file. Lines starting with '#' are comments,
// values may be wrapped in double quotes, lists are comma-separated.
class KvConfig {
public:
    static KvConfig parse_file(const std::filesystem::path& path);
    static KvConfig parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;
    std::string get_str(const std::string& key) const;                       // throws if missing
    std::string get_str(const std::string& key, const std::string& dflt) const;
    std::int64_t get_int(const std::string& key, std::int64_t dflt) const;
    std::int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key, double dflt) const;
    double get_double(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const;         // empty if missing

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::string origin_;
};

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

} // namespace debias
