#include "debias/digest.hpp"

#include "debias/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace debias {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string digest_string(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return std::string(buf);
}

std::string digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open file for digest: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return digest_string(ss.str());
}

} // namespace debias
