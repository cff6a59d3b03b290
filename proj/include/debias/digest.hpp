#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace debias {

// FNV-1a 64-bit content digest, rendered as 16 hex chars. Used by the
// reproducibility manifests; not a cryptographic hash.
std::uint64_t fnv1a64(std::string_view bytes);
std::string digest_string(std::string_view bytes);
std::string digest_file(const std::filesystem::path& path);

} // namespace debias
