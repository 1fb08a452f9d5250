#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace netanalyzer {

// 64-bit FNV-1a rendered as 16 lowercase hex digits. Used for audit digests,
// not for security.
inline std::string digest_text(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[h & 0xF];
        h >>= 4;
    }
    return out;
}

inline std::string digest(const nlohmann::json& doc) { return digest_text(doc.dump()); }

}  // namespace netanalyzer
