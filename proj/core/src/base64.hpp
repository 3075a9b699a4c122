#ifndef RKME_SRC_BASE64_HPP
#define RKME_SRC_BASE64_HPP

#include <cstdint>
#include <string>

#include "rkme/errors.hpp"

namespace rkme::detail {

inline constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::string& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::uint32_t buf = 0;
    int bits = 0;
    for (unsigned char c : bytes) {
        buf = (buf << 8) | c;
        bits += 8;
        while (bits >= 6) {
            bits -= 6;
            out.push_back(kB64Alphabet[(buf >> bits) & 0x3f]);
        }
    }
    if (bits > 0) {
        out.push_back(kB64Alphabet[(buf << (6 - bits)) & 0x3f]);
    }
    while (out.size() % 4 != 0) out.push_back('=');
    return out;
}

inline std::string base64_decode(const std::string& text) {
    static constexpr auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::string out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t buf = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = value_of(c);
        if (v < 0) throw InputError("invalid base64 payload");
        buf = (buf << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((buf >> bits) & 0xff));
        }
    }
    return out;
}

} // namespace rkme::detail

#endif
