#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bridgetrace {

using Bytes = std::vector<std::uint8_t>;

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline int hex_value(char c) noexcept
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

inline bool has_hex_prefix(std::string_view text) noexcept
{
    return text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X');
}

} // namespace detail

/// Lowercase hex with a "0x" prefix.
inline std::string to_hex(std::span<const std::uint8_t> bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 + bytes.size() * 2);
    out += "0x";
    for (auto b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0x0f];
    }
    return out;
}

/// Decodes "0x"-prefixed hex of any length (even digit count).
inline Bytes from_hex(std::string_view text)
{
    if (!detail::has_hex_prefix(text))
        throw ParseError("hex value lacks 0x prefix: '" + std::string(text) + "'");
    auto digits = text.substr(2);
    if (digits.size() % 2 != 0)
        throw ParseError("odd number of hex digits: '" + std::string(text) + "'");
    Bytes out(digits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = detail::hex_value(digits[2 * i]);
        int lo = detail::hex_value(digits[2 * i + 1]);
        if (hi < 0 || lo < 0)
            throw ParseError("non-hex digit in '" + std::string(text) + "'");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

template <std::size_t N>
std::array<std::uint8_t, N> fixed_from_hex(std::string_view text)
{
    if (!detail::has_hex_prefix(text) || text.size() != 2 + 2 * N)
        throw ParseError("expected 0x followed by " + std::to_string(2 * N) + " hex digits, got '" +
                         std::string(text) + "'");
    auto bytes = from_hex(text);
    std::array<std::uint8_t, N> out{};
    std::copy(bytes.begin(), bytes.end(), out.begin());
    return out;
}

} // namespace bridgetrace
