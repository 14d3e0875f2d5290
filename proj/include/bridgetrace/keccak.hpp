#pragma once

// Keccak-256 as used by the EVM (original Keccak padding, not FIPS-202 SHA3).

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace bridgetrace {

namespace detail {

inline constexpr std::array<std::uint64_t, 24> keccak_round_constants = {
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808aULL, 0x8000000080008000ULL,
    0x000000000000808bULL, 0x0000000080000001ULL, 0x8000000080008081ULL, 0x8000000000008009ULL,
    0x000000000000008aULL, 0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000aULL,
    0x000000008000808bULL, 0x800000000000008bULL, 0x8000000000008089ULL, 0x8000000000008003ULL,
    0x8000000000008002ULL, 0x8000000000000080ULL, 0x000000000000800aULL, 0x800000008000000aULL,
    0x8000000080008081ULL, 0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL,
};

// rho offsets and pi destinations in the lane order visited by the combined rho-pi step
inline constexpr std::array<int, 24> keccak_rho = {1,  3,  6,  10, 15, 21, 28, 36, 45, 55, 2,  14,
                                                   27, 41, 56, 8,  25, 43, 62, 18, 39, 61, 20, 44};
inline constexpr std::array<int, 24> keccak_pi = {10, 7,  11, 17, 18, 3, 5,  16, 8,  21, 24, 4,
                                                  15, 23, 19, 13, 12, 2, 20, 14, 22, 9,  6,  1};

constexpr std::uint64_t rotl64(std::uint64_t x, int n) noexcept
{
    return (x << n) | (x >> (64 - n));
}

inline void keccak_f1600(std::array<std::uint64_t, 25>& st) noexcept
{
    for (auto rc : keccak_round_constants) {
        std::uint64_t bc[5];
        for (int i = 0; i < 5; ++i)
            bc[i] = st[i] ^ st[i + 5] ^ st[i + 10] ^ st[i + 15] ^ st[i + 20];
        for (int i = 0; i < 5; ++i) {
            auto t = bc[(i + 4) % 5] ^ rotl64(bc[(i + 1) % 5], 1);
            for (int j = 0; j < 25; j += 5)
                st[j + i] ^= t;
        }
        auto t = st[1];
        for (int i = 0; i < 24; ++i) {
            int j = keccak_pi[i];
            auto tmp = st[j];
            st[j] = rotl64(t, keccak_rho[i]);
            t = tmp;
        }
        for (int j = 0; j < 25; j += 5) {
            for (int i = 0; i < 5; ++i)
                bc[i] = st[j + i];
            for (int i = 0; i < 5; ++i)
                st[j + i] ^= (~bc[(i + 1) % 5]) & bc[(i + 2) % 5];
        }
        st[0] ^= rc;
    }
}

} // namespace detail

using Digest256 = std::array<std::uint8_t, 32>;

/// Sponge with 1088-bit rate. `domain` is the padding byte: 0x01 for Keccak, 0x06 for SHA3-256.
inline Digest256 keccak_sponge_256(std::span<const std::uint8_t> input, std::uint8_t domain)
{
    constexpr std::size_t rate = 136;
    std::array<std::uint64_t, 25> st{};
    auto absorb_block = [&st](const std::uint8_t* block) {
        for (std::size_t i = 0; i < rate / 8; ++i) {
            std::uint64_t lane = 0;
            for (int b = 0; b < 8; ++b)
                lane |= static_cast<std::uint64_t>(block[i * 8 + b]) << (8 * b);
            st[i] ^= lane;
        }
        detail::keccak_f1600(st);
    };

    std::size_t offset = 0;
    for (; offset + rate <= input.size(); offset += rate)
        absorb_block(input.data() + offset);

    std::array<std::uint8_t, rate> last{};
    std::size_t tail = input.size() - offset;
    if (tail > 0)
        std::memcpy(last.data(), input.data() + offset, tail);
    last[tail] ^= domain;
    last[rate - 1] ^= 0x80;
    absorb_block(last.data());

    Digest256 out{};
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(st[i / 8] >> (8 * (i % 8)));
    return out;
}

inline Digest256 keccak256(std::span<const std::uint8_t> input)
{
    return keccak_sponge_256(input, 0x01);
}

inline Digest256 keccak256(std::string_view text)
{
    return keccak256(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace bridgetrace
