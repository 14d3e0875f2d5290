#pragma once

// Domain values shared by every stage of the pipeline. All of them are plain
// values: immutable once built and safe to share between threads.

#include <bridgetrace/hex.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bridgetrace {

using uint256 = boost::multiprecision::uint256_t;

/// Fixed-width byte identifier with a lowercase 0x-hex text form.
template <std::size_t N, typename Tag>
class HexId {
public:
    static constexpr std::size_t size = N;

    constexpr HexId() = default;
    explicit constexpr HexId(std::array<std::uint8_t, N> bytes) : bytes_(bytes) {}

    /// Accepts any letter case; rejects wrong length or non-hex digits.
    static HexId parse(std::string_view text) { return HexId(fixed_from_hex<N>(text)); }

    [[nodiscard]] std::string to_string() const { return to_hex(bytes_); }
    [[nodiscard]] const std::array<std::uint8_t, N>& bytes() const noexcept { return bytes_; }
    [[nodiscard]] bool is_zero() const noexcept
    {
        return std::all_of(bytes_.begin(), bytes_.end(), [](auto b) { return b == 0; });
    }

    friend auto operator<=>(const HexId&, const HexId&) = default;

private:
    std::array<std::uint8_t, N> bytes_{};
};

struct AddressTag;
struct TxTag;
struct WordTag;

using AccountAddress = HexId<20, AddressTag>;
using TxId = HexId<32, TxTag>;
/// One 32-byte EVM word (log topic, ABI slot).
using Word = HexId<32, WordTag>;

inline AccountAddress canonicalize_address(std::string_view text)
{
    try {
        return AccountAddress::parse(text);
    } catch (const ParseError& e) {
        throw ParseError("invalid address '" + std::string(text) + "': " + e.what());
    }
}

enum class AssetClass { Native, Fungible, NonFungible };
enum class Direction { Deposit, Withdrawal };

inline std::string_view to_string(AssetClass c)
{
    switch (c) {
    case AssetClass::Native: return "native";
    case AssetClass::Fungible: return "fungible";
    case AssetClass::NonFungible: return "nonfungible";
    }
    return "?";
}

inline AssetClass parse_asset_class(std::string_view s)
{
    if (s == "native") return AssetClass::Native;
    if (s == "fungible") return AssetClass::Fungible;
    if (s == "nonfungible") return AssetClass::NonFungible;
    throw ParseError("unknown asset class '" + std::string(s) + "'");
}

inline std::string_view to_string(Direction d)
{
    return d == Direction::Deposit ? "deposit" : "withdrawal";
}

inline Direction parse_direction(std::string_view s)
{
    if (s == "deposit") return Direction::Deposit;
    if (s == "withdrawal") return Direction::Withdrawal;
    throw ParseError("unknown direction '" + std::string(s) + "'");
}

/// Native and Fungible both carry an amount and are compared by value, so ETH
/// locked on one chain can pair with wrapped ETH minted on the other.
enum class ValueKind { Amount, TokenId };

constexpr ValueKind value_kind(AssetClass c) noexcept
{
    return c == AssetClass::NonFungible ? ValueKind::TokenId : ValueKind::Amount;
}

/// Exact decimal parse into 256 bits; overflow is an error, never a wrap.
inline uint256 parse_uint256(std::string_view text)
{
    if (text.empty())
        throw ParseError("empty integer");
    if (detail::has_hex_prefix(text)) {
        auto digits = text.substr(2);
        if (digits.empty() || digits.size() > 64)
            throw ParseError("hex integer out of range: '" + std::string(text) + "'");
        uint256 v = 0;
        for (char c : digits) {
            int d = detail::hex_value(c);
            if (d < 0) throw ParseError("non-hex digit in '" + std::string(text) + "'");
            v = (v << 4) | d;
        }
        return v;
    }
    static const uint256 max_div10 = std::numeric_limits<uint256>::max() / 10;
    uint256 v = 0;
    for (char c : text) {
        if (c < '0' || c > '9')
            throw ParseError("non-decimal digit in '" + std::string(text) + "'");
        unsigned d = static_cast<unsigned>(c - '0');
        if (v > max_div10 || (v == max_div10 && d > static_cast<unsigned>(std::numeric_limits<uint256>::max() % 10)))
            throw ParseError("integer exceeds 256 bits: '" + std::string(text) + "'");
        v = v * 10 + d;
    }
    return v;
}

inline std::string to_decimal(const uint256& v) { return v.str(); }

struct Amount {
    uint256 value{};
    friend bool operator==(const Amount&, const Amount&) = default;
    friend std::strong_ordering operator<=>(const Amount& a, const Amount& b) { return a.value.compare(b.value) <=> 0; }
};

struct TokenId {
    uint256 value{};
    friend bool operator==(const TokenId&, const TokenId&) = default;
    friend std::strong_ordering operator<=>(const TokenId& a, const TokenId& b) { return a.value.compare(b.value) <=> 0; }
};

struct Timestamp {
    std::uint64_t unix_seconds = 0;
    friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// Signed difference later - earlier in seconds.
inline std::int64_t seconds_between(Timestamp earlier, Timestamp later)
{
    return static_cast<std::int64_t>(later.unix_seconds) - static_cast<std::int64_t>(earlier.unix_seconds);
}

inline std::string normalize_symbol(std::string_view symbol)
{
    auto b = symbol.find_first_not_of(" \t");
    auto e = symbol.find_last_not_of(" \t");
    std::string out = b == std::string_view::npos ? std::string{} : std::string(symbol.substr(b, e - b + 1));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

struct TokenKey {
    std::string symbol;
    std::optional<AccountAddress> contract_address;
    AssetClass asset_class = AssetClass::Fungible;

    friend bool operator==(const TokenKey&, const TokenKey&) = default;
};

struct BridgeEvent {
    std::string event_id;
    TxId tx_id;
    std::uint64_t log_index = 0;
    AccountAddress receiver;
    TokenKey token;
    std::optional<Amount> amount;
    std::vector<TokenId> token_ids;
    Timestamp timestamp;
    std::uint64_t block_number = 0;
    Direction direction = Direction::Deposit;
    std::string chain;

    friend bool operator==(const BridgeEvent&, const BridgeEvent&) = default;
};

struct ChainTransfer {
    TxId tx_id;
    AccountAddress to_address;
    AccountAddress from_address;
    TokenKey token;
    std::optional<Amount> amount;
    std::optional<TokenId> token_id;
    Timestamp timestamp;
    std::uint64_t block_number = 0;
    std::string chain;
    bool truncated = false;

    friend bool operator==(const ChainTransfer&, const ChainTransfer&) = default;
};

/// Ascending time with (block, tx) tiebreak; the order every transfer list is kept in.
inline bool transfer_time_less(const ChainTransfer& a, const ChainTransfer& b)
{
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.block_number != b.block_number) return a.block_number < b.block_number;
    if (a.tx_id != b.tx_id) return a.tx_id < b.tx_id;
    if (a.token_id != b.token_id) return a.token_id < b.token_id;
    if (a.amount != b.amount) return a.amount < b.amount;
    if (a.to_address != b.to_address) return a.to_address < b.to_address;
    if (a.from_address != b.from_address) return a.from_address < b.from_address;
    if (a.token.symbol != b.token.symbol) return a.token.symbol < b.token.symbol;
    if (a.token.contract_address != b.token.contract_address) return a.token.contract_address < b.token.contract_address;
    return a.truncated < b.truncated;
}

class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Amount present for value-bearing classes, token IDs for NonFungible.
inline void check_class_consistency(const BridgeEvent& e)
{
    if (value_kind(e.token.asset_class) == ValueKind::Amount) {
        if (!e.amount || !e.token_ids.empty())
            throw InvariantError("event " + e.event_id + ": value-bearing event needs an amount and no token IDs");
    } else if (e.amount || e.token_ids.empty()) {
        throw InvariantError("event " + e.event_id + ": non-fungible event needs token IDs and no amount");
    }
}

inline void check_class_consistency(const ChainTransfer& t)
{
    bool amount_kind = value_kind(t.token.asset_class) == ValueKind::Amount;
    if (amount_kind ? (!t.amount || t.token_id) : (t.amount || !t.token_id))
        throw InvariantError("transfer " + t.tx_id.to_string() + ": value fields inconsistent with asset class");
}

enum class Outcome { Exact, Ambiguous, Unmatched };

inline std::string_view to_string(Outcome o)
{
    switch (o) {
    case Outcome::Exact: return "exact";
    case Outcome::Ambiguous: return "ambiguous";
    case Outcome::Unmatched: return "unmatched";
    }
    return "?";
}

inline Outcome parse_outcome(std::string_view s)
{
    if (s == "exact") return Outcome::Exact;
    if (s == "ambiguous") return Outcome::Ambiguous;
    if (s == "unmatched") return Outcome::Unmatched;
    throw ParseError("unknown outcome '" + std::string(s) + "'");
}

struct MatchResult {
    std::string event_id;
    TxId event_tx_id;
    Timestamp event_timestamp;
    Outcome outcome = Outcome::Unmatched;
    /// Surviving counterparts in time order: one for Exact, two or more for Ambiguous.
    std::vector<TxId> candidates;
    /// Counterpart time minus event time; set iff Exact.
    std::optional<std::int64_t> elapsed_seconds;

    [[nodiscard]] std::optional<TxId> counterpart() const
    {
        if (outcome == Outcome::Exact && !candidates.empty()) return candidates.front();
        return std::nullopt;
    }

    friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

} // namespace bridgetrace

template <std::size_t N, typename Tag>
struct std::hash<bridgetrace::HexId<N, Tag>> {
    std::size_t operator()(const bridgetrace::HexId<N, Tag>& id) const noexcept
    {
        std::size_t h = 1469598103934665603ULL;
        for (auto b : id.bytes())
            h = (h ^ b) * 1099511628211ULL;
        return h;
    }
};
