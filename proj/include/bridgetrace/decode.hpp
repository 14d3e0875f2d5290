#pragma once

// Raw EVM logs/transactions -> BridgeEvents according to a BridgeSpec, plus
// the forward encoder used to build fixtures.

#include <bridgetrace/bridge_spec.hpp>

#include <algorithm>
#include <map>

namespace bridgetrace {

struct RawLog {
    AccountAddress address;
    std::vector<Word> topics;
    Bytes data;
    TxId tx_id;
    std::uint64_t log_index = 0;
    std::uint64_t block_number = 0;
    Timestamp block_timestamp;

    friend bool operator==(const RawLog&, const RawLog&) = default;
};

/// Canonical scan order: (blockNumber, logIndex), txId as a last resort.
inline bool log_order_less(const RawLog& a, const RawLog& b)
{
    if (a.block_number != b.block_number) return a.block_number < b.block_number;
    if (a.log_index != b.log_index) return a.log_index < b.log_index;
    return a.tx_id < b.tx_id;
}

struct RawTransaction {
    TxId tx_id;
    AccountAddress from;
    AccountAddress to;
    Bytes input;
    Amount value;
    std::uint64_t block_number = 0;
    Timestamp block_timestamp;

    friend bool operator==(const RawTransaction&, const RawTransaction&) = default;
};

class DecodeError : public std::runtime_error {
public:
    DecodeError(const TxId& tx, std::uint64_t log_index, const std::string& what)
        : std::runtime_error("decode error in " + tx.to_string() + " log " + std::to_string(log_index) + ": " + what),
          tx_id(tx), log_index(log_index)
    {
    }
    TxId tx_id;
    std::uint64_t log_index;
};

/// True iff the call data starts with the spec's withdrawal-claim selector.
inline bool is_withdrawal_claim(const RawTransaction& tx, const BridgeSpec& spec)
{
    const auto& sel = spec.withdrawal_method_id();
    return tx.input.size() >= sel.size() && std::equal(sel.begin(), sel.end(), tx.input.begin());
}

namespace detail {

inline uint256 word_to_uint(std::span<const std::uint8_t, 32> w)
{
    uint256 v = 0;
    for (auto b : w)
        v = (v << 8) | b;
    return v;
}

inline std::array<std::uint8_t, 32> uint_to_word(const uint256& v)
{
    std::array<std::uint8_t, 32> w{};
    uint256 x = v;
    for (int i = 31; i >= 0; --i) {
        w[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(x & 0xff);
        x >>= 8;
    }
    return w;
}

inline std::array<std::uint8_t, 32> address_to_word(const AccountAddress& a)
{
    std::array<std::uint8_t, 32> w{};
    std::copy(a.bytes().begin(), a.bytes().end(), w.begin() + 12);
    return w;
}

inline std::size_t indexed_count(const EventDescriptor& d)
{
    return static_cast<std::size_t>(
        std::count_if(d.fields.begin(), d.fields.end(), [](const FieldSlot& f) { return f.kind == SlotKind::Topic; }));
}

} // namespace detail

/// Returns nothing for logs that are not bridge events under `spec`; throws
/// DecodeError when topic0 and the topic count match a descriptor but the
/// payload violates its layout. Descriptors requiring method-ID corroboration
/// only decode when `enclosing` is the log's transaction and is a withdrawal claim.
inline std::optional<BridgeEvent> decode_log(const RawLog& log, const BridgeSpec& spec,
                                             const RawTransaction* enclosing = nullptr)
{
    if (log.topics.empty()) return std::nullopt;
    const EventDescriptor* d = spec.find_descriptor(log.topics.front());
    if (!d) return std::nullopt;
    if (d->emitter != any_emitter && spec.contract(d->emitter) != log.address) return std::nullopt;
    // same topic0, different indexing (e.g. ERC-721 Transfer vs ERC-20 Transfer): not this layout
    if (log.topics.size() != 1 + detail::indexed_count(*d)) return std::nullopt;
    if (d->requires_method_id &&
        (!enclosing || enclosing->tx_id != log.tx_id || !is_withdrawal_claim(*enclosing, spec)))
        return std::nullopt;

    auto fail = [&](const std::string& msg) -> DecodeError { return DecodeError(log.tx_id, log.log_index, d->name + ": " + msg); };

    auto word_at = [&](const FieldSlot& f) -> std::span<const std::uint8_t, 32> {
        if (f.kind == SlotKind::Topic)
            return std::span<const std::uint8_t, 32>(log.topics[f.index].bytes());
        std::size_t off = static_cast<std::size_t>(f.index) * 32;
        if (log.data.size() < off + 32)
            throw fail("data has " + std::to_string(log.data.size()) + " bytes, field " + f.name + " needs " +
                       std::to_string(off + 32));
        return std::span<const std::uint8_t, 32>(log.data.data() + off, 32);
    };
    auto address_at = [&](const FieldSlot& f) {
        auto w = word_at(f);
        if (!std::all_of(w.begin(), w.begin() + 12, [](auto b) { return b == 0; }))
            throw fail("field " + f.name + " is not a left-padded address");
        std::array<std::uint8_t, 20> a{};
        std::copy(w.begin() + 12, w.end(), a.begin());
        return AccountAddress(a);
    };

    BridgeEvent ev;
    ev.event_id = log.tx_id.to_string() + ":" + std::to_string(log.log_index);
    ev.tx_id = log.tx_id;
    ev.log_index = log.log_index;
    ev.timestamp = log.block_timestamp;
    ev.block_number = log.block_number;
    ev.direction = d->direction;
    ev.chain = spec.config().source_chain;
    ev.token.asset_class = d->asset_class;

    std::optional<AccountAddress> token_contract;
    for (const auto& f : d->fields) {
        switch (f.role) {
        case FieldRole::Receiver: ev.receiver = address_at(f); break;
        case FieldRole::Amount: ev.amount = Amount{detail::word_to_uint(word_at(f))}; break;
        case FieldRole::TokenId: ev.token_ids.push_back(TokenId{detail::word_to_uint(word_at(f))}); break;
        case FieldRole::TokenContract:
            token_contract = f.kind == SlotKind::Emitter ? log.address : address_at(f);
            break;
        case FieldRole::TokenIdList: {
            auto offset = detail::word_to_uint(word_at(f));
            if (offset > log.data.size() || offset % 32 != 0 || log.data.size() - offset.convert_to<std::size_t>() < 32)
                throw fail("token ID list offset out of range");
            auto off = offset.convert_to<std::size_t>();
            auto count = detail::word_to_uint(std::span<const std::uint8_t, 32>(log.data.data() + off, 32));
            std::size_t avail = (log.data.size() - off - 32) / 32;
            if (count > avail) throw fail("token ID list claims more elements than data holds");
            auto n = count.convert_to<std::size_t>();
            if (n == 0) throw fail("empty token ID list");
            for (std::size_t i = 0; i < n; ++i)
                ev.token_ids.push_back(TokenId{detail::word_to_uint(
                    std::span<const std::uint8_t, 32>(log.data.data() + off + 32 + 32 * i, 32))});
            break;
        }
        case FieldRole::Other:
            if (f.kind != SlotKind::Emitter) (void)word_at(f);
            break;
        }
    }
    ev.token.contract_address = token_contract;
    ev.token.symbol = d->symbol ? *d->symbol : spec.symbol_for(*token_contract);
    return ev;
}

/// Field values for forward-encoding a descriptor into a log.
struct EventFields {
    AccountAddress receiver;
    std::optional<uint256> amount;
    std::vector<uint256> token_ids;
    std::optional<AccountAddress> token_contract;
    /// Raw words for role=other fields, by field name; zero when absent.
    std::map<std::string, Word> other;
};

/// ABI-encodes `fields` per the descriptor layout. The emitter is the spec
/// contract for the descriptor's role, or the token contract for "*" emitters.
inline RawLog encode_log(const EventDescriptor& d, const BridgeSpec& spec, const EventFields& fields, TxId tx,
                         std::uint64_t log_index, std::uint64_t block, Timestamp ts)
{
    RawLog log;
    log.tx_id = tx;
    log.log_index = log_index;
    log.block_number = block;
    log.block_timestamp = ts;
    if (d.emitter == any_emitter) {
        if (!fields.token_contract) throw std::invalid_argument(d.name + ": any-emitter layout needs a token contract");
        log.address = *fields.token_contract;
    } else {
        log.address = spec.contract(d.emitter).value();
    }

    std::size_t n_words = 0;
    for (const auto& f : d.fields)
        if (f.kind == SlotKind::Data) n_words = std::max<std::size_t>(n_words, f.index + 1);
    log.topics.assign(1 + detail::indexed_count(d), Word{});
    log.topics[0] = d.topic0();
    Bytes head(n_words * 32, 0);
    Bytes tail;

    auto put = [&](const FieldSlot& f, const std::array<std::uint8_t, 32>& w) {
        if (f.kind == SlotKind::Topic)
            log.topics[f.index] = Word(w);
        else if (f.kind == SlotKind::Data)
            std::copy(w.begin(), w.end(), head.begin() + static_cast<std::ptrdiff_t>(f.index * 32));
    };
    for (const auto& f : d.fields) {
        switch (f.role) {
        case FieldRole::Receiver: put(f, detail::address_to_word(fields.receiver)); break;
        case FieldRole::Amount: put(f, detail::uint_to_word(fields.amount.value())); break;
        case FieldRole::TokenId: put(f, detail::uint_to_word(fields.token_ids.at(0))); break;
        case FieldRole::TokenContract:
            if (f.kind != SlotKind::Emitter) put(f, detail::address_to_word(fields.token_contract.value()));
            break;
        case FieldRole::TokenIdList: {
            put(f, detail::uint_to_word(uint256(head.size() + tail.size())));
            auto len = detail::uint_to_word(uint256(fields.token_ids.size()));
            tail.insert(tail.end(), len.begin(), len.end());
            for (const auto& id : fields.token_ids) {
                auto w = detail::uint_to_word(id);
                tail.insert(tail.end(), w.begin(), w.end());
            }
            break;
        }
        case FieldRole::Other: {
            auto it = fields.other.find(f.name);
            put(f, it == fields.other.end() ? std::array<std::uint8_t, 32>{} : it->second.bytes());
            break;
        }
        }
    }
    log.data = std::move(head);
    log.data.insert(log.data.end(), tail.begin(), tail.end());
    return log;
}

/// One event per token ID for non-fungible events (eventId suffixed "#k");
/// everything else passes through as a singleton.
inline std::vector<BridgeEvent> explode_batch(const BridgeEvent& ev)
{
    if (ev.token.asset_class != AssetClass::NonFungible) return {ev};
    std::vector<BridgeEvent> out;
    out.reserve(ev.token_ids.size());
    for (std::size_t k = 0; k < ev.token_ids.size(); ++k) {
        BridgeEvent one = ev;
        one.token_ids = {ev.token_ids[k]};
        one.event_id = ev.event_id + "#" + std::to_string(k);
        out.push_back(std::move(one));
    }
    return out;
}

struct DecodedLogs {
    std::vector<BridgeEvent> events;
    std::vector<DecodeError> errors;
};

/// Decodes and explodes a batch, collecting layout errors instead of stopping.
/// `transactions` supplies enclosing transactions for method-ID corroboration.
inline DecodedLogs decode_logs(std::span<const RawLog> logs, const BridgeSpec& spec,
                               const std::map<TxId, RawTransaction>& transactions = {})
{
    DecodedLogs out;
    for (const auto& log : logs) {
        auto it = transactions.find(log.tx_id);
        try {
            if (auto ev = decode_log(log, spec, it == transactions.end() ? nullptr : &it->second))
                for (auto& e : explode_batch(*ev))
                    out.events.push_back(std::move(e));
        } catch (const DecodeError& e) {
            out.errors.push_back(e);
        }
    }
    return out;
}

} // namespace bridgetrace
