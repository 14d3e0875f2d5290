#pragma once

// JSON shapes of the newline-delimited record schemas. Field names follow the
// domain types; addresses and hashes use the canonical lowercase hex form,
// 256-bit integers are decimal strings.

#include <bridgetrace/decode.hpp>

#include <json.hpp>

#include <set>

namespace bridgetrace {

using nlohmann::json;

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ground-truth pairing for one generated event; nullopt means the counterpart was withheld.
struct TruthRecord {
    std::string event_id;
    std::optional<TxId> tx_id;

    friend bool operator==(const TruthRecord&, const TruthRecord&) = default;
};

namespace detail {

/// Strict field access: every key must be consumed, types must match.
class ObjectReader {
public:
    explicit ObjectReader(const json& j) : j_(j)
    {
        if (!j.is_object()) throw SchemaError("record is not a JSON object");
    }

    const json& at(const char* key)
    {
        auto it = j_.find(key);
        if (it == j_.end()) throw SchemaError(std::string("missing field '") + key + "'");
        used_.insert(key);
        return *it;
    }

    bool has(const char* key) const { return j_.contains(key); }

    std::string str(const char* key)
    {
        const auto& v = at(key);
        if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }

    std::uint64_t u64(const char* key)
    {
        const auto& v = at(key);
        if (!v.is_number_unsigned()) throw SchemaError(std::string("field '") + key + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::int64_t i64(const char* key)
    {
        const auto& v = at(key);
        if (!v.is_number_integer()) throw SchemaError(std::string("field '") + key + "' must be an integer");
        return v.get<std::int64_t>();
    }

    bool boolean(const char* key)
    {
        const auto& v = at(key);
        if (!v.is_boolean()) throw SchemaError(std::string("field '") + key + "' must be a boolean");
        return v.get<bool>();
    }

    void finish() const
    {
        for (const auto& [k, _] : j_.items())
            if (!used_.contains(k)) throw SchemaError("unexpected field '" + k + "'");
    }

private:
    const json& j_;
    std::set<std::string> used_;
};

template <typename F>
auto guarded(const char* what, F&& f)
{
    try {
        return f();
    } catch (const ParseError& e) {
        throw SchemaError(std::string(what) + ": " + e.what());
    } catch (const InvariantError& e) {
        throw SchemaError(std::string(what) + ": " + e.what());
    }
}

inline json token_to_json(const TokenKey& t)
{
    json j{{"symbol", t.symbol}, {"class", std::string(to_string(t.asset_class))}};
    j["contractAddress"] = t.contract_address ? json(t.contract_address->to_string()) : json(nullptr);
    return j;
}

inline TokenKey token_from_json(const json& j)
{
    ObjectReader r(j);
    TokenKey t;
    t.symbol = r.str("symbol");
    t.asset_class = parse_asset_class(r.str("class"));
    const auto& ca = r.at("contractAddress");
    if (!ca.is_null()) {
        if (!ca.is_string()) throw SchemaError("contractAddress must be a string or null");
        t.contract_address = AccountAddress::parse(ca.get<std::string>());
    }
    r.finish();
    return t;
}


inline std::optional<uint256> read_opt_uint(ObjectReader& r, const char* key)
{
    const auto& v = r.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' must be a decimal string or null");
    return parse_uint256(v.get<std::string>());
}

} // namespace detail

template <typename T>
struct RecordCodec;

template <>
struct RecordCodec<RawLog> {
    static constexpr std::string_view schema = "raw_log.v1";

    static json encode(const RawLog& l)
    {
        json topics = json::array();
        for (const auto& t : l.topics)
            topics.push_back(t.to_string());
        return {{"address", l.address.to_string()}, {"topics", topics},
                {"data", to_hex(l.data)},           {"txId", l.tx_id.to_string()},
                {"logIndex", l.log_index},          {"blockNumber", l.block_number},
                {"blockTimestamp", l.block_timestamp.unix_seconds}};
    }

    static RawLog decode(const json& j)
    {
        return detail::guarded("raw_log.v1", [&] {
            detail::ObjectReader r(j);
            RawLog l;
            l.address = AccountAddress::parse(r.str("address"));
            const auto& topics = r.at("topics");
            if (!topics.is_array()) throw SchemaError("topics must be an array");
            for (const auto& t : topics) {
                if (!t.is_string()) throw SchemaError("topics must hold hex strings");
                l.topics.push_back(Word::parse(t.get<std::string>()));
            }
            l.data = from_hex(r.str("data"));
            l.tx_id = TxId::parse(r.str("txId"));
            l.log_index = r.u64("logIndex");
            l.block_number = r.u64("blockNumber");
            l.block_timestamp = Timestamp{r.u64("blockTimestamp")};
            r.finish();
            return l;
        });
    }
};

template <>
struct RecordCodec<RawTransaction> {
    static constexpr std::string_view schema = "raw_tx.v1";

    static json encode(const RawTransaction& t)
    {
        return {{"txId", t.tx_id.to_string()},         {"from", t.from.to_string()},
                {"to", t.to.to_string()},              {"input", to_hex(t.input)},
                {"value", to_decimal(t.value.value)},  {"blockNumber", t.block_number},
                {"blockTimestamp", t.block_timestamp.unix_seconds}};
    }

    static RawTransaction decode(const json& j)
    {
        return detail::guarded("raw_tx.v1", [&] {
            detail::ObjectReader r(j);
            RawTransaction t;
            t.tx_id = TxId::parse(r.str("txId"));
            t.from = AccountAddress::parse(r.str("from"));
            t.to = AccountAddress::parse(r.str("to"));
            t.input = from_hex(r.str("input"));
            t.value = Amount{parse_uint256(r.str("value"))};
            t.block_number = r.u64("blockNumber");
            t.block_timestamp = Timestamp{r.u64("blockTimestamp")};
            r.finish();
            return t;
        });
    }
};

template <>
struct RecordCodec<BridgeEvent> {
    static constexpr std::string_view schema = "event.v1";

    static json encode(const BridgeEvent& e)
    {
        json ids = json::array();
        for (const auto& id : e.token_ids)
            ids.push_back(to_decimal(id.value));
        return {{"eventId", e.event_id},
                {"txId", e.tx_id.to_string()},
                {"logIndex", e.log_index},
                {"receiver", e.receiver.to_string()},
                {"token", detail::token_to_json(e.token)},
                {"amount", e.amount ? json(to_decimal(e.amount->value)) : json(nullptr)},
                {"tokenIds", ids},
                {"timestamp", e.timestamp.unix_seconds},
                {"blockNumber", e.block_number},
                {"direction", std::string(to_string(e.direction))},
                {"chain", e.chain}};
    }

    static BridgeEvent decode(const json& j)
    {
        return detail::guarded("event.v1", [&] {
            detail::ObjectReader r(j);
            BridgeEvent e;
            e.event_id = r.str("eventId");
            e.tx_id = TxId::parse(r.str("txId"));
            e.log_index = r.u64("logIndex");
            e.receiver = AccountAddress::parse(r.str("receiver"));
            e.token = detail::token_from_json(r.at("token"));
            if (auto a = detail::read_opt_uint(r, "amount")) e.amount = Amount{*a};
            const auto& ids = r.at("tokenIds");
            if (!ids.is_array()) throw SchemaError("tokenIds must be an array");
            for (const auto& id : ids) {
                if (!id.is_string()) throw SchemaError("tokenIds must hold decimal strings");
                e.token_ids.push_back(TokenId{parse_uint256(id.get<std::string>())});
            }
            e.timestamp = Timestamp{r.u64("timestamp")};
            e.block_number = r.u64("blockNumber");
            e.direction = parse_direction(r.str("direction"));
            e.chain = r.str("chain");
            r.finish();
            check_class_consistency(e);
            return e;
        });
    }
};

template <>
struct RecordCodec<ChainTransfer> {
    static constexpr std::string_view schema = "transfer.v1";

    static json encode(const ChainTransfer& t)
    {
        return {{"txId", t.tx_id.to_string()},
                {"toAddress", t.to_address.to_string()},
                {"fromAddress", t.from_address.to_string()},
                {"token", detail::token_to_json(t.token)},
                {"amount", t.amount ? json(to_decimal(t.amount->value)) : json(nullptr)},
                {"tokenId", t.token_id ? json(to_decimal(t.token_id->value)) : json(nullptr)},
                {"timestamp", t.timestamp.unix_seconds},
                {"blockNumber", t.block_number},
                {"chain", t.chain},
                {"truncated", t.truncated}};
    }

    static ChainTransfer decode(const json& j)
    {
        return detail::guarded("transfer.v1", [&] {
            detail::ObjectReader r(j);
            ChainTransfer t;
            t.tx_id = TxId::parse(r.str("txId"));
            t.to_address = AccountAddress::parse(r.str("toAddress"));
            t.from_address = AccountAddress::parse(r.str("fromAddress"));
            t.token = detail::token_from_json(r.at("token"));
            if (auto a = detail::read_opt_uint(r, "amount")) t.amount = Amount{*a};
            if (auto id = detail::read_opt_uint(r, "tokenId")) t.token_id = TokenId{*id};
            t.timestamp = Timestamp{r.u64("timestamp")};
            t.block_number = r.u64("blockNumber");
            t.chain = r.str("chain");
            t.truncated = r.boolean("truncated");
            r.finish();
            check_class_consistency(t);
            return t;
        });
    }
};

template <>
struct RecordCodec<MatchResult> {
    static constexpr std::string_view schema = "match.v1";

    static json encode(const MatchResult& m)
    {
        json cands = json::array();
        for (const auto& c : m.candidates)
            cands.push_back(c.to_string());
        auto cp = m.counterpart();
        return {{"eventId", m.event_id},
                {"eventTxId", m.event_tx_id.to_string()},
                {"eventTimestamp", m.event_timestamp.unix_seconds},
                {"outcome", std::string(to_string(m.outcome))},
                {"txId", cp ? json(cp->to_string()) : json(nullptr)},
                {"candidates", cands},
                {"elapsedSeconds", m.elapsed_seconds ? json(*m.elapsed_seconds) : json(nullptr)}};
    }

    static MatchResult decode(const json& j)
    {
        return detail::guarded("match.v1", [&] {
            detail::ObjectReader r(j);
            MatchResult m;
            m.event_id = r.str("eventId");
            m.event_tx_id = TxId::parse(r.str("eventTxId"));
            m.event_timestamp = Timestamp{r.u64("eventTimestamp")};
            m.outcome = parse_outcome(r.str("outcome"));
            const auto& tx = r.at("txId");
            const auto& cands = r.at("candidates");
            if (!cands.is_array()) throw SchemaError("candidates must be an array");
            for (const auto& c : cands) {
                if (!c.is_string()) throw SchemaError("candidates must hold tx hashes");
                m.candidates.push_back(TxId::parse(c.get<std::string>()));
            }
            const auto& el = r.at("elapsedSeconds");
            if (!el.is_null()) {
                if (!el.is_number_integer()) throw SchemaError("elapsedSeconds must be an integer or null");
                m.elapsed_seconds = el.get<std::int64_t>();
            }
            r.finish();
            bool ok = false;
            switch (m.outcome) {
            case Outcome::Exact:
                ok = m.candidates.size() == 1 && tx.is_string() && TxId::parse(tx.get<std::string>()) == m.candidates[0] &&
                     m.elapsed_seconds.has_value();
                break;
            case Outcome::Ambiguous: ok = m.candidates.size() >= 2 && tx.is_null() && !m.elapsed_seconds; break;
            case Outcome::Unmatched: ok = m.candidates.empty() && tx.is_null() && !m.elapsed_seconds; break;
            }
            if (!ok) throw SchemaError("match.v1: outcome '" + std::string(to_string(m.outcome)) +
                                       "' inconsistent with txId/candidates/elapsedSeconds");
            return m;
        });
    }
};

template <>
struct RecordCodec<TruthRecord> {
    static constexpr std::string_view schema = "truth.v1";
    static constexpr std::string_view withheld = "withheld";

    static json encode(const TruthRecord& t)
    {
        return {{"eventId", t.event_id}, {"txId", t.tx_id ? t.tx_id->to_string() : std::string(withheld)}};
    }

    static TruthRecord decode(const json& j)
    {
        return detail::guarded("truth.v1", [&] {
            detail::ObjectReader r(j);
            TruthRecord t;
            t.event_id = r.str("eventId");
            auto tx = r.str("txId");
            if (tx != withheld) t.tx_id = TxId::parse(tx);
            r.finish();
            return t;
        });
    }
};

} // namespace bridgetrace
