#pragma once

// Random field values and forward-encoded logs shared by unit and acceptance tests.

#include <bridgetrace/decode.hpp>

#include <random>

namespace bridgetrace::testing {

inline AccountAddress random_address(std::mt19937_64& rng)
{
    std::array<std::uint8_t, 20> b{};
    for (auto& x : b)
        x = static_cast<std::uint8_t>(rng());
    return AccountAddress(b);
}

inline TxId random_tx(std::mt19937_64& rng)
{
    std::array<std::uint8_t, 32> b{};
    for (auto& x : b)
        x = static_cast<std::uint8_t>(rng());
    return TxId(b);
}

/// Spans the full 256-bit range, with small values mixed in.
inline uint256 random_uint(std::mt19937_64& rng)
{
    uint256 v = 0;
    int limbs = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < limbs; ++i)
        v = (v << 64) | rng();
    if (rng() % 8 == 0) v = rng() % 3;
    return v;
}

inline EventFields random_fields(const EventDescriptor& d, const BridgeSpec& spec, std::mt19937_64& rng)
{
    EventFields f;
    f.receiver = random_address(rng);
    for (const auto& slot : d.fields) {
        switch (slot.role) {
        case FieldRole::Amount: f.amount = random_uint(rng); break;
        case FieldRole::TokenId: f.token_ids = {random_uint(rng)}; break;
        case FieldRole::TokenIdList: {
            auto n = 1 + rng() % 6;
            for (std::size_t i = 0; i < n; ++i)
                f.token_ids.push_back(random_uint(rng));
            break;
        }
        case FieldRole::TokenContract: {
            // registered tokens half the time so symbols resolve both ways
            const auto& reg = spec.config().token_symbols;
            if (!reg.empty() && rng() % 2 == 0) {
                auto it = reg.begin();
                std::advance(it, static_cast<long>(rng() % reg.size()));
                f.token_contract = it->first;
            } else {
                f.token_contract = random_address(rng);
            }
            break;
        }
        case FieldRole::Other: {
            std::array<std::uint8_t, 32> w{};
            if (slot.kind == SlotKind::Topic) {
                auto a = random_address(rng);
                std::copy(a.bytes().begin(), a.bytes().end(), w.begin() + 12);
            } else {
                for (auto& x : w)
                    x = static_cast<std::uint8_t>(rng());
            }
            f.other[slot.name] = Word(w);
            break;
        }
        case FieldRole::Receiver: break;
        }
    }
    return f;
}

/// A transaction calling the spec's withdrawal-claim selector.
inline RawTransaction claim_tx(const BridgeSpec& spec, const TxId& tx, const AccountAddress& from,
                               std::uint64_t block, Timestamp ts)
{
    RawTransaction t;
    t.tx_id = tx;
    t.from = from;
    t.to = spec.contract("erc20-bridge").value_or(AccountAddress{});
    const auto& sel = spec.withdrawal_method_id();
    t.input.assign(sel.begin(), sel.end());
    t.input.resize(4 + 64, 0);
    t.block_number = block;
    t.block_timestamp = ts;
    return t;
}

} // namespace bridgetrace::testing

#include <bridgetrace/match.hpp>

namespace bridgetrace::testing {

/// Dense random matching inputs: few addresses, few values and a narrow time
/// range so that exact, ambiguous and unmatched outcomes all occur.
struct RandomMatchCase {
    std::vector<BridgeEvent> events;
    std::vector<ChainTransfer> transfers;
};

inline RandomMatchCase random_match_case(std::mt19937_64& rng, std::size_t n_events, std::size_t n_transfers)
{
    std::vector<AccountAddress> pool;
    auto n_addr = 2 + rng() % 12;
    for (std::size_t i = 0; i < n_addr; ++i)
        pool.push_back(random_address(rng));
    struct Tok {
        const char* symbol;
        AssetClass cls;
    };
    const Tok src_tokens[] = {{"ETH", AssetClass::Native}, {"USDC", AssetClass::Fungible}, {"DAI", AssetClass::Fungible},
                              {"KONGZ", AssetClass::NonFungible}};
    const Tok dst_tokens[] = {{"WETH", AssetClass::Fungible}, {"ETH", AssetClass::Native}, {"USDC", AssetClass::Fungible},
                              {"DAI", AssetClass::Fungible}, {"KONGZ", AssetClass::NonFungible},
                              {"APES", AssetClass::NonFungible}};
    auto pick = [&](auto& v) -> auto& { return v[rng() % std::size(v)]; };
    const std::uint64_t t0 = 1650000000;
    auto span = 600 + rng() % 6000;

    RandomMatchCase c;
    for (std::size_t i = 0; i < n_events; ++i) {
        BridgeEvent e;
        e.tx_id = random_tx(rng);
        e.event_id = "e" + std::to_string(i);
        e.receiver = pick(pool);
        const auto& tok = pick(src_tokens);
        e.token = {tok.symbol, std::nullopt, tok.cls};
        if (tok.cls == AssetClass::NonFungible) e.token_ids = {TokenId{rng() % 5}};
        else e.amount = Amount{rng() % 5};
        e.timestamp = Timestamp{t0 + rng() % span};
        e.chain = "ethereum";
        c.events.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < n_transfers; ++i) {
        ChainTransfer t;
        t.tx_id = random_tx(rng);
        t.to_address = pick(pool);
        t.from_address = random_address(rng);
        const auto& tok = pick(dst_tokens);
        t.token = {tok.symbol, std::nullopt, tok.cls};
        if (tok.cls == AssetClass::NonFungible) t.token_id = TokenId{rng() % 5};
        else t.amount = Amount{rng() % 5};
        t.timestamp = Timestamp{t0 - 300 + rng() % (span + 1200)};
        t.chain = "polygon";
        t.truncated = rng() % 10 == 0;
        c.transfers.push_back(std::move(t));
    }
    return c;
}

/// Brute force: every event against every transfer, criteria written out
/// independently of the engine, survivors ordered the way the index stores them.
inline std::vector<MatchResult> naive_match(std::span<const BridgeEvent> events,
                                            std::span<const ChainTransfer> transfers, const MatchConfig& cfg,
                                            const BridgeSpec& spec)
{
    std::vector<MatchResult> out;
    for (const auto& e : events) {
        std::vector<const ChainTransfer*> hits;
        for (const auto& p : transfers) {
            if (!(p.to_address == e.receiver)) continue;
            std::int64_t dt = static_cast<std::int64_t>(p.timestamp.unix_seconds) -
                              static_cast<std::int64_t>(e.timestamp.unix_seconds);
            std::int64_t tol = static_cast<std::int64_t>(cfg.time_tolerance_seconds);
            bool time_ok = cfg.causal_only ? (dt >= 0 && dt <= tol) : (dt >= -tol && dt <= tol);
            if (cfg.strict_gap && (dt == tol || dt == -tol)) time_ok = false;
            if (!time_ok) continue;
            bool e_nft = e.token.asset_class == AssetClass::NonFungible;
            bool p_nft = p.token.asset_class == AssetClass::NonFungible;
            if (e_nft != p_nft) continue;
            if (spec.token_class(e.token.symbol) != spec.token_class(p.token.symbol)) continue;
            bool value_ok = e_nft ? (e.token_ids.size() == 1 && p.token_id && p.token_id->value == e.token_ids[0].value)
                                  : (e.amount && p.amount && e.amount->value == p.amount->value);
            if (value_ok) hits.push_back(&p);
        }
        std::sort(hits.begin(), hits.end(), [](auto* a, auto* b) { return transfer_time_less(*a, *b); });
        MatchResult r;
        r.event_id = e.event_id;
        r.event_tx_id = e.tx_id;
        r.event_timestamp = e.timestamp;
        if (hits.empty()) {
            r.outcome = Outcome::Unmatched;
        } else if (hits.size() == 1) {
            r.outcome = Outcome::Exact;
            r.candidates = {hits[0]->tx_id};
            r.elapsed_seconds = static_cast<std::int64_t>(hits[0]->timestamp.unix_seconds) -
                                static_cast<std::int64_t>(e.timestamp.unix_seconds);
        } else {
            r.outcome = Outcome::Ambiguous;
            for (auto* h : hits)
                r.candidates.push_back(h->tx_id);
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace bridgetrace::testing

#include <bridgetrace/ingest.hpp>

namespace bridgetrace::testing {

/// Wraps a provider and fails chosen calls (1-based call numbers) with a
/// transient error, or every call after `die_after` with a permanent one.
class ScriptedLogProvider final : public LogProvider {
public:
    ScriptedLogProvider(LogProvider& inner, std::set<std::uint64_t> failing_calls,
                        std::optional<std::uint64_t> die_after = std::nullopt)
        : inner_(inner), failing_(std::move(failing_calls)), die_after_(die_after)
    {
    }

    std::vector<RawLog> get_logs(std::uint64_t from, std::uint64_t to, const LogFilter& filter) override
    {
        auto n = ++calls_;
        if (die_after_ && n > *die_after_) throw ProviderError("connection refused", false);
        if (failing_.contains(n)) {
            ++failures_;
            throw ProviderError("HTTP 503 on call " + std::to_string(n));
        }
        ranges_.emplace_back(from, to);
        return inner_.get_logs(from, to, filter);
    }

    std::optional<RawTransaction> get_transaction(const TxId& tx) override { return inner_.get_transaction(tx); }

    std::uint64_t calls() const { return calls_; }
    std::uint64_t failures() const { return failures_; }
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& served_ranges() const { return ranges_; }

private:
    LogProvider& inner_;
    std::set<std::uint64_t> failing_;
    std::optional<std::uint64_t> die_after_;
    std::uint64_t calls_ = 0;
    std::uint64_t failures_ = 0;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges_;
};

/// Bridge logs spread over [first_block, first_block + blocks), a few per block,
/// plus unrelated logs from a random contract.
inline std::vector<RawLog> random_bridge_logs(const BridgeSpec& spec, std::mt19937_64& rng, std::uint64_t first_block,
                                              std::uint64_t blocks, std::size_t count)
{
    std::vector<RawLog> out;
    std::vector<const EventDescriptor*> fixed;
    for (const auto& d : spec.events())
        if (d.emitter != any_emitter) fixed.push_back(&d);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& d = *fixed[rng() % fixed.size()];
        auto block = first_block + rng() % blocks;
        auto log = encode_log(d, spec, random_fields(d, spec, rng), random_tx(rng), i, block,
                              Timestamp{1600000000 + block * 12});
        out.push_back(log);
        if (i % 5 == 0) {
            auto noise = log;
            noise.address = random_address(rng);
            noise.log_index += 100000;
            out.push_back(noise);
        }
    }
    return out;
}

} // namespace bridgetrace::testing
