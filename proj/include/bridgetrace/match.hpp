#pragma once

// Cross-chain pairing heuristic: for each bridge event, look up transfers to
// the same address with an equivalent token, keep those inside the time
// tolerance with an identical amount (or token ID), and classify the event as
// exact (one survivor), ambiguous (several) or unmatched (none).

#include <bridgetrace/decode.hpp>

#include <map>
#include <set>
#include <thread>
#include <unordered_set>

namespace bridgetrace {

struct MatchConfig {
    std::uint64_t time_tolerance_seconds = 1452;
    /// Counterpart must not precede the event (0 <= dt <= tolerance); otherwise |dt| <= tolerance.
    bool causal_only = true;
    /// Drop pairs with dt == tolerance, as the original drop condition used >=.
    bool strict_gap = false;
    /// Each transfer can be the exact match of at most one event (ascending event time, earliest candidate wins).
    bool exclusive_assignment = false;
    Direction direction = Direction::Deposit;

    void validate() const
    {
        if (time_tolerance_seconds == 0) throw std::invalid_argument("time tolerance must be > 0 seconds");
        if (time_tolerance_seconds > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
            throw std::invalid_argument("time tolerance out of range");
    }
};

/// Lookup key: receiving address, token equivalence class, and whether the
/// asset is compared by amount or by token ID.
struct IndexKey {
    AccountAddress address;
    std::string token_class;
    ValueKind kind = ValueKind::Amount;

    friend auto operator<=>(const IndexKey&, const IndexKey&) = default;
};

class CandidateIndex {
public:
    CandidateIndex() = default;

    static CandidateIndex build(std::span<const ChainTransfer> transfers, const BridgeSpec& spec)
    {
        CandidateIndex idx;
        for (const auto& t : transfers) {
            idx.buckets_[key_for(t, spec)].push_back(t);
            if (t.truncated) idx.truncated_.insert(t.to_address);
        }
        for (auto& [_, list] : idx.buckets_)
            std::sort(list.begin(), list.end(), transfer_time_less);
        idx.size_ = transfers.size();
        return idx;
    }

    static IndexKey key_for(const ChainTransfer& t, const BridgeSpec& spec)
    {
        return {t.to_address, spec.token_class(t.token.symbol), value_kind(t.token.asset_class)};
    }

    static IndexKey key_for(const BridgeEvent& e, const BridgeSpec& spec)
    {
        return {e.receiver, spec.token_class(e.token.symbol), value_kind(e.token.asset_class)};
    }

    [[nodiscard]] std::span<const ChainTransfer> lookup(const IndexKey& key) const
    {
        auto it = buckets_.find(key);
        if (it == buckets_.end()) return {};
        return it->second;
    }

    /// Transfers under `key` with from <= timestamp <= to, by binary search.
    [[nodiscard]] std::span<const ChainTransfer> window(const IndexKey& key, Timestamp from, Timestamp to) const
    {
        auto list = lookup(key);
        auto lo = std::lower_bound(list.begin(), list.end(), from,
                                   [](const ChainTransfer& t, Timestamp ts) { return t.timestamp < ts; });
        auto hi = std::upper_bound(lo, list.end(), to,
                                   [](Timestamp ts, const ChainTransfer& t) { return ts < t.timestamp; });
        return {lo, hi};
    }

    [[nodiscard]] bool receiver_truncated(const AccountAddress& a) const { return truncated_.contains(a); }
    [[nodiscard]] const std::set<AccountAddress>& truncated_addresses() const noexcept { return truncated_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] std::size_t key_count() const noexcept { return buckets_.size(); }
    [[nodiscard]] const std::map<IndexKey, std::vector<ChainTransfer>>& buckets() const noexcept { return buckets_; }

private:
    std::map<IndexKey, std::vector<ChainTransfer>> buckets_;
    std::set<AccountAddress> truncated_;
    std::size_t size_ = 0;
};

inline bool within_tolerance(std::int64_t dt, const MatchConfig& cfg)
{
    auto tol = static_cast<std::int64_t>(cfg.time_tolerance_seconds);
    if (cfg.causal_only && dt < 0) return false;
    auto gap = dt < 0 ? -dt : dt;
    return cfg.strict_gap ? gap < tol : gap <= tol;
}

/// All four pairing criteria: same receiver, time gap within tolerance,
/// equivalent token, identical amount (or identical single token ID).
inline bool passes_criteria(const BridgeEvent& e, const ChainTransfer& p, const MatchConfig& cfg,
                            const BridgeSpec& spec)
{
    if (e.receiver != p.to_address) return false;
    if (!within_tolerance(seconds_between(e.timestamp, p.timestamp), cfg)) return false;
    auto kind = value_kind(e.token.asset_class);
    if (kind != value_kind(p.token.asset_class) || !token_equivalent(e.token, p.token, spec)) return false;
    if (kind == ValueKind::Amount) return e.amount && p.amount && *e.amount == *p.amount;
    return e.token_ids.size() == 1 && p.token_id && e.token_ids.front() == *p.token_id;
}

namespace detail {

inline std::pair<Timestamp, Timestamp> search_window(const BridgeEvent& e, const MatchConfig& cfg)
{
    auto t = e.timestamp.unix_seconds;
    auto tol = cfg.time_tolerance_seconds;
    auto hi = t > std::numeric_limits<std::uint64_t>::max() - tol ? std::numeric_limits<std::uint64_t>::max() : t + tol;
    auto lo = cfg.causal_only ? t : (t > tol ? t - tol : 0);
    return {Timestamp{lo}, Timestamp{hi}};
}

template <typename Available>
MatchResult match_event_impl(const BridgeEvent& e, const CandidateIndex& index, const MatchConfig& cfg,
                             const BridgeSpec& spec, Available&& available)
{
    MatchResult r;
    r.event_id = e.event_id;
    r.event_tx_id = e.tx_id;
    r.event_timestamp = e.timestamp;
    auto [lo, hi] = search_window(e, cfg);
    std::vector<const ChainTransfer*> survivors;
    for (const auto& p : index.window(CandidateIndex::key_for(e, spec), lo, hi))
        if (available(p) && passes_criteria(e, p, cfg, spec)) survivors.push_back(&p);

    if (survivors.empty()) {
        r.outcome = Outcome::Unmatched;
    } else if (survivors.size() == 1 || cfg.exclusive_assignment) {
        // exclusive mode resolves ties to the earliest unconsumed candidate
        r.outcome = Outcome::Exact;
        r.candidates = {survivors.front()->tx_id};
        r.elapsed_seconds = seconds_between(e.timestamp, survivors.front()->timestamp);
    } else {
        r.outcome = Outcome::Ambiguous;
        for (const auto* p : survivors)
            r.candidates.push_back(p->tx_id);
    }
    return r;
}

} // namespace detail

inline MatchResult match_event(const BridgeEvent& e, const CandidateIndex& index, const MatchConfig& cfg,
                               const BridgeSpec& spec)
{
    return detail::match_event_impl(e, index, cfg, spec, [](const ChainTransfer&) { return true; });
}

struct OutcomeCounts {
    std::uint64_t exact = 0;
    std::uint64_t ambiguous = 0;
    std::uint64_t unmatched = 0;

    [[nodiscard]] std::uint64_t total() const noexcept { return exact + ambiguous + unmatched; }

    void add(Outcome o)
    {
        switch (o) {
        case Outcome::Exact: ++exact; break;
        case Outcome::Ambiguous: ++ambiguous; break;
        case Outcome::Unmatched: ++unmatched; break;
        }
    }

    friend bool operator==(const OutcomeCounts&, const OutcomeCounts&) = default;
};

/// Percent of exact/total rounded half-up to two decimals ("94.97%"), "n/a" when total is 0.
inline std::string render_rate(std::uint64_t exact, std::uint64_t total)
{
    if (total == 0) return "n/a";
    using u128 = unsigned __int128;
    auto hundredths = static_cast<std::uint64_t>((u128(exact) * 20000 + total) / (u128(2) * total));
    auto frac = hundredths % 100;
    return std::to_string(hundredths / 100) + "." + (frac < 10 ? "0" : "") + std::to_string(frac) + "%";
}

/// 1451413 -> "1,451,413"
inline std::string with_thousands(std::uint64_t n)
{
    auto s = std::to_string(n);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3)
        s.insert(static_cast<std::size_t>(i), ",");
    return s;
}

struct MatchReport {
    Direction direction = Direction::Deposit;
    std::uint64_t time_tolerance_seconds = 0;
    std::vector<MatchResult> results;
    OutcomeCounts counts;
    /// Keyed by normalized event token symbol.
    std::map<std::string, OutcomeCounts> per_token;
    /// Unmatched events whose receiver's transfer history was truncated at ingestion.
    std::uint64_t truncation_exposure = 0;

    [[nodiscard]] std::optional<double> match_rate() const
    {
        if (counts.total() == 0) return std::nullopt;
        return static_cast<double>(counts.exact) / static_cast<double>(counts.total());
    }

    [[nodiscard]] std::string match_rate_text() const { return render_rate(counts.exact, counts.total()); }
};

namespace detail {

inline void finish_report(MatchReport& rep, std::span<const BridgeEvent> events, const CandidateIndex& index,
                          const std::set<AccountAddress>& extra_truncated)
{
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& r = rep.results[i];
        rep.counts.add(r.outcome);
        rep.per_token[normalize_symbol(events[i].token.symbol)].add(r.outcome);
        if (r.outcome == Outcome::Unmatched &&
            (index.receiver_truncated(events[i].receiver) || extra_truncated.contains(events[i].receiver)))
            ++rep.truncation_exposure;
    }
}

} // namespace detail

/// Matches every event against a prebuilt index. Default mode is independent
/// per event (parallel over `jobs` threads); exclusive mode is sequential in
/// ascending event time and consumes each exact counterpart.
inline MatchReport match_all(std::span<const BridgeEvent> events, const CandidateIndex& index, const MatchConfig& cfg,
                             const BridgeSpec& spec, unsigned jobs = 1,
                             const std::set<AccountAddress>& extra_truncated = {})
{
    cfg.validate();
    MatchReport rep;
    rep.direction = cfg.direction;
    rep.time_tolerance_seconds = cfg.time_tolerance_seconds;
    rep.results.resize(events.size());

    if (cfg.exclusive_assignment) {
        std::vector<std::size_t> order(events.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (events[a].timestamp != events[b].timestamp) return events[a].timestamp < events[b].timestamp;
            return events[a].event_id < events[b].event_id;
        });
        std::unordered_set<const ChainTransfer*> consumed;
        for (auto i : order) {
            rep.results[i] = detail::match_event_impl(events[i], index, cfg, spec,
                                                      [&](const ChainTransfer& p) { return !consumed.contains(&p); });
            if (rep.results[i].outcome == Outcome::Exact) {
                auto [lo, hi] = detail::search_window(events[i], cfg);
                for (const auto& p : index.window(CandidateIndex::key_for(events[i], spec), lo, hi))
                    if (!consumed.contains(&p) && p.tx_id == rep.results[i].candidates.front() &&
                        passes_criteria(events[i], p, cfg, spec)) {
                        consumed.insert(&p);
                        break;
                    }
            }
        }
    } else {
        jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(events.size() / 256 + 1)));
        auto work = [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i)
                rep.results[i] = match_event(events[i], index, cfg, spec);
        };
        if (jobs == 1) {
            work(0, events.size());
        } else {
            std::vector<std::jthread> pool;
            std::size_t chunk = (events.size() + jobs - 1) / jobs;
            for (std::size_t b = 0; b < events.size(); b += chunk)
                pool.emplace_back(work, b, std::min(events.size(), b + chunk));
        }
    }
    detail::finish_report(rep, events, index, extra_truncated);
    return rep;
}

inline MatchReport match_all(std::span<const BridgeEvent> events, std::span<const ChainTransfer> transfers,
                             const MatchConfig& cfg, const BridgeSpec& spec, unsigned jobs = 1)
{
    auto index = CandidateIndex::build(transfers, spec);
    return match_all(events, index, cfg, spec, jobs);
}

// --- withdrawals -------------------------------------------------------------

/// Exit records admitted to the withdrawal pool. Fungible exits carry no
/// dedicated event, so they need an enclosing transaction whose selector marks
/// a withdrawal claim; native and non-fungible exits come from dedicated events.
inline std::vector<ChainTransfer> admit_exit_records(std::span<const ChainTransfer> exits,
                                                     std::span<const RawTransaction> claim_txs, const BridgeSpec& spec)
{
    std::map<TxId, const RawTransaction*> by_id;
    for (const auto& tx : claim_txs)
        by_id.emplace(tx.tx_id, &tx);
    std::vector<ChainTransfer> out;
    for (const auto& x : exits) {
        if (x.token.asset_class == AssetClass::Fungible) {
            auto it = by_id.find(x.tx_id);
            if (it == by_id.end() || !is_withdrawal_claim(*it->second, spec)) continue;
        }
        out.push_back(x);
    }
    return out;
}

/// Burns on the destination chain matched against exits on the source chain:
/// same machinery with the chains' roles mirrored (exit time >= burn time in causal mode).
inline MatchReport match_withdrawals(std::span<const BridgeEvent> burns, std::span<const ChainTransfer> exits,
                                     std::span<const RawTransaction> claim_txs, MatchConfig cfg, const BridgeSpec& spec,
                                     unsigned jobs = 1)
{
    cfg.direction = Direction::Withdrawal;
    auto pool = admit_exit_records(exits, claim_txs, spec);
    return match_all(burns, pool, cfg, spec, jobs);
}

/// Destination-chain transfers into the null contract, as withdrawal events
/// whose receiver is the burner (the same address claims on the source chain).
inline std::vector<BridgeEvent> burns_from_transfers(std::span<const ChainTransfer> transfers, const BridgeSpec& spec)
{
    auto null_contract = spec.contract("null-contract");
    std::vector<BridgeEvent> out;
    std::map<TxId, unsigned> per_tx;
    for (const auto& t : transfers) {
        if (!null_contract || t.to_address != *null_contract) continue;
        BridgeEvent e;
        e.event_id = t.tx_id.to_string() + ":burn" + std::to_string(per_tx[t.tx_id]++);
        e.tx_id = t.tx_id;
        e.receiver = t.from_address;
        e.token = t.token;
        e.amount = t.amount;
        if (t.token_id) e.token_ids = {*t.token_id};
        e.timestamp = t.timestamp;
        e.block_number = t.block_number;
        e.direction = Direction::Withdrawal;
        e.chain = t.chain;
        out.push_back(std::move(e));
    }
    return out;
}

/// Decoded exit events (already exploded) as candidate records for withdrawal matching.
inline std::vector<ChainTransfer> exit_records_from_events(std::span<const BridgeEvent> exits)
{
    std::vector<ChainTransfer> out;
    for (const auto& e : exits) {
        if (e.direction != Direction::Withdrawal) continue;
        ChainTransfer t;
        t.tx_id = e.tx_id;
        t.to_address = e.receiver;
        t.token = e.token;
        t.amount = e.amount;
        if (!e.token_ids.empty()) t.token_id = e.token_ids.front();
        t.timestamp = e.timestamp;
        t.block_number = e.block_number;
        t.chain = e.chain;
        out.push_back(std::move(t));
    }
    return out;
}

} // namespace bridgetrace
