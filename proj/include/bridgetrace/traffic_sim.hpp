#pragma once

// Synthetic two-chain bridge traffic with known pairings. Each knob draws from
// its own seeded stream, so S0 and S0-plus-noise share identical true pairs.

#include <bridgetrace/codec.hpp>
#include <bridgetrace/decode.hpp>
#include <bridgetrace/match.hpp>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/discrete_distribution.hpp>
#include <boost/random/lognormal_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <cmath>

namespace bridgetrace {

struct LatencyModel {
    enum class Kind { Uniform, LogNormal, PointMass };
    Kind kind = Kind::Uniform;
    /// Uniform: lo, hi seconds. LogNormal: mu, sigma of ln(seconds). PointMass: value in a.
    double a = 300;
    double b = 900;

    static LatencyModel uniform(std::uint64_t lo, std::uint64_t hi)
    {
        return {Kind::Uniform, static_cast<double>(lo), static_cast<double>(hi)};
    }
    static LatencyModel lognormal(double mu, double sigma) { return {Kind::LogNormal, mu, sigma}; }
    static LatencyModel point_mass(std::uint64_t v) { return {Kind::PointMass, static_cast<double>(v), 0}; }

    void validate() const
    {
        switch (kind) {
        case Kind::Uniform:
            if (!(a > 0) || !(b >= a) || a != std::floor(a) || b != std::floor(b))
                throw std::invalid_argument("uniform latency needs integer 0 < lo <= hi");
            break;
        case Kind::LogNormal:
            if (!std::isfinite(a) || !(b > 0)) throw std::invalid_argument("lognormal latency needs finite mu, sigma > 0");
            break;
        case Kind::PointMass:
            if (!(a > 0) || a != std::floor(a)) throw std::invalid_argument("point-mass latency must be a positive integer");
            break;
        }
    }

    template <typename Engine>
    std::uint64_t sample(Engine& rng) const
    {
        switch (kind) {
        case Kind::Uniform:
            return boost::random::uniform_int_distribution<std::uint64_t>(static_cast<std::uint64_t>(a),
                                                                          static_cast<std::uint64_t>(b))(rng);
        case Kind::LogNormal: {
            auto v = std::llround(boost::random::lognormal_distribution<double>(a, b)(rng));
            return static_cast<std::uint64_t>(std::max<long long>(1, v));
        }
        case Kind::PointMass: return static_cast<std::uint64_t>(a);
        }
        return 0;
    }

    /// Smallest and largest possible draw (largest is unbounded for LogNormal).
    [[nodiscard]] std::uint64_t min_seconds() const { return kind == Kind::LogNormal ? 1 : static_cast<std::uint64_t>(a); }
    [[nodiscard]] std::optional<std::uint64_t> max_seconds() const
    {
        if (kind == Kind::Uniform) return static_cast<std::uint64_t>(b);
        if (kind == Kind::PointMass) return static_cast<std::uint64_t>(a);
        return std::nullopt;
    }
};

struct AssetMix {
    double native = 1;
    double fungible = 0;
    double non_fungible = 0;
};

struct TrafficScenario {
    std::uint64_t n_pairs = 1000;
    AssetMix asset_mix;
    LatencyModel latency;
    /// Extra unrelated transfers to known receivers, as a fraction of nPairs.
    double noise_transfer_rate = 0;
    /// Duplicates of a true pair's (receiver, token, value), as a fraction of nPairs.
    double value_collision_rate = 0;
    /// Fraction of events whose counterpart is withheld.
    double missing_counterpart_rate = 0;
    /// Distinct receivers; 0 means one per pair.
    std::uint64_t address_pool_size = 0;
    std::uint64_t seed = 42;
    std::uint64_t start_time = 1650000000;  // 2022-04-15T05:20:00Z
    std::uint64_t span_days = 7;

    void validate() const
    {
        auto rate = [](double r, const char* name) {
            if (!(r >= 0 && r <= 1)) throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
        };
        rate(noise_transfer_rate, "noiseTransferRate");
        rate(value_collision_rate, "valueCollisionRate");
        rate(missing_counterpart_rate, "missingCounterpartRate");
        const auto& m = asset_mix;
        if (!(m.native >= 0 && m.fungible >= 0 && m.non_fungible >= 0) || !(m.native + m.fungible + m.non_fungible > 0))
            throw std::invalid_argument("assetMix weights must be >= 0 with a positive sum");
        latency.validate();
        if (span_days == 0) throw std::invalid_argument("spanDays must be > 0");
    }
};

inline TrafficScenario scenario_s0()
{
    TrafficScenario s;
    s.n_pairs = 1000;
    s.latency = LatencyModel::uniform(300, 900);
    s.seed = 42;
    return s;
}

/// S0 with 20% value-collision noise, seed 7.
inline TrafficScenario scenario_s2()
{
    auto s = scenario_s0();
    s.value_collision_rate = 0.2;
    s.seed = 7;
    return s;
}

/// S0 with 10% of counterparts withheld.
inline TrafficScenario scenario_s3()
{
    auto s = scenario_s0();
    s.missing_counterpart_rate = 0.1;
    return s;
}

inline json scenario_to_json(const TrafficScenario& s)
{
    json lat;
    switch (s.latency.kind) {
    case LatencyModel::Kind::Uniform: lat = {{"model", "uniform"}, {"lo", s.latency.a}, {"hi", s.latency.b}}; break;
    case LatencyModel::Kind::LogNormal: lat = {{"model", "lognormal"}, {"mu", s.latency.a}, {"sigma", s.latency.b}}; break;
    case LatencyModel::Kind::PointMass: lat = {{"model", "pointmass"}, {"value", s.latency.a}}; break;
    }
    return {{"nPairs", s.n_pairs},
            {"assetMix", {{"native", s.asset_mix.native}, {"fungible", s.asset_mix.fungible},
                          {"nonFungible", s.asset_mix.non_fungible}}},
            {"latency", lat},
            {"noiseTransferRate", s.noise_transfer_rate},
            {"valueCollisionRate", s.value_collision_rate},
            {"missingCounterpartRate", s.missing_counterpart_rate},
            {"addressPoolSize", s.address_pool_size},
            {"seed", s.seed},
            {"startTime", s.start_time},
            {"spanDays", s.span_days}};
}

/// Missing keys keep the S0 defaults.
inline TrafficScenario scenario_from_json(const json& j)
{
    auto s = scenario_s0();
    try {
        if (!j.is_object()) throw std::invalid_argument("scenario must be a JSON object");
        static const std::set<std::string> known = {"nPairs", "assetMix", "latency", "noiseTransferRate",
                                                    "valueCollisionRate", "missingCounterpartRate", "addressPoolSize",
                                                    "seed", "startTime", "spanDays"};
        for (const auto& [k, _] : j.items())
            if (!known.contains(k)) throw std::invalid_argument("unknown scenario key '" + k + "'");
        s.n_pairs = j.value("nPairs", s.n_pairs);
        if (j.contains("assetMix")) {
            const auto& m = j.at("assetMix");
            s.asset_mix.native = m.value("native", 0.0);
            s.asset_mix.fungible = m.value("fungible", 0.0);
            s.asset_mix.non_fungible = m.value("nonFungible", 0.0);
        }
        if (j.contains("latency")) {
            const auto& l = j.at("latency");
            auto model = l.at("model").get<std::string>();
            if (model == "uniform") s.latency = {LatencyModel::Kind::Uniform, l.at("lo").get<double>(), l.at("hi").get<double>()};
            else if (model == "lognormal")
                s.latency = {LatencyModel::Kind::LogNormal, l.at("mu").get<double>(), l.at("sigma").get<double>()};
            else if (model == "pointmass") s.latency = {LatencyModel::Kind::PointMass, l.at("value").get<double>(), 0};
            else throw std::invalid_argument("unknown latency model '" + model + "'");
        }
        s.noise_transfer_rate = j.value("noiseTransferRate", s.noise_transfer_rate);
        s.value_collision_rate = j.value("valueCollisionRate", s.value_collision_rate);
        s.missing_counterpart_rate = j.value("missingCounterpartRate", s.missing_counterpart_rate);
        s.address_pool_size = j.value("addressPoolSize", s.address_pool_size);
        s.seed = j.value("seed", s.seed);
        s.start_time = j.value("startTime", s.start_time);
        s.span_days = j.value("spanDays", s.span_days);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("scenario: ") + e.what());
    }
    s.validate();
    return s;
}

struct GeneratedTraffic {
    std::vector<BridgeEvent> events;
    std::vector<ChainTransfer> transfers;
    std::vector<TruthRecord> truth;
    /// Withdrawal variant: claim transactions enclosing the fungible exits.
    std::vector<RawTransaction> claims;
};

namespace detail {

using SimEngine = boost::random::mt19937_64;

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream)
{
    // splitmix64 finalizer over (seed, stream)
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

template <std::size_t N>
std::array<std::uint8_t, N> random_bytes(SimEngine& rng)
{
    std::array<std::uint8_t, N> b{};
    for (std::size_t i = 0; i < N; i += 8) {
        auto v = rng();
        for (std::size_t k = 0; k < 8 && i + k < N; ++k)
            b[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
    }
    return b;
}

/// Fresh value never handed out before: 1 .. 2^96.
inline uint256 unique_value(SimEngine& rng, std::set<uint256>& used)
{
    for (;;) {
        uint256 v = (uint256(rng() & 0xffffffffull) << 64) | rng();
        v += 1;
        if (used.insert(v).second) return v;
    }
}

/// k distinct indices from [0, n), ascending.
inline std::vector<std::size_t> choose(SimEngine& rng, std::size_t n, std::size_t k)
{
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i)
        idx[i] = i;
    for (std::size_t i = 0; i < k && i < n; ++i) {
        auto j = boost::random::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(std::min(k, n));
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline std::size_t count_for(double rate, std::uint64_t n)
{
    return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

} // namespace detail

/// Deterministic for (scenario, direction). Deposits: source locks paired with
/// destination mints (Ether arrives as WETH). Withdrawals: destination burns
/// paired with source exits, fungible exits enclosed in claim transactions.
inline GeneratedTraffic generate(const TrafficScenario& sc, Direction direction, const BridgeSpec& spec)
{
    sc.validate();
    using detail::SimEngine;
    SimEngine base(detail::stream_seed(sc.seed, 0));
    SimEngine noise_rng(detail::stream_seed(sc.seed, 1));
    SimEngine collide_rng(detail::stream_seed(sc.seed, 2));
    SimEngine missing_rng(detail::stream_seed(sc.seed, 3));

    const bool deposit = direction == Direction::Deposit;
    const auto& src = spec.config().source_chain;
    const auto& dst = spec.config().destination_chain;
    const std::string& event_chain = deposit ? src : dst;
    const std::string& transfer_chain = deposit ? dst : src;
    auto null_contract = spec.contract("null-contract").value_or(AccountAddress{});

    GeneratedTraffic out;
    std::uint64_t pool_size = sc.address_pool_size ? sc.address_pool_size : std::max<std::uint64_t>(1, sc.n_pairs);
    std::vector<AccountAddress> pool;
    pool.reserve(pool_size);
    for (std::uint64_t i = 0; i < pool_size; ++i)
        pool.emplace_back(detail::random_bytes<20>(base));

    static const char* const fungibles[] = {"USDC", "USDT", "DAI"};
    static const char* const collections[] = {"KONGZ VX", "AAVEGOTCHI"};
    boost::random::discrete_distribution<int> mix(
        {sc.asset_mix.native, sc.asset_mix.fungible, sc.asset_mix.non_fungible});
    const std::uint64_t span = sc.span_days * 86400;
    std::set<uint256> used;

    struct Pair {
        BridgeEvent event;
        ChainTransfer transfer;
        std::uint64_t latency;
    };
    std::vector<Pair> pairs;
    pairs.reserve(sc.n_pairs);
    for (std::uint64_t i = 0; i < sc.n_pairs; ++i) {
        Pair p;
        auto& e = p.event;
        auto& t = p.transfer;
        auto cls = static_cast<AssetClass>(mix(base));
        e.receiver = pool[boost::random::uniform_int_distribution<std::uint64_t>(0, pool_size - 1)(base)];
        e.tx_id = TxId(detail::random_bytes<32>(base));
        e.event_id = e.tx_id.to_string() + ":0";
        e.timestamp = Timestamp{sc.start_time + boost::random::uniform_int_distribution<std::uint64_t>(0, span - 1)(base)};
        e.block_number = (e.timestamp.unix_seconds - sc.start_time) / 12 + 1;
        e.direction = direction;
        e.chain = event_chain;
        p.latency = sc.latency.sample(base);

        t.tx_id = TxId(detail::random_bytes<32>(base));
        t.to_address = e.receiver;
        t.from_address = deposit ? null_contract : spec.contract("erc20-bridge").value_or(AccountAddress{});
        t.timestamp = Timestamp{e.timestamp.unix_seconds + p.latency};
        t.block_number = (t.timestamp.unix_seconds - sc.start_time) / 2 + 1;
        t.chain = transfer_chain;

        switch (cls) {
        case AssetClass::Native:
            e.token = deposit ? TokenKey{"ETH", std::nullopt, AssetClass::Native} : TokenKey{"WETH", std::nullopt, AssetClass::Fungible};
            t.token = deposit ? TokenKey{"WETH", std::nullopt, AssetClass::Fungible} : TokenKey{"ETH", std::nullopt, AssetClass::Native};
            e.amount = Amount{detail::unique_value(base, used)};
            t.amount = e.amount;
            break;
        case AssetClass::Fungible: {
            auto sym = fungibles[boost::random::uniform_int_distribution<int>(0, 2)(base)];
            e.token = t.token = {sym, std::nullopt, AssetClass::Fungible};
            e.amount = Amount{detail::unique_value(base, used)};
            t.amount = e.amount;
            break;
        }
        case AssetClass::NonFungible: {
            auto sym = collections[boost::random::uniform_int_distribution<int>(0, 1)(base)];
            e.token = t.token = {sym, std::nullopt, AssetClass::NonFungible};
            auto id = TokenId{detail::unique_value(base, used)};
            e.token_ids = {id};
            t.token_id = id;
            break;
        }
        }
        pairs.push_back(std::move(p));
    }

    auto withheld = detail::choose(missing_rng, pairs.size(), detail::count_for(sc.missing_counterpart_rate, sc.n_pairs));
    std::vector<bool> is_withheld(pairs.size(), false);
    for (auto i : withheld)
        is_withheld[i] = true;

    std::set<AccountAddress> truncated_receivers;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        out.events.push_back(pairs[i].event);
        if (is_withheld[i]) {
            out.truth.push_back({pairs[i].event.event_id, std::nullopt});
            truncated_receivers.insert(pairs[i].event.receiver);
        } else {
            out.truth.push_back({pairs[i].event.event_id, pairs[i].transfer.tx_id});
            out.transfers.push_back(pairs[i].transfer);
        }
    }

    // a visible but cut-off history for every receiver whose counterpart was withheld
    for (const auto& r : truncated_receivers) {
        ChainTransfer h;
        h.tx_id = TxId(detail::random_bytes<32>(missing_rng));
        h.to_address = r;
        h.from_address = AccountAddress(detail::random_bytes<20>(missing_rng));
        h.token = {"USDC", std::nullopt, AssetClass::Fungible};
        h.amount = Amount{detail::unique_value(missing_rng, used)};
        h.timestamp = Timestamp{sc.start_time - 86400};
        h.chain = transfer_chain;
        out.transfers.push_back(h);
    }

    // unrelated transfers to known receivers with values no event carries
    auto n_noise = detail::count_for(sc.noise_transfer_rate, sc.n_pairs);
    for (std::size_t k = 0; k < n_noise && !pairs.empty(); ++k) {
        const auto& ref = pairs[boost::random::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(noise_rng)];
        ChainTransfer n = ref.transfer;
        n.tx_id = TxId(detail::random_bytes<32>(noise_rng));
        n.from_address = AccountAddress(detail::random_bytes<20>(noise_rng));
        if (n.amount) n.amount = Amount{detail::unique_value(noise_rng, used)};
        if (n.token_id) n.token_id = TokenId{detail::unique_value(noise_rng, used)};
        n.timestamp = Timestamp{sc.start_time +
                                boost::random::uniform_int_distribution<std::uint64_t>(0, span + 86400)(noise_rng)};
        out.transfers.push_back(n);
    }

    // copies of a true counterpart's (receiver, token, value), landing no earlier
    // than that counterpart and at most three times the longest latency after the event
    auto n_collide = detail::count_for(sc.value_collision_rate, sc.n_pairs);
    if (n_collide) {
        auto reach = 3 * sc.latency.max_seconds().value_or(static_cast<std::uint64_t>(std::exp(sc.latency.a + 2 * sc.latency.b)));
        std::vector<std::size_t> fetchable;
        for (std::size_t i = 0; i < pairs.size(); ++i)
            if (!is_withheld[i]) fetchable.push_back(i);
        auto picks = detail::choose(collide_rng, fetchable.size(), std::min(n_collide, fetchable.size()));
        for (std::size_t k = 0; k < n_collide && !picks.empty(); ++k) {
            const auto& ref = pairs[fetchable[picks[k % picks.size()]]];
            ChainTransfer c = ref.transfer;
            c.tx_id = TxId(detail::random_bytes<32>(collide_rng));
            c.from_address = AccountAddress(detail::random_bytes<20>(collide_rng));
            auto hi = std::max(reach, ref.latency);
            c.timestamp = Timestamp{ref.event.timestamp.unix_seconds +
                                    boost::random::uniform_int_distribution<std::uint64_t>(ref.latency, hi)(collide_rng)};
            out.transfers.push_back(c);
        }
    }

    for (auto& t : out.transfers)
        if (truncated_receivers.contains(t.to_address)) t.truncated = true;

    if (!deposit) {
        for (const auto& t : out.transfers) {
            if (t.token.asset_class != AssetClass::Fungible) continue;
            RawTransaction claim;
            claim.tx_id = t.tx_id;
            claim.from = t.to_address;
            claim.to = spec.contract("erc20-bridge").value_or(AccountAddress{});
            const auto& sel = spec.withdrawal_method_id();
            claim.input.assign(sel.begin(), sel.end());
            claim.input.resize(4 + 32, 0);
            claim.block_number = t.block_number;
            claim.block_timestamp = t.timestamp;
            out.claims.push_back(std::move(claim));
        }
    }

    std::vector<std::size_t> order(out.events.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return out.events[a].timestamp < out.events[b].timestamp; });
    std::vector<BridgeEvent> events;
    std::vector<TruthRecord> truth;
    for (auto i : order) {
        events.push_back(std::move(out.events[i]));
        truth.push_back(std::move(out.truth[i]));
    }
    out.events = std::move(events);
    out.truth = std::move(truth);
    std::sort(out.transfers.begin(), out.transfers.end(), transfer_time_less);
    std::sort(out.claims.begin(), out.claims.end(),
              [](const RawTransaction& a, const RawTransaction& b) { return a.tx_id < b.tx_id; });
    return out;
}

struct Score {
    std::uint64_t events = 0;
    std::uint64_t exact = 0;
    std::uint64_t correct_exact = 0;
    std::uint64_t ambiguous = 0;
    std::uint64_t withheld = 0;
    /// correct exact / exact
    std::optional<double> precision;
    /// correct exact / all truth entries (withheld entries count as misses)
    std::optional<double> recall;
    /// correct exact / non-withheld truth entries
    std::optional<double> recall_fetchable;
    /// ambiguous / events
    std::optional<double> ambiguous_rate;
};

inline std::optional<double> ratio(std::uint64_t num, std::uint64_t den)
{
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

/// Scores results against ground truth; the two must cover the same event IDs.
inline Score score(std::span<const MatchResult> results, std::span<const TruthRecord> truth)
{
    std::map<std::string, const TruthRecord*> by_id;
    for (const auto& t : truth)
        if (!by_id.emplace(t.event_id, &t).second)
            throw std::invalid_argument("truth lists event " + t.event_id + " twice");
    if (results.size() != truth.size())
        throw std::invalid_argument("results cover " + std::to_string(results.size()) + " events, truth covers " +
                                    std::to_string(truth.size()));
    Score s;
    std::set<std::string> seen;
    for (const auto& r : results) {
        auto it = by_id.find(r.event_id);
        if (it == by_id.end()) throw std::invalid_argument("event " + r.event_id + " has no truth entry");
        if (!seen.insert(r.event_id).second) throw std::invalid_argument("results list event " + r.event_id + " twice");
        ++s.events;
        if (r.outcome == Outcome::Ambiguous) ++s.ambiguous;
        if (r.outcome == Outcome::Exact) {
            ++s.exact;
            if (it->second->tx_id && r.counterpart() == it->second->tx_id) ++s.correct_exact;
        }
        if (!it->second->tx_id) ++s.withheld;
    }
    s.precision = ratio(s.correct_exact, s.exact);
    s.recall = ratio(s.correct_exact, s.events);
    s.recall_fetchable = ratio(s.correct_exact, s.events - s.withheld);
    s.ambiguous_rate = ratio(s.ambiguous, s.events);
    return s;
}

inline Score score(const MatchReport& report, std::span<const TruthRecord> truth) { return score(report.results, truth); }

} // namespace bridgetrace
