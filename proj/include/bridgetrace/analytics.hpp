#pragma once

// Descriptive series and tables over matched data: daily time cost, daily
// flows and their ratio, token composition, match-rate tables, per-collection
// transfer graphs and long-latency listings. Everything renders to CSV.

#include <bridgetrace/match.hpp>

#include <charconv>
#include <sstream>

namespace bridgetrace {

/// Days since 1970-01-01 to "YYYY-MM-DD" (proleptic Gregorian, UTC).
inline std::string civil_date(std::int64_t days)
{
    // Hinnant's civil_from_days
    days += 719468;
    std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    auto doe = static_cast<unsigned>(days - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    unsigned d = doy - (153 * mp + 2) / 5 + 1;
    unsigned m = mp < 10 ? mp + 3 : mp - 9;
    if (m <= 2) ++y;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
    return buf;
}

inline std::int64_t utc_day(Timestamp t) { return static_cast<std::int64_t>(t.unix_seconds / 86400); }
inline std::string utc_date(Timestamp t) { return civil_date(utc_day(t)); }
inline std::string utc_month(Timestamp t) { return utc_date(t).substr(0, 7); }

namespace detail {

/// Shortest round-trip text for a double.
inline std::string num(double v)
{
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "n/a"; }

} // namespace detail

enum class Statistic { Median, Mean, P90 };

inline std::string_view to_string(Statistic s)
{
    switch (s) {
    case Statistic::Median: return "median";
    case Statistic::Mean: return "mean";
    case Statistic::P90: return "p90";
    }
    return "?";
}

inline Statistic parse_statistic(std::string_view s)
{
    if (s == "median") return Statistic::Median;
    if (s == "mean") return Statistic::Mean;
    if (s == "p90") return Statistic::P90;
    throw std::invalid_argument("unknown statistic '" + std::string(s) + "'");
}

/// Median is the lower-middle order statistic for even n; P90 is nearest-rank.
inline double compute_statistic(std::vector<std::int64_t> v, Statistic s)
{
    if (v.empty()) throw std::invalid_argument("statistic of an empty sample");
    std::sort(v.begin(), v.end());
    switch (s) {
    case Statistic::Median: return static_cast<double>(v[(v.size() - 1) / 2]);
    case Statistic::Mean: {
        long double sum = 0;
        for (auto x : v)
            sum += x;
        return static_cast<double>(sum / static_cast<long double>(v.size()));
    }
    case Statistic::P90: {
        auto rank = (9 * v.size() + 9) / 10;  // ceil(0.9 n)
        return static_cast<double>(v[rank - 1]);
    }
    }
    return 0;
}

struct DailyPoint {
    std::string date;
    double value = 0;
    std::uint64_t samples = 0;

    friend bool operator==(const DailyPoint&, const DailyPoint&) = default;
};

struct DailySeries {
    Statistic statistic = Statistic::Median;
    std::vector<DailyPoint> points;
};

/// Per UTC day of the event timestamp, the statistic of elapsed seconds over Exact results.
inline DailySeries time_cost_series(std::span<const MatchResult> results, Statistic stat)
{
    std::map<std::int64_t, std::vector<std::int64_t>> by_day;
    for (const auto& r : results)
        if (r.outcome == Outcome::Exact && r.elapsed_seconds)
            by_day[utc_day(r.event_timestamp)].push_back(*r.elapsed_seconds);
    DailySeries s{stat, {}};
    for (auto& [day, v] : by_day)
        s.points.push_back({civil_date(day), compute_statistic(v, stat), v.size()});
    return s;
}

inline std::string daily_series_csv(const DailySeries& s)
{
    std::ostringstream os;
    os << "date," << to_string(s.statistic) << "_seconds,samples\n";
    for (const auto& p : s.points)
        os << p.date << ',' << detail::num(p.value) << ',' << p.samples << '\n';
    return os.str();
}

struct FlowOptions {
    /// Count only Exact events instead of every initiated one.
    bool exact_only = false;
    /// A day is a spike when its ratio exceeds this multiple of the trailing mean.
    double spike_factor = 3.0;
    std::uint64_t trailing_days = 7;
};

struct FlowPoint {
    std::string date;
    std::uint64_t deposits = 0;
    std::uint64_t withdrawals = 0;
    /// withdrawals / deposits; absent when there were no deposits
    std::optional<double> ratio;
    bool spike = false;
};

/// Daily deposit and withdrawal counts, their ratio, and spikes against the
/// mean ratio of the preceding `trailing_days` calendar days that have one.
inline std::vector<FlowPoint> flow_series(std::span<const MatchResult> deposits, std::span<const MatchResult> withdrawals,
                                          const FlowOptions& opt = {})
{
    std::map<std::int64_t, std::pair<std::uint64_t, std::uint64_t>> days;
    for (const auto& r : deposits)
        if (!opt.exact_only || r.outcome == Outcome::Exact) ++days[utc_day(r.event_timestamp)].first;
    for (const auto& r : withdrawals)
        if (!opt.exact_only || r.outcome == Outcome::Exact) ++days[utc_day(r.event_timestamp)].second;

    std::map<std::int64_t, double> ratios;
    std::vector<FlowPoint> out;
    for (const auto& [day, c] : days) {
        FlowPoint p{civil_date(day), c.first, c.second, std::nullopt, false};
        if (c.first) {
            p.ratio = static_cast<double>(c.second) / static_cast<double>(c.first);
            double sum = 0;
            std::size_t n = 0;
            for (auto it = ratios.lower_bound(day - static_cast<std::int64_t>(opt.trailing_days)); it != ratios.end(); ++it) {
                sum += it->second;
                ++n;
            }
            if (n) {
                double mean = sum / static_cast<double>(n);
                p.spike = *p.ratio > opt.spike_factor * mean;
            }
            ratios.emplace(day, *p.ratio);
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<FlowPoint> flow_series(const MatchReport& deposits, const MatchReport& withdrawals,
                                          const FlowOptions& opt = {})
{
    return flow_series(deposits.results, withdrawals.results, opt);
}

inline std::string flow_series_csv(std::span<const FlowPoint> pts)
{
    std::ostringstream os;
    os << "date,deposits,withdrawals,ratio,spike\n";
    for (const auto& p : pts)
        os << p.date << ',' << p.deposits << ',' << p.withdrawals << ',' << detail::opt_num(p.ratio) << ','
           << (p.spike ? "true" : "false") << '\n';
    return os.str();
}

struct TokenShare {
    std::string symbol;
    std::uint64_t count = 0;
    double share = 0;
};

/// Counts per normalized symbol, largest first.
inline std::vector<TokenShare> token_composition(std::span<const BridgeEvent> events)
{
    std::map<std::string, std::uint64_t> counts;
    for (const auto& e : events)
        ++counts[normalize_symbol(e.token.symbol)];
    std::vector<TokenShare> out;
    for (const auto& [sym, n] : counts)
        out.push_back({sym, n, static_cast<double>(n) / static_cast<double>(events.size())});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
    return out;
}

inline std::string token_composition_csv(std::span<const TokenShare> rows)
{
    std::ostringstream os;
    os << "symbol,count,share\n";
    for (const auto& r : rows)
        os << r.symbol << ',' << r.count << ',' << detail::num(r.share) << '\n';
    return os.str();
}

struct MatchRateRow {
    std::string token_type;
    OutcomeCounts deposits;
    OutcomeCounts withdrawals;
};

/// "1,451,413 / 1,528,318 = 94.97%", or "n/a" for an empty report.
inline std::string rate_cell(std::uint64_t exact, std::uint64_t total)
{
    if (total == 0) return "n/a";
    return with_thousands(exact) + " / " + with_thousands(total) + " = " + render_rate(exact, total);
}

inline std::string match_rate_table(std::span<const MatchRateRow> rows)
{
    std::vector<std::array<std::string, 3>> cells = {{"Token", "Deposits", "Withdrawals"}};
    for (const auto& r : rows)
        cells.push_back({r.token_type, rate_cell(r.deposits.exact, r.deposits.total()),
                         rate_cell(r.withdrawals.exact, r.withdrawals.total())});
    std::array<std::size_t, 3> w{};
    for (const auto& row : cells)
        for (std::size_t i = 0; i < 3; ++i)
            w[i] = std::max(w[i], row[i].size());
    std::ostringstream os;
    auto line = [&](const std::array<std::string, 3>& row) {
        for (std::size_t i = 0; i < 3; ++i) {
            os << row[i] << std::string(w[i] - row[i].size(), ' ');
            os << (i < 2 ? " | " : "\n");
        }
    };
    line(cells[0]);
    os << std::string(w[0], '-') << "-|-" << std::string(w[1], '-') << "-|-" << std::string(w[2], '-') << '\n';
    for (std::size_t i = 1; i < cells.size(); ++i)
        line(cells[i]);
    auto text = os.str();
    // no trailing padding
    std::string out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) {
        l.erase(l.find_last_not_of(' ') + 1);
        out += l + '\n';
    }
    return out;
}

inline std::string match_rate_csv(std::span<const MatchRateRow> rows)
{
    std::ostringstream os;
    os << "token_type,direction,exact,ambiguous,unmatched,total,exact_rate\n";
    for (const auto& r : rows)
        for (auto [dir, c] : {std::pair{"deposit", &r.deposits}, std::pair{"withdrawal", &r.withdrawals}})
            os << r.token_type << ',' << dir << ',' << c->exact << ',' << c->ambiguous << ',' << c->unmatched << ','
               << c->total() << ',' << render_rate(c->exact, c->total()) << '\n';
    return os.str();
}

enum class EdgeKind { IntraChain, CrossChain };

inline std::string_view to_string(EdgeKind k) { return k == EdgeKind::CrossChain ? "cross-chain" : "intra-chain"; }

struct GraphEdge {
    AccountAddress from;
    AccountAddress to;
    TxId tx_id;
    Timestamp timestamp;
    EdgeKind kind = EdgeKind::IntraChain;
    std::string chain;
};

struct MonthPoint {
    std::string month;
    std::uint64_t transactions = 0;
    std::uint64_t active_addresses = 0;
    /// transactions relative change from the previous listed month
    std::optional<double> growth;
};

struct ChainGraph {
    std::vector<GraphEdge> edges;
    std::uint64_t active_addresses = 0;
    std::uint64_t transactions = 0;
    std::uint64_t cross_chain = 0;
    /// cross-chain edges / all edges
    std::optional<double> cross_chain_share;
    std::vector<MonthPoint> monthly;
};

/// Per-chain transfer graphs for one collection. An edge is cross-chain when its
/// transaction is an endpoint of an Exact pair in any of `matched`.
inline std::map<std::string, ChainGraph> collection_graph(std::span<const ChainTransfer> transfers,
                                                          std::span<const MatchReport> matched,
                                                          std::string_view token_filter)
{
    std::set<TxId> endpoints;
    for (const auto& rep : matched)
        for (const auto& r : rep.results)
            if (auto c = r.counterpart()) {
                endpoints.insert(*c);
                endpoints.insert(r.event_tx_id);
            }
    auto want = normalize_symbol(token_filter);

    std::map<std::string, ChainGraph> out;
    for (const auto& t : transfers) {
        if (normalize_symbol(t.token.symbol) != want) continue;
        out[t.chain].edges.push_back({t.from_address, t.to_address, t.tx_id, t.timestamp,
                                      endpoints.contains(t.tx_id) ? EdgeKind::CrossChain : EdgeKind::IntraChain,
                                      t.chain});
    }
    const AccountAddress zero{};
    for (auto& [chain, g] : out) {
        std::stable_sort(g.edges.begin(), g.edges.end(), [](const auto& a, const auto& b) {
            return std::tie(a.timestamp, a.tx_id) < std::tie(b.timestamp, b.tx_id);
        });
        std::set<AccountAddress> active;
        std::map<std::string, std::pair<std::uint64_t, std::set<AccountAddress>>> months;
        for (const auto& e : g.edges) {
            auto& m = months[utc_month(e.timestamp)];
            ++m.first;
            for (const auto& a : {e.from, e.to})
                if (a != zero) {
                    active.insert(a);
                    m.second.insert(a);
                }
            if (e.kind == EdgeKind::CrossChain) ++g.cross_chain;
        }
        g.transactions = g.edges.size();
        g.active_addresses = active.size();
        if (g.transactions) g.cross_chain_share = static_cast<double>(g.cross_chain) / static_cast<double>(g.transactions);
        std::optional<std::uint64_t> prev;
        for (const auto& [month, m] : months) {
            MonthPoint p{month, m.first, m.second.size(), std::nullopt};
            if (prev && *prev) p.growth = (static_cast<double>(m.first) - static_cast<double>(*prev)) / static_cast<double>(*prev);
            prev = m.first;
            g.monthly.push_back(std::move(p));
        }
    }
    return out;
}

inline std::string edges_csv(std::span<const GraphEdge> edges)
{
    std::ostringstream os;
    os << "from,to,tx,timestamp,kind,chain\n";
    for (const auto& e : edges)
        os << e.from.to_string() << ',' << e.to.to_string() << ',' << e.tx_id.to_string() << ','
           << e.timestamp.unix_seconds << ',' << to_string(e.kind) << ',' << e.chain << '\n';
    return os.str();
}

inline std::string graph_metrics_csv(const std::map<std::string, ChainGraph>& graphs)
{
    std::ostringstream os;
    os << "chain,month,transactions,active_addresses,growth\n";
    for (const auto& [chain, g] : graphs) {
        os << chain << ",all," << g.transactions << ',' << g.active_addresses << ",n/a\n";
        for (const auto& m : g.monthly)
            os << chain << ',' << m.month << ',' << m.transactions << ',' << m.active_addresses << ','
               << detail::opt_num(m.growth) << '\n';
    }
    os << "\nchain,cross_chain,transactions,cross_chain_share\n";
    for (const auto& [chain, g] : graphs)
        os << chain << ',' << g.cross_chain << ',' << g.transactions << ',' << detail::opt_num(g.cross_chain_share) << '\n';
    return os.str();
}

struct LongLatencyEntry {
    std::string event_id;
    std::int64_t elapsed_seconds = 0;
    /// An unmatched withdrawal burn older than the threshold.
    bool possibly_unclaimed = false;

    friend bool operator==(const LongLatencyEntry&, const LongLatencyEntry&) = default;
};

/// Exact pairs that took at least `threshold_seconds`, longest first. For
/// withdrawal reports, unmatched burns at least that old at `as_of` (default:
/// the latest event time in the report) follow, oldest first.
inline std::vector<LongLatencyEntry> long_latency_report(const MatchReport& report, std::uint64_t threshold_seconds,
                                                         std::optional<Timestamp> as_of = std::nullopt)
{
    if (threshold_seconds == 0) throw std::invalid_argument("latency threshold must be > 0");
    auto thr = static_cast<std::int64_t>(threshold_seconds);
    std::vector<LongLatencyEntry> slow, unclaimed;
    Timestamp now = as_of.value_or(Timestamp{0});
    if (!as_of)
        for (const auto& r : report.results)
            now = std::max(now, r.event_timestamp);
    for (const auto& r : report.results) {
        if (r.outcome == Outcome::Exact && r.elapsed_seconds && *r.elapsed_seconds >= thr)
            slow.push_back({r.event_id, *r.elapsed_seconds, false});
        if (report.direction == Direction::Withdrawal && r.outcome == Outcome::Unmatched) {
            auto age = seconds_between(r.event_timestamp, now);
            if (age >= thr) unclaimed.push_back({r.event_id, age, true});
        }
    }
    auto desc = [](const auto& a, const auto& b) {
        return std::tie(b.elapsed_seconds, a.event_id) < std::tie(a.elapsed_seconds, b.event_id);
    };
    std::sort(slow.begin(), slow.end(), desc);
    std::sort(unclaimed.begin(), unclaimed.end(), desc);
    slow.insert(slow.end(), unclaimed.begin(), unclaimed.end());
    return slow;
}

inline std::string long_latency_csv(std::span<const LongLatencyEntry> rows)
{
    std::ostringstream os;
    os << "event_id,elapsed_seconds,status\n";
    for (const auto& r : rows)
        os << r.event_id << ',' << r.elapsed_seconds << ',' << (r.possibly_unclaimed ? "possibly unclaimed" : "completed")
           << '\n';
    return os.str();
}

} // namespace bridgetrace
