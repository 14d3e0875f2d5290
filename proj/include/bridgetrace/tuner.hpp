#pragma once

// Tolerance sweep: sample events, match the sample at each tolerance on a
// grid, record the exact-match rate and pick the peak.

#include <bridgetrace/match.hpp>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <cmath>
#include <iomanip>
#include <sstream>

namespace bridgetrace {

struct SweepPoint {
    std::uint64_t tolerance_seconds = 0;
    OutcomeCounts counts;

    [[nodiscard]] double rate() const
    {
        return counts.total() ? static_cast<double>(counts.exact) / static_cast<double>(counts.total()) : 0.0;
    }
};

struct SweepCurve {
    std::vector<SweepPoint> points;
    std::uint64_t sample_size = 0;
    std::uint64_t seed = 0;
    /// Per normalized event symbol, one entry per point.
    std::map<std::string, std::vector<OutcomeCounts>> per_token;
};

/// Uniform sample without replacement, kept in input order.
inline std::vector<BridgeEvent> sample_events(std::span<const BridgeEvent> events, std::size_t n, std::uint64_t seed)
{
    if (n > events.size())
        throw std::invalid_argument("sample size " + std::to_string(n) + " exceeds " + std::to_string(events.size()) +
                                    " events");
    boost::random::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(events.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    for (std::size_t i = 0; i < n; ++i)
        std::swap(idx[i], idx[boost::random::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng)]);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<BridgeEvent> out;
    out.reserve(n);
    for (auto i : idx)
        out.push_back(events[i]);
    return out;
}

/// n events from each token symbol; smaller groups are taken whole.
inline std::vector<BridgeEvent> sample_events_per_token(std::span<const BridgeEvent> events, std::size_t n,
                                                        std::uint64_t seed)
{
    std::map<std::string, std::vector<BridgeEvent>> groups;
    for (const auto& e : events)
        groups[normalize_symbol(e.token.symbol)].push_back(e);
    std::vector<BridgeEvent> out;
    std::uint64_t k = 0;
    for (auto& [sym, g] : groups) {
        auto part = sample_events(g, std::min(n, g.size()), seed + k++);
        out.insert(out.end(), part.begin(), part.end());
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.timestamp, a.event_id) < std::tie(b.timestamp, b.event_id);
    });
    return out;
}

/// `n` distinct integer tolerances spaced geometrically from lo to hi inclusive
/// (fewer if rounding merges neighbours).
inline std::vector<std::uint64_t> geometric_grid(std::uint64_t lo, std::uint64_t hi, std::size_t n)
{
    if (lo == 0 || hi < lo || n == 0) throw std::invalid_argument("geometric grid needs 0 < lo <= hi and n > 0");
    std::vector<std::uint64_t> out;
    if (n == 1 || lo == hi) return {lo};
    double ratio = std::pow(static_cast<double>(hi) / static_cast<double>(lo), 1.0 / static_cast<double>(n - 1));
    for (std::size_t i = 0; i < n; ++i) {
        auto v = i + 1 == n ? hi : static_cast<std::uint64_t>(std::llround(static_cast<double>(lo) * std::pow(ratio, static_cast<double>(i))));
        if (out.empty() || v > out.back()) out.push_back(v);
    }
    return out;
}

/// 1 min to 120 min for deposits, 10 min to 14 days for withdrawals, 25 points each.
inline std::vector<std::uint64_t> default_grid(Direction d)
{
    return d == Direction::Deposit ? geometric_grid(60, 7200, 25) : geometric_grid(600, 14 * 86400, 25);
}

/// Parses "30s", "24.2m", "2h", "14d" or a bare number of seconds.
inline std::uint64_t parse_duration(std::string_view text)
{
    if (text.empty()) throw std::invalid_argument("empty duration");
    double scale = 1;
    switch (text.back()) {
    case 's': scale = 1; text.remove_suffix(1); break;
    case 'm': scale = 60; text.remove_suffix(1); break;
    case 'h': scale = 3600; text.remove_suffix(1); break;
    case 'd': scale = 86400; text.remove_suffix(1); break;
    default: break;
    }
    std::string s(text);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty() || !(v >= 0) || !std::isfinite(v) || s.find_first_of("eEnN") != std::string::npos)
        throw std::invalid_argument("malformed duration '" + std::string(text) + "'");
    return static_cast<std::uint64_t>(std::llround(v * scale));
}

/// "lo:hi:n" for a geometric grid, otherwise a comma-separated list of durations.
inline std::vector<std::uint64_t> parse_grid(std::string_view text)
{
    if (std::count(text.begin(), text.end(), ':') == 2) {
        auto a = text.find(':'), b = text.rfind(':');
        auto n = parse_duration(text.substr(b + 1));
        return geometric_grid(parse_duration(text.substr(0, a)), parse_duration(text.substr(a + 1, b - a - 1)), n);
    }
    std::vector<std::uint64_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        out.push_back(parse_duration(item));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

/// One match_all per tolerance over a shared index; every other setting in
/// `cfg` is held fixed. Points are evaluated concurrently and kept in grid order.
inline SweepCurve sweep(std::span<const BridgeEvent> sample, std::span<const ChainTransfer> transfers,
                        std::span<const std::uint64_t> tolerances, const MatchConfig& cfg, const BridgeSpec& spec,
                        unsigned jobs = 1)
{
    if (tolerances.empty()) throw std::invalid_argument("empty tolerance grid");
    for (std::size_t i = 1; i < tolerances.size(); ++i)
        if (tolerances[i] <= tolerances[i - 1]) throw std::invalid_argument("tolerances must be strictly increasing");
    for (auto t : tolerances) {
        auto c = cfg;
        c.time_tolerance_seconds = t;
        c.validate();
    }

    auto index = CandidateIndex::build(transfers, spec);
    std::vector<MatchReport> reports(tolerances.size());
    auto run = [&](std::size_t i) {
        auto c = cfg;
        c.time_tolerance_seconds = tolerances[i];
        reports[i] = match_all(sample, index, c, spec, 1);
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tolerances.size())));
    if (jobs == 1) {
        for (std::size_t i = 0; i < tolerances.size(); ++i)
            run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < jobs; ++w)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next++) < tolerances.size();)
                    run(i);
            });
    }

    SweepCurve curve;
    curve.sample_size = sample.size();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        curve.points.push_back({tolerances[i], reports[i].counts});
        for (const auto& [sym, counts] : reports[i].per_token) {
            auto& row = curve.per_token[sym];
            row.resize(reports.size());
            row[i] = counts;
        }
    }
    return curve;
}

/// Maximum-rate point; among equal rates the smallest tolerance.
inline const SweepPoint& find_peak(const SweepCurve& curve)
{
    if (curve.points.empty()) throw std::invalid_argument("empty curve");
    const SweepPoint* best = &curve.points.front();
    for (const auto& p : curve.points) {
        // exact/total compared by cross-multiplication, no rounding
        auto lhs = static_cast<unsigned __int128>(p.counts.exact) * best->counts.total();
        auto rhs = static_cast<unsigned __int128>(best->counts.exact) * p.counts.total();
        if (lhs > rhs) best = &p;
    }
    return *best;
}

namespace detail {

inline std::string fixed6(double v)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

inline void csv_row(std::ostringstream& os, std::uint64_t tol, const OutcomeCounts& c)
{
    double rate = c.total() ? static_cast<double>(c.exact) / static_cast<double>(c.total()) : 0.0;
    os << tol << ',' << fixed6(rate) << ',' << c.exact << ',' << c.ambiguous << ',' << c.unmatched << '\n';
}

} // namespace detail

inline std::string curve_csv(const SweepCurve& curve)
{
    std::ostringstream os;
    os << "tolerance_seconds,exact_rate,exact,ambiguous,unmatched\n";
    for (const auto& p : curve.points)
        detail::csv_row(os, p.tolerance_seconds, p.counts);
    return os.str();
}

inline std::string per_token_curve_csv(const SweepCurve& curve)
{
    std::ostringstream os;
    os << "token,tolerance_seconds,exact_rate,exact,ambiguous,unmatched\n";
    for (const auto& [sym, rows] : curve.per_token)
        for (std::size_t i = 0; i < rows.size(); ++i) {
            os << sym << ',';
            detail::csv_row(os, curve.points[i].tolerance_seconds, rows[i]);
        }
    return os.str();
}

} // namespace bridgetrace
