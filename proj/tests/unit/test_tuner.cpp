#include <bridgetrace/traffic_sim.hpp>
#include <bridgetrace/tuner.hpp>

#include "fixtures.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace bridgetrace;
using namespace bridgetrace::testing;

namespace {

const BridgeSpec& spec()
{
    static const BridgeSpec s = default_polygon_pos_spec();
    return s;
}

const GeneratedTraffic& s0()
{
    static const GeneratedTraffic g = generate(scenario_s0(), Direction::Deposit, spec());
    return g;
}

const GeneratedTraffic& s2()
{
    static const GeneratedTraffic g = generate(scenario_s2(), Direction::Deposit, spec());
    return g;
}

SweepCurve curve_of(std::vector<double> rates_pct, std::uint64_t total = 100)
{
    SweepCurve c;
    std::uint64_t tol = 60;
    for (auto r : rates_pct) {
        auto exact = static_cast<std::uint64_t>(r);
        c.points.push_back({tol, {exact, 0, total - exact}});
        tol *= 2;
    }
    return c;
}

} // namespace

TEST_CASE("sampling without replacement", "[tuner]")
{
    const auto& ev = s0().events;
    auto a = sample_events(ev, 250, 99);
    auto b = sample_events(ev, 250, 99);
    REQUIRE(a.size() == 250);
    CHECK(a == b);
    std::set<std::string> ids;
    for (const auto& e : a)
        ids.insert(e.event_id);
    CHECK(ids.size() == 250);
    CHECK(sample_events(ev, 250, 100) != a);

    auto all = sample_events(ev, ev.size(), 5);
    CHECK(all == std::vector<BridgeEvent>(ev.begin(), ev.end()));
    CHECK(sample_events(ev, 0, 5).empty());
    CHECK_THROWS_AS(sample_events(ev, ev.size() + 1, 5), std::invalid_argument);
}

TEST_CASE("sampling is uniform across positions", "[tuner]")
{
    // each of 20 items should land in a 5-sample about a quarter of the time
    std::vector<BridgeEvent> ev(20);
    for (std::size_t i = 0; i < ev.size(); ++i)
        ev[i].event_id = std::to_string(i);
    std::vector<int> hits(20, 0);
    const int rounds = 8000;
    for (int s = 0; s < rounds; ++s)
        for (const auto& e : sample_events(ev, 5, static_cast<std::uint64_t>(s)))
            ++hits[std::stoul(e.event_id)];
    for (auto h : hits)
        CHECK(std::abs(h - rounds / 4) < rounds / 4 / 10);
}

TEST_CASE("per-token sampling caps each group", "[tuner]")
{
    auto sc = scenario_s0();
    sc.n_pairs = 400;
    sc.asset_mix = {0.8, 0.2, 0};
    auto g = generate(sc, Direction::Deposit, spec());
    auto s = sample_events_per_token(g.events, 50, 3);
    std::map<std::string, std::size_t> per;
    for (const auto& e : s)
        ++per[e.token.symbol];
    for (const auto& [sym, n] : per)
        CHECK(n <= 50);
    CHECK(per.at("ETH") == 50);
    CHECK(s == sample_events_per_token(g.events, 50, 3));
}

TEST_CASE("geometric grids and duration parsing", "[tuner]")
{
    auto d = default_grid(Direction::Deposit);
    REQUIRE(d.size() == 25);
    CHECK(d.front() == 60);
    CHECK(d.back() == 7200);
    CHECK(std::is_sorted(d.begin(), d.end()));
    CHECK(std::adjacent_find(d.begin(), d.end()) == d.end());
    auto w = default_grid(Direction::Withdrawal);
    REQUIRE(w.size() == 25);
    CHECK(w.front() == 600);
    CHECK(w.back() == 1209600);
    // consecutive ratio stays near (7200/60)^(1/24)
    for (std::size_t i = 1; i < d.size(); ++i)
        CHECK(static_cast<double>(d[i]) / static_cast<double>(d[i - 1]) == Catch::Approx(std::pow(120.0, 1.0 / 24)).epsilon(0.02));

    CHECK(parse_duration("1452") == 1452);
    CHECK(parse_duration("24.2m") == 1452);
    CHECK(parse_duration("9166.7m") == 550002);
    CHECK(parse_duration("2h") == 7200);
    CHECK(parse_duration("14d") == 1209600);
    CHECK(parse_duration("30s") == 30);
    for (auto bad : {"", "m", "-1", "1x", "nan", "1e3", "1.5.2"})
        CHECK_THROWS_AS(parse_duration(bad), std::invalid_argument);

    CHECK(parse_grid("300,600,15m") == std::vector<std::uint64_t>{300, 600, 900});
    CHECK(parse_grid("1m:120m:25") == d);
    CHECK(parse_grid("900") == std::vector<std::uint64_t>{900});
    CHECK_THROWS(parse_grid("300,,600"));
}

TEST_CASE("sweep validates its grid", "[tuner]")
{
    std::vector<std::uint64_t> none;
    CHECK_THROWS_AS(sweep(s0().events, s0().transfers, none, MatchConfig{}, spec()), std::invalid_argument);
    std::vector<std::uint64_t> unsorted = {600, 300};
    CHECK_THROWS_AS(sweep(s0().events, s0().transfers, unsorted, MatchConfig{}, spec()), std::invalid_argument);
    std::vector<std::uint64_t> dup = {300, 300};
    CHECK_THROWS_AS(sweep(s0().events, s0().transfers, dup, MatchConfig{}, spec()), std::invalid_argument);
    std::vector<std::uint64_t> zero = {0, 300};
    CHECK_THROWS_AS(sweep(s0().events, s0().transfers, zero, MatchConfig{}, spec()), std::invalid_argument);
}

TEST_CASE("sweep points equal individual match_all runs", "[tuner]")
{
    auto sample = sample_events(s2().events, 400, 11);
    auto grid = parse_grid("60s:3h:12");
    auto curve = sweep(sample, s2().transfers, grid, MatchConfig{}, spec(), 4);
    REQUIRE(curve.points.size() == grid.size());
    CHECK(curve.sample_size == 400);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        MatchConfig cfg;
        cfg.time_tolerance_seconds = grid[i];
        auto rep = match_all(sample, s2().transfers, cfg, spec());
        CHECK(curve.points[i].tolerance_seconds == grid[i]);
        CHECK(curve.points[i].counts.exact == rep.counts.exact);
        CHECK(curve.points[i].counts.ambiguous == rep.counts.ambiguous);
        CHECK(curve.points[i].counts.unmatched == rep.counts.unmatched);
        CHECK(curve.points[i].rate() >= 0);
        CHECK(curve.points[i].rate() <= 1);
        for (const auto& [sym, rows] : curve.per_token)
            CHECK(rows[i].total() == (rep.per_token.contains(sym) ? rep.per_token.at(sym).total() : 0));
    }
    auto serial = sweep(sample, s2().transfers, grid, MatchConfig{}, spec(), 1);
    CHECK(curve_csv(serial) == curve_csv(curve));
    CHECK(per_token_curve_csv(serial) == per_token_curve_csv(curve));
}

TEST_CASE("exact count is non-decreasing in tolerance on noise-free traffic", "[tuner]")
{
    auto curve = sweep(s0().events, s0().transfers, default_grid(Direction::Deposit), MatchConfig{}, spec(), 4);
    for (std::size_t i = 1; i < curve.points.size(); ++i)
        CHECK(curve.points[i].counts.exact >= curve.points[i - 1].counts.exact);
    CHECK(curve.points.back().counts.exact == 1000);
}

TEST_CASE("window below the minimum latency matches nothing", "[tuner]")
{
    std::vector<std::uint64_t> grid = {60};
    auto curve = sweep(s0().events, s0().transfers, grid, MatchConfig{}, spec());
    CHECK(curve.points[0].counts.exact == 0);
    CHECK(curve.points[0].rate() == 0);
    CHECK(find_peak(curve).tolerance_seconds == 60);
}

TEST_CASE("S2 curve rises to an interior peak and falls", "[tuner]")
{
    auto curve = sweep(s2().events, s2().transfers, default_grid(Direction::Deposit), MatchConfig{}, spec(), 4);
    const auto& peak = find_peak(curve);
    CHECK(peak.tolerance_seconds > curve.points.front().tolerance_seconds);
    CHECK(peak.tolerance_seconds < curve.points.back().tolerance_seconds);
    CHECK(peak.rate() > curve.points.front().rate());
    CHECK(peak.rate() > curve.points.back().rate());
    // the true latencies lie in [300, 900] s
    CHECK(peak.tolerance_seconds >= 300);
    CHECK(peak.tolerance_seconds <= 1800);
}

TEST_CASE("peak selection", "[tuner]")
{
    CHECK(find_peak(curve_of({10, 20, 30, 40})).tolerance_seconds == 480);
    CHECK(find_peak(curve_of({10, 50, 50, 50, 20})).tolerance_seconds == 120);
    CHECK(find_peak(curve_of({70})).tolerance_seconds == 60);
    CHECK(find_peak(curve_of({0, 0, 0})).tolerance_seconds == 60);
    CHECK_THROWS_AS(find_peak(SweepCurve{}), std::invalid_argument);

    // equal rates with different totals are a tie
    SweepCurve c;
    c.points.push_back({100, {1, 0, 1}});
    c.points.push_back({200, {50, 0, 50}});
    CHECK(find_peak(c).tolerance_seconds == 100);
}

TEST_CASE("curve CSV", "[tuner]")
{
    SweepCurve c;
    c.points.push_back({60, {0, 0, 3}});
    c.points.push_back({1452, {2, 1, 0}});
    CHECK(curve_csv(c) == "tolerance_seconds,exact_rate,exact,ambiguous,unmatched\n"
                          "60,0.000000,0,0,3\n"
                          "1452,0.666667,2,1,0\n");
}
