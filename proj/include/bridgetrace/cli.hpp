#pragma once

// Command surface: ingest, match, tune, report, simulate, eval. `run` is the
// whole program minus process setup, so tests drive it in-process with their
// own providers and clock.

#include <bridgetrace/analytics.hpp>
#include <bridgetrace/ingest_http.hpp>
#include <bridgetrace/traffic_sim.hpp>
#include <bridgetrace/tuner.hpp>

#include <CLI11.hpp>

#include <ctime>
#include <iostream>

#ifndef BRIDGETRACE_VERSION
#define BRIDGETRACE_VERSION "0.0.0"
#endif

namespace bridgetrace::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_source = 2,
    exit_partial = 3,
    exit_gate = 4,
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Factories for external sources plus the clocks the command uses.
struct Providers {
    std::function<std::unique_ptr<LogProvider>(const IngestSource&, const std::optional<fs::path>& tx_fixture)> logs;
    std::function<std::unique_ptr<TransferProvider>(const IngestSource&, const std::string& chain)> transfers;
    Clock* clock = nullptr;
    std::function<std::string()> now;
};

inline std::string iso_now()
{
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline Providers default_providers()
{
    Providers p;
    p.logs = [](const IngestSource& s, const std::optional<fs::path>& txs) -> std::unique_ptr<LogProvider> {
        switch (s.kind) {
        case SourceKind::RpcNode: return std::make_unique<RpcLogProvider>(s.location);
        case SourceKind::FixtureFile:
            return std::make_unique<FixtureLogProvider>(FixtureLogProvider::from_files(s.location, txs));
        case SourceKind::ExplorerApi: break;
        }
        throw UsageError("an explorer API cannot serve bridge logs; use rpc:<url> or fixture:<path>");
    };
    p.transfers = [](const IngestSource& s, const std::string& chain) -> std::unique_ptr<TransferProvider> {
        switch (s.kind) {
        case SourceKind::ExplorerApi: return std::make_unique<ExplorerTransferProvider>(s.location, s.api_key(), chain);
        case SourceKind::FixtureFile:
            return std::make_unique<FixtureTransferProvider>(FixtureTransferProvider::from_file(s.location));
        case SourceKind::RpcNode: break;
        }
        throw UsageError("transfer histories need explorer:<url>[#KEYNAME] or fixture:<path>");
    };
    return p;
}

/// RunManifest: what a command read, wrote and was asked to do.
class Manifest {
public:
    Manifest(std::string command, const DatasetLayout& layout, std::function<std::string()> now)
        : command_(std::move(command)), layout_(layout), now_(std::move(now)), started_(now_())
    {
    }

    json parameters = json::object();
    json seeds = json::object();
    json stats = json::object();

    void spec(const std::string& config_path, const BridgeSpec& s)
    {
        config_path_ = config_path;
        spec_version_ = s.version();
    }

    void input(const fs::path& p) { inputs_[display(p)] = sha256_file(p); }
    void output(const fs::path& p, const std::string& digest) { outputs_[display(p)] = digest; }

    fs::path write()
    {
        json doc = {{"command", command_},
                    {"configPath", config_path_},
                    {"specVersion", spec_version_},
                    {"toolVersion", BRIDGETRACE_VERSION},
                    {"parameters", parameters},
                    {"seeds", seeds},
                    {"inputDigests", inputs_},
                    {"outputDigests", outputs_},
                    {"stats", stats},
                    {"startedAt", started_},
                    {"finishedAt", now_()}};
        auto path = layout_.manifest(command_);
        write_file_atomic(path, doc.dump(2) + "\n");
        return path;
    }

private:
    /// Paths under the output root are recorded relative to it.
    [[nodiscard]] std::string display(const fs::path& p) const
    {
        auto rel = p.lexically_normal().lexically_relative(layout_.root.lexically_normal());
        if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
        return p.generic_string();
    }

    std::string command_;
    DatasetLayout layout_;
    std::function<std::string()> now_;
    std::string started_;
    std::string config_path_ = "builtin:polygon-pos";
    std::string spec_version_;
    json inputs_ = json::object();
    json outputs_ = json::object();
};

namespace detail {

template <typename T>
std::vector<T> read_input(Manifest& m, const fs::path& p)
{
    m.input(p);
    return read_records<T>(p);
}

template <typename T>
void emit(Manifest& m, const fs::path& p, const std::vector<T>& records)
{
    m.output(p, write_records(p, records));
}

inline void emit_text(Manifest& m, const fs::path& p, const std::string& text)
{
    write_file_atomic(p, text);
    m.output(p, sha256_hex(text));
}

template <typename T>
std::string block_range(const std::vector<T>& rows)
{
    if (rows.empty()) return "0-0";
    auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                        [](const T& a, const T& b) { return a.block_number < b.block_number; });
    return std::to_string(lo->block_number) + "-" + std::to_string(hi->block_number);
}

inline std::string slug(std::string_view s)
{
    std::string out;
    for (unsigned char c : s)
        out += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '_';
    return out;
}

struct Common {
    std::string spec_path;
    std::string out_dir;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

    BridgeSpec load(Manifest& m) const
    {
        if (spec_path.empty()) {
            auto s = default_polygon_pos_spec();
            m.spec("builtin:polygon-pos", s);
            return s;
        }
        m.input(spec_path);
        auto s = load_spec(spec_path);
        m.spec(spec_path, s);
        return s;
    }
};

inline void add_common(CLI::App* sub, Common& c, bool out_required)
{
    sub->add_option("--spec", c.spec_path, "Bridge spec file (default: built-in Polygon PoS)");
    auto* o = sub->add_option("--out", c.out_dir, "Dataset root directory");
    if (out_required) o->required();
    sub->add_option("--jobs", c.jobs, "Worker thread cap")->check(CLI::PositiveNumber);
}

struct MatchFlags {
    std::string tolerance = "1452";
    std::string direction = "deposit";
    bool exclusive = false;
    bool symmetric = false;
    bool strict_gap = false;

    [[nodiscard]] MatchConfig config() const
    {
        MatchConfig c;
        c.time_tolerance_seconds = parse_duration(tolerance);
        c.direction = parse_direction(direction);
        c.exclusive_assignment = exclusive;
        c.causal_only = !symmetric;
        c.strict_gap = strict_gap;
        c.validate();
        return c;
    }

    void record(json& params, const MatchConfig& c) const
    {
        params["toleranceSeconds"] = c.time_tolerance_seconds;
        params["direction"] = std::string(to_string(c.direction));
        params["exclusive"] = exclusive;
        params["symmetricWindow"] = symmetric;
        params["strictGap"] = strict_gap;
    }
};

inline void add_match_flags(CLI::App* sub, MatchFlags& f)
{
    sub->add_option("--tolerance", f.tolerance, "Time tolerance: seconds, or with s/m/h/d suffix");
    sub->add_option("--direction", f.direction, "deposit or withdrawal")->check(CLI::IsMember({"deposit", "withdrawal"}));
    sub->add_flag("--exclusive", f.exclusive, "Consume each transfer at most once, earliest event first");
    sub->add_flag("--symmetric-window", f.symmetric, "Accept counterparts on either side of the event");
    sub->add_flag("--strict-gap", f.strict_gap, "Require the gap to be strictly below the tolerance");
}

struct MatchInputs {
    std::string events;
    std::vector<std::string> transfers;
    std::string claims;
};

inline void add_match_inputs(CLI::App* sub, MatchInputs& in)
{
    sub->add_option("--events", in.events, "event.v1 file")->required();
    sub->add_option("--transfers", in.transfers, "transfer.v1 file(s)")->required();
    sub->add_option("--claims", in.claims, "raw_tx.v1 claim transactions admitting fungible exits (withdrawals)");
}

struct LoadedMatchInputs {
    std::vector<BridgeEvent> events;
    std::vector<ChainTransfer> transfers;
    std::uint64_t skipped = 0;
};

/// Events of the requested direction; withdrawal exits pass the claim filter when claims are given.
inline LoadedMatchInputs load_match_inputs(Manifest& m, const MatchInputs& in, const MatchConfig& cfg,
                                           const BridgeSpec& spec)
{
    LoadedMatchInputs out;
    for (auto& e : read_input<BridgeEvent>(m, in.events)) {
        if (e.direction == cfg.direction) out.events.push_back(std::move(e));
        else ++out.skipped;
    }
    for (const auto& p : in.transfers) {
        auto part = read_input<ChainTransfer>(m, p);
        out.transfers.insert(out.transfers.end(), part.begin(), part.end());
    }
    if (!in.claims.empty()) {
        auto claims = read_input<RawTransaction>(m, in.claims);
        out.transfers = admit_exit_records(out.transfers, claims, spec);
    }
    return out;
}

inline json counts_json(const OutcomeCounts& c)
{
    return {{"exact", c.exact}, {"ambiguous", c.ambiguous}, {"unmatched", c.unmatched}, {"total", c.total()},
            {"matchRate", render_rate(c.exact, c.total())}};
}

inline json summary_json(const MatchReport& rep)
{
    json per = json::object();
    for (const auto& [sym, c] : rep.per_token)
        per[sym] = counts_json(c);
    auto j = counts_json(rep.counts);
    j["direction"] = std::string(to_string(rep.direction));
    j["toleranceSeconds"] = rep.time_tolerance_seconds;
    j["truncationExposure"] = rep.truncation_exposure;
    j["perToken"] = per;
    return j;
}

// --- simulate ----------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string scenario_file;
    std::string preset = "s0";
    std::string direction = "deposit";
    std::optional<std::uint64_t> pairs, seed, pool;
    std::optional<double> noise, collision, missing;
    std::string latency, mix;
};

inline LatencyModel parse_latency(const std::string& text)
{
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');)
        parts.push_back(p);
    auto num = [&](std::size_t i) {
        if (i >= parts.size()) throw UsageError("latency '" + text + "' is missing a parameter");
        return std::stod(parts[i]);
    };
    LatencyModel m;
    if (parts.empty()) throw UsageError("empty latency model");
    if (parts[0] == "uniform" && parts.size() == 3)
        m = {LatencyModel::Kind::Uniform, static_cast<double>(parse_duration(parts[1])), static_cast<double>(parse_duration(parts[2]))};
    else if (parts[0] == "lognormal" && parts.size() == 3) m = {LatencyModel::Kind::LogNormal, num(1), num(2)};
    else if (parts[0] == "pointmass" && parts.size() == 2)
        m = {LatencyModel::Kind::PointMass, static_cast<double>(parse_duration(parts[1])), 0};
    else throw UsageError("latency must be uniform:LO:HI, lognormal:MU:SIGMA or pointmass:V");
    return m;
}

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out, const Providers& pv)
{
    DatasetLayout layout{a.common.out_dir};
    Manifest m("simulate", layout, pv.now);
    auto spec = a.common.load(m);

    TrafficScenario sc;
    if (!a.scenario_file.empty()) {
        m.input(a.scenario_file);
        json j;
        try {
            j = json::parse(read_file(a.scenario_file));
        } catch (const json::parse_error& e) {
            throw UsageError(std::string("scenario file is not JSON: ") + e.what());
        }
        sc = scenario_from_json(j);
    } else if (a.preset == "s0") sc = scenario_s0();
    else if (a.preset == "s2") sc = scenario_s2();
    else if (a.preset == "s3") sc = scenario_s3();
    else throw UsageError("unknown preset '" + a.preset + "'");
    if (a.pairs) sc.n_pairs = *a.pairs;
    if (a.seed) sc.seed = *a.seed;
    if (a.pool) sc.address_pool_size = *a.pool;
    if (a.noise) sc.noise_transfer_rate = *a.noise;
    if (a.collision) sc.value_collision_rate = *a.collision;
    if (a.missing) sc.missing_counterpart_rate = *a.missing;
    if (!a.latency.empty()) sc.latency = parse_latency(a.latency);
    if (!a.mix.empty()) {
        std::vector<double> w;
        std::stringstream ss(a.mix);
        for (std::string p; std::getline(ss, p, ',');)
            w.push_back(std::stod(p));
        if (w.size() != 3) throw UsageError("--asset-mix takes native,fungible,nonfungible weights");
        sc.asset_mix = {w[0], w[1], w[2]};
    }
    sc.validate();
    auto dir = parse_direction(a.direction);

    auto g = generate(sc, dir, spec);
    layout.create();
    const auto& cfg = spec.config();
    const std::string& ev_chain = dir == Direction::Deposit ? cfg.source_chain : cfg.destination_chain;
    const std::string& tr_chain = dir == Direction::Deposit ? cfg.destination_chain : cfg.source_chain;
    auto dname = std::string(to_string(dir));
    auto ev_path = layout.data_file("events", ev_chain, dname, "all", block_range(g.events), "event.v1");
    auto truth_path = layout.data_file("events", ev_chain, dname, "all", block_range(g.events), "truth.v1");
    auto tr_path = layout.data_file("transfers", tr_chain, dname, "all", block_range(g.transfers), "transfer.v1");
    emit(m, ev_path, g.events);
    emit(m, tr_path, g.transfers);
    emit(m, truth_path, g.truth);
    out << "events: " << ev_path.string() << "\ntransfers: " << tr_path.string() << "\ntruth: " << truth_path.string()
        << '\n';
    if (dir == Direction::Withdrawal) {
        auto claims_path = layout.data_file("raw", tr_chain, dname, "all", block_range(g.claims), "raw_tx.v1");
        emit(m, claims_path, g.claims);
        out << "claims: " << claims_path.string() << '\n';
    }
    m.parameters["scenario"] = scenario_to_json(sc);
    m.parameters["direction"] = dname;
    m.seeds["scenario"] = sc.seed;
    m.stats = {{"events", g.events.size()}, {"transfers", g.transfers.size()}, {"truth", g.truth.size()}};
    m.write();
    return exit_ok;
}

// --- match -------------------------------------------------------------------------

struct MatchArgs {
    Common common;
    MatchInputs inputs;
    MatchFlags flags;
};

inline int cmd_match(const MatchArgs& a, std::ostream& out, const Providers& pv)
{
    DatasetLayout layout{a.common.out_dir};
    Manifest m("match", layout, pv.now);
    auto spec = a.common.load(m);
    auto cfg = a.flags.config();
    auto in = load_match_inputs(m, a.inputs, cfg, spec);

    auto rep = match_all(in.events, in.transfers, cfg, spec, a.common.jobs);
    layout.create();
    std::string chain = in.events.empty() ? spec.config().source_chain : in.events.front().chain;
    auto dname = std::string(to_string(cfg.direction));
    auto range = block_range(in.events);
    auto match_path = layout.data_file("matches", chain, dname, "all", range, "match.v1");
    emit(m, match_path, rep.results);
    auto summary = summary_json(rep);
    emit_text(m, layout.root / "reports" / (match_path.stem().stem().string() + ".summary.json"), summary.dump(2) + "\n");

    a.flags.record(m.parameters, cfg);
    m.stats = summary;
    m.stats["eventsSkipped"] = in.skipped;
    m.write();

    out << "results: " << match_path.string() << '\n';
    out << "matchRate: " << rate_cell(rep.counts.exact, rep.counts.total()) << '\n';
    out << "exact: " << rep.counts.exact << " ambiguous: " << rep.counts.ambiguous
        << " unmatched: " << rep.counts.unmatched << " truncationExposure: " << rep.truncation_exposure << '\n';
    return exit_ok;
}

// --- tune --------------------------------------------------------------------------

struct TuneArgs {
    Common common;
    MatchInputs inputs;
    MatchFlags flags;
    std::size_t sample_size = 10000;
    std::uint64_t seed = 1;
    std::string grid;
    bool per_token = false;
};

inline int cmd_tune(const TuneArgs& a, std::ostream& out, const Providers& pv)
{
    DatasetLayout layout{a.common.out_dir.empty() ? fs::path(".") : fs::path(a.common.out_dir)};
    Manifest m("tune", layout, pv.now);
    auto spec = a.common.load(m);
    auto cfg = a.flags.config();
    auto grid = a.grid.empty() ? default_grid(cfg.direction) : parse_grid(a.grid);
    auto in = load_match_inputs(m, a.inputs, cfg, spec);

    auto sample = a.per_token ? sample_events_per_token(in.events, a.sample_size, a.seed)
                              : sample_events(in.events, a.sample_size, a.seed);
    auto curve = sweep(sample, in.transfers, grid, cfg, spec, a.common.jobs);
    curve.seed = a.seed;
    const auto& peak = find_peak(curve);
    auto csv = curve_csv(curve);
    out << csv;
    out << "peak: tolerance_seconds=" << peak.tolerance_seconds << " exact_rate="
        << render_rate(peak.counts.exact, peak.counts.total()) << '\n';

    if (!a.common.out_dir.empty()) {
        layout.create();
        auto dname = std::string(to_string(cfg.direction));
        emit_text(m, layout.root / "reports" / ("tune-" + dname + ".csv"), csv);
        if (a.per_token) emit_text(m, layout.root / "reports" / ("tune-" + dname + "-per-token.csv"), per_token_curve_csv(curve));
        a.flags.record(m.parameters, cfg);
        m.parameters["grid"] = grid;
        m.parameters["sampleSize"] = curve.sample_size;
        m.parameters["perToken"] = a.per_token;
        m.seeds["sample"] = a.seed;
        m.stats = {{"peakToleranceSeconds", peak.tolerance_seconds},
                   {"peakRate", render_rate(peak.counts.exact, peak.counts.total())}};
        m.write();
    }
    return exit_ok;
}

// --- report ------------------------------------------------------------------------

struct ReportArgs {
    Common common;
    std::string deposit_results;
    std::string withdrawal_results;
    std::vector<std::string> events;
    std::vector<std::string> transfers;
    std::string tallies;

    bool time_cost = false;
    std::string statistic = "median";
    bool flows = false;
    bool flows_exact_only = false;
    double spike_factor = 3.0;
    bool composition = false;
    std::string composition_class = "fungible";
    bool match_table = false;
    std::string graph_token;
    std::string long_latency;
    std::optional<std::uint64_t> as_of;
};

inline std::string token_type(const BridgeEvent& e, const BridgeSpec& spec)
{
    if (e.token.asset_class == AssetClass::NonFungible) return "ERC721";
    if (e.token.asset_class == AssetClass::Native || token_equivalent(e.token, {"ETH", std::nullopt, AssetClass::Native}, spec))
        return "Ether";
    return "ERC20";
}

inline std::vector<MatchRateRow> tallies_from_json(const json& j)
{
    std::vector<MatchRateRow> rows;
    try {
        for (const auto& r : j.at("rows")) {
            MatchRateRow row;
            row.token_type = r.at("tokenType").get<std::string>();
            auto side = [&](const char* key, OutcomeCounts& c) {
                if (!r.contains(key)) return;
                auto exact = r.at(key).at("exact").get<std::uint64_t>();
                auto total = r.at(key).at("total").get<std::uint64_t>();
                if (exact > total) throw std::invalid_argument(row.token_type + ": exact exceeds total");
                c.exact = exact;
                c.unmatched = total - exact;
            };
            side("deposits", row.deposits);
            side("withdrawals", row.withdrawals);
            rows.push_back(std::move(row));
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("tallies: ") + e.what());
    }
    return rows;
}

inline int cmd_report(const ReportArgs& a, std::ostream& out, const Providers& pv)
{
    if (!a.time_cost && !a.flows && !a.composition && !a.match_table && a.graph_token.empty() && a.long_latency.empty())
        throw UsageError("choose at least one of --time-cost, --flows, --composition, --match-table, --graph, --long-latency");
    DatasetLayout layout{a.common.out_dir};
    Manifest m("report", layout, pv.now);
    auto spec = a.common.load(m);
    auto stat = parse_statistic(a.statistic);
    std::optional<std::uint64_t> latency_threshold;
    if (!a.long_latency.empty()) latency_threshold = parse_duration(a.long_latency);

    std::vector<MatchResult> dep, wd;
    if (!a.deposit_results.empty()) dep = read_input<MatchResult>(m, a.deposit_results);
    if (!a.withdrawal_results.empty()) wd = read_input<MatchResult>(m, a.withdrawal_results);
    std::vector<BridgeEvent> events;
    for (const auto& p : a.events) {
        auto part = read_input<BridgeEvent>(m, p);
        events.insert(events.end(), part.begin(), part.end());
    }
    std::vector<ChainTransfer> transfers;
    for (const auto& p : a.transfers) {
        auto part = read_input<ChainTransfer>(m, p);
        transfers.insert(transfers.end(), part.begin(), part.end());
    }
    auto as_report = [](std::vector<MatchResult> rs, Direction d) {
        MatchReport r;
        r.direction = d;
        r.results = std::move(rs);
        for (const auto& x : r.results)
            r.counts.add(x.outcome);
        return r;
    };
    auto dep_rep = as_report(dep, Direction::Deposit);
    auto wd_rep = as_report(wd, Direction::Withdrawal);

    layout.create();
    auto reports = layout.root / "reports";
    std::vector<fs::path> written;
    auto put = [&](const std::string& name, const std::string& text) {
        emit_text(m, reports / name, text);
        written.push_back(reports / name);
    };

    if (a.time_cost) {
        put("time-cost-deposit-" + a.statistic + ".csv", daily_series_csv(time_cost_series(dep, stat)));
        put("time-cost-withdrawal-" + a.statistic + ".csv", daily_series_csv(time_cost_series(wd, stat)));
    }
    if (a.flows) {
        FlowOptions fo;
        fo.exact_only = a.flows_exact_only;
        fo.spike_factor = a.spike_factor;
        put("flows.csv", flow_series_csv(flow_series(dep, wd, fo)));
    }
    if (a.composition) {
        auto cls = parse_asset_class(a.composition_class);
        std::vector<BridgeEvent> sel;
        std::copy_if(events.begin(), events.end(), std::back_inserter(sel),
                     [&](const BridgeEvent& e) { return e.token.asset_class == cls; });
        put("composition-" + a.composition_class + ".csv", token_composition_csv(token_composition(sel)));
    }
    if (a.match_table) {
        std::vector<MatchRateRow> rows;
        if (!a.tallies.empty()) {
            m.input(a.tallies);
            json j;
            try {
                j = json::parse(read_file(a.tallies));
            } catch (const json::parse_error& e) {
                throw UsageError(std::string("tallies file is not JSON: ") + e.what());
            }
            rows = tallies_from_json(j);
        } else {
            std::map<std::string, const BridgeEvent*> by_id;
            for (const auto& e : events)
                by_id.emplace(e.event_id, &e);
            std::map<std::string, MatchRateRow> acc;
            for (auto [rs, is_dep] : {std::pair{&dep, true}, std::pair{&wd, false}})
                for (const auto& r : *rs) {
                    auto it = by_id.find(r.event_id);
                    if (it == by_id.end()) throw UsageError("result " + r.event_id + " has no event in --events");
                    auto type = token_type(*it->second, spec);
                    auto& row = acc[type];
                    row.token_type = type;
                    (is_dep ? row.deposits : row.withdrawals).add(r.outcome);
                }
            for (auto type : {"Ether", "ERC20", "ERC721"})
                if (acc.contains(type)) rows.push_back(acc.at(type));
        }
        auto table = match_rate_table(rows);
        put("match-table.txt", table);
        put("match-table.csv", match_rate_csv(rows));
        out << table;
    }
    if (!a.graph_token.empty()) {
        std::vector<MatchReport> reps = {dep_rep, wd_rep};
        auto graphs = collection_graph(transfers, reps, a.graph_token);
        auto s = slug(a.graph_token);
        for (const auto& [chain, g] : graphs)
            put("graph-" + s + "-" + slug(chain) + ".csv", edges_csv(g.edges));
        put("graph-" + s + "-metrics.csv", graph_metrics_csv(graphs));
    }
    if (latency_threshold) {
        std::optional<Timestamp> as_of;
        if (a.as_of) as_of = Timestamp{*a.as_of};
        put("long-latency-deposit.csv", long_latency_csv(long_latency_report(dep_rep, *latency_threshold, as_of)));
        put("long-latency-withdrawal.csv", long_latency_csv(long_latency_report(wd_rep, *latency_threshold, as_of)));
    }

    m.parameters = {{"timeCost", a.time_cost}, {"statistic", a.statistic}, {"flows", a.flows},
                    {"flowsExactOnly", a.flows_exact_only}, {"spikeFactor", a.spike_factor},
                    {"composition", a.composition}, {"compositionClass", a.composition_class},
                    {"matchTable", a.match_table}, {"graph", a.graph_token},
                    {"longLatencySeconds", latency_threshold ? json(*latency_threshold) : json(nullptr)},
                    {"asOf", a.as_of ? json(*a.as_of) : json(nullptr)}};
    m.write();
    for (const auto& p : written)
        out << "wrote " << p.string() << '\n';
    return exit_ok;
}

// --- eval --------------------------------------------------------------------------

struct EvalArgs {
    Common common;
    std::string results;
    std::string truth;
    std::optional<double> min_precision;
    std::optional<double> min_recall;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err, const Providers& pv)
{
    DatasetLayout layout{a.common.out_dir.empty() ? fs::path(".") : fs::path(a.common.out_dir)};
    Manifest m("eval", layout, pv.now);
    auto results = read_input<MatchResult>(m, a.results);
    auto truth = read_input<TruthRecord>(m, a.truth);
    auto s = score(results, truth);
    auto fmt = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        std::ostringstream os;
        os << std::fixed << std::setprecision(6) << *v;
        return os.str();
    };
    out << "events: " << s.events << "\nexact: " << s.exact << "\ncorrect: " << s.correct_exact
        << "\nwithheld: " << s.withheld << "\nprecision: " << fmt(s.precision) << "\nrecall: " << fmt(s.recall)
        << "\nrecall_fetchable: " << fmt(s.recall_fetchable) << "\nambiguous_rate: " << fmt(s.ambiguous_rate) << '\n';

    int rc = exit_ok;
    auto gate = [&](const char* name, const std::optional<double>& floor, const std::optional<double>& v) {
        if (!floor) return;
        if (!v || *v < *floor) {
            err << name << " " << fmt(v) << " is below the floor " << fmt(floor) << '\n';
            rc = exit_gate;
        }
    };
    gate("precision", a.min_precision, s.precision);
    gate("recall", a.min_recall, s.recall);

    if (!a.common.out_dir.empty()) {
        auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
        m.parameters = {{"minPrecision", opt(a.min_precision)}, {"minRecall", opt(a.min_recall)}};
        m.stats = {{"events", s.events}, {"exact", s.exact}, {"correctExact", s.correct_exact},
                   {"withheld", s.withheld}, {"precision", opt(s.precision)}, {"recall", opt(s.recall)},
                   {"recallFetchable", opt(s.recall_fetchable)}, {"ambiguousRate", opt(s.ambiguous_rate)},
                   {"gate", rc == exit_ok ? "pass" : "fail"}};
        layout.create();
        m.write();
    }
    return rc;
}

// --- ingest ------------------------------------------------------------------------

struct IngestArgs {
    Common common;
    std::string source;
    std::string tx_fixture;
    std::string transfer_source;
    std::optional<std::uint64_t> from_block, to_block;
    std::string addresses_file;
    unsigned rate_limit = 5;
    std::size_t page_limit = 10000;
    unsigned max_retries = 3;
    unsigned backoff_ms = 250;
    std::uint64_t chunk = 2000;
    unsigned workers = 4;
};

inline std::set<AccountAddress> read_address_list(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) throw UsageError("cannot open " + p.string());
    std::set<AccountAddress> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        auto e = line.find_last_not_of(" \t\r");
        try {
            out.insert(AccountAddress::parse(line.substr(b, e - b + 1)));
        } catch (const std::exception& ex) {
            throw UsageError(p.string() + ": line " + std::to_string(n) + ": " + ex.what());
        }
    }
    return out;
}

struct ClassFetch {
    std::vector<ChainTransfer> transfers;
    std::set<AccountAddress> truncated;
    std::map<AccountAddress, std::string> failed;
    std::uint64_t resumed = 0;
};

/// Resumable per-address fetch for one query class: each finished address is
/// persisted as a part before the checkpoint names it completed.
inline ClassFetch fetch_class(TransferProvider& provider, RequestGate& gate, const IngestArgs& a,
                              const std::set<AccountAddress>& addresses, AssetClass cls, const IngestJournal& journal,
                              const BridgeSpec& spec)
{
    IngestCheckpoint cp;
    if (auto prev = journal.load()) cp = *prev;
    cp.spec_version = spec.version();
    cp.addresses_failed.clear();

    ClassFetch out;
    std::set<AccountAddress> todo;
    for (const auto& addr : addresses)
        if (!cp.addresses_completed.contains(addr)) todo.insert(addr);
    out.resumed = addresses.size() - todo.size();
    auto rows = journal.persisted_transfers(cp.parts_written);

    auto res = fetch_all_transfers(provider, gate, a.page_limit, todo, cls, a.workers, 0,
                                   std::numeric_limits<std::uint64_t>::max(),
                                   [&](const AccountAddress& addr, const AddressTransfers& t) {
                                       write_records(journal.transfer_part(cp.parts_written), t.transfers);
                                       ++cp.parts_written;
                                       cp.addresses_completed.insert(addr);
                                       if (t.truncated) cp.truncated_addresses.insert(addr);
                                       journal.save(cp);
                                   });
    for (const auto& [addr, _] : res.failed)
        cp.addresses_failed.insert(addr);
    journal.save(cp);

    rows.insert(rows.end(), res.transfers.begin(), res.transfers.end());
    for (auto& t : rows)
        if (cp.addresses_completed.contains(t.to_address)) t.truncated = cp.truncated_addresses.contains(t.to_address);
    std::sort(rows.begin(), rows.end(), transfer_time_less);
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    out.transfers = std::move(rows);
    for (const auto& addr : addresses)
        if (cp.truncated_addresses.contains(addr)) out.truncated.insert(addr);
    out.failed = std::move(res.failed);
    return out;
}

inline int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err, const Providers& pv)
{
    bool by_range = a.from_block || a.to_block;
    if (by_range && !(a.from_block && a.to_block)) throw UsageError("--from-block and --to-block go together");
    if (!by_range && a.addresses_file.empty()) throw UsageError("give --from-block/--to-block or --addresses-file");
    if (by_range && *a.from_block > *a.to_block)
        throw UsageError("block range inverted: " + std::to_string(*a.from_block) + " > " + std::to_string(*a.to_block));
    if (by_range && a.source.empty()) throw UsageError("--source is required for a block range");
    if (!by_range && a.transfer_source.empty()) throw UsageError("--transfer-source is required with --addresses-file");
    if (a.chunk == 0) throw UsageError("--chunk must be > 0");

    DatasetLayout layout{a.common.out_dir};
    Manifest m("ingest", layout, pv.now);
    auto spec = a.common.load(m);
    layout.create();
    Clock& clock = pv.clock ? *pv.clock : SteadyClock::instance();
    const auto& cfg = spec.config();
    std::string range = by_range ? std::to_string(*a.from_block) + "-" + std::to_string(*a.to_block) : "addresses";

    auto make_source = [&](const std::string& text) {
        auto s = IngestSource::parse(text);
        s.rate_limit = a.rate_limit;
        s.page_limit = a.page_limit;
        s.max_retries = a.max_retries;
        s.backoff_base_millis = a.backoff_ms;
        s.validate();
        if (s.kind == SourceKind::FixtureFile && fs::exists(s.location)) m.input(s.location);
        return s;
    };

    m.parameters = {{"source", a.source}, {"transferSource", a.transfer_source},
                    {"fromBlock", a.from_block ? json(*a.from_block) : json(nullptr)},
                    {"toBlock", a.to_block ? json(*a.to_block) : json(nullptr)},
                    {"rateLimit", a.rate_limit}, {"pageLimit", a.page_limit}, {"maxRetries", a.max_retries},
                    {"backoffMillis", a.backoff_ms}, {"chunk", a.chunk}, {"workers", a.workers}};
    IngestStats total;
    auto add_stats = [&](const IngestStats& s) {
        total.requests += s.requests;
        total.retries += s.retries;
        total.range_splits += s.range_splits;
    };
    auto finish = [&](int rc, const std::string& status) {
        m.stats["requests"] = total.requests;
        m.stats["retries"] = total.retries;
        m.stats["rangeSplits"] = total.range_splits;
        m.stats["status"] = status;
        m.write();
        return rc;
    };

    std::vector<BridgeEvent> deposits;
    std::vector<BridgeEvent> exits;
    if (by_range) {
        auto src = make_source(a.source);
        std::optional<fs::path> txf;
        if (!a.tx_fixture.empty()) {
            m.input(a.tx_fixture);
            txf = a.tx_fixture;
        }
        auto provider = pv.logs(src, txf);
        RateLimiter limiter(src.rate_limit, clock);
        RequestGate gate(RetryPolicy::from(src), limiter, clock);
        IngestJournal journal(layout.root / "raw" / "journal" / "logs");
        ScanOptions opts;
        opts.initial_chunk = a.chunk;
        opts.journal = &journal;
        ScanResult scan;
        std::map<TxId, RawTransaction> txs;
        try {
            scan = scan_bridge_logs(*provider, gate, spec, *a.from_block, *a.to_block, opts);
            txs = fetch_enclosing_transactions(*provider, gate, scan.logs, spec);
        } catch (const IngestError& e) {
            add_stats(gate.stats());
            err << "ingest: " << e.what() << "\ncheckpoint kept in " << journal.dir().string() << '\n';
            if (e.range) m.stats["failedRange"] = {e.range->first, e.range->second};
            return finish(exit_source, "source-failure");
        }
        add_stats(gate.stats());
        m.stats["logs"] = scan.logs.size();
        m.stats["chunks"] = scan.chunks;
        m.stats["resumed"] = scan.resumed;

        std::vector<RawTransaction> tx_list;
        for (auto& [_, t] : txs)
            tx_list.push_back(t);
        emit(m, layout.data_file("raw", cfg.source_chain, "all", "all", range, "raw_log.v1"), scan.logs);
        emit(m, layout.data_file("raw", cfg.source_chain, "all", "all", range, "raw_tx.v1"), tx_list);

        auto decoded = decode_logs(scan.logs, spec, txs);
        for (const auto& e : decoded.errors)
            err << "decode: " << e.what() << '\n';
        m.stats["decodeErrors"] = decoded.errors.size();
        for (auto& e : decoded.events)
            (e.direction == Direction::Deposit ? deposits : exits).push_back(std::move(e));
        emit(m, layout.data_file("events", cfg.source_chain, "deposit", "all", range, "event.v1"), deposits);
        emit(m, layout.data_file("transfers", cfg.source_chain, "withdrawal", "all", range, "transfer.v1"),
             exit_records_from_events(exits));
        m.stats["deposits"] = deposits.size();
        m.stats["exits"] = exits.size();
    }

    int rc = exit_ok;
    if (!a.transfer_source.empty()) {
        auto src = make_source(a.transfer_source);
        auto provider = pv.transfers(src, cfg.destination_chain);
        RateLimiter limiter(src.rate_limit, clock);
        RequestGate gate(RetryPolicy::from(src), limiter, clock);

        std::set<AccountAddress> fungible, nft;
        if (!a.addresses_file.empty()) {
            m.input(a.addresses_file);
            fungible = nft = read_address_list(a.addresses_file);
        } else {
            for (const auto& e : deposits)
                (e.token.asset_class == AssetClass::NonFungible ? nft : fungible).insert(e.receiver);
        }
        std::vector<ChainTransfer> all;
        std::set<AccountAddress> truncated;
        std::map<AccountAddress, std::string> failed;
        std::uint64_t resumed = 0;
        for (auto [cls, set] : {std::pair{AssetClass::Fungible, &fungible}, std::pair{AssetClass::NonFungible, &nft}}) {
            if (set->empty()) continue;
            IngestJournal journal(layout.root / "raw" / "journal" / std::string(to_string(cls)));
            auto r = fetch_class(*provider, gate, a, *set, cls, journal, spec);
            all.insert(all.end(), r.transfers.begin(), r.transfers.end());
            truncated.insert(r.truncated.begin(), r.truncated.end());
            failed.insert(r.failed.begin(), r.failed.end());
            resumed += r.resumed;
        }
        add_stats(gate.stats());
        std::sort(all.begin(), all.end(), transfer_time_less);
        all.erase(std::unique(all.begin(), all.end()), all.end());
        emit(m, layout.data_file("transfers", cfg.destination_chain, "deposit", "all", range, "transfer.v1"), all);

        auto depositors = extract_depositor_set(deposits);
        if (!a.addresses_file.empty()) depositors = fungible;
        auto burns = filter_withdrawals_by_depositors(burns_from_transfers(all, spec), depositors);
        emit(m, layout.data_file("events", cfg.destination_chain, "withdrawal", "all", range, "event.v1"), burns);

        json failed_j = json::object();
        for (const auto& [addr, why] : failed) {
            failed_j[addr.to_string()] = why;
            err << "ingest: " << why << '\n';
        }
        json trunc_j = json::array();
        for (const auto& t : truncated)
            trunc_j.push_back(t.to_string());
        std::size_t wanted = std::set<AccountAddress>(fungible.begin(), fungible.end()).size();
        for (const auto& x : nft)
            if (!fungible.contains(x)) ++wanted;
        m.stats["addresses"] = wanted;
        m.stats["addressesResumed"] = resumed;
        m.stats["addressesFailed"] = failed_j;
        m.stats["truncatedAddresses"] = trunc_j;
        m.stats["transfers"] = all.size();
        m.stats["burns"] = burns.size();
        std::set<AccountAddress> failed_addrs;
        for (const auto& [addr, _] : failed)
            failed_addrs.insert(addr);
        if (!failed.empty()) rc = failed_addrs.size() >= wanted ? exit_source : exit_partial;
    }
    out << "ingested into " << layout.root.string() << '\n';
    return finish(rc, rc == exit_ok ? "complete" : rc == exit_partial ? "partial" : "source-failure");
}

} // namespace detail

/// Runs one command line (argv[0] is the program name) and returns its exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, Providers pv = default_providers())
{
    if (!pv.now) pv.now = iso_now;
    if (!pv.logs || !pv.transfers) {
        auto d = default_providers();
        if (!pv.logs) pv.logs = d.logs;
        if (!pv.transfers) pv.transfers = d.transfers;
    }
    using namespace detail;
    CLI::App app{"Cross-chain bridge transaction tracer", "bridgetrace"};
    app.require_subcommand(1);
    app.set_version_flag("--version", BRIDGETRACE_VERSION);

    IngestArgs ing;
    auto* s_ing = app.add_subcommand("ingest", "Scan bridge logs and fetch receiver transfer histories");
    add_common(s_ing, ing.common, true);
    s_ing->add_option("--source", ing.source, "Log source: rpc:<url> or fixture:<raw_log.v1 file>");
    s_ing->add_option("--tx-fixture", ing.tx_fixture, "raw_tx.v1 file backing a fixture log source");
    s_ing->add_option("--transfer-source", ing.transfer_source,
                      "Transfer source: explorer:<url>[#KEYNAME] or fixture:<transfer.v1 file>");
    s_ing->add_option("--from-block", ing.from_block, "First source-chain block");
    s_ing->add_option("--to-block", ing.to_block, "Last source-chain block");
    s_ing->add_option("--addresses-file", ing.addresses_file, "Addresses to fetch, one per line");
    s_ing->add_option("--rate-limit", ing.rate_limit, "Requests per second")->check(CLI::PositiveNumber);
    s_ing->add_option("--page-limit", ing.page_limit, "Rows per address query")->check(CLI::PositiveNumber);
    s_ing->add_option("--max-retries", ing.max_retries, "Retries for transient provider errors");
    s_ing->add_option("--backoff-ms", ing.backoff_ms, "Base backoff in milliseconds");
    s_ing->add_option("--chunk", ing.chunk, "Initial block range per log query");
    s_ing->add_option("--workers", ing.workers, "Concurrent address fetches")->check(CLI::PositiveNumber);

    MatchArgs mat;
    auto* s_mat = app.add_subcommand("match", "Pair bridge events with destination-chain transfers");
    add_common(s_mat, mat.common, true);
    add_match_inputs(s_mat, mat.inputs);
    add_match_flags(s_mat, mat.flags);

    TuneArgs tun;
    auto* s_tun = app.add_subcommand("tune", "Sweep the time tolerance and report the peak");
    add_common(s_tun, tun.common, false);
    add_match_inputs(s_tun, tun.inputs);
    add_match_flags(s_tun, tun.flags);
    s_tun->add_option("--sample-size", tun.sample_size, "Events sampled without replacement");
    s_tun->add_option("--seed", tun.seed, "Sampling seed");
    s_tun->add_option("--grid", tun.grid, "LO:HI:N geometric grid or comma-separated tolerances");
    s_tun->add_flag("--per-token", tun.per_token, "Sample n events from each token");

    ReportArgs rep;
    auto* s_rep = app.add_subcommand("report", "Time cost, flows, composition, match tables, graphs");
    add_common(s_rep, rep.common, true);
    s_rep->add_option("--results,--deposit-results", rep.deposit_results, "match.v1 file for deposits");
    s_rep->add_option("--withdrawal-results", rep.withdrawal_results, "match.v1 file for withdrawals");
    s_rep->add_option("--events", rep.events, "event.v1 file(s)");
    s_rep->add_option("--transfers", rep.transfers, "transfer.v1 file(s), any chain");
    s_rep->add_option("--tallies", rep.tallies, "JSON tallies for --match-table instead of results");
    s_rep->add_flag("--time-cost", rep.time_cost, "Daily time-cost statistic");
    s_rep->add_option("--statistic", rep.statistic, "median, mean or p90")->check(CLI::IsMember({"median", "mean", "p90"}));
    s_rep->add_flag("--flows", rep.flows, "Daily deposit/withdrawal counts and ratio");
    s_rep->add_flag("--flows-exact-only", rep.flows_exact_only, "Count only exact matches in --flows");
    s_rep->add_option("--spike-factor", rep.spike_factor, "Ratio spike threshold over the trailing 7-day mean");
    s_rep->add_flag("--composition", rep.composition, "Token composition of --events");
    s_rep->add_option("--composition-class", rep.composition_class, "Asset class for --composition")
        ->check(CLI::IsMember({"native", "fungible", "nonfungible"}));
    s_rep->add_flag("--match-table", rep.match_table, "Match-rate table by token type");
    s_rep->add_option("--graph", rep.graph_token, "Transfer graph for a token symbol");
    s_rep->add_option("--long-latency", rep.long_latency, "List pairs slower than this duration");
    s_rep->add_option("--as-of", rep.as_of, "Unix time for aging unmatched burns");

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "Generate synthetic traffic with ground truth");
    add_common(s_sim, sim.common, true);
    s_sim->add_option("--scenario", sim.scenario_file, "Scenario JSON file");
    s_sim->add_option("--preset", sim.preset, "s0, s2 or s3")->check(CLI::IsMember({"s0", "s2", "s3"}));
    s_sim->add_option("--direction", sim.direction, "deposit or withdrawal")->check(CLI::IsMember({"deposit", "withdrawal"}));
    s_sim->add_option("--pairs", sim.pairs, "Number of true pairs");
    s_sim->add_option("--seed", sim.seed, "Generator seed");
    s_sim->add_option("--address-pool", sim.pool, "Distinct receivers (0: one per pair)");
    s_sim->add_option("--noise-rate", sim.noise, "Unrelated transfers per pair");
    s_sim->add_option("--collision-rate", sim.collision, "Same-value duplicates per pair");
    s_sim->add_option("--missing-rate", sim.missing, "Fraction of withheld counterparts");
    s_sim->add_option("--latency", sim.latency, "uniform:LO:HI, lognormal:MU:SIGMA or pointmass:V");
    s_sim->add_option("--asset-mix", sim.mix, "native,fungible,nonfungible weights");

    EvalArgs ev;
    auto* s_ev = app.add_subcommand("eval", "Score match results against ground truth");
    add_common(s_ev, ev.common, false);
    s_ev->add_option("--results", ev.results, "match.v1 file")->required();
    s_ev->add_option("--truth", ev.truth, "truth.v1 file")->required();
    s_ev->add_option("--min-precision", ev.min_precision, "Fail with exit 4 below this precision");
    s_ev->add_option("--min-recall", ev.min_recall, "Fail with exit 4 below this recall");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
    }

    try {
        if (s_ing->parsed()) return cmd_ingest(ing, out, err, pv);
        if (s_mat->parsed()) return cmd_match(mat, out, pv);
        if (s_tun->parsed()) return cmd_tune(tun, out, pv);
        if (s_rep->parsed()) return cmd_report(rep, out, pv);
        if (s_sim->parsed()) return cmd_simulate(sim, out, pv);
        if (s_ev->parsed()) return cmd_eval(ev, out, err, pv);
    } catch (const IngestError& e) {
        err << "error: " << e.what() << '\n';
        return exit_source;
    } catch (const ProviderError& e) {
        err << "error: " << e.what() << '\n';
        return exit_source;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               Providers pv = default_providers())
{
    std::vector<const char*> argv = {"bridgetrace"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err, std::move(pv));
}

} // namespace bridgetrace::cli
