#pragma once

// Acquisition of the two datasets: bridge logs from the source chain over a
// block range, and per-address transfer histories from a destination-chain
// explorer. Providers are interfaces; HTTP-backed ones live in ingest_http.hpp.

#include <bridgetrace/store.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

namespace bridgetrace {

// --- sources -------------------------------------------------------------------

enum class SourceKind { RpcNode, ExplorerApi, FixtureFile };

struct IngestSource {
    SourceKind kind = SourceKind::FixtureFile;
    /// URL for RpcNode/ExplorerApi, path for FixtureFile.
    std::string location;
    /// Suffix of the environment variable holding the API key: BRIDGETRACE_API_KEY_<NAME>.
    std::string api_key_name;
    unsigned rate_limit = 5;
    std::size_t page_limit = 10000;
    unsigned max_retries = 3;
    unsigned backoff_base_millis = 250;

    void validate() const
    {
        if (rate_limit == 0) throw std::invalid_argument("rate limit must be > 0 requests/second");
        if (page_limit == 0) throw std::invalid_argument("page limit must be > 0");
        if (location.empty()) throw std::invalid_argument("source location is empty");
    }

    [[nodiscard]] std::string api_key_env_var() const { return "BRIDGETRACE_API_KEY_" + api_key_name; }

    [[nodiscard]] std::optional<std::string> api_key() const
    {
        if (api_key_name.empty()) return std::nullopt;
        const char* v = std::getenv(api_key_env_var().c_str());
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    }

    /// "rpc:<url>", "explorer:<url>[#KEYNAME]" or "fixture:<path>"; a bare path is a fixture.
    static IngestSource parse(std::string_view text)
    {
        IngestSource s;
        auto take = [&](std::string_view prefix) {
            if (!text.starts_with(prefix)) return false;
            s.location = std::string(text.substr(prefix.size()));
            return true;
        };
        if (take("rpc:")) {
            s.kind = SourceKind::RpcNode;
        } else if (take("explorer:")) {
            s.kind = SourceKind::ExplorerApi;
            if (auto hash = s.location.rfind('#'); hash != std::string::npos) {
                s.api_key_name = s.location.substr(hash + 1);
                s.location.resize(hash);
            }
        } else {
            take("fixture:") || take("");
            s.kind = SourceKind::FixtureFile;
        }
        if (s.location.empty()) throw std::invalid_argument("source '" + std::string(text) + "' has no location");
        return s;
    }
};

// --- errors ----------------------------------------------------------------------

/// Raised by providers. Transient errors are retried; the rest fail at once.
class ProviderError : public std::runtime_error {
public:
    explicit ProviderError(const std::string& what, bool transient = true)
        : std::runtime_error(what), transient(transient)
    {
    }
    bool transient;
};

/// The provider refused a block range as too large; the scanner splits it.
class RangeTooLarge : public ProviderError {
public:
    explicit RangeTooLarge(const std::string& what) : ProviderError(what, false) {}
};

class IngestError : public std::runtime_error {
public:
    IngestError(const std::string& what, std::optional<std::pair<std::uint64_t, std::uint64_t>> range,
                std::optional<AccountAddress> address = std::nullopt)
        : std::runtime_error(what), range(range), address(address)
    {
    }
    std::optional<std::pair<std::uint64_t, std::uint64_t>> range;
    std::optional<AccountAddress> address;
};

// --- time and pacing -------------------------------------------------------------

class Clock {
public:
    using time_point = std::chrono::steady_clock::time_point;
    using duration = std::chrono::steady_clock::duration;
    virtual ~Clock() = default;
    virtual time_point now() = 0;
    virtual void sleep_for(duration d) = 0;
};

class SteadyClock final : public Clock {
public:
    time_point now() override { return std::chrono::steady_clock::now(); }
    void sleep_for(duration d) override { std::this_thread::sleep_for(d); }

    static SteadyClock& instance()
    {
        static SteadyClock c;
        return c;
    }
};

/// Manual clock: sleeping advances time instantly.
class FakeClock final : public Clock {
public:
    time_point now() override
    {
        std::lock_guard lock(mu_);
        return now_;
    }
    void sleep_for(duration d) override
    {
        std::lock_guard lock(mu_);
        if (d > duration::zero()) now_ += d;
        slept_ += d;
    }
    void advance(duration d) { sleep_for(d); }
    duration total_slept()
    {
        std::lock_guard lock(mu_);
        return slept_;
    }

private:
    std::mutex mu_;
    time_point now_{};
    duration slept_{};
};

/// At most `rate` acquisitions in any trailing one-second window. Shared by all workers.
class RateLimiter {
public:
    RateLimiter(unsigned rate, Clock& clock) : rate_(rate), clock_(clock)
    {
        if (rate == 0) throw std::invalid_argument("rate limit must be > 0");
    }

    void acquire()
    {
        std::lock_guard lock(mu_);
        constexpr auto window = std::chrono::seconds(1);
        for (;;) {
            auto now = clock_.now();
            while (!recent_.empty() && recent_.front() + window <= now)
                recent_.pop_front();
            if (recent_.size() < rate_) {
                recent_.push_back(now);
                log_.push_back(now);
                return;
            }
            clock_.sleep_for(recent_.front() + window - now);
        }
    }

    /// Every grant so far, in order.
    [[nodiscard]] std::vector<Clock::time_point> history() const
    {
        std::lock_guard lock(mu_);
        return log_;
    }

private:
    unsigned rate_;
    Clock& clock_;
    mutable std::mutex mu_;
    std::deque<Clock::time_point> recent_;
    std::vector<Clock::time_point> log_;
};

struct IngestStats {
    std::uint64_t requests = 0;
    std::uint64_t retries = 0;
    std::uint64_t range_splits = 0;
};

struct RetryPolicy {
    unsigned max_retries = 3;
    unsigned backoff_base_millis = 250;

    static RetryPolicy from(const IngestSource& s) { return {s.max_retries, s.backoff_base_millis}; }
};

/// Pacing plus retry with exponential backoff (base * 2^attempt). RangeTooLarge
/// and non-transient errors propagate immediately.
class RequestGate {
public:
    RequestGate(RetryPolicy policy, RateLimiter& limiter, Clock& clock) : policy_(policy), limiter_(limiter), clock_(clock)
    {
    }

    template <typename F>
    auto run(F&& request) -> decltype(request())
    {
        for (unsigned attempt = 0;; ++attempt) {
            limiter_.acquire();
            bump(&IngestStats::requests);
            try {
                return request();
            } catch (const RangeTooLarge&) {
                throw;
            } catch (const ProviderError& e) {
                if (!e.transient || attempt >= policy_.max_retries) throw;
            }
            bump(&IngestStats::retries);
            clock_.sleep_for(std::chrono::milliseconds(std::uint64_t{policy_.backoff_base_millis} << std::min(attempt, 20u)));
        }
    }

    [[nodiscard]] IngestStats stats() const
    {
        std::lock_guard lock(mu_);
        return stats_;
    }

    void count_split() { bump(&IngestStats::range_splits); }

private:
    void bump(std::uint64_t IngestStats::*field)
    {
        std::lock_guard lock(mu_);
        ++(stats_.*field);
    }

    RetryPolicy policy_;
    RateLimiter& limiter_;
    Clock& clock_;
    mutable std::mutex mu_;
    IngestStats stats_;
};

// --- providers ---------------------------------------------------------------------

/// Emitter addresses are OR-ed; topic0 values are OR-ed and matched from any emitter.
struct LogFilter {
    std::vector<AccountAddress> addresses;
    std::vector<Word> any_emitter_topics;
};

class LogProvider {
public:
    virtual ~LogProvider() = default;
    /// Logs in [from, to] matching the filter, any order.
    virtual std::vector<RawLog> get_logs(std::uint64_t from, std::uint64_t to, const LogFilter& filter) = 0;
    virtual std::optional<RawTransaction> get_transaction(const TxId& tx) = 0;
};

struct TransferQuery {
    AccountAddress address;
    AssetClass asset_class = AssetClass::Fungible;
    std::uint64_t from_block = 0;
    std::uint64_t to_block = std::numeric_limits<std::uint64_t>::max();
};

struct TransferPage {
    /// Ascending by time from the window start, at most `limit` rows.
    std::vector<ChainTransfer> rows;
    /// The window held more rows than were returned.
    bool more = false;
};

class TransferProvider {
public:
    virtual ~TransferProvider() = default;
    virtual TransferPage get_transfers(const TransferQuery& q, std::size_t limit) = 0;
};

/// In-memory logs and transactions, optionally refusing ranges wider than `max_range` blocks.
class FixtureLogProvider final : public LogProvider {
public:
    FixtureLogProvider(std::vector<RawLog> logs, std::vector<RawTransaction> txs = {},
                       std::optional<std::uint64_t> max_range = std::nullopt)
        : logs_(std::move(logs)), max_range_(max_range)
    {
        for (auto& t : txs)
            txs_.emplace(t.tx_id, std::move(t));
    }

    static FixtureLogProvider from_files(const fs::path& logs, const std::optional<fs::path>& txs = std::nullopt)
    {
        return FixtureLogProvider(read_records<RawLog>(logs),
                                  txs ? read_records<RawTransaction>(*txs) : std::vector<RawTransaction>{});
    }

    std::vector<RawLog> get_logs(std::uint64_t from, std::uint64_t to, const LogFilter& filter) override
    {
        if (max_range_ && to - from + 1 > *max_range_)
            throw RangeTooLarge("range " + std::to_string(from) + "-" + std::to_string(to) + " exceeds " +
                                std::to_string(*max_range_) + " blocks");
        std::vector<RawLog> out;
        for (const auto& l : logs_) {
            if (l.block_number < from || l.block_number > to) continue;
            bool by_addr = std::find(filter.addresses.begin(), filter.addresses.end(), l.address) != filter.addresses.end();
            bool by_topic = !l.topics.empty() && std::find(filter.any_emitter_topics.begin(), filter.any_emitter_topics.end(),
                                                           l.topics.front()) != filter.any_emitter_topics.end();
            if (by_addr || by_topic) out.push_back(l);
        }
        return out;
    }

    std::optional<RawTransaction> get_transaction(const TxId& tx) override
    {
        auto it = txs_.find(tx);
        if (it == txs_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<RawLog> logs_;
    std::map<TxId, RawTransaction> txs_;
    std::optional<std::uint64_t> max_range_;
};

/// In-memory per-address transfer histories; a row belongs to both its sender
/// and its recipient, as on an explorer.
class FixtureTransferProvider final : public TransferProvider {
public:
    explicit FixtureTransferProvider(std::vector<ChainTransfer> rows)
    {
        for (auto& r : rows) {
            if (r.from_address != r.to_address) by_address_[r.from_address].push_back(r);
            by_address_[r.to_address].push_back(std::move(r));
        }
        for (auto& [_, list] : by_address_)
            std::sort(list.begin(), list.end(), transfer_time_less);
    }

    static FixtureTransferProvider from_file(const fs::path& path)
    {
        return FixtureTransferProvider(read_records<ChainTransfer>(path));
    }

    TransferPage get_transfers(const TransferQuery& q, std::size_t limit) override
    {
        TransferPage page;
        auto it = by_address_.find(q.address);
        if (it == by_address_.end()) return page;
        for (const auto& r : it->second) {
            if (r.block_number < q.from_block || r.block_number > q.to_block) continue;
            if (value_kind(r.token.asset_class) != value_kind(q.asset_class)) continue;
            if (page.rows.size() == limit) {
                page.more = true;
                break;
            }
            page.rows.push_back(r);
        }
        return page;
    }

private:
    std::map<AccountAddress, std::vector<ChainTransfer>> by_address_;
};

// --- checkpointing -------------------------------------------------------------------

struct IngestCheckpoint {
    std::string spec_version;
    std::uint64_t from_block = 0;
    std::uint64_t to_block = 0;
    /// Highest block whose logs are persisted; nullopt before the first chunk.
    std::optional<std::uint64_t> last_block_scanned;
    std::set<AccountAddress> addresses_completed;
    std::set<AccountAddress> truncated_addresses;
    std::set<AccountAddress> addresses_failed;
    std::uint64_t parts_written = 0;

    friend bool operator==(const IngestCheckpoint&, const IngestCheckpoint&) = default;
};

inline json checkpoint_to_json(const IngestCheckpoint& c)
{
    auto addrs = [](const std::set<AccountAddress>& s) {
        json a = json::array();
        for (const auto& x : s)
            a.push_back(x.to_string());
        return a;
    };
    return {{"specVersion", c.spec_version},
            {"fromBlock", c.from_block},
            {"toBlock", c.to_block},
            {"lastBlockScanned", c.last_block_scanned ? json(*c.last_block_scanned) : json(nullptr)},
            {"addressesCompleted", addrs(c.addresses_completed)},
            {"truncatedAddresses", addrs(c.truncated_addresses)},
            {"addressesFailed", addrs(c.addresses_failed)},
            {"partsWritten", c.parts_written}};
}

inline IngestCheckpoint checkpoint_from_json(const json& j)
{
    IngestCheckpoint c;
    try {
        c.spec_version = j.at("specVersion").get<std::string>();
        c.from_block = j.at("fromBlock").get<std::uint64_t>();
        c.to_block = j.at("toBlock").get<std::uint64_t>();
        if (!j.at("lastBlockScanned").is_null()) c.last_block_scanned = j.at("lastBlockScanned").get<std::uint64_t>();
        for (const auto& a : j.at("addressesCompleted"))
            c.addresses_completed.insert(AccountAddress::parse(a.get<std::string>()));
        for (const auto& a : j.at("truncatedAddresses"))
            c.truncated_addresses.insert(AccountAddress::parse(a.get<std::string>()));
        for (const auto& a : j.value("addressesFailed", json::array()))
            c.addresses_failed.insert(AccountAddress::parse(a.get<std::string>()));
        c.parts_written = j.value("partsWritten", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    } catch (const ParseError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return c;
}

/// Work directory for a resumable ingestion: a checkpoint document plus one
/// part file per persisted chunk. A part is written before the checkpoint that
/// references it, so a crash between the two only repeats work.
class IngestJournal {
public:
    explicit IngestJournal(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    [[nodiscard]] fs::path checkpoint_path() const { return dir_ / "checkpoint.json"; }
    [[nodiscard]] const fs::path& dir() const noexcept { return dir_; }

    [[nodiscard]] std::optional<IngestCheckpoint> load() const
    {
        if (!fs::exists(checkpoint_path())) return std::nullopt;
        try {
            return checkpoint_from_json(json::parse(read_file(checkpoint_path())));
        } catch (const json::parse_error& e) {
            throw FormatError("checkpoint " + checkpoint_path().string() + ": " + e.what());
        }
    }

    /// Atomic replace; refuses to move lastBlockScanned backwards.
    void save(const IngestCheckpoint& c) const
    {
        if (auto prev = load(); prev && prev->last_block_scanned &&
                                (!c.last_block_scanned || *c.last_block_scanned < *prev->last_block_scanned))
            throw std::logic_error("checkpoint lastBlockScanned would decrease");
        write_file_atomic(checkpoint_path(), checkpoint_to_json(c).dump(2) + "\n");
    }

    [[nodiscard]] fs::path log_part(std::uint64_t from, std::uint64_t to) const
    {
        return dir_ / ("logs-" + std::to_string(from) + "-" + std::to_string(to) + ".raw_log.v1.ndj");
    }

    [[nodiscard]] fs::path transfer_part(std::uint64_t n) const
    {
        return dir_ / ("transfers-" + std::to_string(n) + ".transfer.v1.ndj");
    }

    /// Log parts covering blocks up to `through`, in block order.
    [[nodiscard]] std::vector<RawLog> persisted_logs(std::uint64_t from, std::uint64_t through) const
    {
        std::vector<std::pair<std::uint64_t, fs::path>> parts;
        for (const auto& entry : fs::directory_iterator(dir_)) {
            auto name = entry.path().filename().string();
            if (!name.starts_with("logs-") || !name.ends_with(".raw_log.v1.ndj")) continue;
            auto core = name.substr(5, name.size() - 5 - std::string_view(".raw_log.v1.ndj").size());
            auto dash = core.find('-');
            if (dash == std::string::npos) continue;
            auto a = std::stoull(core.substr(0, dash));
            auto b = std::stoull(core.substr(dash + 1));
            if (a >= from && b <= through) parts.emplace_back(a, entry.path());
        }
        std::sort(parts.begin(), parts.end());
        std::vector<RawLog> out;
        for (const auto& [_, p] : parts) {
            auto part = read_records<RawLog>(p);
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }

    [[nodiscard]] std::vector<ChainTransfer> persisted_transfers(std::uint64_t parts) const
    {
        std::vector<ChainTransfer> out;
        for (std::uint64_t i = 0; i < parts; ++i) {
            auto part = read_records<ChainTransfer>(transfer_part(i));
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }

private:
    fs::path dir_;
};

// --- log scanning --------------------------------------------------------------------

inline LogFilter bridge_log_filter(const BridgeSpec& spec)
{
    LogFilter f;
    std::set<AccountAddress> addrs;
    std::set<Word> topics;
    for (const auto& d : spec.events()) {
        if (d.emitter == any_emitter) topics.insert(d.topic0());
        else if (auto a = spec.contract(d.emitter)) addrs.insert(*a);
    }
    f.addresses.assign(addrs.begin(), addrs.end());
    f.any_emitter_topics.assign(topics.begin(), topics.end());
    return f;
}

struct ScanOptions {
    std::uint64_t initial_chunk = 2000;
    /// Optional journal for checkpoint/resume.
    const IngestJournal* journal = nullptr;
    /// Called after each persisted chunk (tests use it to simulate a crash).
    std::function<void(std::uint64_t from, std::uint64_t to)> after_chunk;
};

struct ScanResult {
    std::vector<RawLog> logs;
    IngestStats stats;
    std::uint64_t chunks = 0;
    bool resumed = false;
};

/// Every log from the spec's contracts (and any-emitter topics) in [from, to],
/// in (blockNumber, logIndex) order. Chunks shrink by half when the provider
/// reports a range as too large and grow back toward the initial size after
/// successes. With a journal, each chunk is persisted before the checkpoint
/// advances, and an interrupted scan continues from lastBlockScanned + 1.
inline ScanResult scan_bridge_logs(LogProvider& provider, RequestGate& gate, const BridgeSpec& spec,
                                   std::uint64_t from, std::uint64_t to, const ScanOptions& opts = {})
{
    if (from > to)
        throw std::invalid_argument("block range inverted: " + std::to_string(from) + " > " + std::to_string(to));
    if (opts.initial_chunk == 0) throw std::invalid_argument("chunk size must be > 0");
    auto filter = bridge_log_filter(spec);

    ScanResult result;
    IngestCheckpoint cp;
    cp.spec_version = spec.version();
    cp.from_block = from;
    cp.to_block = to;
    std::uint64_t next = from;
    if (opts.journal) {
        if (auto prev = opts.journal->load()) {
            if (prev->from_block != from || prev->to_block != to || prev->spec_version != spec.version())
                throw IngestError("checkpoint in " + opts.journal->dir().string() + " belongs to another scan (" +
                                      prev->spec_version + " " + std::to_string(prev->from_block) + "-" +
                                      std::to_string(prev->to_block) + ")",
                                  std::nullopt);
            cp = *prev;
            if (cp.last_block_scanned) {
                result.logs = opts.journal->persisted_logs(from, *cp.last_block_scanned);
                next = *cp.last_block_scanned + 1;
                result.resumed = true;
            }
        }
    }

    std::uint64_t chunk = opts.initial_chunk;
    while (next <= to && next >= from) {
        std::uint64_t end = to - next < chunk ? to : next + chunk - 1;
        std::vector<RawLog> part;
        try {
            part = gate.run([&] { return provider.get_logs(next, end, filter); });
        } catch (const RangeTooLarge& e) {
            if (chunk == 1)
                throw IngestError(std::string("provider refuses a single block: ") + e.what(), std::pair{next, end});
            chunk = std::max<std::uint64_t>(1, chunk / 2);
            gate.count_split();
            continue;
        } catch (const ProviderError& e) {
            throw IngestError("log range " + std::to_string(next) + "-" + std::to_string(end) + " failed: " + e.what(),
                              std::pair{next, end});
        }
        std::sort(part.begin(), part.end(), log_order_less);
        if (opts.journal) {
            write_records(opts.journal->log_part(next, end), part);
            cp.last_block_scanned = end;
            opts.journal->save(cp);
        }
        result.logs.insert(result.logs.end(), part.begin(), part.end());
        ++result.chunks;
        if (opts.after_chunk) opts.after_chunk(next, end);
        if (end == to) break;
        next = end + 1;
        chunk = std::min(opts.initial_chunk, chunk * 2);
    }
    std::sort(result.logs.begin(), result.logs.end(), log_order_less);
    result.logs.erase(std::unique(result.logs.begin(), result.logs.end()), result.logs.end());
    result.stats = gate.stats();
    return result;
}

/// Enclosing transactions for logs whose descriptor needs method-ID corroboration.
inline std::map<TxId, RawTransaction> fetch_enclosing_transactions(LogProvider& provider, RequestGate& gate,
                                                                   std::span<const RawLog> logs,
                                                                   const BridgeSpec& spec)
{
    std::set<TxId> wanted;
    for (const auto& l : logs) {
        if (l.topics.empty()) continue;
        if (const auto* d = spec.find_descriptor(l.topics.front()); d && d->requires_method_id) wanted.insert(l.tx_id);
    }
    std::map<TxId, RawTransaction> out;
    for (const auto& tx : wanted) {
        try {
            if (auto t = gate.run([&] { return provider.get_transaction(tx); })) out.emplace(tx, std::move(*t));
        } catch (const ProviderError& e) {
            throw IngestError("transaction " + tx.to_string() + " failed: " + e.what(), std::nullopt);
        }
    }
    return out;
}

// --- depositors and transfers -----------------------------------------------------------

inline std::set<AccountAddress> extract_depositor_set(std::span<const BridgeEvent> events)
{
    std::set<AccountAddress> out;
    for (const auto& e : events)
        if (e.direction == Direction::Deposit) out.insert(e.receiver);
    return out;
}

/// Withdrawals whose receiver previously received a deposit, in input order.
inline std::vector<BridgeEvent> filter_withdrawals_by_depositors(std::span<const BridgeEvent> withdrawals,
                                                                 const std::set<AccountAddress>& depositors)
{
    std::vector<BridgeEvent> out;
    std::copy_if(withdrawals.begin(), withdrawals.end(), std::back_inserter(out),
                 [&](const BridgeEvent& e) { return depositors.contains(e.receiver); });
    return out;
}

struct AddressTransfers {
    std::vector<ChainTransfer> transfers;
    bool truncated = false;
};

/// One address's history in the window: ascending (timestamp, block, txId),
/// exact duplicate rows removed, truncated when the page limit was hit before
/// the window ran out. The flag is copied onto every returned row.
inline AddressTransfers fetch_address_transfers(TransferProvider& provider, RequestGate& gate, std::size_t page_limit,
                                                const AccountAddress& address, AssetClass asset_class,
                                                std::uint64_t from_block = 0,
                                                std::uint64_t to_block = std::numeric_limits<std::uint64_t>::max())
{
    if (page_limit == 0) throw std::invalid_argument("page limit must be > 0");
    TransferQuery q{address, asset_class, from_block, to_block};
    TransferPage page;
    try {
        page = gate.run([&] { return provider.get_transfers(q, page_limit); });
    } catch (const ProviderError& e) {
        throw IngestError("transfers for " + address.to_string() + " failed: " + e.what(), std::nullopt, address);
    }
    AddressTransfers out;
    out.truncated = page.more || page.rows.size() > page_limit;
    if (page.rows.size() > page_limit) page.rows.resize(page_limit);
    out.transfers = std::move(page.rows);
    std::sort(out.transfers.begin(), out.transfers.end(), transfer_time_less);
    out.transfers.erase(std::unique(out.transfers.begin(), out.transfers.end()), out.transfers.end());
    for (auto& t : out.transfers)
        t.truncated = out.truncated;
    return out;
}

struct TransferFetchResult {
    std::vector<ChainTransfer> transfers;
    std::set<AccountAddress> truncated;
    std::map<AccountAddress, std::string> failed;
    IngestStats stats;
};

/// Per-address fetch over up to `workers` threads sharing one gate. A failing
/// address is recorded and the rest continue. `on_done` runs under a mutex
/// after each successful address (checkpointing hook). Output is in transfer
/// time order with rows seen from both ends merged.
inline TransferFetchResult fetch_all_transfers(
    TransferProvider& provider, RequestGate& gate, std::size_t page_limit, const std::set<AccountAddress>& addresses,
    AssetClass asset_class, unsigned workers = 1, std::uint64_t from_block = 0,
    std::uint64_t to_block = std::numeric_limits<std::uint64_t>::max(),
    const std::function<void(const AccountAddress&, const AddressTransfers&)>& on_done = {})
{
    std::vector<AccountAddress> list(addresses.begin(), addresses.end());
    std::vector<std::optional<AddressTransfers>> slots(list.size());
    std::vector<std::string> errors(list.size());
    std::atomic<std::size_t> cursor{0};
    std::mutex done_mu;

    auto worker = [&] {
        for (;;) {
            auto i = cursor.fetch_add(1);
            if (i >= list.size()) return;
            try {
                slots[i] = fetch_address_transfers(provider, gate, page_limit, list[i], asset_class, from_block, to_block);
                if (on_done) {
                    std::lock_guard lock(done_mu);
                    on_done(list[i], *slots[i]);
                }
            } catch (const IngestError& e) {
                errors[i] = e.what();
            }
        }
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, list.size()))));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(worker);
    }

    TransferFetchResult out;
    std::set<AccountAddress> fetched;
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (!slots[i]) {
            out.failed.emplace(list[i], errors[i]);
            continue;
        }
        fetched.insert(list[i]);
        if (slots[i]->truncated) out.truncated.insert(list[i]);
        out.transfers.insert(out.transfers.end(), slots[i]->transfers.begin(), slots[i]->transfers.end());
    }
    // a row between two fetched addresses arrives twice; its flag follows the receiver's history
    for (auto& t : out.transfers)
        if (fetched.contains(t.to_address)) t.truncated = out.truncated.contains(t.to_address);
    std::sort(out.transfers.begin(), out.transfers.end(), transfer_time_less);
    out.transfers.erase(std::unique(out.transfers.begin(), out.transfers.end()), out.transfers.end());
    out.stats = gate.stats();
    return out;
}

} // namespace bridgetrace
