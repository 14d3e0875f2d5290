#pragma once

// HTTP providers: an Ethereum JSON-RPC node for bridge logs and transactions,
// and an Etherscan-family explorer API (Polygonscan) for per-address token
// transfers on the destination chain.

#include <bridgetrace/ingest.hpp>

#include <httplib.h>

namespace bridgetrace {

namespace detail {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'
};

inline SplitUrl split_url(std::string_view url)
{
    auto scheme = url.find("://");
    if (scheme == std::string_view::npos) throw std::invalid_argument("URL without scheme: " + std::string(url));
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string_view::npos) return {std::string(url), "/"};
    return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

inline std::string quantity(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    if (v == 0) return "0x0";
    std::string s;
    while (v) {
        s.insert(s.begin(), digits[v & 0xf]);
        v >>= 4;
    }
    return "0x" + s;
}

inline std::uint64_t parse_quantity(const json& j)
{
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    auto v = parse_uint256(j.get<std::string>());
    if (v > std::numeric_limits<std::uint64_t>::max()) throw ParseError("quantity exceeds 64 bits");
    return v.convert_to<std::uint64_t>();
}

inline void raise_for_status(const httplib::Result& res, const std::string& what)
{
    if (!res) throw ProviderError(what + ": " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw ProviderError(what + ": HTTP " + std::to_string(res->status));
    if (res->status != 200) throw ProviderError(what + ": HTTP " + std::to_string(res->status), false);
}

inline json parse_body(const std::string& body, const std::string& what)
{
    try {
        return json::parse(body);
    } catch (const json::parse_error&) {
        throw ProviderError(what + ": response is not JSON");
    }
}

} // namespace detail

/// eth_getLogs / eth_getBlockByNumber / eth_getTransactionByHash over HTTP.
class RpcLogProvider final : public LogProvider {
public:
    explicit RpcLogProvider(const std::string& url, std::chrono::seconds timeout = std::chrono::seconds(30))
        : url_(detail::split_url(url)), client_(url_.base)
    {
        client_.set_connection_timeout(timeout);
        client_.set_read_timeout(timeout);
    }

    std::vector<RawLog> get_logs(std::uint64_t from, std::uint64_t to, const LogFilter& filter) override
    {
        std::vector<RawLog> out;
        auto run = [&](json f) {
            f["fromBlock"] = detail::quantity(from);
            f["toBlock"] = detail::quantity(to);
            auto res = call("eth_getLogs", json::array({f}));
            if (!res.is_array()) throw ProviderError("eth_getLogs: result is not an array", false);
            for (const auto& l : res)
                out.push_back(to_raw_log(l));
        };
        if (!filter.addresses.empty()) {
            json addrs = json::array();
            for (const auto& a : filter.addresses)
                addrs.push_back(a.to_string());
            run({{"address", addrs}});
        }
        if (!filter.any_emitter_topics.empty()) {
            json t0 = json::array();
            for (const auto& t : filter.any_emitter_topics)
                t0.push_back(t.to_string());
            run({{"topics", json::array({t0})}});
        }
        return out;
    }

    std::optional<RawTransaction> get_transaction(const TxId& tx) override
    {
        auto r = call("eth_getTransactionByHash", json::array({tx.to_string()}));
        if (r.is_null()) return std::nullopt;
        try {
            RawTransaction t;
            t.tx_id = TxId::parse(r.at("hash").get<std::string>());
            t.from = AccountAddress::parse(r.at("from").get<std::string>());
            if (r.contains("to") && !r.at("to").is_null()) t.to = AccountAddress::parse(r.at("to").get<std::string>());
            t.input = from_hex(r.at("input").get<std::string>());
            t.value = Amount{parse_uint256(r.at("value").get<std::string>())};
            t.block_number = detail::parse_quantity(r.at("blockNumber"));
            t.block_timestamp = block_time(t.block_number);
            return t;
        } catch (const std::exception& e) {
            throw ProviderError(std::string("eth_getTransactionByHash: malformed result: ") + e.what(), false);
        }
    }

private:
    json call(const std::string& method, json params)
    {
        json req = {{"jsonrpc", "2.0"}, {"id", ++id_}, {"method", method}, {"params", std::move(params)}};
        auto res = client_.Post(url_.path, req.dump(), "application/json");
        detail::raise_for_status(res, method);
        auto body = detail::parse_body(res->body, method);
        if (body.contains("error") && !body.at("error").is_null()) {
            const auto& err = body.at("error");
            auto code = err.value("code", 0);
            auto msg = err.value("message", std::string{});
            std::string lower = msg;
            std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
            if (code == -32005 || lower.find("range") != std::string::npos || lower.find("too many") != std::string::npos ||
                lower.find("limit exceeded") != std::string::npos)
                throw RangeTooLarge(method + ": " + msg);
            throw ProviderError(method + ": " + msg);
        }
        if (!body.contains("result")) throw ProviderError(method + ": response without result", false);
        return body.at("result");
    }

    Timestamp block_time(std::uint64_t block)
    {
        {
            std::lock_guard lock(mu_);
            if (auto it = block_times_.find(block); it != block_times_.end()) return it->second;
        }
        auto r = call("eth_getBlockByNumber", json::array({detail::quantity(block), false}));
        if (r.is_null()) throw ProviderError("block " + std::to_string(block) + " not found");
        Timestamp ts{detail::parse_quantity(r.at("timestamp"))};
        std::lock_guard lock(mu_);
        block_times_.emplace(block, ts);
        return ts;
    }

    RawLog to_raw_log(const json& l)
    {
        try {
            RawLog out;
            out.address = AccountAddress::parse(l.at("address").get<std::string>());
            for (const auto& t : l.at("topics"))
                out.topics.push_back(Word::parse(t.get<std::string>()));
            out.data = from_hex(l.at("data").get<std::string>());
            out.tx_id = TxId::parse(l.at("transactionHash").get<std::string>());
            out.log_index = detail::parse_quantity(l.at("logIndex"));
            out.block_number = detail::parse_quantity(l.at("blockNumber"));
            out.block_timestamp = l.contains("blockTimestamp") ? Timestamp{detail::parse_quantity(l.at("blockTimestamp"))}
                                                               : block_time(out.block_number);
            return out;
        } catch (const ProviderError&) {
            throw;
        } catch (const std::exception& e) {
            throw ProviderError(std::string("eth_getLogs: malformed log: ") + e.what(), false);
        }
    }

    detail::SplitUrl url_;
    httplib::Client client_;
    std::uint64_t id_ = 0;
    std::mutex mu_;
    std::map<std::uint64_t, Timestamp> block_times_;
};

/// Etherscan-style account API: tokentx for native and fungible assets
/// (deposited Ether arrives as WETH), tokennfttx for non-fungible ones.
class ExplorerTransferProvider final : public TransferProvider {
public:
    ExplorerTransferProvider(const std::string& url, std::optional<std::string> api_key, std::string chain,
                             std::chrono::seconds timeout = std::chrono::seconds(30))
        : url_(detail::split_url(url)), api_key_(std::move(api_key)), chain_(std::move(chain)), timeout_(timeout)
    {
    }

    TransferPage get_transfers(const TransferQuery& q, std::size_t limit) override
    {
        bool nft = q.asset_class == AssetClass::NonFungible;
        httplib::Params params{{"module", "account"},
                               {"action", nft ? "tokennfttx" : "tokentx"},
                               {"address", q.address.to_string()},
                               {"startblock", std::to_string(q.from_block)},
                               {"endblock", std::to_string(std::min<std::uint64_t>(q.to_block, 999999999999ull))},
                               {"page", "1"},
                               {"offset", std::to_string(limit)},
                               {"sort", "asc"}};
        if (api_key_) params.emplace("apikey", *api_key_);
        // one client per call keeps concurrent workers independent
        httplib::Client client(url_.base);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        auto res = client.Get(url_.path, params, httplib::Headers{});
        detail::raise_for_status(res, "explorer " + q.address.to_string());
        auto body = detail::parse_body(res->body, "explorer");

        auto status = body.value("status", std::string{"0"});
        auto message = body.value("message", std::string{});
        const auto& result = body.contains("result") ? body.at("result") : json();
        if (status != "1") {
            if (message.starts_with("No transactions found")) return {};
            std::string detail_text = result.is_string() ? result.get<std::string>() : message;
            std::string lower = detail_text;
            std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
            bool transient = lower.find("rate limit") != std::string::npos || lower.find("timeout") != std::string::npos;
            throw ProviderError("explorer: " + detail_text, transient);
        }
        if (!result.is_array()) throw ProviderError("explorer: result is not an array", false);

        TransferPage page;
        for (const auto& r : result) {
            try {
                ChainTransfer t;
                t.tx_id = TxId::parse(r.at("hash").get<std::string>());
                t.to_address = AccountAddress::parse(r.at("to").get<std::string>());
                t.from_address = AccountAddress::parse(r.at("from").get<std::string>());
                t.token.symbol = normalize_symbol(r.value("tokenSymbol", std::string{}));
                t.token.contract_address = AccountAddress::parse(r.at("contractAddress").get<std::string>());
                t.token.asset_class = nft ? AssetClass::NonFungible : AssetClass::Fungible;
                if (nft) t.token_id = TokenId{parse_uint256(r.at("tokenID").get<std::string>())};
                else t.amount = Amount{parse_uint256(r.at("value").get<std::string>())};
                t.timestamp = Timestamp{std::stoull(r.at("timeStamp").get<std::string>())};
                t.block_number = std::stoull(r.at("blockNumber").get<std::string>());
                t.chain = chain_;
                page.rows.push_back(std::move(t));
            } catch (const std::exception& e) {
                throw ProviderError(std::string("explorer: malformed row: ") + e.what(), false);
            }
        }
        // a full page means the window may hold more rows
        page.more = result.size() >= limit;
        return page;
    }

private:
    detail::SplitUrl url_;
    std::optional<std::string> api_key_;
    std::string chain_;
    std::chrono::seconds timeout_;
};

} // namespace bridgetrace
