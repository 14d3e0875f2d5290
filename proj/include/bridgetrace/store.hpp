#pragma once

// On-disk dataset files: "#schema: <name>.v1" header, one JSON record per
// line, written to a temp file and renamed into place so a file visible at
// its final path is always complete and schema-valid.

#include <bridgetrace/codec.hpp>

#include <openssl/evp.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

namespace bridgetrace {

namespace fs = std::filesystem;

class FormatError : public SchemaError {
public:
    using SchemaError::SchemaError;
};

class VersionError : public SchemaError {
public:
    using SchemaError::SchemaError;
};

inline constexpr std::string_view schema_header_prefix = "#schema: ";

inline std::string sha256_hex(std::string_view bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    auto hex = to_hex(std::span<const std::uint8_t>(md.data(), len));
    return hex.substr(2);
}

inline std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

inline bool is_registered_schema(std::string_view schema)
{
    for (auto s : {RecordCodec<RawLog>::schema, RecordCodec<RawTransaction>::schema, RecordCodec<BridgeEvent>::schema,
                   RecordCodec<ChainTransfer>::schema, RecordCodec<MatchResult>::schema, RecordCodec<TruthRecord>::schema})
        if (s == schema) return true;
    return false;
}

/// Validates a record against a registered schema name by decoding it.
inline void validate_record(std::string_view schema, const json& record)
{
    if (schema == RecordCodec<RawLog>::schema) (void)RecordCodec<RawLog>::decode(record);
    else if (schema == RecordCodec<RawTransaction>::schema) (void)RecordCodec<RawTransaction>::decode(record);
    else if (schema == RecordCodec<BridgeEvent>::schema) (void)RecordCodec<BridgeEvent>::decode(record);
    else if (schema == RecordCodec<ChainTransfer>::schema) (void)RecordCodec<ChainTransfer>::decode(record);
    else if (schema == RecordCodec<MatchResult>::schema) (void)RecordCodec<MatchResult>::decode(record);
    else if (schema == RecordCodec<TruthRecord>::schema) (void)RecordCodec<TruthRecord>::decode(record);
    else throw FormatError("unregistered schema '" + std::string(schema) + "'");
}

/// Writes `content` to `path` via temp file + fsync + rename. The temp file is
/// removed on any failure.
inline void write_file_atomic(const fs::path& path, std::string_view content)
{
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);

    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw std::runtime_error("cannot create " + tmp.string());
    auto cleanup = [&] {
        ::close(fd);
        std::error_code ec;
        fs::remove(tmp, ec);
    };
    std::size_t written = 0;
    while (written < content.size()) {
        auto n = ::write(fd, content.data() + written, content.size() - written);
        if (n < 0) {
            cleanup();
            throw std::runtime_error("write failed for " + tmp.string());
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        cleanup();
        throw std::runtime_error("fsync failed for " + tmp.string());
    }
    ::close(fd);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("rename to " + path.string() + " failed");
    }
}

inline std::string render_records(std::span<const json> records, std::string_view schema)
{
    std::string out;
    out += schema_header_prefix;
    out += schema;
    out += '\n';
    for (const auto& r : records) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

/// Validates every record first; nothing is created when one fails.
/// Returns the SHA-256 of the file content.
inline std::string write_atomic(const fs::path& path, std::span<const json> records, std::string_view schema)
{
    if (!is_registered_schema(schema)) throw FormatError("unregistered schema '" + std::string(schema) + "'");
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            validate_record(schema, records[i]);
        } catch (const SchemaError& e) {
            throw SchemaError("record " + std::to_string(i) + " for " + path.string() + ": " + e.what());
        }
    }
    auto content = render_records(records, schema);
    write_file_atomic(path, content);
    return sha256_hex(content);
}

template <typename T>
std::string write_records(const fs::path& path, std::span<const T> records)
{
    std::vector<json> js;
    js.reserve(records.size());
    for (const auto& r : records)
        js.push_back(RecordCodec<T>::encode(r));
    return write_atomic(path, js, RecordCodec<T>::schema);
}

template <typename T>
std::string write_records(const fs::path& path, const std::vector<T>& records)
{
    return write_records<T>(path, std::span<const T>(records));
}

struct ValidatedFile {
    std::string schema;
    std::vector<json> records;
};

namespace detail {

inline std::pair<std::string, std::string> split_schema(std::string_view s)
{
    auto dot = s.rfind('.');
    if (dot == std::string_view::npos) return {std::string(s), ""};
    return {std::string(s.substr(0, dot)), std::string(s.substr(dot + 1))};
}

} // namespace detail

/// Walks a dataset file: checks the header against `expected` (a different
/// name or version is a VersionError) and hands each parsed line to
/// `on_record`, which validates it. Errors name the offending line.
template <typename F>
std::string for_each_record(const fs::path& path, std::optional<std::string_view> expected, F&& on_record)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || !line.starts_with(schema_header_prefix))
        throw FormatError(path.string() + ": missing '#schema:' header on line 1");
    std::string schema = line.substr(schema_header_prefix.size());
    if (expected && schema != *expected) {
        auto [want_name, want_ver] = detail::split_schema(*expected);
        auto [got_name, got_ver] = detail::split_schema(schema);
        if (want_name == got_name)
            throw VersionError(path.string() + ": schema version " + got_ver + " not readable, expected " + want_ver);
        throw VersionError(path.string() + ": holds " + schema + ", this input expects " + std::string(*expected));
    }
    if (!is_registered_schema(schema))
        throw FormatError(path.string() + ": unknown schema '" + schema + "'");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        try {
            on_record(schema, json::parse(line));
        } catch (const json::parse_error&) {
            throw FormatError(path.string() + ": line " + std::to_string(lineno) + ": malformed JSON");
        } catch (const SchemaError& e) {
            throw FormatError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return schema;
}

inline ValidatedFile read_validated(const fs::path& path, std::optional<std::string_view> expected = std::nullopt)
{
    ValidatedFile out;
    out.schema = for_each_record(path, expected, [&](std::string_view schema, json j) {
        validate_record(schema, j);
        out.records.push_back(std::move(j));
    });
    return out;
}

template <typename T>
std::vector<T> read_records(const fs::path& path)
{
    std::vector<T> out;
    for_each_record(path, RecordCodec<T>::schema,
                    [&](std::string_view, const json& j) { out.push_back(RecordCodec<T>::decode(j)); });
    return out;
}

/// Directory layout shared by all commands.
struct DatasetLayout {
    fs::path root;

    static constexpr std::array<std::string_view, 6> subdirs = {"raw", "events", "transfers",
                                                                "matches", "reports", "manifests"};

    void create() const
    {
        for (auto s : subdirs)
            fs::create_directories(root / s);
    }

    /// <root>/<subdir>/<chain>-<direction>-<tokenclass>-<blockrange>.<schema>.ndj
    [[nodiscard]] fs::path data_file(std::string_view subdir, std::string_view chain, std::string_view direction,
                                     std::string_view token_class, std::string_view block_range,
                                     std::string_view schema) const
    {
        std::string name;
        name.append(chain).append("-").append(direction).append("-").append(token_class).append("-");
        name.append(block_range).append(".").append(schema).append(".ndj");
        return root / subdir / name;
    }

    [[nodiscard]] fs::path manifest(std::string_view command) const
    {
        return root / "manifests" / (std::string(command) + ".manifest.json");
    }
};

} // namespace bridgetrace
