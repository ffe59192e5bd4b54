#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "event.hpp"

namespace modpred {

struct LineError {
    std::size_t line = 0; // 1-based
    std::string message;
};

struct ParseResult {
    EventList events;
    std::vector<LineError> errors;
};

namespace detail {

template <class Int>
std::optional<Int> parse_int(std::string_view s)
{
    Int v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_double(std::string_view s)
{
    double v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
    return s;
}

/// Microseconds since the epoch for a UTC civil time; nullopt on an invalid date.
inline std::optional<Timestamp> civil_to_micros(int year, unsigned month, unsigned day, int hour, int minute, int second,
                                                std::int64_t micros)
{
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok() || hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 || second > 59) return std::nullopt;
    const auto days = sys_days{ymd}.time_since_epoch().count();
    const Timestamp ts =
        ((static_cast<Timestamp>(days) * 24 + hour) * 60 + minute) * 60 * kMicrosPerSecond + second * kMicrosPerSecond + micros;
    if (ts < 0) return std::nullopt;
    return ts;
}

inline void check_fatal(const ParseResult& r, std::size_t non_empty, const char* what)
{
    if (non_empty > 0 && r.errors.size() * 2 > non_empty)
        throw Error(ErrorCode::FatalFormat, std::string(what) + ": " + std::to_string(r.errors.size()) + " of " +
                                                std::to_string(non_empty) + " lines malformed (first at line " +
                                                std::to_string(r.errors.front().line) + ": " + r.errors.front().message + ")");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Snort fast alerts

struct Endpoint {
    std::string address;
    std::optional<int> port;
    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct SnortAlert {
    Timestamp ts = 0;
    std::uint32_t gid = 0, sid = 0, rev = 0;
    std::string message;
    std::optional<std::string> classification;
    int priority = 1;
    std::string protocol;
    std::optional<Endpoint> src, dst;

    std::string alert_type() const
    {
        return std::to_string(gid) + ":" + std::to_string(sid) + ":" + std::to_string(rev);
    }

    Event to_event(std::string source = "snort") const
    {
        Event e;
        e.ts = ts;
        e.source = std::move(source);
        e.kind = EventKind::Alert;
        e.attrs["alert_type"] = alert_type();
        e.attrs["message"] = message;
        if (classification) e.attrs["classification"] = *classification;
        if (!protocol.empty()) e.attrs["protocol"] = protocol;
        if (src) {
            e.attrs["src_ip"] = src->address;
            if (src->port) e.attrs["src_port"] = std::to_string(*src->port);
        }
        if (dst) {
            e.attrs["dst_ip"] = dst->address;
            if (dst->port) e.attrs["dst_port"] = std::to_string(*dst->port);
        }
        e.nums.emplace_back("priority", static_cast<double>(priority));
        return e;
    }

    friend bool operator==(const SnortAlert&, const SnortAlert&) = default;
};

namespace detail {

inline std::optional<Endpoint> parse_endpoint(std::string_view text)
{
    Endpoint ep;
    if (text.empty()) return std::nullopt;
    if (text.front() == '[') {
        const auto close = text.find(']');
        if (close == std::string_view::npos) return std::nullopt;
        ep.address = std::string(text.substr(1, close - 1));
        const std::string_view rest = text.substr(close + 1);
        if (!rest.empty()) {
            if (rest.front() != ':') return std::nullopt;
            auto port = parse_int<int>(rest.substr(1));
            if (!port) return std::nullopt;
            ep.port = *port;
        }
        return ep;
    }
    const auto colons = std::count(text.begin(), text.end(), ':');
    if (colons == 1) {
        const auto c = text.find(':');
        auto port = parse_int<int>(text.substr(c + 1));
        if (!port || *port < 0 || *port > 65535) return std::nullopt;
        ep.address = std::string(text.substr(0, c));
        ep.port = *port;
    } else {
        // Bare IPv4 address, or an unbracketed IPv6 address whose port cannot be told apart.
        ep.address = std::string(text);
    }
    return ep;
}

} // namespace detail

/// Parses one fast-alert line:
/// `MM/DD-HH:MM:SS.ffffff  [**] [gid:sid:rev] msg [**] [Classification: c] [Priority: n] {PROTO} src[:port] -> dst[:port]`
/// where the Classification block and the protocol/endpoint block are optional.
inline SnortAlert parse_snort_line(std::string_view line, int year)
{
    static const std::regex grammar(
        R"(^(\d{2})/(\d{2})-(\d{2}):(\d{2}):(\d{2})\.(\d{6})\s+\[\*\*\]\s+\[(\d+):(\d+):(\d+)\]\s+(.*?)\s*\[\*\*\])"
        R"((?:\s+\[Classification:\s*([^\]]*?)\s*\])?\s+\[Priority:\s*(\d+)\])"
        R"((?:\s+\{([^}]*)\}\s+(\S+)\s+->\s+(\S+))?\s*$)");
    const std::string text(detail::trim(line));
    std::smatch m;
    if (!std::regex_match(text, m, grammar)) throw Error(ErrorCode::ParseError, "line does not match fast alert grammar");

    auto num = [&](int i) { return std::stoll(m[i].str()); };
    const auto ts = detail::civil_to_micros(year, static_cast<unsigned>(num(1)), static_cast<unsigned>(num(2)),
                                            static_cast<int>(num(3)), static_cast<int>(num(4)), static_cast<int>(num(5)), num(6));
    if (!ts) throw Error(ErrorCode::ParseError, "invalid timestamp");

    SnortAlert a;
    a.ts = *ts;
    auto gid = detail::parse_int<std::uint32_t>(m[7].str());
    auto sid = detail::parse_int<std::uint32_t>(m[8].str());
    auto rev = detail::parse_int<std::uint32_t>(m[9].str());
    if (!gid || !sid || !rev) throw Error(ErrorCode::ParseError, "rule id out of range");
    a.gid = *gid;
    a.sid = *sid;
    a.rev = *rev;
    a.message = m[10].str();
    if (m[11].matched) a.classification = m[11].str();
    auto prio = detail::parse_int<int>(m[12].str());
    if (!prio || *prio < 1) throw Error(ErrorCode::ParseError, "priority must be >= 1");
    a.priority = *prio;
    if (m[13].matched) {
        a.protocol = m[13].str();
        a.src = detail::parse_endpoint(m[14].str());
        a.dst = detail::parse_endpoint(m[15].str());
        if (!a.src || !a.dst) throw Error(ErrorCode::ParseError, "malformed endpoint");
    }
    return a;
}

/// One ALERT per well-formed line in file order; malformed lines are collected
/// as errors. Throws FatalFormat when more than half of the non-empty lines fail.
inline ParseResult parse_snort_fast(std::span<const std::string> lines, int year, const std::string& source = "snort")
{
    ParseResult r;
    std::size_t non_empty = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        ++non_empty;
        try {
            r.events.push_back(parse_snort_line(lines[i], year).to_event(source));
        } catch (const Error& e) {
            r.errors.push_back({i + 1, e.what()});
        }
    }
    detail::check_fatal(r, non_empty, "snort fast alerts");
    return r;
}

inline std::vector<std::string> read_lines(std::istream& in)
{
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

inline std::vector<std::string> read_lines(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    return read_lines(in);
}

// ---------------------------------------------------------------------------
// Event JSON Lines

inline nlohmann::ordered_json event_to_json(const Event& e)
{
    nlohmann::ordered_json j;
    j["ts"] = e.ts;
    j["source"] = e.source;
    j["kind"] = std::string(to_string(e.kind));
    j["attrs"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : e.attrs) j["attrs"][k] = v;
    j["nums"] = nlohmann::ordered_json::array();
    for (const auto& [n, v] : e.nums) j["nums"].push_back(nlohmann::ordered_json::array({n, v}));
    j["label"] = e.label ? nlohmann::ordered_json(e.label->index) : nlohmann::ordered_json(nullptr);
    if (e.members) {
        j["members"] = nlohmann::ordered_json::array();
        for (const Event& m : *e.members) j["members"].push_back(event_to_json(m));
    }
    return j;
}

inline Event event_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "event is not a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "ts" && key != "source" && key != "kind" && key != "attrs" && key != "nums" && key != "label" &&
            key != "members")
            throw Error(ErrorCode::ParseError, "unknown key \"" + key + "\"");
    Event e;
    if (!j.contains("ts") || !j["ts"].is_number_integer()) throw Error(ErrorCode::ParseError, "missing or non-integer ts");
    e.ts = j["ts"].get<Timestamp>();
    if (e.ts < 0) throw Error(ErrorCode::ParseError, "negative ts");
    if (!j.contains("source") || !j["source"].is_string()) throw Error(ErrorCode::ParseError, "missing source");
    e.source = j["source"].get<std::string>();
    if (!j.contains("kind") || !j["kind"].is_string()) throw Error(ErrorCode::ParseError, "missing kind");
    auto kind = parse_event_kind(j["kind"].get<std::string>());
    if (!kind) throw Error(ErrorCode::ParseError, "unknown kind \"" + j["kind"].get<std::string>() + "\"");
    e.kind = *kind;
    if (j.contains("attrs")) {
        if (!j["attrs"].is_object()) throw Error(ErrorCode::ParseError, "attrs must be an object");
        for (const auto& [k, v] : j["attrs"].items()) {
            if (!v.is_string()) throw Error(ErrorCode::ParseError, "attr \"" + k + "\" must be a string");
            e.attrs[k] = v.get<std::string>();
        }
    }
    if (j.contains("nums")) {
        if (!j["nums"].is_array()) throw Error(ErrorCode::ParseError, "nums must be an array");
        for (const auto& nv : j["nums"]) {
            if (!nv.is_array() || nv.size() != 2 || !nv[0].is_string() || !nv[1].is_number())
                throw Error(ErrorCode::ParseError, "nums entries must be [name, value]");
            std::string name = nv[0].get<std::string>();
            if (e.num(name)) throw Error(ErrorCode::ParseError, "duplicate num \"" + name + "\"");
            e.nums.emplace_back(std::move(name), nv[1].get<double>());
        }
    }
    if (j.contains("label") && !j["label"].is_null()) {
        if (!j["label"].is_number_unsigned() && !(j["label"].is_number_integer() && j["label"].get<long long>() >= 0))
            throw Error(ErrorCode::ParseError, "label must be a non-negative integer or null");
        e.label = StageId{j["label"].get<std::size_t>()};
    }
    if (j.contains("members")) {
        auto members = std::make_shared<EventList>();
        for (const auto& m : j["members"]) members->push_back(event_from_json(m));
        e.members = std::move(members);
    }
    if (e.kind == EventKind::Alert && !e.attr("alert_type")) throw Error(ErrorCode::ParseError, "ALERT without alert_type");
    if (e.kind == EventKind::Category && !e.attr("category")) throw Error(ErrorCode::ParseError, "CATEGORY without category");
    return e;
}

inline std::string event_to_line(const Event& e) { return event_to_json(e).dump(); }

inline Event event_from_line(std::string_view line)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
        throw Error(ErrorCode::ParseError, std::string("invalid JSON: ") + err.what());
    }
    return event_from_json(j);
}

inline void write_events_jsonl(std::ostream& out, std::span<const Event> events)
{
    for (const Event& e : events) out << event_to_line(e) << '\n';
}

inline void write_events_jsonl(const std::string& path, std::span<const Event> events)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    write_events_jsonl(out, events);
}

inline ParseResult read_events_jsonl(std::istream& in)
{
    ParseResult r;
    std::string line;
    std::size_t lineno = 0, non_empty = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        ++non_empty;
        try {
            r.events.push_back(event_from_line(line));
        } catch (const Error& e) {
            r.errors.push_back({lineno, e.what()});
        }
    }
    detail::check_fatal(r, non_empty, "event JSON lines");
    return r;
}

inline ParseResult read_events_jsonl(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    return read_events_jsonl(in);
}

// ---------------------------------------------------------------------------
// Labeled CSV

/// RFC-4180 records: comma separated, double-quoted fields may hold commas,
/// line breaks and doubled quotes.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false, field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field.empty()) quoted = true;
            else field += c;
            field_started = true;
            break;
        case ',':
            record.push_back(std::move(field));
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            if (field_started || !field.empty() || !record.empty()) {
                record.push_back(std::move(field));
                records.push_back(std::move(record));
            }
            field.clear();
            record.clear();
            field_started = false;
            break;
        default:
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw Error(ErrorCode::ParseError, "unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

struct CsvSchema {
    std::string ts = "ts";
    std::string source = "source";
    std::string alert_type = "alert_type";
    std::optional<std::string> priority;
    std::string label = "label";
    /// Unit of numeric timestamps: "s", "ms" or "us". ISO-8601 strings are always accepted.
    std::string ts_unit = "s";
    /// Source to use when the source column is absent from the file.
    std::optional<std::string> default_source;
};

struct CsvReadResult {
    LabeledTrace trace;
    bool sorted_applied = false;
};

namespace detail {

inline std::optional<Timestamp> parse_csv_timestamp(std::string_view text, const std::string& unit)
{
    text = trim(text);
    if (auto v = parse_double(text)) {
        const double scale = unit == "us" ? 1.0 : unit == "ms" ? 1e3 : 1e6;
        const double us = *v * scale;
        if (!(us >= 0.0)) return std::nullopt;
        return static_cast<Timestamp>(std::llround(us));
    }
    // YYYY-MM-DD[ T]HH:MM:SS[.ffffff][Z]
    static const std::regex iso(R"(^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,6}))?Z?$)");
    std::cmatch m;
    if (!std::regex_match(text.data(), text.data() + text.size(), m, iso)) return std::nullopt;
    std::string frac = m[7].matched ? m[7].str() : "0";
    while (frac.size() < 6) frac += '0';
    return civil_to_micros(std::stoi(m[1].str()), static_cast<unsigned>(std::stoi(m[2].str())),
                           static_cast<unsigned>(std::stoi(m[3].str())), std::stoi(m[4].str()), std::stoi(m[5].str()),
                           std::stoi(m[6].str()), std::stoll(frac));
}

} // namespace detail

inline CsvReadResult read_labeled_csv_text(std::string_view text, const CsvSchema& schema,
                                           const std::optional<StageCatalog>& catalog = std::nullopt,
                                           std::string trace_id = "csv")
{
    const auto records = parse_csv(text);
    if (records.empty()) throw Error(ErrorCode::MissingColumn, "CSV has no header row");
    const auto& header = records.front();
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    auto required = [&](const std::string& name) {
        auto c = column(name);
        if (!c) throw Error(ErrorCode::MissingColumn, "column \"" + name + "\" not in header");
        return *c;
    };
    const std::size_t ts_col = required(schema.ts);
    const std::size_t type_col = required(schema.alert_type);
    const std::size_t label_col = required(schema.label);
    std::optional<std::size_t> source_col = column(schema.source);
    if (!source_col && !schema.default_source) required(schema.source);
    std::optional<std::size_t> prio_col;
    if (schema.priority) prio_col = required(*schema.priority);

    std::vector<std::string> names;
    if (catalog) {
        names = catalog->names();
    } else {
        names.push_back("Normal");
        for (std::size_t r = 1; r < records.size(); ++r) {
            if (label_col >= records[r].size()) continue;
            const std::string label(detail::trim(records[r][label_col]));
            if (!label.empty() && std::find(names.begin(), names.end(), label) == names.end()) names.push_back(label);
        }
        if (names.size() < 2) names.push_back("Attack");
    }

    CsvReadResult result;
    result.trace.trace_id = std::move(trace_id);
    result.trace.catalog = StageCatalog(names);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& row = records[r];
        if (row.size() != header.size())
            throw Error(ErrorCode::ParseError, "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                                                   " fields, header has " + std::to_string(header.size()));
        Event e;
        e.kind = EventKind::Alert;
        auto ts = detail::parse_csv_timestamp(row[ts_col], schema.ts_unit);
        if (!ts) throw Error(ErrorCode::ParseError, "row " + std::to_string(r + 1) + ": bad timestamp \"" + row[ts_col] + "\"");
        e.ts = *ts;
        e.source = source_col ? row[*source_col] : *schema.default_source;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c == ts_col || c == label_col || (source_col && c == *source_col) || (prio_col && c == *prio_col)) continue;
            e.attrs[c == type_col ? std::string("alert_type") : header[c]] = row[c];
        }
        if (prio_col) {
            auto p = detail::parse_double(detail::trim(row[*prio_col]));
            if (!p) throw Error(ErrorCode::ParseError, "row " + std::to_string(r + 1) + ": bad priority");
            e.nums.emplace_back("priority", *p);
        }
        const std::string label(detail::trim(row[label_col]));
        if (!label.empty()) {
            auto id = result.trace.catalog.find(label);
            if (!id) throw Error(ErrorCode::UnknownStageName, "row " + std::to_string(r + 1) + ": stage \"" + label + "\"");
            e.label = *id;
        }
        result.trace.events.push_back(std::move(e));
    }
    auto by_ts = [](const Event& a, const Event& b) { return a.ts < b.ts; };
    if (!std::is_sorted(result.trace.events.begin(), result.trace.events.end(), by_ts)) {
        std::stable_sort(result.trace.events.begin(), result.trace.events.end(), by_ts);
        result.sorted_applied = true;
    }
    return result;
}

inline CsvReadResult read_labeled_csv(const std::string& path, const CsvSchema& schema,
                                      const std::optional<StageCatalog>& catalog = std::nullopt)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return read_labeled_csv_text(buf.str(), schema, catalog, path);
}

// ---------------------------------------------------------------------------
// Catalog sidecar: one stage name per line.

inline void write_catalog(std::ostream& out, const StageCatalog& catalog)
{
    for (const auto& n : catalog.names()) out << n << '\n';
}

inline StageCatalog read_catalog(std::istream& in)
{
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view t = detail::trim(line);
        if (!t.empty()) names.emplace_back(t);
    }
    return StageCatalog(std::move(names));
}

} // namespace modpred
