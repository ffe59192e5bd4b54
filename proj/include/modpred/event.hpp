#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"

namespace modpred {

/// Microseconds since the Unix epoch.
using Timestamp = std::int64_t;

constexpr Timestamp kMicrosPerSecond = 1'000'000;

/// Index of an attack stage within a StageCatalog. Stage 0 is always "Normal".
struct StageId {
    std::size_t index = 0;

    constexpr StageId() = default;
    constexpr explicit StageId(std::size_t i) : index(i) {}

    friend constexpr auto operator<=>(StageId, StageId) = default;
};

inline constexpr StageId kNormalStage{0};

class StageCatalog {
public:
    StageCatalog() : names_{"Normal", "Attack"} {}

    explicit StageCatalog(std::vector<std::string> names) : names_(std::move(names))
    {
        if (names_.size() < 2)
            throw Error(ErrorCode::BadCatalog, "catalog needs at least 2 stages");
        if (names_.front() != "Normal")
            throw Error(ErrorCode::BadCatalog, "stage 0 must be \"Normal\", got \"" + names_.front() + "\"");
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i].empty())
                throw Error(ErrorCode::BadCatalog, "empty stage name at index " + std::to_string(i));
            for (std::size_t j = 0; j < i; ++j)
                if (names_[i] == names_[j])
                    throw Error(ErrorCode::BadCatalog, "duplicate stage name \"" + names_[i] + "\"");
        }
    }

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    bool contains(StageId id) const noexcept { return id.index < names_.size(); }

    const std::string& name(StageId id) const
    {
        if (!contains(id)) throw Error(ErrorCode::UnknownStageName, "stage id " + std::to_string(id.index) + " out of range");
        return names_[id.index];
    }

    std::optional<StageId> find(std::string_view name) const
    {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return StageId{i};
        return std::nullopt;
    }

    friend bool operator==(const StageCatalog&, const StageCatalog&) = default;

private:
    std::vector<std::string> names_;
};

enum class EventKind { Raw, Alert, Window, Feature, Category, Prediction };

constexpr std::string_view to_string(EventKind kind) noexcept
{
    switch (kind) {
    case EventKind::Raw: return "RAW";
    case EventKind::Alert: return "ALERT";
    case EventKind::Window: return "WINDOW";
    case EventKind::Feature: return "FEATURE";
    case EventKind::Category: return "CATEGORY";
    case EventKind::Prediction: return "PREDICTION";
    }
    return "RAW";
}

inline std::optional<EventKind> parse_event_kind(std::string_view text) noexcept
{
    for (EventKind k : {EventKind::Raw, EventKind::Alert, EventKind::Window, EventKind::Feature,
                        EventKind::Category, EventKind::Prediction})
        if (to_string(k) == text) return k;
    return std::nullopt;
}

struct Event;
using EventList = std::vector<Event>;

struct Event {
    Timestamp ts = 0;
    std::string source;
    EventKind kind = EventKind::Raw;
    std::map<std::string, std::string> attrs;
    std::vector<std::pair<std::string, double>> nums;
    std::optional<StageId> label;
    /// Members of a WINDOW event, oldest first. Shared so windows overlap without copying.
    std::shared_ptr<const EventList> members;

    const std::string* attr(const std::string& key) const
    {
        auto it = attrs.find(key);
        return it == attrs.end() ? nullptr : &it->second;
    }

    std::optional<double> num(std::string_view name) const
    {
        for (const auto& [n, v] : nums)
            if (n == name) return v;
        return std::nullopt;
    }

    std::vector<double> values() const
    {
        std::vector<double> out;
        out.reserve(nums.size());
        for (const auto& nv : nums) out.push_back(nv.second);
        return out;
    }

    friend bool operator==(const Event& a, const Event& b)
    {
        if (a.ts != b.ts || a.source != b.source || a.kind != b.kind || a.attrs != b.attrs || a.nums != b.nums ||
            a.label != b.label)
            return false;
        if (!a.members || !b.members) return !a.members && !b.members;
        return *a.members == *b.members;
    }
};

struct LabeledTrace {
    std::string trace_id;
    StageCatalog catalog;
    EventList events;
};

struct Prediction {
    Timestamp ts = 0;
    std::string sink;
    std::vector<double> probs;
    StageId stage;

    /// Builds a prediction whose stage is the lowest-index maximizer of probs.
    static Prediction from_probs(Timestamp ts, std::string sink, std::vector<double> probs)
    {
        Prediction p;
        p.ts = ts;
        p.sink = std::move(sink);
        std::size_t best = 0;
        for (std::size_t i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[best]) best = i;
        p.stage = StageId{best};
        p.probs = std::move(probs);
        return p;
    }

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Throws MalformedStream when ts decreases somewhere in the sequence.
inline void require_sorted(std::span<const Event> events, std::string_view what)
{
    for (std::size_t i = 1; i < events.size(); ++i)
        if (events[i].ts < events[i - 1].ts)
            throw Error(ErrorCode::MalformedStream, std::string(what) + " not sorted by ts at index " +
                                                        std::to_string(i) + " (source \"" + events[i].source +
                                                        "\")");
}

/// Stable k-way merge by ts; ties go to the lexicographically smaller source, then
/// to the earlier stream, then to the earlier position within the stream.
inline EventList merge_streams(std::span<const EventList> streams)
{
    std::size_t total = 0;
    for (std::size_t s = 0; s < streams.size(); ++s) {
        const EventList& stream = streams[s];
        for (std::size_t i = 1; i < stream.size(); ++i)
            if (stream[i].ts < stream[i - 1].ts)
                throw Error(ErrorCode::MalformedStream, "stream " + std::to_string(s) + " (source \"" +
                                                            stream[i].source + "\") unsorted at index " +
                                                            std::to_string(i));
        total += stream.size();
    }

    struct Head {
        std::size_t stream;
        std::size_t pos;
    };
    auto later = [&](const Head& a, const Head& b) {
        const Event& ea = streams[a.stream][a.pos];
        const Event& eb = streams[b.stream][b.pos];
        if (ea.ts != eb.ts) return ea.ts > eb.ts;
        if (ea.source != eb.source) return ea.source > eb.source;
        if (a.stream != b.stream) return a.stream > b.stream;
        return a.pos > b.pos;
    };
    std::priority_queue<Head, std::vector<Head>, decltype(later)> heads(later);
    for (std::size_t s = 0; s < streams.size(); ++s)
        if (!streams[s].empty()) heads.push({s, 0});

    EventList out;
    out.reserve(total);
    while (!heads.empty()) {
        Head h = heads.top();
        heads.pop();
        out.push_back(streams[h.stream][h.pos]);
        if (h.pos + 1 < streams[h.stream].size()) heads.push({h.stream, h.pos + 1});
    }
    return out;
}

enum class TraceViolationKind { OutOfOrder, BadLabel, MissingPayload };

struct TraceViolation {
    TraceViolationKind kind;
    std::size_t index;
    std::string detail;

    friend bool operator==(const TraceViolation&, const TraceViolation&) = default;
};

inline std::string_view to_string(TraceViolationKind kind) noexcept
{
    switch (kind) {
    case TraceViolationKind::OutOfOrder: return "OutOfOrder";
    case TraceViolationKind::BadLabel: return "BadLabel";
    case TraceViolationKind::MissingPayload: return "MissingPayload";
    }
    return "?";
}

/// Returns one record per broken trace invariant; empty means the trace is valid.
inline std::vector<TraceViolation> validate_trace(const LabeledTrace& trace)
{
    std::vector<TraceViolation> out;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
        const Event& e = trace.events[i];
        if (e.ts < 0) out.push_back({TraceViolationKind::OutOfOrder, i, "negative ts"});
        if (i > 0 && e.ts < trace.events[i - 1].ts)
            out.push_back({TraceViolationKind::OutOfOrder, i, "ts decreases"});
        if (e.label && !trace.catalog.contains(*e.label))
            out.push_back({TraceViolationKind::BadLabel, i,
                           "label " + std::to_string(e.label->index) + " outside catalog of size " +
                               std::to_string(trace.catalog.size())});
        if (e.kind == EventKind::Alert && !e.attr("alert_type"))
            out.push_back({TraceViolationKind::MissingPayload, i, "ALERT without alert_type"});
        if (e.kind == EventKind::Category && !e.attr("category"))
            out.push_back({TraceViolationKind::MissingPayload, i, "CATEGORY without category"});
    }
    return out;
}

} // namespace modpred
