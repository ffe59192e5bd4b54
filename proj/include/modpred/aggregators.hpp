#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "event.hpp"
#include "rng.hpp"

namespace modpred {

inline constexpr const char* kOtherBucket = "OTHER";

namespace detail {

inline std::size_t vocab_index(const std::vector<std::string>& vocab, const std::string& key)
{
    auto it = std::find(vocab.begin(), vocab.end(), key);
    return it == vocab.end() ? vocab.size() : static_cast<std::size_t>(it - vocab.begin());
}

inline void require_unique(const std::vector<std::string>& vocab, const char* what)
{
    std::set<std::string> seen;
    for (const auto& v : vocab)
        if (!seen.insert(v).second) throw Error(ErrorCode::BadConfig, std::string("duplicate entry \"") + v + "\" in " + what);
}

inline std::optional<StageId> latest_label(std::span<const Event> events)
{
    for (std::size_t i = events.size(); i-- > 0;)
        if (events[i].label) return events[i].label;
    return std::nullopt;
}

} // namespace detail

/// Distinct alert types in sorted order.
inline std::vector<std::string> collect_alert_types(std::span<const Event> events)
{
    std::set<std::string> types;
    for (const Event& e : events) {
        if (e.kind == EventKind::Alert) {
            if (const auto* t = e.attr("alert_type")) types.insert(*t);
        } else if (e.kind == EventKind::Window && e.members) {
            for (const Event& m : *e.members)
                if (const auto* t = m.attr("alert_type")) types.insert(*t);
        }
    }
    return {types.begin(), types.end()};
}

// ---------------------------------------------------------------------------
// Time bins

struct TimeBinParams {
    Timestamp bin_width = kMicrosPerSecond;
    std::vector<std::string> sources;
    std::vector<std::string> alert_types;

    void validate() const
    {
        if (bin_width <= 0) throw Error(ErrorCode::BadConfig, "time_bin: bin_width must be positive");
        if (sources.empty()) throw Error(ErrorCode::BadConfig, "time_bin: sources must be non-empty");
        if (alert_types.empty()) throw Error(ErrorCode::BadConfig, "time_bin: alert_types must be non-empty");
        detail::require_unique(sources, "time_bin sources");
        detail::require_unique(alert_types, "time_bin alert_types");
    }

    /// [count per source..., count per alert type..., OTHER, total]
    std::size_t dim() const { return sources.size() + alert_types.size() + 2; }
};

/// Online one-bin-at-a-time summarizer. A bin is emitted once an event from a
/// later bin arrives (or on flush), so output never depends on future input.
class TimeBinner {
public:
    TimeBinner(TimeBinParams params, std::string name) : params_(std::move(params)), name_(std::move(name))
    {
        params_.validate();
        names_.reserve(params_.dim());
        for (const auto& s : params_.sources) names_.push_back("src:" + s);
        for (const auto& t : params_.alert_types) names_.push_back("type:" + t);
        names_.push_back(std::string("type:") + kOtherBucket);
        names_.push_back("total");
    }

    void push(const Event& e, EventList& out)
    {
        if (e.kind != EventKind::Alert)
            throw Error(ErrorCode::KindMismatch, "time_bin expects ALERT events, got " + std::string(to_string(e.kind)));
        if (last_ts_ && e.ts < *last_ts_)
            throw Error(ErrorCode::MalformedStream, "time_bin input unsorted at ts " + std::to_string(e.ts));
        last_ts_ = e.ts;
        const std::int64_t bin = e.ts / params_.bin_width;
        if (!current_) {
            start(bin);
        } else if (bin > *current_) {
            emit(out);
            for (std::int64_t b = *current_ + 1; b < bin; ++b) {
                start(b);
                emit(out);
            }
            start(bin);
        }
        const std::size_t src = detail::vocab_index(params_.sources, e.source);
        if (src < params_.sources.size()) counts_[src] += 1.0;
        const std::string* type = e.attr("alert_type");
        const std::size_t t = type ? detail::vocab_index(params_.alert_types, *type) : params_.alert_types.size();
        counts_[params_.sources.size() + t] += 1.0;
        counts_.back() += 1.0;
        if (e.label) label_ = e.label;
    }

    void flush(EventList& out)
    {
        if (current_) emit(out);
        current_.reset();
    }

private:
    void start(std::int64_t bin)
    {
        current_ = bin;
        counts_.assign(params_.dim(), 0.0);
    }

    void emit(EventList& out)
    {
        Event f;
        f.ts = (*current_ + 1) * params_.bin_width;
        f.source = name_;
        f.kind = EventKind::Feature;
        f.nums.reserve(names_.size());
        for (std::size_t i = 0; i < names_.size(); ++i) f.nums.emplace_back(names_[i], counts_[i]);
        // Empty bins inherit the label of the latest alert seen so far.
        f.label = label_;
        out.push_back(std::move(f));
    }

    TimeBinParams params_;
    std::string name_;
    std::vector<std::string> names_;
    std::optional<std::int64_t> current_;
    std::optional<Timestamp> last_ts_;
    std::vector<double> counts_;
    std::optional<StageId> label_;
};

inline EventList time_bin_summarize(std::span<const Event> events, const TimeBinParams& params,
                                    const std::string& name = "time_bin")
{
    require_sorted(events, "time_bin input");
    TimeBinner binner(params, name);
    EventList out;
    for (const Event& e : events) binner.push(e, out);
    binner.flush(out);
    return out;
}

// ---------------------------------------------------------------------------
// Sliding window

struct SlidingWindowParams {
    std::size_t size = 20;
    std::size_t stride = 1;

    void validate() const
    {
        if (size < 1) throw Error(ErrorCode::BadConfig, "sliding_window: size must be >= 1");
        if (stride < 1) throw Error(ErrorCode::BadConfig, "sliding_window: stride must be >= 1");
    }
};

/// Number of windows emitted for n_events inputs.
constexpr std::size_t expected_window_count(std::size_t n_events, std::size_t size, std::size_t stride)
{
    return n_events < size ? 0 : (n_events - size) / stride + 1;
}

class SlidingWindow {
public:
    SlidingWindow(SlidingWindowParams params, std::string name) : params_(params), name_(std::move(name))
    {
        params_.validate();
    }

    void push(const Event& e, EventList& out)
    {
        if (!buffer_.empty() && e.ts < buffer_.back().ts)
            throw Error(ErrorCode::MalformedStream, "sliding_window input unsorted at ts " + std::to_string(e.ts));
        buffer_.push_back(e);
        if (buffer_.size() > params_.size) buffer_.pop_front();
        ++arrivals_;
        if (arrivals_ < params_.size || (arrivals_ - params_.size) % params_.stride != 0) return;

        auto members = std::make_shared<EventList>(buffer_.begin(), buffer_.end());
        Event w;
        w.ts = members->back().ts;
        w.source = name_;
        w.kind = EventKind::Window;
        w.label = detail::latest_label(*members);
        w.members = std::move(members);
        out.push_back(std::move(w));
    }

    void flush(EventList&) {}

private:
    SlidingWindowParams params_;
    std::string name_;
    std::deque<Event> buffer_;
    std::size_t arrivals_ = 0;
};

inline EventList sliding_window(std::span<const Event> events, const SlidingWindowParams& params,
                                const std::string& name = "sliding_window")
{
    require_sorted(events, "sliding_window input");
    SlidingWindow window(params, name);
    EventList out;
    for (const Event& e : events) window.push(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Statistical window features

struct StatFeatureParams {
    std::vector<std::string> alert_types;
    std::vector<int> priorities;

    void validate() const
    {
        detail::require_unique(alert_types, "stat_features alert_types");
        std::set<int> seen;
        for (int p : priorities)
            if (!seen.insert(p).second) throw Error(ErrorCode::BadConfig, "duplicate priority " + std::to_string(p));
    }

    /// [count per alert type..., OTHER, count per priority..., mean inter-arrival]
    std::size_t dim() const { return alert_types.size() + 1 + priorities.size() + 1; }
};

/// Vocabulary (sorted alert types and priority levels) observed across window members.
inline StatFeatureParams learn_stat_vocabulary(std::span<const Event> windows)
{
    StatFeatureParams p;
    p.alert_types = collect_alert_types(windows);
    std::set<int> prios;
    for (const Event& w : windows) {
        if (!w.members) continue;
        for (const Event& m : *w.members)
            if (auto pr = m.num("priority")) prios.insert(static_cast<int>(std::lround(*pr)));
    }
    p.priorities.assign(prios.begin(), prios.end());
    return p;
}

inline Event stat_features(const Event& window, const StatFeatureParams& params, const std::string& name = "stat_features")
{
    if (window.kind != EventKind::Window || !window.members || window.members->empty())
        throw Error(ErrorCode::KindMismatch, "stat_features expects a non-empty WINDOW event");
    const EventList& members = *window.members;

    std::vector<double> v(params.dim(), 0.0);
    const std::size_t prio_base = params.alert_types.size() + 1;
    for (const Event& m : members) {
        if (m.kind != EventKind::Alert)
            throw Error(ErrorCode::KindMismatch, "stat_features window member is " + std::string(to_string(m.kind)));
        const std::string* type = m.attr("alert_type");
        v[type ? detail::vocab_index(params.alert_types, *type) : params.alert_types.size()] += 1.0;
        if (auto pr = m.num("priority")) {
            const int level = static_cast<int>(std::lround(*pr));
            auto it = std::find(params.priorities.begin(), params.priorities.end(), level);
            if (it != params.priorities.end()) v[prio_base + static_cast<std::size_t>(it - params.priorities.begin())] += 1.0;
        }
    }
    double mean_gap = 0.0;
    if (members.size() > 1)
        mean_gap = static_cast<double>(members.back().ts - members.front().ts) /
                   static_cast<double>(members.size() - 1) / static_cast<double>(kMicrosPerSecond);
    v.back() = mean_gap;

    Event f;
    f.ts = window.ts;
    f.source = name;
    f.kind = EventKind::Feature;
    f.label = window.label;
    f.nums.reserve(v.size());
    for (std::size_t i = 0; i < params.alert_types.size(); ++i) f.nums.emplace_back("type:" + params.alert_types[i], v[i]);
    f.nums.emplace_back(std::string("type:") + kOtherBucket, v[params.alert_types.size()]);
    for (std::size_t i = 0; i < params.priorities.size(); ++i)
        f.nums.emplace_back("prio:" + std::to_string(params.priorities[i]), v[prio_base + i]);
    f.nums.emplace_back("mean_iat", mean_gap);
    return f;
}

// ---------------------------------------------------------------------------
// Window flattening (fixed-length per-member encoding)

struct FlattenParams {
    std::vector<std::string> alert_types;
    std::size_t members = 0;
};

/// Per member: ALERT -> [alert type code, priority, seconds since previous member];
/// other kinds -> their nums. Windows shorter than params.members are left-padded with zeros.
inline std::vector<double> flatten_members(const Event& window, const FlattenParams& params)
{
    if (window.kind != EventKind::Window || !window.members)
        throw Error(ErrorCode::KindMismatch, "flatten expects a WINDOW event");
    const EventList& members = *window.members;
    std::vector<double> out;
    std::size_t per_member = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
        const Event& m = members[i];
        const std::size_t before = out.size();
        if (m.kind == EventKind::Alert) {
            const std::string* type = m.attr("alert_type");
            out.push_back(static_cast<double>(type ? detail::vocab_index(params.alert_types, *type) : params.alert_types.size()));
            out.push_back(m.num("priority").value_or(0.0));
            out.push_back(i == 0 ? 0.0 : static_cast<double>(m.ts - members[i - 1].ts) / static_cast<double>(kMicrosPerSecond));
        } else {
            for (const auto& nv : m.nums) out.push_back(nv.second);
        }
        per_member = out.size() - before;
    }
    if (params.members > members.size())
        out.insert(out.begin(), (params.members - members.size()) * per_member, 0.0);
    return out;
}

inline Event flatten_window(const Event& window, const FlattenParams& params, const std::string& name = "flatten")
{
    std::vector<double> v = flatten_members(window, params);
    Event f;
    f.ts = window.ts;
    f.source = name;
    f.kind = EventKind::Feature;
    f.label = window.label;
    f.nums.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) f.nums.emplace_back("x" + std::to_string(i), v[i]);
    return f;
}

// ---------------------------------------------------------------------------
// k-means categorizer

struct CategorizerParams {
    std::size_t k = 8;
    std::size_t max_iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (k < 1) throw Error(ErrorCode::BadConfig, "kmeans_categorizer: k must be >= 1");
        if (max_iters < 1) throw Error(ErrorCode::BadConfig, "kmeans_categorizer: max_iters must be >= 1");
        if (!(tol >= 0.0)) throw Error(ErrorCode::BadConfig, "kmeans_categorizer: tol must be >= 0");
    }
};

/// Centroids live in standardized space; mean/scale are frozen at fit.
struct CategorizerModel {
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<std::vector<double>> centroids;
    /// Within-cluster SSE (standardized space) after each assignment step.
    std::vector<double> sse_history;
    std::size_t iterations = 0;

    std::size_t dim() const { return mean.size(); }

    std::vector<double> standardize(std::span<const double> x) const
    {
        std::vector<double> z(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / scale[j];
        return z;
    }

    std::vector<std::vector<double>> centroids_original() const
    {
        std::vector<std::vector<double>> out = centroids;
        for (auto& c : out)
            for (std::size_t j = 0; j < c.size(); ++j) c[j] = c[j] * scale[j] + mean[j];
        return out;
    }

    /// Index of the nearest centroid; the lowest index wins ties.
    std::size_t nearest(std::span<const double> x) const
    {
        if (x.size() != dim())
            throw Error(ErrorCode::DimensionMismatch, "categorizer expects dim " + std::to_string(dim()) + ", got " +
                                                          std::to_string(x.size()));
        const std::vector<double> z = standardize(x);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            double d = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) {
                const double diff = z[j] - centroids[c][j];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }
};

inline CategorizerModel categorizer_fit(const std::vector<std::vector<double>>& vectors, const CategorizerParams& params)
{
    params.validate();
    if (vectors.empty()) throw Error(ErrorCode::InsufficientData, "categorizer needs at least k points, got 0");
    const std::size_t dim = vectors.front().size();
    for (const auto& v : vectors)
        if (v.size() != dim) throw Error(ErrorCode::DimensionMismatch, "categorizer input vectors differ in dimension");

    CategorizerModel model;
    model.mean.assign(dim, 0.0);
    model.scale.assign(dim, 0.0);
    const double n = static_cast<double>(vectors.size());
    for (const auto& v : vectors)
        for (std::size_t j = 0; j < dim; ++j) model.mean[j] += v[j];
    for (double& m : model.mean) m /= n;
    for (const auto& v : vectors)
        for (std::size_t j = 0; j < dim; ++j) model.scale[j] += (v[j] - model.mean[j]) * (v[j] - model.mean[j]);
    for (double& s : model.scale) {
        s = std::sqrt(s / n);
        if (!(s > 0.0)) s = 1.0;
    }

    std::vector<std::vector<double>> points;
    points.reserve(vectors.size());
    for (const auto& v : vectors) points.push_back(model.standardize(v));

    std::vector<std::vector<double>> distinct = points;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < params.k)
        throw Error(ErrorCode::InsufficientData, "categorizer needs " + std::to_string(params.k) + " distinct points, got " +
                                                     std::to_string(distinct.size()));

    Rng rng(params.seed);
    for (std::size_t idx : rng.sample_without_replacement(distinct.size(), params.k))
        model.centroids.push_back(distinct[idx]);

    std::vector<std::size_t> assign(points.size(), 0);
    for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
        double sse = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < params.k; ++c) {
                double d = 0.0;
                for (std::size_t j = 0; j < dim; ++j) {
                    const double diff = points[i][j] - model.centroids[c][j];
                    d += diff * diff;
                }
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
            sse += best_d;
        }
        model.sse_history.push_back(sse);

        std::vector<std::vector<double>> sums(params.k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(params.k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            ++counts[assign[i]];
            for (std::size_t j = 0; j < dim; ++j) sums[assign[i]][j] += points[i][j];
        }
        double movement = 0.0;
        for (std::size_t c = 0; c < params.k; ++c) {
            if (counts[c] == 0) continue; // empty cluster keeps its centroid
            double shift = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double updated = sums[c][j] / static_cast<double>(counts[c]);
                shift += (updated - model.centroids[c][j]) * (updated - model.centroids[c][j]);
                model.centroids[c][j] = updated;
            }
            movement = std::max(movement, std::sqrt(shift));
        }
        model.iterations = iter + 1;
        if (movement < params.tol) break;
    }
    return model;
}

inline Event categorizer_apply(const Event& input, const CategorizerModel& model, const std::string& name = "categorizer")
{
    const std::vector<double> x = input.values();
    const std::size_t category = model.nearest(x);
    Event c;
    c.ts = input.ts;
    c.source = name;
    c.kind = EventKind::Category;
    c.attrs["category"] = std::to_string(category);
    c.nums = input.nums;
    c.label = input.label;
    return c;
}

} // namespace modpred
