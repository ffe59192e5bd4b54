#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aggregators.hpp"
#include "classifiers.hpp"
#include "error.hpp"
#include "event.hpp"
#include "ingestion.hpp"

namespace modpred {

struct ComponentSpec {
    std::string name;
    std::string kind;
    json params = json::object();
    bool frozen = false;
    std::vector<std::string> inputs;

    friend bool operator==(const ComponentSpec&, const ComponentSpec&) = default;
};

/// Per-run mutable state of a component (window buffers, open time bins).
class ComponentStream {
public:
    virtual ~ComponentStream() = default;
    virtual void push(std::size_t port, const Event& e, EventList& out) = 0;
    /// End of a trace; only used when materializing training streams.
    virtual void flush(EventList&) {}
};

/// Immutable, fitted (or stateless) component.
class FittedComponent {
public:
    virtual ~FittedComponent() = default;
    virtual std::unique_ptr<ComponentStream> open() const = 0;
    /// Learned state as a params overlay; empty object for stateless components.
    virtual json state() const { return json::object(); }
};

using FittedComponentPtr = std::shared_ptr<const FittedComponent>;

struct ComponentFit {
    FittedComponentPtr component;
    std::size_t samples = 0;
    /// samples x dimensionality of what was learned from.
    double work = 0.0;
};

enum class ComponentRole { Source, Transform, Classifier };

struct ComponentType {
    std::string kind;
    ComponentRole role = ComponentRole::Transform;
    std::vector<EventKind> accepts;
    bool multi_input = false;
    std::function<EventKind(const json&)> output_kind;
    /// Throws BadConfig naming the offending key.
    std::function<void(const json&)> check_params;
    /// True when the component has learned state that params do not supply.
    std::function<bool(const json&)> needs_state;
    std::function<FittedComponentPtr(const ComponentSpec&, const StageCatalog&)> build;
    /// Learns from the materialized input stream of each training trace.
    std::function<ComponentFit(const ComponentSpec&, const StageCatalog&, const std::vector<EventList>&, std::uint64_t seed)> fit;
};

// ---------------------------------------------------------------------------
// Typed access to a component's params with strict key checking

class ParamReader {
public:
    ParamReader(const json& params, std::string kind) : params_(params), kind_(std::move(kind))
    {
        if (!params_.is_object()) throw Error(ErrorCode::BadConfig, kind_ + ": params must be an object");
    }

    void allow_only(std::initializer_list<const char*> keys) const
    {
        for (const auto& [key, _] : params_.items()) {
            bool known = false;
            for (const char* k : keys) known = known || key == k;
            if (!known) throw Error(ErrorCode::BadConfig, kind_ + ": unknown param \"" + key + "\"");
        }
    }

    bool has(const char* key) const { return params_.contains(key) && !params_[key].is_null(); }

    template <class T>
    T get(const char* key, T fallback) const
    {
        return has(key) ? get<T>(key) : fallback;
    }

    template <class T>
    T get(const char* key) const
    {
        if (!has(key)) throw Error(ErrorCode::BadConfig, kind_ + ": missing param \"" + key + "\"");
        const json& v = params_[key];
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer() || v.get<long long>() < 0) throw std::invalid_argument("non-negative integer");
            } else if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, int>) {
                if (!v.is_number_integer()) throw std::invalid_argument("integer");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw std::invalid_argument("number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::invalid_argument("boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("string");
            }
            return v.get<T>();
        } catch (const std::exception& e) {
            throw Error(ErrorCode::BadConfig, kind_ + ": param \"" + key + "\" has wrong type (" + e.what() + ")");
        }
    }

private:
    const json& params_;
    std::string kind_;
};

namespace components {

inline Event prediction_event(const Prediction& p, const StageCatalog& catalog, const std::string& name)
{
    Event e;
    e.ts = p.ts;
    e.source = name;
    e.kind = EventKind::Prediction;
    e.attrs["stage"] = catalog.name(p.stage);
    for (std::size_t i = 0; i < p.probs.size(); ++i) e.nums.emplace_back("p:" + catalog.names()[i], p.probs[i]);
    return e;
}

/// Stateless per-event component built from a function.
template <class Fn>
class MapComponent final : public FittedComponent {
public:
    MapComponent(Fn fn, json state = json::object()) : fn_(std::move(fn)), state_(std::move(state)) {}

    std::unique_ptr<ComponentStream> open() const override
    {
        struct Stream final : ComponentStream {
            const Fn* fn;
            explicit Stream(const Fn* f) : fn(f) {}
            void push(std::size_t, const Event& e, EventList& out) override { (*fn)(e, out); }
        };
        return std::make_unique<Stream>(&fn_);
    }

    json state() const override { return state_; }

private:
    Fn fn_;
    json state_;
};

template <class Fn>
FittedComponentPtr make_map(Fn fn, json state = json::object())
{
    return std::make_shared<const MapComponent<Fn>>(std::move(fn), std::move(state));
}

/// Component whose stream wraps a stateful aggregator (TimeBinner, SlidingWindow).
template <class Aggregator, class Params>
class AggregatorComponent final : public FittedComponent {
public:
    AggregatorComponent(Params params, std::string name, json state = json::object())
        : params_(std::move(params)), name_(std::move(name)), state_(std::move(state))
    {
    }

    std::unique_ptr<ComponentStream> open() const override
    {
        struct Stream final : ComponentStream {
            Aggregator agg;
            Stream(const Params& p, const std::string& n) : agg(p, n) {}
            void push(std::size_t, const Event& e, EventList& out) override { agg.push(e, out); }
            void flush(EventList& out) override { agg.flush(out); }
        };
        return std::make_unique<Stream>(params_, name_);
    }

    json state() const override { return state_; }

private:
    Params params_;
    std::string name_;
    json state_;
};

inline EventList concat(const std::vector<EventList>& streams)
{
    EventList all;
    for (const auto& s : streams) all.insert(all.end(), s.begin(), s.end());
    return all;
}

inline std::vector<std::string> string_list(const ParamReader& r, const char* key)
{
    return r.get<std::vector<std::string>>(key, {});
}

// -- sources ----------------------------------------------------------------

inline ComponentType trace_source()
{
    ComponentType t;
    t.kind = "trace_source";
    t.role = ComponentRole::Source;
    t.output_kind = [](const json& p) {
        ParamReader r(p, "trace_source");
        auto kind = parse_event_kind(r.get<std::string>("kind", "ALERT"));
        return kind.value_or(EventKind::Alert);
    };
    t.check_params = [](const json& p) {
        ParamReader r(p, "trace_source");
        r.allow_only({"source", "kind"});
        r.get<std::string>("source", "");
        if (!parse_event_kind(r.get<std::string>("kind", "ALERT")))
            throw Error(ErrorCode::BadConfig, "trace_source: unknown kind \"" + r.get<std::string>("kind") + "\"");
    };
    t.needs_state = [](const json&) { return false; };
    t.build = [](const ComponentSpec& spec, const StageCatalog&) {
        ParamReader r(spec.params, spec.kind);
        const std::string source = r.get<std::string>("source", "");
        const EventKind kind = *parse_event_kind(r.get<std::string>("kind", "ALERT"));
        return make_map([source, kind](const Event& e, EventList& out) {
            if (e.kind == kind && (source.empty() || e.source == source)) out.push_back(e);
        });
    };
    return t;
}

/// Turns RAW events carrying a fast-alert line in attrs["line"] into ALERTs;
/// unparseable lines are dropped.
inline ComponentType snort_parser_source()
{
    ComponentType t;
    t.kind = "snort_parser_source";
    t.role = ComponentRole::Source;
    t.output_kind = [](const json&) { return EventKind::Alert; };
    t.check_params = [](const json& p) {
        ParamReader r(p, "snort_parser_source");
        r.allow_only({"year", "source", "output_source"});
        r.get<int>("year");
        r.get<std::string>("source", "");
        r.get<std::string>("output_source", "snort");
    };
    t.needs_state = [](const json&) { return false; };
    t.build = [](const ComponentSpec& spec, const StageCatalog&) {
        ParamReader r(spec.params, spec.kind);
        const int year = r.get<int>("year");
        const std::string source = r.get<std::string>("source", "");
        const std::string out_source = r.get<std::string>("output_source", "snort");
        return make_map([=](const Event& e, EventList& out) {
            if (e.kind != EventKind::Raw || (!source.empty() && e.source != source)) return;
            const std::string* line = e.attr("line");
            if (!line) return;
            try {
                Event alert = parse_snort_line(*line, year).to_event(out_source);
                alert.label = e.label;
                out.push_back(std::move(alert));
            } catch (const Error&) {
            }
        });
    };
    return t;
}

// -- aggregators ------------------------------------------------------------

inline ComponentType time_bin()
{
    ComponentType t;
    t.kind = "time_bin";
    t.accepts = {EventKind::Alert};
    t.multi_input = true;
    t.output_kind = [](const json&) { return EventKind::Feature; };
    t.check_params = [](const json& p) {
        ParamReader r(p, "time_bin");
        r.allow_only({"bin_width", "sources", "alert_types"});
        if (r.get<std::int64_t>("bin_width", kMicrosPerSecond) <= 0)
            throw Error(ErrorCode::BadConfig, "time_bin: bin_width must be positive");
        auto sources = string_list(r, "sources");
        auto types = string_list(r, "alert_types");
        if (r.has("sources") && sources.empty()) throw Error(ErrorCode::BadConfig, "time_bin: sources must be non-empty");
        if (r.has("alert_types") && types.empty()) throw Error(ErrorCode::BadConfig, "time_bin: alert_types must be non-empty");
        detail::require_unique(sources, "time_bin sources");
        detail::require_unique(types, "time_bin alert_types");
    };
    t.needs_state = [](const json& p) {
        ParamReader r(p, "time_bin");
        return !r.has("sources") || !r.has("alert_types");
    };
    auto params_of = [](const json& p) {
        ParamReader r(p, "time_bin");
        return TimeBinParams{r.get<std::int64_t>("bin_width", kMicrosPerSecond), string_list(r, "sources"),
                             string_list(r, "alert_types")};
    };
    t.build = [params_of](const ComponentSpec& spec, const StageCatalog&) -> FittedComponentPtr {
        return std::make_shared<const AggregatorComponent<TimeBinner, TimeBinParams>>(params_of(spec.params), spec.name);
    };
    t.fit = [params_of](const ComponentSpec& spec, const StageCatalog&, const std::vector<EventList>& inputs, std::uint64_t) {
        TimeBinParams p = params_of(spec.params);
        std::size_t n = 0;
        std::set<std::string> sources;
        for (const auto& trace : inputs)
            for (const Event& e : trace) sources.insert(e.source), ++n;
        if (p.sources.empty()) p.sources.assign(sources.begin(), sources.end());
        if (p.alert_types.empty()) p.alert_types = collect_alert_types(concat(inputs));
        if (p.sources.empty() || p.alert_types.empty())
            throw Error(ErrorCode::InsufficientData, "time_bin " + spec.name + ": no alerts to learn vocabularies from");
        json state{{"sources", p.sources}, {"alert_types", p.alert_types}};
        return ComponentFit{std::make_shared<const AggregatorComponent<TimeBinner, TimeBinParams>>(p, spec.name, state), n,
                            static_cast<double>(n)};
    };
    return t;
}

inline ComponentType sliding_window()
{
    ComponentType t;
    t.kind = "sliding_window";
    t.accepts = {EventKind::Raw, EventKind::Alert, EventKind::Window, EventKind::Feature, EventKind::Category,
                 EventKind::Prediction};
    t.multi_input = true;
    t.output_kind = [](const json&) { return EventKind::Window; };
    t.check_params = [](const json& p) {
        ParamReader r(p, "sliding_window");
        r.allow_only({"size", "stride"});
        SlidingWindowParams{r.get<std::size_t>("size", 20), r.get<std::size_t>("stride", 1)}.validate();
    };
    t.needs_state = [](const json&) { return false; };
    t.build = [](const ComponentSpec& spec, const StageCatalog&) -> FittedComponentPtr {
        ParamReader r(spec.params, spec.kind);
        SlidingWindowParams p{r.get<std::size_t>("size", 20), r.get<std::size_t>("stride", 1)};
        return std::make_shared<const AggregatorComponent<SlidingWindow, SlidingWindowParams>>(p, spec.name);
    };
    return t;
}

inline ComponentType stat_features()
{
    ComponentType t;
    t.kind = "stat_features";
    t.accepts = {EventKind::Window};
    t.output_kind = [](const json&) { return EventKind::Feature; };
    t.check_params = [](const json& p) {
        ParamReader r(p, "stat_features");
        r.allow_only({"alert_types", "priorities"});
        StatFeatureParams{string_list(r, "alert_types"), r.get<std::vector<int>>("priorities", {})}.validate();
    };
    t.needs_state = [](const json& p) {
        ParamReader r(p, "stat_features");
        return !r.has("alert_types") || !r.has("priorities");
    };
    auto make = [](StatFeatureParams p, const std::string& name, json state) {
        return make_map([p = std::move(p), name](const Event& e, EventList& out) { out.push_back(stat_features(e, p, name)); },
                        std::move(state));
    };
    t.build = [make](const ComponentSpec& spec, const StageCatalog&) {
        ParamReader r(spec.params, spec.kind);
        return make(StatFeatureParams{string_list(r, "alert_types"), r.get<std::vector<int>>("priorities", {})}, spec.name,
                    json::object());
    };
    t.fit = [make](const ComponentSpec& spec, const StageCatalog&, const std::vector<EventList>& inputs, std::uint64_t) {
        ParamReader r(spec.params, spec.kind);
        const EventList all = concat(inputs);
        StatFeatureParams learned = learn_stat_vocabulary(all);
        StatFeatureParams p{r.has("alert_types") ? string_list(r, "alert_types") : learned.alert_types,
                            r.has("priorities") ? r.get<std::vector<int>>("priorities") : learned.priorities};
        json state{{"alert_types", p.alert_types}, {"priorities", p.priorities}};
        return ComponentFit{make(p, spec.name, state), all.size(), static_cast<double>(all.size())};
    };
    return t;
}

inline ComponentType flatten()
{
    ComponentType t;
    t.kind = "flatten";
    t.accepts = {EventKind::Window};
    t.output_kind = [](const json&) { return EventKind::Feature; };
    t.check_params = [](const json& p) {
        ParamReader r(p, "flatten");
        r.allow_only({"alert_types", "members"});
        detail::require_unique(string_list(r, "alert_types"), "flatten alert_types");
        r.get<std::size_t>("members", 0);
    };
    t.needs_state = [](const json& p) { return !ParamReader(p, "flatten").has("alert_types"); };
    auto make = [](FlattenParams p, const std::string& name, json state) {
        return make_map([p = std::move(p), name](const Event& e, EventList& out) { out.push_back(flatten_window(e, p, name)); },
                        std::move(state));
    };
    t.build = [make](const ComponentSpec& spec, const StageCatalog&) {
        ParamReader r(spec.params, spec.kind);
        return make(FlattenParams{string_list(r, "alert_types"), r.get<std::size_t>("members", 0)}, spec.name, json::object());
    };
    t.fit = [make](const ComponentSpec& spec, const StageCatalog&, const std::vector<EventList>& inputs, std::uint64_t) {
        ParamReader r(spec.params, spec.kind);
        const EventList all = concat(inputs);
        FlattenParams p{r.has("alert_types") ? string_list(r, "alert_types") : collect_alert_types(all),
                        r.get<std::size_t>("members", 0)};
        if (p.members == 0)
            for (const Event& w : all)
                if (w.members) p.members = std::max(p.members, w.members->size());
        json state{{"alert_types", p.alert_types}, {"members", p.members}};
        return ComponentFit{make(p, spec.name, state), all.size(), static_cast<double>(all.size())};
    };
    return t;
}

inline ComponentType kmeans_categorizer()
{
    ComponentType t;
    t.kind = "kmeans_categorizer";
    t.accepts = {EventKind::Feature};
    t.output_kind = [](const json&) { return EventKind::Category; };
    auto params_of = [](const json& p) {
        ParamReader r(p, "kmeans_categorizer");
        return CategorizerParams{r.get<std::size_t>("k", 8), r.get<std::size_t>("max_iters", 100), r.get<double>("tol", 1e-6),
                                 r.get<std::uint64_t>("seed", 0)};
    };
    t.check_params = [params_of](const json& p) {
        ParamReader r(p, "kmeans_categorizer");
        r.allow_only({"k", "max_iters", "tol", "seed", "centroids", "mean", "scale"});
        params_of(p).validate();
        if (r.has("centroids") || r.has("mean") || r.has("scale")) {
            auto c = r.get<std::vector<std::vector<double>>>("centroids");
            auto m = r.get<std::vector<double>>("mean");
            auto s = r.get<std::vector<double>>("scale");
            if (c.empty() || m.size() != s.size())
                throw Error(ErrorCode::BadConfig, "kmeans_categorizer: centroids/mean/scale inconsistent");
            for (const auto& row : c)
                if (row.size() != m.size()) throw Error(ErrorCode::BadConfig, "kmeans_categorizer: centroid dimension");
            for (double v : s)
                if (!(v > 0.0)) throw Error(ErrorCode::BadConfig, "kmeans_categorizer: scale must be positive");
        }
    };
    t.needs_state = [](const json& p) { return !ParamReader(p, "kmeans_categorizer").has("centroids"); };
    auto make = [](CategorizerModel model, const std::string& name) {
        json state{{"centroids", model.centroids}, {"mean", model.mean}, {"scale", model.scale}};
        auto shared = std::make_shared<const CategorizerModel>(std::move(model));
        return make_map([shared, name](const Event& e, EventList& out) { out.push_back(categorizer_apply(e, *shared, name)); },
                        std::move(state));
    };
    t.build = [make](const ComponentSpec& spec, const StageCatalog&) {
        ParamReader r(spec.params, spec.kind);
        CategorizerModel m;
        m.centroids = r.get<std::vector<std::vector<double>>>("centroids");
        m.mean = r.get<std::vector<double>>("mean");
        m.scale = r.get<std::vector<double>>("scale");
        return make(std::move(m), spec.name);
    };
    t.fit = [make, params_of](const ComponentSpec& spec, const StageCatalog&, const std::vector<EventList>& inputs,
                              std::uint64_t seed) {
        CategorizerParams p = params_of(spec.params);
        p.seed += seed;
        std::vector<std::vector<double>> vectors;
        for (const auto& trace : inputs)
            for (const Event& e : trace) vectors.push_back(e.values());
        const double dim = vectors.empty() ? 0.0 : static_cast<double>(vectors.front().size());
        const std::size_t n = vectors.size();
        return ComponentFit{make(categorizer_fit(vectors, p), spec.name), n, static_cast<double>(n) * dim};
    };
    return t;
}

// -- classifiers ------------------------------------------------------------

/// Shared fit/predict wrapper: vectorizes inputs, delegates to a model.
template <class Model>
class ClassifierComponent final : public FittedComponent {
public:
    ClassifierComponent(Vectorizer vec, Model model, StageCatalog catalog, std::string name)
        : vec_(std::move(vec)), model_(std::move(model)), catalog_(std::move(catalog)), name_(std::move(name))
    {
    }

    std::unique_ptr<ComponentStream> open() const override
    {
        struct Stream final : ComponentStream {
            const ClassifierComponent* self;
            explicit Stream(const ClassifierComponent* s) : self(s) {}
            void push(std::size_t, const Event& e, EventList& out) override
            {
                out.push_back(prediction_event(self->predict(e), self->catalog_, self->name_));
            }
        };
        return std::make_unique<Stream>(this);
    }

    Prediction predict(const Event& e) const
    {
        if constexpr (std::is_same_v<Model, MajorityBaseline>) {
            return model_.predict(e.ts, name_);
        } else {
            return model_.predict(vec_(e), e.ts, name_);
        }
    }

    json state() const override { return json{{"model", model_.to_json()}, {"vectorizer", vec_.to_json()}}; }

private:
    Vectorizer vec_;
    Model model_;
    StageCatalog catalog_;
    std::string name_;
};

inline ComponentType random_forest()
{
    ComponentType t;
    t.kind = "random_forest";
    t.role = ComponentRole::Classifier;
    t.accepts = {EventKind::Feature, EventKind::Category, EventKind::Alert, EventKind::Window};
    t.output_kind = [](const json&) { return EventKind::Prediction; };
    auto params_of = [](const json& p) {
        ParamReader r(p, "random_forest");
        ForestParams f;
        f.n_trees = r.get<std::size_t>("n_trees", 50);
        if (r.has("max_depth")) f.max_depth = r.get<std::size_t>("max_depth");
        f.min_samples_split = r.get<std::size_t>("min_samples_split", 2);
        if (r.has("features_per_split")) f.features_per_split = r.get<std::size_t>("features_per_split");
        f.bootstrap = r.get<bool>("bootstrap", true);
        f.seed = r.get<std::uint64_t>("seed", 0);
        return f;
    };
    t.check_params = [params_of](const json& p) {
        ParamReader(p, "random_forest")
            .allow_only({"n_trees", "max_depth", "min_samples_split", "features_per_split", "bootstrap", "seed", "model",
                         "vectorizer"});
        params_of(p).validate();
    };
    t.needs_state = [](const json& p) { return !ParamReader(p, "random_forest").has("model"); };
    t.build = [](const ComponentSpec& spec, const StageCatalog& catalog) -> FittedComponentPtr {
        ParamReader r(spec.params, spec.kind);
        try {
            return std::make_shared<const ClassifierComponent<RandomForest>>(
                Vectorizer::from_json(r.get<json>("vectorizer")), RandomForest::from_json(r.get<json>("model")), catalog,
                spec.name);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::BadModel, spec.name + ": " + e.what());
        }
    };
    t.fit = [params_of](const ComponentSpec& spec, const StageCatalog& catalog, const std::vector<EventList>& inputs,
                        std::uint64_t seed) {
        ForestParams p = params_of(spec.params);
        p.seed += seed;
        EventList labeled;
        for (const auto& trace : inputs)
            for (const Event& e : trace)
                if (e.label) labeled.push_back(e);
        if (labeled.empty()) throw Error(ErrorCode::NoLabels, spec.name + ": materialized training stream has no labels");
        Vectorizer vec = Vectorizer::learn(labeled);
        TrainingMatrix data;
        data.dim = vec.dim();
        for (const Event& e : labeled) data.add(vec(e), *e.label);
        if (data.distinct_labels() < 2)
            throw Error(ErrorCode::InsufficientData, spec.name + ": classifier needs at least 2 distinct labels");
        RandomForest forest = RandomForest::fit(data, catalog.size(), p);
        const std::size_t n = data.size();
        const double work = static_cast<double>(n) * static_cast<double>(std::max<std::size_t>(data.dim, 1)) *
                            static_cast<double>(p.n_trees);
        return ComponentFit{std::make_shared<const ClassifierComponent<RandomForest>>(std::move(vec), std::move(forest),
                                                                                      catalog, spec.name),
                            n, work};
    };
    return t;
}

inline ComponentType majority_baseline()
{
    ComponentType t;
    t.kind = "majority_baseline";
    t.role = ComponentRole::Classifier;
    t.accepts = {EventKind::Raw, EventKind::Alert, EventKind::Window, EventKind::Feature, EventKind::Category,
                 EventKind::Prediction};
    t.output_kind = [](const json&) { return EventKind::Prediction; };
    t.check_params = [](const json& p) {
        ParamReader r(p, "majority_baseline");
        r.allow_only({"probs", "model", "vectorizer"});
        if (r.has("probs")) {
            auto probs = r.get<std::vector<double>>("probs");
            double sum = 0.0;
            for (double v : probs) {
                if (v < 0.0) throw Error(ErrorCode::BadConfig, "majority_baseline: negative probability");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::BadConfig, "majority_baseline: probs must sum to 1");
        }
    };
    t.needs_state = [](const json& p) {
        ParamReader r(p, "majority_baseline");
        return !r.has("probs") && !r.has("model");
    };
    t.build = [](const ComponentSpec& spec, const StageCatalog& catalog) -> FittedComponentPtr {
        ParamReader r(spec.params, spec.kind);
        json model = r.has("model") ? r.get<json>("model") : json{{"probs", r.get<std::vector<double>>("probs")}};
        MajorityBaseline b = MajorityBaseline::from_json(model);
        if (b.probs().size() != catalog.size())
            throw Error(ErrorCode::BadConfig, spec.name + ": probs size differs from catalog size");
        return std::make_shared<const ClassifierComponent<MajorityBaseline>>(Vectorizer{}, std::move(b), catalog, spec.name);
    };
    t.fit = [](const ComponentSpec& spec, const StageCatalog& catalog, const std::vector<EventList>& inputs, std::uint64_t) {
        std::vector<StageId> labels;
        for (const auto& trace : inputs)
            for (const Event& e : trace)
                if (e.label) labels.push_back(*e.label);
        if (labels.empty()) throw Error(ErrorCode::NoLabels, spec.name + ": materialized training stream has no labels");
        const std::size_t n = labels.size();
        return ComponentFit{std::make_shared<const ClassifierComponent<MajorityBaseline>>(
                                Vectorizer{}, MajorityBaseline::fit(labels, catalog.size()), catalog, spec.name),
                            n, static_cast<double>(n)};
    };
    return t;
}

} // namespace components

/// All registered component kinds.
inline const std::map<std::string, ComponentType>& component_registry()
{
    static const std::map<std::string, ComponentType> registry = [] {
        std::map<std::string, ComponentType> m;
        for (ComponentType t : {components::trace_source(), components::snort_parser_source(), components::time_bin(),
                                components::sliding_window(), components::stat_features(), components::flatten(),
                                components::kmeans_categorizer(), components::random_forest(),
                                components::majority_baseline()})
            m.emplace(t.kind, std::move(t));
        return m;
    }();
    return registry;
}

inline const ComponentType* find_component_type(const std::string& kind)
{
    const auto& reg = component_registry();
    auto it = reg.find(kind);
    return it == reg.end() ? nullptr : &it->second;
}

} // namespace modpred
