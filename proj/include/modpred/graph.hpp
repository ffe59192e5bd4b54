#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "components.hpp"
#include "error.hpp"
#include "event.hpp"

namespace modpred {

struct PredictorGraph {
    StageCatalog catalog;
    std::vector<ComponentSpec> components;
    std::vector<std::string> sinks;

    const ComponentSpec* find(const std::string& name) const
    {
        for (const auto& c : components)
            if (c.name == name) return &c;
        return nullptr;
    }

    friend bool operator==(const PredictorGraph&, const PredictorGraph&) = default;
};

enum class GraphViolationKind {
    EmptyGraph,
    DuplicateName,
    UnknownKind,
    BadParams,
    UnknownInput,
    SourceWithInputs,
    MissingInputs,
    ClassifierArity,
    CycleDetected,
    KindMismatch,
    NoSinks,
    UnknownSink,
    SinkNotPrediction,
    Unreachable,
    MissingPretrainedState,
};

inline std::string_view to_string(GraphViolationKind k) noexcept
{
    switch (k) {
    case GraphViolationKind::EmptyGraph: return "EmptyGraph";
    case GraphViolationKind::DuplicateName: return "DuplicateName";
    case GraphViolationKind::UnknownKind: return "UnknownKind";
    case GraphViolationKind::BadParams: return "BadParams";
    case GraphViolationKind::UnknownInput: return "UnknownInput";
    case GraphViolationKind::SourceWithInputs: return "SourceWithInputs";
    case GraphViolationKind::MissingInputs: return "MissingInputs";
    case GraphViolationKind::ClassifierArity: return "ClassifierArity";
    case GraphViolationKind::CycleDetected: return "CycleDetected";
    case GraphViolationKind::KindMismatch: return "KindMismatch";
    case GraphViolationKind::NoSinks: return "NoSinks";
    case GraphViolationKind::UnknownSink: return "UnknownSink";
    case GraphViolationKind::SinkNotPrediction: return "SinkNotPrediction";
    case GraphViolationKind::Unreachable: return "Unreachable";
    case GraphViolationKind::MissingPretrainedState: return "MissingPretrainedState";
    }
    return "?";
}

struct GraphViolation {
    GraphViolationKind kind;
    /// Components (or the producer/consumer pair of an edge) involved.
    std::vector<std::string> names;
    std::string detail;

    std::string to_string() const
    {
        std::string s(modpred::to_string(kind));
        s += "{";
        for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
        s += "}";
        if (!detail.empty()) s += ": " + detail;
        return s;
    }
};

namespace detail {

/// Kahn's algorithm with ties resolved by declaration order. Components left
/// over (on a cycle or depending on one) are returned in `stuck`.
inline std::vector<std::size_t> topological_order(const PredictorGraph& g, std::vector<std::size_t>* stuck = nullptr)
{
    const std::size_t n = g.components.size();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index.emplace(g.components[i].name, i);
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<std::size_t>> consumers(n);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& in : g.components[i].inputs) {
            auto it = index.find(in);
            if (it == index.end()) continue;
            ++indegree[i];
            consumers[it->second].push_back(i);
        }
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.insert(i);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        const std::size_t i = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(i);
        for (std::size_t c : consumers[i])
            if (--indegree[c] == 0) ready.insert(c);
    }
    if (stuck)
        for (std::size_t i = 0; i < n; ++i)
            if (indegree[i] > 0) stuck->push_back(i);
    return order;
}

} // namespace detail

/// Empty iff the graph is well formed: a DAG of registered, kind-compatible
/// components whose sinks emit predictions.
inline std::vector<GraphViolation> validate_graph(const PredictorGraph& g)
{
    using K = GraphViolationKind;
    std::vector<GraphViolation> out;
    if (g.components.empty()) out.push_back({K::EmptyGraph, {}, "graph has no components"});

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < g.components.size(); ++i)
        if (!index.emplace(g.components[i].name, i).second)
            out.push_back({K::DuplicateName, {g.components[i].name}, "component name used twice"});

    std::vector<const ComponentType*> types(g.components.size(), nullptr);
    std::vector<std::optional<EventKind>> produces(g.components.size());
    for (std::size_t i = 0; i < g.components.size(); ++i) {
        const ComponentSpec& c = g.components[i];
        types[i] = find_component_type(c.kind);
        if (!types[i]) {
            out.push_back({K::UnknownKind, {c.name}, "unregistered kind \"" + c.kind + "\""});
            continue;
        }
        const ComponentType& t = *types[i];
        try {
            t.check_params(c.params);
            produces[i] = t.output_kind(c.params);
            if (c.frozen && t.needs_state(c.params))
                out.push_back({K::MissingPretrainedState, {c.name}, "frozen " + c.kind + " needs its learned state in params"});
        } catch (const Error& e) {
            out.push_back({K::BadParams, {c.name}, e.what()});
        }
        if (t.role == ComponentRole::Source && !c.inputs.empty())
            out.push_back({K::SourceWithInputs, {c.name}, "source components take no inputs"});
        if (t.role != ComponentRole::Source && c.inputs.empty())
            out.push_back({K::MissingInputs, {c.name}, "component has no inputs"});
        if (t.role == ComponentRole::Classifier && c.inputs.size() > 1)
            out.push_back({K::ClassifierArity, {c.name}, "classifiers take exactly one input"});
        if (t.role == ComponentRole::Transform && !t.multi_input && c.inputs.size() > 1)
            out.push_back({K::ClassifierArity, {c.name}, c.kind + " takes exactly one input"});
        for (const auto& in : c.inputs)
            if (!index.count(in)) out.push_back({K::UnknownInput, {c.name, in}, "input \"" + in + "\" does not exist"});
    }

    std::vector<std::size_t> stuck;
    detail::topological_order(g, &stuck);
    if (!stuck.empty()) {
        GraphViolation v{K::CycleDetected, {}, "inputs form a cycle"};
        for (std::size_t i : stuck) v.names.push_back(g.components[i].name);
        out.push_back(std::move(v));
    }

    for (std::size_t i = 0; i < g.components.size(); ++i) {
        if (!types[i]) continue;
        for (const auto& in : g.components[i].inputs) {
            auto it = index.find(in);
            if (it == index.end() || !produces[it->second]) continue;
            const EventKind k = *produces[it->second];
            const auto& acc = types[i]->accepts;
            if (types[i]->role != ComponentRole::Source && std::find(acc.begin(), acc.end(), k) == acc.end())
                out.push_back({K::KindMismatch, {in, g.components[i].name},
                               g.components[i].kind + " does not accept " + std::string(to_string(k))});
        }
    }

    if (g.sinks.empty()) out.push_back({K::NoSinks, {}, "graph declares no sinks"});
    for (const auto& s : g.sinks) {
        auto it = index.find(s);
        if (it == index.end()) {
            out.push_back({K::UnknownSink, {s}, "sink does not exist"});
        } else if (produces[it->second] && *produces[it->second] != EventKind::Prediction) {
            out.push_back({K::SinkNotPrediction, {s}, "sink emits " + std::string(to_string(*produces[it->second]))});
        }
    }

    // Every component must be fed, transitively, by a source.
    std::vector<bool> reached(g.components.size(), false);
    for (std::size_t i : detail::topological_order(g)) {
        if (types[i] && types[i]->role == ComponentRole::Source) {
            reached[i] = true;
            continue;
        }
        for (const auto& in : g.components[i].inputs) {
            auto it = index.find(in);
            if (it != index.end() && reached[it->second]) reached[i] = true;
        }
    }
    for (std::size_t i = 0; i < g.components.size(); ++i)
        if (types[i] && !reached[i] && stuck.end() == std::find(stuck.begin(), stuck.end(), i))
            out.push_back({K::Unreachable, {g.components[i].name}, "not reachable from any source"});
    return out;
}

inline void require_valid(const PredictorGraph& g)
{
    const auto violations = validate_graph(g);
    if (violations.empty()) return;
    std::string msg;
    for (const auto& v : violations) msg += (msg.empty() ? "" : "; ") + v.to_string();
    throw Error(ErrorCode::InvalidGraph, msg);
}

// ---------------------------------------------------------------------------
// Fitted predictor

struct ComponentReport {
    std::string name;
    std::string kind;
    bool frozen = false;
    bool trained = false;
    std::size_t samples = 0;
    double work = 0.0;
    double seconds = 0.0;
};

struct TrainingReport {
    std::vector<ComponentReport> components;
    double total_seconds = 0.0;

    std::size_t total_samples() const
    {
        std::size_t n = 0;
        for (const auto& c : components) n += c.samples;
        return n;
    }

    double total_work() const
    {
        double w = 0.0;
        for (const auto& c : components) w += c.work;
        return w;
    }
};

class FittedPredictor {
public:
    FittedPredictor(PredictorGraph graph, std::map<std::string, FittedComponentPtr> parts, TrainingReport report = {})
        : graph_(std::move(graph)), parts_(std::move(parts)), report_(std::move(report)), order_(detail::topological_order(graph_))
    {
    }

    const PredictorGraph& graph() const noexcept { return graph_; }
    const TrainingReport& training_report() const noexcept { return report_; }
    const std::vector<std::size_t>& order() const noexcept { return order_; }

    const FittedComponent& part(const std::string& name) const
    {
        auto it = parts_.find(name);
        if (it == parts_.end() || !it->second)
            throw Error(ErrorCode::UnfittedComponent, "component \"" + name + "\" has no fitted state");
        return *it->second;
    }

    bool has_part(const std::string& name) const { return parts_.count(name) && parts_.at(name); }

    /// Learned state per component, keyed by name.
    json states() const
    {
        json out = json::object();
        for (const auto& c : graph_.components)
            if (has_part(c.name)) out[c.name] = parts_.at(c.name)->state();
        return out;
    }

private:
    PredictorGraph graph_;
    std::map<std::string, FittedComponentPtr> parts_;
    TrainingReport report_;
    std::vector<std::size_t> order_;
};

/// Observer for events delivered to a component: (component name, input port, event).
using DeliveryObserver = std::function<void(const std::string&, std::size_t, const Event&)>;

/// Pushes events one at a time through a fitted graph. Each component is
/// evaluated once per input event; fan-out consumers share its outputs.
class OnlineRunner {
public:
    explicit OnlineRunner(const FittedPredictor& fitted, DeliveryObserver observer = {})
        : fitted_(fitted), observer_(std::move(observer))
    {
        const PredictorGraph& g = fitted_.graph();
        for (std::size_t i = 0; i < g.components.size(); ++i) index_.emplace(g.components[i].name, i);
        streams_.resize(g.components.size());
        for (std::size_t i : fitted_.order()) streams_[i] = fitted_.part(g.components[i].name).open();
        for (std::size_t i = 0; i < g.components.size(); ++i) {
            for (const auto& in : g.components[i].inputs) input_index_[i].push_back(index_.at(in));
            is_source_[i] = find_component_type(g.components[i].kind)->role == ComponentRole::Source;
        }
        for (const auto& s : g.sinks) sink_index_.push_back(index_.at(s));
        outputs_.resize(g.components.size());
    }

    /// Predictions triggered by this event, stamped with its ts, in sink order.
    std::vector<Prediction> push(const Event& e)
    {
        if (last_ts_ && e.ts < *last_ts_)
            throw Error(ErrorCode::MalformedStream, "input event at ts " + std::to_string(e.ts) + " precedes ts " +
                                                        std::to_string(*last_ts_) + " (source \"" + e.source + "\")");
        last_ts_ = e.ts;
        step([&](std::size_t i, ComponentStream& s, EventList& out) {
            if (is_source_[i]) {
                deliver(i, 0, e, s, out);
                return;
            }
            for (std::size_t p = 0; p < input_index_[i].size(); ++p)
                for (const Event& up : outputs_[input_index_[i][p]]) deliver(i, p, up, s, out);
        });

        std::vector<Prediction> preds;
        const PredictorGraph& g = fitted_.graph();
        for (std::size_t s : sink_index_)
            for (const Event& pe : outputs_[s]) {
                Prediction p = Prediction::from_probs(e.ts, g.components[s].name, pe.values());
                preds.push_back(std::move(p));
            }
        return preds;
    }

    /// Outputs of every component during the most recent push/flush.
    const std::vector<EventList>& last_outputs() const noexcept { return outputs_; }

    /// Ends the stream: components emit whatever they hold (open time bins).
    void flush()
    {
        step([&](std::size_t i, ComponentStream& s, EventList& out) {
            if (!is_source_[i])
                for (std::size_t p = 0; p < input_index_[i].size(); ++p)
                    for (const Event& up : outputs_[input_index_[i][p]]) deliver(i, p, up, s, out);
            s.flush(out);
        });
    }

private:
    template <class Body>
    void step(Body&& body)
    {
        for (auto& o : outputs_) o.clear();
        for (std::size_t i : fitted_.order()) body(i, *streams_[i], outputs_[i]);
    }

    void deliver(std::size_t i, std::size_t port, const Event& e, ComponentStream& s, EventList& out)
    {
        if (observer_) observer_(fitted_.graph().components[i].name, port, e);
        s.push(port, e, out);
    }

    const FittedPredictor& fitted_;
    DeliveryObserver observer_;
    std::map<std::string, std::size_t> index_;
    std::map<std::size_t, std::vector<std::size_t>> input_index_;
    std::map<std::size_t, bool> is_source_;
    std::vector<std::size_t> sink_index_;
    std::vector<std::unique_ptr<ComponentStream>> streams_;
    std::vector<EventList> outputs_;
    std::optional<Timestamp> last_ts_;
};

inline std::vector<Prediction> run_online(const FittedPredictor& fitted, std::span<const Event> events,
                                          DeliveryObserver observer = {})
{
    require_sorted(events, "run_online input");
    OnlineRunner runner(fitted, std::move(observer));
    std::vector<Prediction> out;
    for (const Event& e : events) {
        auto preds = runner.push(e);
        out.insert(out.end(), std::make_move_iterator(preds.begin()), std::make_move_iterator(preds.end()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training

struct FitOptions {
    /// Added to every component's own seed param.
    std::uint64_t seed = 0;
};

namespace detail {

/// Output events of one component over one trace, each tagged with the input
/// step that produced it (steps == trace length marks the end-of-trace flush).
struct TaggedEvent {
    std::size_t step;
    Event event;
};
using TaggedStream = std::vector<TaggedEvent>;

/// Replays a component over a trace exactly as OnlineRunner would, given its
/// upstream outputs, then flushes it.
inline TaggedStream materialize(const FittedComponent& part, bool is_source, const std::vector<const TaggedStream*>& inputs,
                                std::span<const Event> trace)
{
    TaggedStream out;
    auto stream = part.open();
    EventList buf;
    std::vector<std::size_t> cursor(inputs.size(), 0);
    auto feed_step = [&](std::size_t step) {
        for (std::size_t p = 0; p < inputs.size(); ++p) {
            const TaggedStream& in = *inputs[p];
            while (cursor[p] < in.size() && in[cursor[p]].step == step) stream->push(p, in[cursor[p]++].event, buf);
        }
    };
    for (std::size_t step = 0; step < trace.size(); ++step) {
        if (is_source) stream->push(0, trace[step], buf);
        else feed_step(step);
        for (Event& e : buf) out.push_back({step, std::move(e)});
        buf.clear();
    }
    if (!is_source) feed_step(trace.size());
    stream->flush(buf);
    for (Event& e : buf) out.push_back({trace.size(), std::move(e)});
    return out;
}

} // namespace detail

/// Fits tunable components in topological order, each on the outputs of its
/// already-fitted upstream components over all training traces.
inline FittedPredictor fit(const PredictorGraph& graph, std::span<const LabeledTrace> traces, const FitOptions& options = {})
{
    using Clock = std::chrono::steady_clock;
    const auto started = Clock::now();
    require_valid(graph);
    if (traces.empty()) throw Error(ErrorCode::EmptyInput, "fit needs at least one training trace");
    for (const auto& t : traces) {
        if (t.catalog != graph.catalog)
            throw Error(ErrorCode::BadConfig, "trace \"" + t.trace_id + "\" uses a different stage catalog than the graph");
        require_sorted(t.events, "training trace \"" + t.trace_id + "\"");
    }

    const auto order = detail::topological_order(graph);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < graph.components.size(); ++i) index.emplace(graph.components[i].name, i);

    auto learns = [&](std::size_t i) {
        return !graph.components[i].frozen && find_component_type(graph.components[i].kind)->fit != nullptr;
    };
    // Only components that (transitively) feed a learning component need materialized outputs.
    std::vector<bool> needed(graph.components.size(), false);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (learns(*it) || needed[*it])
            for (const auto& in : graph.components[*it].inputs) needed[index.at(in)] = true;
    // Position in `order` of each component's last consumer, to free outputs early.
    std::vector<std::size_t> last_use(graph.components.size(), 0);
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        for (const auto& in : graph.components[order[pos]].inputs) last_use[index.at(in)] = pos;

    std::map<std::string, FittedComponentPtr> parts;
    TrainingReport report;
    std::vector<std::vector<detail::TaggedStream>> outputs(graph.components.size());

    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const std::size_t i = order[pos];
        const ComponentSpec& spec = graph.components[i];
        const ComponentType& type = *find_component_type(spec.kind);
        ComponentReport rep{spec.name, spec.kind, spec.frozen, false, 0, 0.0, 0.0};

        std::vector<std::vector<const detail::TaggedStream*>> inputs(traces.size());
        for (std::size_t t = 0; t < traces.size(); ++t)
            for (const auto& in : spec.inputs) inputs[t].push_back(&outputs[index.at(in)][t]);

        if (!learns(i)) {
            parts[spec.name] = type.build(spec, graph.catalog);
        } else {
            std::vector<EventList> streams(traces.size());
            for (std::size_t t = 0; t < traces.size(); ++t) {
                // Multiple inputs interleave exactly as they would online.
                std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> keys;
                for (std::size_t p = 0; p < inputs[t].size(); ++p)
                    for (std::size_t k = 0; k < inputs[t][p]->size(); ++k) keys.emplace_back((*inputs[t][p])[k].step, p, k);
                std::sort(keys.begin(), keys.end());
                for (const auto& [step, p, k] : keys) streams[t].push_back((*inputs[t][p])[k].event);
            }
            const auto t0 = Clock::now();
            ComponentFit f = type.fit(spec, graph.catalog, streams, options.seed);
            rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
            rep.trained = true;
            rep.samples = f.samples;
            rep.work = f.work;
            parts[spec.name] = std::move(f.component);
        }

        if (needed[i]) {
            const bool is_source = type.role == ComponentRole::Source;
            outputs[i].resize(traces.size());
            for (std::size_t t = 0; t < traces.size(); ++t)
                outputs[i][t] = detail::materialize(*parts[spec.name], is_source, inputs[t], traces[t].events);
        }
        for (const auto& in : spec.inputs)
            if (last_use[index.at(in)] == pos) outputs[index.at(in)].clear();
        report.components.push_back(std::move(rep));
    }
    report.total_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    return FittedPredictor(graph, std::move(parts), std::move(report));
}

// ---------------------------------------------------------------------------
// Graph configuration document and model files

inline constexpr int kGraphDocumentVersion = 1;
inline constexpr int kModelFormatVersion = 1;

inline json graph_to_json(const PredictorGraph& g)
{
    json comps = json::array();
    for (const auto& c : g.components)
        comps.push_back(json{{"name", c.name}, {"kind", c.kind}, {"params", c.params}, {"frozen", c.frozen}, {"inputs", c.inputs}});
    return json{{"version", kGraphDocumentVersion}, {"catalog", g.catalog.names()}, {"components", std::move(comps)},
                {"sinks", g.sinks}};
}

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where)
{
    if (!j.is_object()) throw Error(ErrorCode::BadConfig, where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) throw Error(ErrorCode::BadConfig, where + ": unknown key \"" + key + "\"");
    }
}

template <class T>
T required_field(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key)) throw Error(ErrorCode::BadConfig, where + ": missing \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::BadConfig, where + ": field \"" + key + "\" has the wrong type");
    }
}

} // namespace detail

/// Parses a graph document; unknown keys are rejected. Does not validate the graph.
inline PredictorGraph graph_from_json(const json& j)
{
    detail::reject_unknown_keys(j, {"version", "catalog", "components", "sinks"}, "graph");
    if (detail::required_field<int>(j, "version", "graph") != kGraphDocumentVersion)
        throw Error(ErrorCode::BadConfig, "graph: unsupported version");
    PredictorGraph g;
    g.catalog = StageCatalog(detail::required_field<std::vector<std::string>>(j, "catalog", "graph"));
    const json comps = detail::required_field<json>(j, "components", "graph");
    if (!comps.is_array()) throw Error(ErrorCode::BadConfig, "graph: components must be an array");
    for (const json& c : comps) {
        detail::reject_unknown_keys(c, {"name", "kind", "params", "frozen", "inputs"}, "component");
        ComponentSpec spec;
        spec.name = detail::required_field<std::string>(c, "name", "component");
        const std::string where = "component \"" + spec.name + "\"";
        spec.kind = detail::required_field<std::string>(c, "kind", where);
        spec.params = c.contains("params") ? c.at("params") : json::object();
        if (!spec.params.is_object()) throw Error(ErrorCode::BadConfig, where + ": params must be an object");
        spec.frozen = c.contains("frozen") ? detail::required_field<bool>(c, "frozen", where) : false;
        spec.inputs = c.contains("inputs") ? detail::required_field<std::vector<std::string>>(c, "inputs", where)
                                           : std::vector<std::string>{};
        g.components.push_back(std::move(spec));
    }
    g.sinks = detail::required_field<std::vector<std::string>>(j, "sinks", "graph");
    return g;
}

/// Model file: the graph plus each component's learned state. Wall-clock
/// timings are deliberately absent so that files are reproducible.
inline json model_to_json(const FittedPredictor& fitted)
{
    json samples = json::object();
    for (const auto& c : fitted.training_report().components) samples[c.name] = c.samples;
    return json{{"format_version", kModelFormatVersion},
                {"graph", graph_to_json(fitted.graph())},
                {"state", fitted.states()},
                {"training_samples", std::move(samples)}};
}

inline FittedPredictor model_from_json(const json& j)
{
    try {
        detail::reject_unknown_keys(j, {"format_version", "graph", "state", "training_samples"}, "model");
        if (j.at("format_version").get<int>() != kModelFormatVersion)
            throw Error(ErrorCode::BadModel, "unsupported model format version");
        PredictorGraph graph = graph_from_json(j.at("graph"));
        const json& state = j.at("state");
        // Rebuild each component from its params overlaid with its learned state.
        PredictorGraph frozen_graph = graph;
        for (auto& c : frozen_graph.components) {
            if (state.contains(c.name))
                for (const auto& [k, v] : state.at(c.name).items()) c.params[k] = v;
            c.frozen = true;
        }
        require_valid(frozen_graph);
        std::map<std::string, FittedComponentPtr> parts;
        for (const auto& c : frozen_graph.components) parts[c.name] = find_component_type(c.kind)->build(c, graph.catalog);
        TrainingReport report;
        if (j.contains("training_samples"))
            for (const auto& c : graph.components) {
                ComponentReport r;
                r.name = c.name;
                r.kind = c.kind;
                r.frozen = c.frozen;
                r.samples = j["training_samples"].value(c.name, std::size_t{0});
                r.trained = !c.frozen && find_component_type(c.kind)->fit != nullptr;
                report.components.push_back(r);
            }
        return FittedPredictor(std::move(graph), std::move(parts), std::move(report));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadModel, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BadModel) throw;
        throw Error(ErrorCode::BadModel, e.what());
    }
}

/// Largest sliding window size in the graph: the timeliness proxy.
inline std::optional<std::size_t> window_size_of(const PredictorGraph& g)
{
    std::optional<std::size_t> best;
    for (const auto& c : g.components)
        if (c.kind == "sliding_window") {
            const std::size_t n = ParamReader(c.params, c.kind).get<std::size_t>("size", 20);
            best = std::max(best.value_or(0), n);
        }
    return best;
}

} // namespace modpred
