#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aggregators.hpp"
#include "error.hpp"
#include "event.hpp"
#include "graph.hpp"
#include "rng.hpp"
#include "selection.hpp"

namespace modpred {

inline constexpr int kScenarioDocumentVersion = 1;

/// Categorical distribution keyed by name (iteration order is the key order).
using Distribution = std::map<std::string, double>;

struct SynthStage {
    StageId stage;
    double duration = 0.0;
    double attack_rate = 0.0;
    Distribution type_dist;

    friend bool operator==(const SynthStage&, const SynthStage&) = default;
};

struct SynthScenario {
    StageCatalog catalog;
    std::vector<SynthStage> stages;
    double background_rate = 0.0;
    Distribution background_types;
    /// Source names with mixing weights (normalized on use).
    Distribution sources{{"ids", 1.0}};
    /// Fixed per-type priorities; unlisted types get a stable hash-derived level in 1..3.
    std::map<std::string, int> priorities;
    std::uint64_t seed = 0;
    double start = 0.0;
    std::string trace_id = "synth";

    double total_duration() const
    {
        double t = 0.0;
        for (const auto& s : stages) t += s.duration;
        return t;
    }

    void validate() const
    {
        auto bad = [](const std::string& m) { return Error(ErrorCode::BadScenario, m); };
        auto check_dist = [&](const Distribution& d, const std::string& what) {
            double sum = 0.0;
            for (const auto& [name, w] : d) {
                if (name.empty()) throw bad(what + ": empty type name");
                if (!(w >= 0.0) || !std::isfinite(w)) throw bad(what + ": weight of \"" + name + "\" must be >= 0");
                sum += w;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw bad(what + ": weights sum to " + std::to_string(sum) + ", expected 1");
        };
        if (stages.empty()) throw bad("stages: at least one stage is required");
        for (std::size_t i = 0; i < stages.size(); ++i) {
            const auto& s = stages[i];
            const std::string where = "stages[" + std::to_string(i) + "]";
            if (!catalog.contains(s.stage)) throw bad(where + ".stage: outside the catalog");
            if (!(s.duration > 0.0) || !std::isfinite(s.duration)) throw bad(where + ".duration must be > 0");
            if (!(s.attack_rate >= 0.0) || !std::isfinite(s.attack_rate)) throw bad(where + ".attack_rate must be >= 0");
            if (s.attack_rate > 0.0 || !s.type_dist.empty()) check_dist(s.type_dist, where + ".type_dist");
        }
        if (!(background_rate >= 0.0) || !std::isfinite(background_rate)) throw bad("background_rate must be >= 0");
        if (background_rate > 0.0 || !background_types.empty()) check_dist(background_types, "background_types");
        if (sources.empty()) throw bad("sources: at least one source is required");
        double total = 0.0;
        for (const auto& [name, w] : sources) {
            if (name.empty()) throw bad("sources: empty source name");
            if (!(w >= 0.0) || !std::isfinite(w)) throw bad("sources: weight of \"" + name + "\" must be >= 0");
            total += w;
        }
        if (!(total > 0.0)) throw bad("sources: weights must not all be zero");
        if (!std::isfinite(start) || start < 0.0) throw bad("start must be >= 0");
    }
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct DistributionSampler {
    std::vector<std::string> names;
    std::vector<double> weights;

    explicit DistributionSampler(const Distribution& d)
    {
        for (const auto& [n, w] : d) {
            names.push_back(n);
            weights.push_back(w);
        }
    }

    const std::string& draw(Rng& rng) const { return names[rng.categorical(weights)]; }
};

inline Timestamp to_micros(double seconds) { return static_cast<Timestamp>(std::floor(seconds * kMicrosPerSecond)); }

} // namespace detail

inline int synth_priority(const SynthScenario& s, const std::string& type)
{
    auto it = s.priorities.find(type);
    return it != s.priorities.end() ? it->second : 1 + static_cast<int>(detail::fnv1a(type) % 3);
}

/// Attack alerts per stage interval plus background alerts over the whole
/// span, both Poisson; every event is labeled with the stage active at its ts.
inline LabeledTrace generate(const SynthScenario& s)
{
    s.validate();
    Rng rng(s.seed);
    const Timestamp origin = detail::to_micros(s.start);

    std::vector<Timestamp> bounds{0};
    double acc = 0.0;
    for (const auto& st : s.stages) {
        acc += st.duration;
        bounds.push_back(detail::to_micros(acc));
    }
    auto stage_at = [&](Timestamp rel) {
        const auto it = std::upper_bound(bounds.begin() + 1, bounds.end(), rel);
        return s.stages[static_cast<std::size_t>(it - bounds.begin() - 1)].stage;
    };

    const detail::DistributionSampler sources(s.sources);
    struct Draft {
        Timestamp rel;
        std::string type;
        bool attack;
    };
    std::vector<Draft> drafts;
    auto poisson = [&](double rate, Timestamp from, Timestamp to, const Distribution& dist, bool attack) {
        if (rate <= 0.0) return;
        const detail::DistributionSampler types(dist);
        double t = static_cast<double>(from) / kMicrosPerSecond;
        for (;;) {
            t += rng.exponential(rate);
            const Timestamp ts = detail::to_micros(t);
            if (ts >= to) break;
            drafts.push_back({ts, types.draw(rng), attack});
        }
    };
    for (std::size_t i = 0; i < s.stages.size(); ++i)
        poisson(s.stages[i].attack_rate, bounds[i], bounds[i + 1], s.stages[i].type_dist, true);
    poisson(s.background_rate, 0, bounds.back(), s.background_types, false);
    std::stable_sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) { return a.rel < b.rel; });

    LabeledTrace trace;
    trace.trace_id = s.trace_id;
    trace.catalog = s.catalog;
    trace.events.reserve(drafts.size());
    for (const Draft& d : drafts) {
        Event e;
        e.ts = origin + d.rel;
        e.source = sources.draw(rng);
        e.kind = EventKind::Alert;
        e.attrs["alert_type"] = d.type;
        e.attrs["origin"] = d.attack ? "attack" : "background";
        e.nums.emplace_back("priority", static_cast<double>(synth_priority(s, d.type)));
        e.label = stage_at(d.rel);
        trace.events.push_back(std::move(e));
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Scenario documents

inline nlohmann::ordered_json scenario_to_json(const SynthScenario& s)
{
    nlohmann::ordered_json j;
    j["version"] = kScenarioDocumentVersion;
    j["catalog"] = s.catalog.names();
    j["stages"] = nlohmann::ordered_json::array();
    for (const auto& st : s.stages)
        j["stages"].push_back({{"stage", s.catalog.name(st.stage)},
                               {"duration", st.duration},
                               {"attack_rate", st.attack_rate},
                               {"type_dist", st.type_dist}});
    j["background_rate"] = s.background_rate;
    j["background_types"] = s.background_types;
    j["sources"] = s.sources;
    j["priorities"] = s.priorities;
    j["seed"] = s.seed;
    j["start"] = s.start;
    j["trace_id"] = s.trace_id;
    return j;
}

inline SynthScenario scenario_from_json(const json& j)
{
    auto bad = [](const std::string& m) { return Error(ErrorCode::BadScenario, m); };
    auto only = [&](const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
        if (!obj.is_object()) throw bad(where + ": expected an object");
        for (const auto& [k, v] : obj.items())
            if (std::find_if(keys.begin(), keys.end(), [&](const char* a) { return k == a; }) == keys.end())
                throw bad(where + ": unknown key \"" + k + "\"");
    };
    auto field = [&]<class T>(const json& obj, const char* key, const std::string& where, T fallback, bool required) {
        if (!obj.contains(key)) {
            if (required) throw bad(where + "." + key + ": missing");
            return fallback;
        }
        try {
            return obj.at(key).get<T>();
        } catch (const json::exception&) {
            throw bad(where + "." + key + ": wrong type");
        }
    };

    only(j, {"version", "catalog", "stages", "background_rate", "background_types", "sources", "priorities", "seed", "start",
             "trace_id"},
         "scenario");
    if (field(j, "version", "scenario", 0, true) != kScenarioDocumentVersion) throw bad("scenario.version: unsupported");
    SynthScenario s;
    try {
        s.catalog = StageCatalog(field(j, "catalog", "scenario", std::vector<std::string>{}, true));
    } catch (const Error& e) {
        throw bad(std::string("scenario.catalog: ") + e.what());
    }
    const json stages = field(j, "stages", "scenario", json::array(), true);
    if (!stages.is_array()) throw bad("scenario.stages: expected an array");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string where = "stages[" + std::to_string(i) + "]";
        only(stages[i], {"stage", "duration", "attack_rate", "type_dist"}, where);
        const auto name = field(stages[i], "stage", where, std::string{}, true);
        const auto id = s.catalog.find(name);
        if (!id) throw bad(where + ".stage: unknown stage \"" + name + "\"");
        s.stages.push_back({*id, field(stages[i], "duration", where, 0.0, true), field(stages[i], "attack_rate", where, 0.0, false),
                            field(stages[i], "type_dist", where, Distribution{}, false)});
    }
    s.background_rate = field(j, "background_rate", "scenario", 0.0, false);
    s.background_types = field(j, "background_types", "scenario", Distribution{}, false);
    s.sources = field(j, "sources", "scenario", Distribution{{"ids", 1.0}}, false);
    s.priorities = field(j, "priorities", "scenario", std::map<std::string, int>{}, false);
    s.seed = field(j, "seed", "scenario", std::uint64_t{0}, false);
    s.start = field(j, "start", "scenario", 0.0, false);
    s.trace_id = field(j, "trace_id", "scenario", std::string("synth"), false);
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Benchmarks

struct Benchmark {
    std::string name;
    std::vector<LabeledTrace> train;
    std::vector<LabeledTrace> eval;
    std::vector<Candidate> candidates;
};

/// `fraction` of a trace as `segments` contiguous pieces centred at evenly
/// spaced instants of the trace's time span, each returned as its own trace
/// so no window spans a gap.
inline std::vector<LabeledTrace> subsample_trace(const LabeledTrace& t, double fraction, std::size_t segments)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorCode::BadConfig, "subsample fraction must be in (0, 1]");
    if (segments == 0) throw Error(ErrorCode::BadConfig, "subsample needs at least one segment");
    if (fraction == 1.0 || t.events.empty()) return {t};
    const std::size_t n = t.events.size();
    const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    const std::size_t len = keep / segments;
    const Timestamp first = t.events.front().ts;
    const double span = static_cast<double>(t.events.back().ts - first);
    std::vector<LabeledTrace> out;
    for (std::size_t i = 0; i < segments && len > 0; ++i) {
        const auto at = first + static_cast<Timestamp>(span * (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(segments)));
        const auto it = std::lower_bound(t.events.begin(), t.events.end(), at, [](const Event& e, Timestamp ts) { return e.ts < ts; });
        const auto centre = static_cast<std::size_t>(it - t.events.begin());
        const std::size_t begin = std::min(centre >= len / 2 ? centre - len / 2 : 0, n - len);
        out.push_back(slice_trace(t, begin, begin + len, "#part" + std::to_string(i + 1)));
    }
    return out;
}

namespace bench {

inline ComponentSpec spec(std::string name, std::string kind, json params, std::vector<std::string> inputs, bool frozen = false)
{
    return ComponentSpec{std::move(name), std::move(kind), std::move(params), frozen, std::move(inputs)};
}

inline ComponentSpec source(bool frozen = true) { return spec("alerts", "trace_source", json::object(), {}, frozen); }

inline json forest_params(std::size_t n_trees, std::optional<std::size_t> max_depth = std::nullopt)
{
    json p{{"n_trees", n_trees}};
    if (max_depth) p["max_depth"] = *max_depth;
    return p;
}

/// Every alert type and priority level a scenario can produce.
inline StatFeatureParams vocabulary(const SynthScenario& s)
{
    std::set<std::string> types;
    for (const auto& st : s.stages)
        for (const auto& [t, w] : st.type_dist) types.insert(t);
    for (const auto& [t, w] : s.background_types) types.insert(t);
    std::set<int> prios;
    for (const auto& t : types) prios.insert(synth_priority(s, t));
    return StatFeatureParams{{types.begin(), types.end()}, {prios.begin(), prios.end()}};
}

inline std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, std::size_t n)
{
    Rng rng(seed * 0x9E3779B97F4A7C15ULL + 0x5851F42D4C957F2DULL);
    std::vector<std::uint64_t> out(n);
    for (auto& v : out) v = rng.next();
    return out;
}

inline std::vector<LabeledTrace> traces(SynthScenario s, std::span<const std::uint64_t> seeds, const std::string& prefix)
{
    std::vector<LabeledTrace> out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        s.seed = seeds[i];
        s.trace_id = prefix + std::to_string(i + 1);
        out.push_back(generate(s));
    }
    return out;
}

inline const std::vector<std::string> kMscadStages{"Normal",         "Port Scan",     "App-based DDoS",
                                                   "Volume-based DDoS", "Web Crawling", "Password Cracking"};

inline const std::vector<std::string> kCicidsStages{"Normal", "Web Attack-Brute Force", "Web Attack-XSS",
                                                    "Web Attack-SQL Injection", "Infiltration"};

/// Six stages whose attack alert mixtures overlap, so a single alert is
/// ambiguous while a window of them is not.
inline SynthScenario mscad_scenario()
{
    SynthScenario s;
    s.catalog = StageCatalog(kMscadStages);
    auto st = [&](const char* name, double duration, double rate, Distribution d) {
        s.stages.push_back({*s.catalog.find(name), duration, rate, std::move(d)});
    };
    st("Normal", 240, 0.0, {});
    st("Port Scan", 240, 2.0, {{"scan_syn", 0.40}, {"scan_udp", 0.30}, {"icmp_flood", 0.15}, {"crawl", 0.15}});
    st("App-based DDoS", 240, 3.0, {{"slowloris", 0.35}, {"http_flood", 0.35}, {"scan_syn", 0.15}, {"crawl", 0.15}});
    st("Volume-based DDoS", 240, 4.0, {{"icmp_flood", 0.45}, {"http_flood", 0.25}, {"scan_udp", 0.15}, {"slowloris", 0.15}});
    st("Web Crawling", 240, 2.0, {{"crawl", 0.40}, {"http_flood", 0.20}, {"login_fail", 0.20}, {"scan_syn", 0.20}});
    st("Password Cracking", 240, 2.5, {{"login_fail", 0.35}, {"ssh_auth", 0.35}, {"crawl", 0.20}, {"scan_udp", 0.10}});
    s.background_rate = 1.5;
    s.background_types = {{"http_get", 0.4}, {"dns_query", 0.3}, {"tls_hello", 0.2}, {"crawl", 0.1}};
    s.sources = {{"snort", 0.7}, {"suricata", 0.3}};
    return s;
}

inline SynthScenario cicids_scenario()
{
    SynthScenario s;
    s.catalog = StageCatalog(kCicidsStages);
    auto st = [&](const char* name, double duration, double rate, Distribution d) {
        s.stages.push_back({*s.catalog.find(name), duration, rate, std::move(d)});
    };
    st("Normal", 60, 0.0, {});
    st("Web Attack-Brute Force", 80, 3.0,
       {{"login_fail", 0.45}, {"http_auth_flood", 0.25}, {"sql_error", 0.10}, {"xss_reflect", 0.20}});
    st("Web Attack-XSS", 60, 2.0, {{"xss_script", 0.35}, {"xss_reflect", 0.30}, {"login_fail", 0.20}, {"sqli_blind", 0.15}});
    st("Web Attack-SQL Injection", 60, 2.0,
       {{"sqli_union", 0.30}, {"sqli_blind", 0.25}, {"sql_error", 0.25}, {"xss_script", 0.20}});
    st("Infiltration", 80, 1.5,
       {{"portscan_internal", 0.35}, {"meterpreter", 0.25}, {"smb_exploit", 0.25}, {"sql_error", 0.15}});
    s.background_rate = 1.5;
    s.background_types = {{"http_get", 0.45}, {"dns_query", 0.25}, {"tls_hello", 0.2}, {"smb_browse", 0.1}};
    s.sources = {{"snort", 1.0}};
    return s;
}

inline json vocab_params(const StatFeatureParams& v) { return json{{"alert_types", v.alert_types}, {"priorities", v.priorities}}; }

} // namespace bench

/// src -> sliding window -> statistical features (fixed vocabulary) -> forest.
inline PredictorGraph window_stats_chain(const StageCatalog& catalog, std::size_t window, const StatFeatureParams& vocab,
                                         std::size_t n_trees = 30)
{
    using namespace bench;
    return PredictorGraph{catalog,
                          {source(), spec("window", "sliding_window", {{"size", window}}, {"alerts"}, true),
                           spec("stats", "stat_features", vocab_params(vocab), {"window"}, true),
                           spec("forest", "random_forest", forest_params(n_trees), {"stats"})},
                          {"forest"}};
}

inline std::vector<std::size_t> scenario2_window_sizes() { return {1, 2, 4, 8, 12, 16, 20}; }

inline constexpr std::size_t kScenario3Window = 10;
inline constexpr std::size_t kScenario3Clusters = 6;

inline Benchmark make_benchmark(const std::string& name, std::uint64_t seed)
{
    using namespace bench;
    Benchmark b;
    b.name = name;
    const auto seeds = derive_seeds(seed, 8);

    if (name == "scenario2-like" || name == "scenario3-like") {
        const SynthScenario s = mscad_scenario();
        const StatFeatureParams vocab = vocabulary(s);
        b.train = traces(s, std::span(seeds).subspan(0, 2), name + "/train");
        b.eval = traces(s, std::span(seeds).subspan(2, 2), name + "/eval");
        if (name == "scenario2-like") {
            for (std::size_t w : scenario2_window_sizes())
                b.candidates.push_back({"window" + std::to_string(w), window_stats_chain(s.catalog, w, vocab)});
            return b;
        }

        // The encoder of the most-pretrained chain is fitted here on a trace
        // that is neither training nor evaluation data.
        SynthScenario pre = s;
        pre.seed = seeds[4];
        const LabeledTrace pretrain = generate(pre);
        const CategorizerParams cp{kScenario3Clusters, 100, 1e-6, seeds[5]};
        std::vector<std::vector<double>> vectors;
        for (const Event& w : sliding_window(pretrain.events, {kScenario3Window, 1}))
            vectors.push_back(stat_features(w, vocab).values());
        const CategorizerModel encoder = categorizer_fit(vectors, cp);

        const json window{{"size", kScenario3Window}};
        const json kmeans{{"k", kScenario3Clusters}};
        json pretrained = kmeans;
        pretrained["centroids"] = encoder.centroids;
        pretrained["mean"] = encoder.mean;
        pretrained["scale"] = encoder.scale;
        auto chain = [&](bool stats_frozen, json encoder_params, bool encoder_frozen) {
            return PredictorGraph{s.catalog,
                                  {source(), spec("window", "sliding_window", window, {"alerts"}, true),
                                   spec("stats", "stat_features", stats_frozen ? vocab_params(vocab) : json::object(),
                                        {"window"}, stats_frozen),
                                   spec("encoder", "kmeans_categorizer", std::move(encoder_params), {"stats"}, encoder_frozen),
                                   spec("forest", "random_forest", forest_params(30), {"encoder"})},
                                  {"forest"}};
        };
        b.candidates.push_back({"pretrained2", chain(true, pretrained, true)});
        b.candidates.push_back({"pretrained1", chain(true, kmeans, false)});
        b.candidates.push_back({"pretrained0", chain(false, kmeans, false)});
        return b;
    }

    if (name == "scenario4-like") {
        const SynthScenario s = cicids_scenario();
        const StatFeatureParams vocab = vocabulary(s);
        b.train = traces(s, std::span(seeds).subspan(0, 4), name + "/train");
        b.eval = traces(s, std::span(seeds).subspan(4, 2), name + "/eval");
        const json flat_vocab{{"alert_types", vocab.alert_types}};
        auto flatten_chain = [&](std::size_t window, std::size_t n_trees) {
            json fp = flat_vocab;
            fp["members"] = window;
            return PredictorGraph{s.catalog,
                                  {source(), spec("window", "sliding_window", {{"size", window}}, {"alerts"}, true),
                                   spec("flatten", "flatten", fp, {"window"}, true),
                                   spec("forest", "random_forest", forest_params(n_trees), {"flatten"})},
                                  {"forest"}};
        };
        b.candidates.push_back(
            {"direct", PredictorGraph{s.catalog, {source(), spec("forest", "random_forest", forest_params(50), {"alerts"})}, {"forest"}}});
        b.candidates.push_back({"window_stats", window_stats_chain(s.catalog, 20, vocab, 50)});
        b.candidates.push_back({"window_flatten_a", flatten_chain(20, 150)});
        b.candidates.push_back({"window_flatten_b", flatten_chain(30, 150)});
        return b;
    }

    throw Error(ErrorCode::UnknownBenchmark, "unknown benchmark \"" + name + "\"");
}

} // namespace modpred
