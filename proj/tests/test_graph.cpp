#include <cmath>

#include <gtest/gtest.h>

#include <modpred/graph.hpp>
#include <modpred/metrics.hpp>
#include <modpred/synth.hpp>

using namespace modpred;
using bench::spec;

namespace {

SynthScenario two_stage(std::uint64_t seed, double duration = 60.0)
{
    SynthScenario s;
    s.catalog = StageCatalog({"Normal", "Attack"});
    s.stages = {{StageId{0}, duration, 3.0, {{"benign_a", 0.5}, {"benign_b", 0.5}}},
                {StageId{1}, duration, 3.0, {{"evil_a", 0.5}, {"evil_b", 0.5}}}};
    s.seed = seed;
    return s;
}

bool has_violation(const std::vector<GraphViolation>& v, GraphViolationKind kind)
{
    return std::any_of(v.begin(), v.end(), [&](const GraphViolation& g) { return g.kind == kind; });
}

PredictorGraph direct_forest(const StageCatalog& c, std::size_t n_trees = 20)
{
    return PredictorGraph{c, {bench::source(), spec("forest", "random_forest", bench::forest_params(n_trees), {"alerts"})}, {"forest"}};
}

double training_accuracy(const FittedPredictor& f, const LabeledTrace& t)
{
    const auto preds = run_online(f, t.events);
    const Alignment a = align_predictions(preds, t);
    return evaluate(a.predicted, a.truth, t.catalog).accuracy;
}

} // namespace

TEST(ValidateGraph, WellFormedChain)
{
    const SynthScenario s = bench::mscad_scenario();
    EXPECT_TRUE(validate_graph(window_stats_chain(s.catalog, 8, bench::vocabulary(s))).empty());
}

TEST(ValidateGraph, Cycle)
{
    PredictorGraph g{StageCatalog(),
                     {bench::source(), spec("A", "sliding_window", {{"size", 2}}, {"alerts", "B"}, true),
                      spec("B", "sliding_window", {{"size", 2}}, {"A"}, true), spec("forest", "random_forest", json::object(), {"B"})},
                     {"forest"}};
    const auto v = validate_graph(g);
    ASSERT_TRUE(has_violation(v, GraphViolationKind::CycleDetected));
    const auto it = std::find_if(v.begin(), v.end(), [](const GraphViolation& x) { return x.kind == GraphViolationKind::CycleDetected; });
    EXPECT_NE(std::find(it->names.begin(), it->names.end(), "A"), it->names.end());
    EXPECT_NE(std::find(it->names.begin(), it->names.end(), "B"), it->names.end());
}

TEST(ValidateGraph, ForestOnRawEvents)
{
    PredictorGraph g{StageCatalog(),
                     {spec("raw", "trace_source", {{"kind", "RAW"}}, {}, true), spec("forest", "random_forest", json::object(), {"raw"})},
                     {"forest"}};
    EXPECT_TRUE(has_violation(validate_graph(g), GraphViolationKind::KindMismatch));
}

TEST(ValidateGraph, StructuralErrors)
{
    using K = GraphViolationKind;
    EXPECT_TRUE(has_violation(validate_graph(PredictorGraph{StageCatalog(), {}, {}}), K::EmptyGraph));

    PredictorGraph g = direct_forest(StageCatalog());
    g.components.push_back(g.components.front());
    EXPECT_TRUE(has_violation(validate_graph(g), K::DuplicateName));

    g = direct_forest(StageCatalog());
    g.components[1].kind = "gru";
    EXPECT_TRUE(has_violation(validate_graph(g), K::UnknownKind));

    g = direct_forest(StageCatalog());
    g.components[1].inputs = {"nowhere"};
    EXPECT_TRUE(has_violation(validate_graph(g), K::UnknownInput));

    g = direct_forest(StageCatalog());
    g.components[1].params = {{"n_trees", 0}};
    EXPECT_TRUE(has_violation(validate_graph(g), K::BadParams));

    g = direct_forest(StageCatalog());
    g.sinks = {"alerts"};
    EXPECT_TRUE(has_violation(validate_graph(g), K::SinkNotPrediction));

    g = direct_forest(StageCatalog());
    g.sinks = {"ghost"};
    EXPECT_TRUE(has_violation(validate_graph(g), K::UnknownSink));

    g = direct_forest(StageCatalog());
    g.components[1].frozen = true;
    EXPECT_TRUE(has_violation(validate_graph(g), K::MissingPretrainedState));

    g = direct_forest(StageCatalog());
    g.components[1].inputs = {"alerts", "alerts"};
    EXPECT_TRUE(has_violation(validate_graph(g), K::ClassifierArity));
}

TEST(RunOnline, EmptyInput)
{
    const LabeledTrace t = generate(two_stage(1));
    const FittedPredictor f = fit(direct_forest(t.catalog), std::vector<LabeledTrace>{t});
    EXPECT_TRUE(run_online(f, EventList{}).empty());
}

TEST(RunOnline, BaselineAlwaysStageZero)
{
    LabeledTrace t = generate(two_stage(2));
    for (Event& e : t.events) e.label = kNormalStage;
    PredictorGraph g{t.catalog, {bench::source(), spec("base", "majority_baseline", json::object(), {"alerts"})}, {"base"}};
    const FittedPredictor f = fit(g, std::vector<LabeledTrace>{t});
    const auto preds = run_online(f, generate(two_stage(3)).events);
    ASSERT_FALSE(preds.empty());
    for (const auto& p : preds) {
        EXPECT_EQ(p.stage, kNormalStage);
        EXPECT_EQ(p.probs, (std::vector<double>{1.0, 0.0}));
        EXPECT_EQ(p.sink, "base");
    }
}

TEST(RunOnline, PrefixReplay)
{
    const SynthScenario s = bench::mscad_scenario();
    SynthScenario small = s;
    small.seed = 4;
    const LabeledTrace train = generate(small);
    const FittedPredictor f = fit(window_stats_chain(s.catalog, 4, bench::vocabulary(s), 10), std::vector<LabeledTrace>{train});
    small.seed = 5;
    const LabeledTrace test = generate(small);
    const EventList all(test.events.begin(), test.events.begin() + 100);
    const auto full = run_online(f, all);
    for (std::size_t n : {0u, 1u, 3u, 4u, 50u, 99u}) {
        const auto prefix = run_online(f, std::span(all).first(n));
        ASSERT_LE(prefix.size(), full.size());
        EXPECT_TRUE(std::equal(prefix.begin(), prefix.end(), full.begin())) << "prefix " << n;
    }
    // Window warm-up: size 4 means the first emission comes with the 4th event.
    EXPECT_EQ(full.size(), 97u);
    EXPECT_EQ(full.front().ts, all[3].ts);
}

TEST(RunOnline, RejectsUnsortedInput)
{
    const LabeledTrace t = generate(two_stage(6));
    const FittedPredictor f = fit(direct_forest(t.catalog), std::vector<LabeledTrace>{t});
    EventList bad{t.events[5], t.events[2]};
    try {
        run_online(f, bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedStream);
    }
}

TEST(RunOnline, FanOutConsumersSeeSameStream)
{
    const LabeledTrace t = generate(two_stage(7));
    const StatFeatureParams vocab = learn_stat_vocabulary(sliding_window(t.events, {1, 1}));
    PredictorGraph g{t.catalog,
                     {bench::source(), spec("window", "sliding_window", {{"size", 3}}, {"alerts"}, true),
                      spec("stats", "stat_features", bench::vocab_params(vocab), {"window"}, true),
                      spec("forest", "random_forest", bench::forest_params(5), {"stats"}),
                      spec("base", "majority_baseline", json::object(), {"stats"})},
                     {"forest", "base"}};
    const FittedPredictor f = fit(g, std::vector<LabeledTrace>{t});
    std::map<std::string, EventList> seen;
    std::size_t window_calls = 0;
    const auto preds = run_online(f, t.events, [&](const std::string& name, std::size_t, const Event& e) {
        if (name == "forest" || name == "base") seen[name].push_back(e);
        window_calls += name == "window";
    });
    EXPECT_EQ(window_calls, t.events.size());
    ASSERT_FALSE(seen["forest"].empty());
    EXPECT_EQ(seen["forest"], seen["base"]);
    EXPECT_EQ(preds.size(), 2 * seen["forest"].size());
}

TEST(RunOnline, TimeBinReducesRate)
{
    const LabeledTrace t = generate(two_stage(8));
    PredictorGraph g{t.catalog,
                     {bench::source(), spec("bins", "time_bin", {{"bin_width", 5 * kMicrosPerSecond}}, {"alerts"}),
                      spec("forest", "random_forest", bench::forest_params(5), {"bins"})},
                     {"forest"}};
    const FittedPredictor f = fit(g, std::vector<LabeledTrace>{t});
    const auto preds = run_online(f, t.events);
    const double span = static_cast<double>(t.events.back().ts - t.events.front().ts);
    EXPECT_LE(static_cast<double>(preds.size()), std::ceil(span / (5.0 * kMicrosPerSecond)) + 1.0);
    EXPECT_LT(preds.size(), t.events.size());
    EXPECT_GT(preds.size(), 0u);
}

TEST(Fit, AllFrozenDoesNoTraining)
{
    const LabeledTrace t = generate(two_stage(9));
    PredictorGraph g{t.catalog, {bench::source(), spec("base", "majority_baseline", {{"probs", {0.25, 0.75}}}, {"alerts"}, true)}, {"base"}};
    const FittedPredictor f = fit(g, std::vector<LabeledTrace>{t});
    for (const auto& c : f.training_report().components) {
        EXPECT_FALSE(c.trained);
        EXPECT_EQ(c.seconds, 0.0);
        EXPECT_EQ(c.samples, 0u);
    }
    EXPECT_EQ(run_online(f, t.events).front().stage, StageId{1});
}

TEST(Fit, SeparableTraceIsLearned)
{
    const LabeledTrace t = generate(two_stage(10));
    const FittedPredictor f = fit(direct_forest(t.catalog), std::vector<LabeledTrace>{t});
    EXPECT_GE(training_accuracy(f, t), 0.95);
    const auto& forest = f.training_report().components.back();
    EXPECT_TRUE(forest.trained);
    EXPECT_EQ(forest.samples, t.events.size());
}

TEST(Fit, DeterministicModels)
{
    const LabeledTrace t = generate(two_stage(11));
    const auto g = direct_forest(t.catalog);
    const FittedPredictor a = fit(g, std::vector<LabeledTrace>{t}, FitOptions{3});
    const FittedPredictor b = fit(g, std::vector<LabeledTrace>{t}, FitOptions{3});
    EXPECT_EQ(model_to_json(a).dump(), model_to_json(b).dump());
    EXPECT_EQ(run_online(a, t.events), run_online(b, t.events));
}

TEST(Fit, NoLabels)
{
    LabeledTrace t = generate(two_stage(12));
    for (Event& e : t.events) e.label.reset();
    try {
        fit(direct_forest(t.catalog), std::vector<LabeledTrace>{t});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoLabels);
    }
}

TEST(Fit, CatalogMismatch)
{
    const LabeledTrace t = generate(two_stage(13));
    EXPECT_THROW(fit(direct_forest(StageCatalog({"Normal", "Other"})), std::vector<LabeledTrace>{t}), Error);
    EXPECT_THROW(fit(direct_forest(t.catalog), std::vector<LabeledTrace>{}), Error);
}

TEST(Fit, PretrainingChainsAllFit)
{
    Benchmark b = make_benchmark("scenario3-like", 1);
    ASSERT_EQ(b.candidates.size(), 3u);
    const std::vector<LabeledTrace> train = subsample_trace(b.train[0], 0.2, 3);
    for (const Candidate& c : b.candidates) {
        SCOPED_TRACE(c.name);
        ASSERT_TRUE(validate_graph(c.graph).empty());
        const FittedPredictor f = fit(c.graph, train);
        std::size_t trained = 0;
        for (const auto& r : f.training_report().components) trained += r.trained;
        // forest, plus encoder, plus stats vocabulary
        const std::size_t expected = c.name == "pretrained2" ? 1 : c.name == "pretrained1" ? 2 : 3;
        EXPECT_EQ(trained, expected);
        EXPECT_FALSE(run_online(f, b.eval[0].events).empty());
    }
}

TEST(ModelFile, RoundTripPredictsIdentically)
{
    const SynthScenario s = bench::mscad_scenario();
    const Benchmark b = make_benchmark("scenario3-like", 2);
    const std::vector<LabeledTrace> train = subsample_trace(b.train[0], 0.2, 3);
    const EventList probe(b.eval[0].events.begin(), b.eval[0].events.begin() + 400);
    for (const Candidate& c : b.candidates) {
        const FittedPredictor f = fit(c.graph, train);
        const json doc = json::parse(model_to_json(f).dump());
        const FittedPredictor g = model_from_json(doc);
        EXPECT_EQ(run_online(f, probe), run_online(g, probe)) << c.name;
    }
}

TEST(ModelFile, RejectsCorruptDocuments)
{
    EXPECT_THROW(model_from_json(json{{"format_version", 99}}), Error);
    try {
        model_from_json(json::object({{"graph", 1}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BadModel);
    }
}

TEST(GraphDocument, RoundTripAndStrictKeys)
{
    const SynthScenario s = bench::mscad_scenario();
    const PredictorGraph g = window_stats_chain(s.catalog, 8, bench::vocabulary(s));
    EXPECT_EQ(graph_from_json(graph_to_json(g)), g);
    json doc = graph_to_json(g);
    doc["extra"] = 1;
    EXPECT_THROW(graph_from_json(doc), Error);
    EXPECT_EQ(window_size_of(g), 8u);
}

TEST(SnortSource, ParsesRawLines)
{
    Event raw;
    raw.ts = 1;
    raw.kind = EventKind::Raw;
    raw.source = "sensor";
    raw.attrs["line"] = "08/06-12:34:56.789012  [**] [1:1000001:1] test msg [**] [Priority: 2] {TCP} 10.0.0.1:1 -> 10.0.0.2:80";
    raw.label = StageId{1};
    Event junk = raw;
    junk.ts = 2;
    junk.attrs["line"] = "not an alert";
    junk.label = kNormalStage;
    LabeledTrace t{"raw", StageCatalog(), {raw, junk}};
    PredictorGraph g{t.catalog,
                     {spec("snort", "snort_parser_source", {{"year", 2021}}, {}, true),
                      spec("base", "majority_baseline", json::object(), {"snort"})},
                     {"base"}};
    ASSERT_TRUE(validate_graph(g).empty());
    const FittedPredictor f = fit(g, std::vector<LabeledTrace>{t});
    // Only the parseable line reaches the baseline, and it carries stage 1.
    const auto preds = run_online(f, t.events);
    ASSERT_EQ(preds.size(), 1u);
    EXPECT_EQ(preds[0].stage, StageId{1});
}
