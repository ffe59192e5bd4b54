#include <algorithm>
#include <map>

#include <gtest/gtest.h>

#include <modpred/event.hpp>
#include <modpred/rng.hpp>

using namespace modpred;

namespace {

Event alert(Timestamp ts, std::string source, std::string type = "t", std::optional<StageId> label = std::nullopt)
{
    Event e;
    e.ts = ts;
    e.source = std::move(source);
    e.kind = EventKind::Alert;
    e.attrs["alert_type"] = std::move(type);
    e.label = label;
    return e;
}

} // namespace

TEST(Catalog, DefaultHasNormalFirst)
{
    StageCatalog c;
    EXPECT_EQ(c.size(), 2u);
    EXPECT_EQ(c.name(kNormalStage), "Normal");
}

TEST(Catalog, RejectsBadNames)
{
    EXPECT_THROW(StageCatalog({"Normal"}), Error);
    EXPECT_THROW(StageCatalog({"Scan", "Normal"}), Error);
    EXPECT_THROW(StageCatalog({"Normal", "Scan", "Scan"}), Error);
    EXPECT_THROW(StageCatalog({"Normal", ""}), Error);
    try {
        StageCatalog({"Attack", "Normal"});
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BadCatalog);
    }
}

TEST(Catalog, FindAndRange)
{
    StageCatalog c({"Normal", "Network Scan", "Service Scan", "WPScan"});
    ASSERT_TRUE(c.find("WPScan"));
    EXPECT_EQ(c.find("WPScan")->index, 3u);
    EXPECT_FALSE(c.find("Exfiltration"));
    EXPECT_FALSE(c.contains(StageId{4}));
    EXPECT_THROW(c.name(StageId{4}), Error);
}

TEST(EventKindNames, RoundTrip)
{
    for (EventKind k : {EventKind::Raw, EventKind::Alert, EventKind::Window, EventKind::Feature, EventKind::Category,
                        EventKind::Prediction})
        EXPECT_EQ(parse_event_kind(to_string(k)), k);
    EXPECT_FALSE(parse_event_kind("alert"));
}

TEST(MergeStreams, EmptyStreams)
{
    std::vector<EventList> streams(2);
    EXPECT_TRUE(merge_streams(streams).empty());
}

TEST(MergeStreams, InterleavesByTimestamp)
{
    std::vector<EventList> streams{{alert(1, "A"), alert(3, "A")}, {alert(2, "B")}};
    const EventList out = merge_streams(streams);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].ts, 1);
    EXPECT_EQ(out[0].source, "A");
    EXPECT_EQ(out[1].ts, 2);
    EXPECT_EQ(out[1].source, "B");
    EXPECT_EQ(out[2].ts, 3);
    EXPECT_EQ(out[2].source, "A");
}

TEST(MergeStreams, TiesGoToSmallerSource)
{
    std::vector<EventList> streams{{alert(5, "wazuh")}, {alert(5, "aminer")}};
    const EventList out = merge_streams(streams);
    EXPECT_EQ(out[0].source, "aminer");
    EXPECT_EQ(out[1].source, "wazuh");
}

TEST(MergeStreams, SameSourceTiesKeepStreamThenPositionOrder)
{
    std::vector<EventList> streams{{alert(5, "s", "a1"), alert(5, "s", "a2")}, {alert(5, "s", "b1")}};
    const EventList out = merge_streams(streams);
    EXPECT_EQ(*out[0].attr("alert_type"), "a1");
    EXPECT_EQ(*out[1].attr("alert_type"), "a2");
    EXPECT_EQ(*out[2].attr("alert_type"), "b1");
}

TEST(MergeStreams, UnsortedInputNamesStream)
{
    std::vector<EventList> streams{{alert(1, "x")}, {alert(4, "ids"), alert(2, "ids")}};
    try {
        merge_streams(streams);
        FAIL() << "expected MalformedStream";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedStream);
        EXPECT_NE(std::string(e.what()).find("stream 1"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("ids"), std::string::npos);
    }
}

TEST(MergeStreams, PreservesMultisetAndIsDeterministic)
{
    Rng rng(11);
    const std::vector<std::string> sources{"a", "b", "c"};
    std::vector<EventList> streams(3);
    std::size_t total = 0;
    for (std::size_t s = 0; s < streams.size(); ++s) {
        Timestamp ts = 0;
        const std::size_t n = rng.uniform_index(50);
        for (std::size_t i = 0; i < n; ++i) {
            ts += static_cast<Timestamp>(rng.uniform_index(3));
            streams[s].push_back(alert(ts, sources[rng.uniform_index(3)], "s" + std::to_string(s) + "-" + std::to_string(i)));
        }
        total += n;
    }
    const EventList out = merge_streams(streams);
    ASSERT_EQ(out.size(), total);
    EXPECT_TRUE(std::is_sorted(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.ts < b.ts; }));
    std::map<std::string, int> seen;
    for (const auto& e : out) ++seen[*e.attr("alert_type")];
    for (const auto& stream : streams)
        for (const auto& e : stream) EXPECT_EQ(seen[*e.attr("alert_type")], 1);
    EXPECT_EQ(merge_streams(streams), out);
}

TEST(ValidateTrace, CleanTrace)
{
    LabeledTrace t{"t", StageCatalog(), {alert(1, "a", "x", StageId{0}), alert(2, "a", "x", StageId{1})}};
    EXPECT_TRUE(validate_trace(t).empty());
}

TEST(ValidateTrace, OutOfOrder)
{
    LabeledTrace t{"t", StageCatalog(), {alert(10, "a", "x", StageId{0}), alert(5, "a", "x", StageId{0})}};
    const auto v = validate_trace(t);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, TraceViolationKind::OutOfOrder);
    EXPECT_EQ(v[0].index, 1u);
}

TEST(ValidateTrace, BadLabel)
{
    StageCatalog six({"Normal", "s1", "s2", "s3", "s4", "s5"});
    LabeledTrace t{"t", six, {alert(1, "a", "x", StageId{0}), alert(2, "a", "x", StageId{0}), alert(3, "a", "x", StageId{9})}};
    const auto v = validate_trace(t);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, TraceViolationKind::BadLabel);
    EXPECT_EQ(v[0].index, 2u);
}

TEST(ValidateTrace, MissingPayload)
{
    Event e;
    e.ts = 1;
    e.kind = EventKind::Alert;
    LabeledTrace t{"t", StageCatalog(), {e}};
    const auto v = validate_trace(t);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, TraceViolationKind::MissingPayload);
}

TEST(PredictionStage, LowestIndexMaximizer)
{
    EXPECT_EQ(Prediction::from_probs(0, "s", {0.5, 0.5}).stage.index, 0u);
    EXPECT_EQ(Prediction::from_probs(0, "s", {0.2, 0.4, 0.4}).stage.index, 1u);

    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> p(1 + rng.uniform_index(6));
        // Coarse values so ties occur often.
        for (double& v : p) v = static_cast<double>(rng.uniform_index(4));
        const Prediction pred = Prediction::from_probs(0, "s", p);
        const auto it = std::max_element(p.begin(), p.end());
        EXPECT_EQ(pred.stage.index, static_cast<std::size_t>(it - p.begin()));
    }
}

TEST(RngTest, SampleWithoutReplacementIsDistinct)
{
    Rng rng(5);
    auto idx = rng.sample_without_replacement(20, 8);
    ASSERT_EQ(idx.size(), 8u);
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
    EXPECT_LT(idx.back(), 20u);
}

TEST(RngTest, SameSeedSameSequence)
{
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}
