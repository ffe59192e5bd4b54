#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include <modpred/ingestion.hpp>
#include <modpred/rng.hpp>

using namespace modpred;

namespace {

const std::string kData = MODPRED_TEST_DATA;

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

EventList random_events(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    EventList out;
    Timestamp ts = 1'600'000'000'000'000;
    for (std::size_t i = 0; i < n; ++i) {
        Event e;
        ts += static_cast<Timestamp>(rng.uniform_index(2'000'000));
        e.ts = ts;
        e.source = rng.uniform_index(2) ? "snort" : "suricata";
        if (rng.uniform_index(4) == 0) {
            e.kind = EventKind::Feature;
            e.nums = {{"a", rng.uniform01()}, {"b", static_cast<double>(rng.uniform_index(100))}};
        } else {
            e.kind = EventKind::Alert;
            e.attrs["alert_type"] = "1:" + std::to_string(rng.uniform_index(50)) + ":1";
            e.attrs["note"] = "quote \" and \\ slash";
            e.nums = {{"priority", static_cast<double>(1 + rng.uniform_index(3))}};
        }
        if (rng.uniform_index(5)) e.label = StageId{rng.uniform_index(6)};
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace

// -- snort ----------------------------------------------------------------------

TEST(Snort, ReferenceLine)
{
    const std::string line = "08/06-12:34:56.789012  [**] [1:1000001:1] test msg [**] [Classification: Attempted Recon] "
                              "[Priority: 2] {TCP} 10.0.0.1:1234 -> 10.0.0.2:80";
    const SnortAlert a = parse_snort_line(line, 2021);
    EXPECT_EQ(a.message, "test msg");
    EXPECT_EQ(a.src, (Endpoint{"10.0.0.1", 1234}));
    EXPECT_EQ(a.dst, (Endpoint{"10.0.0.2", 80}));
    const Event e = a.to_event();
    EXPECT_EQ(e.kind, EventKind::Alert);
    EXPECT_EQ(*e.attr("alert_type"), "1:1000001:1");
    EXPECT_EQ(*e.attr("classification"), "Attempted Recon");
    EXPECT_EQ(*e.attr("protocol"), "TCP");
    EXPECT_EQ(e.num("priority"), 2.0);
    // 2021-08-06T12:34:56.789012Z
    EXPECT_EQ(e.ts, 1628253296789012);
}

TEST(Snort, MissingClassificationStillParses)
{
    const SnortAlert a =
        parse_snort_line("01/02-03:04:05.000006  [**] [1:2:3] m [**] [Priority: 1] {UDP} 1.2.3.4 -> 5.6.7.8:53", 2020);
    EXPECT_FALSE(a.classification);
    EXPECT_FALSE(a.src->port);
    EXPECT_EQ(a.dst->port, 53);
    EXPECT_FALSE(a.to_event().attr("classification"));
}

TEST(Snort, EmptyInput)
{
    const ParseResult r = parse_snort_fast(std::vector<std::string>{}, 2021);
    EXPECT_TRUE(r.events.empty());
    EXPECT_TRUE(r.errors.empty());
}

TEST(Snort, MostlyGarbageIsFatal)
{
    const std::vector<std::string> lines{"garbage", "more garbage",
                                         "08/06-12:34:56.789012  [**] [1:1:1] m [**] [Priority: 2]"};
    try {
        parse_snort_fast(lines, 2021);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::FatalFormat);
    }
}

TEST(Snort, FixtureCorpusMatchesExpectations)
{
    const std::vector<std::string> lines = read_lines(kData + "/snort_corpus.txt");
    ASSERT_GE(lines.size(), 20u);
    const ParseResult r = parse_snort_fast(lines, 2021);

    std::ifstream expected(kData + "/snort_corpus.expected");
    ASSERT_TRUE(expected);
    std::size_t next_event = 0, next_error = 0, ok = 0, bad = 0;
    std::string row;
    while (std::getline(expected, row)) {
        if (row.empty() || row[0] == '#') continue;
        std::istringstream in(row);
        std::size_t line;
        std::string status;
        in >> line >> status;
        if (status == "error") {
            ++bad;
            ASSERT_LT(next_error, r.errors.size());
            EXPECT_EQ(r.errors[next_error++].line, line);
            continue;
        }
        ++ok;
        std::string type, classification, protocol;
        double priority;
        Timestamp ts;
        in >> type >> priority >> classification >> protocol >> ts;
        std::replace(classification.begin(), classification.end(), '_', ' ');
        ASSERT_LT(next_event, r.events.size());
        const Event& e = r.events[next_event++];
        SCOPED_TRACE("corpus line " + std::to_string(line));
        EXPECT_EQ(*e.attr("alert_type"), type);
        EXPECT_EQ(e.num("priority"), priority);
        EXPECT_EQ(e.ts, ts);
        if (classification == "-") EXPECT_FALSE(e.attr("classification"));
        else EXPECT_EQ(*e.attr("classification"), classification);
        if (protocol == "-") EXPECT_FALSE(e.attr("protocol"));
        else EXPECT_EQ(*e.attr("protocol"), protocol);
    }
    // Totality: every non-empty line is either an event or an error.
    const auto non_empty = std::count_if(lines.begin(), lines.end(), [](const std::string& l) { return !l.empty(); });
    EXPECT_EQ(r.events.size() + r.errors.size(), static_cast<std::size_t>(non_empty));
    EXPECT_EQ(r.events.size(), ok);
    EXPECT_EQ(r.errors.size(), bad);
}

// -- JSON lines ----------------------------------------------------------------

TEST(Jsonl, RoundTrip)
{
    EventList events = random_events(200, 1);
    Event window;
    window.ts = events[5].ts;
    window.kind = EventKind::Window;
    window.source = "w";
    window.members = std::make_shared<EventList>(events.begin(), events.begin() + 6);
    events.push_back(window);

    std::stringstream buf;
    write_events_jsonl(buf, events);
    const ParseResult r = read_events_jsonl(buf);
    EXPECT_TRUE(r.errors.empty());
    EXPECT_EQ(r.events, events);
}

TEST(Jsonl, MissingTsReportsLine)
{
    std::stringstream buf;
    buf << event_to_line(random_events(1, 2).front()) << '\n'
        << R"({"source":"s","kind":"ALERT","attrs":{"alert_type":"x"},"nums":[],"label":null})" << '\n'
        << event_to_line(random_events(1, 3).front()) << '\n';
    const ParseResult r = read_events_jsonl(buf);
    EXPECT_EQ(r.events.size(), 2u);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.errors[0].line, 2u);
    EXPECT_NE(r.errors[0].message.find("ParseError"), std::string::npos);
}

TEST(Jsonl, RejectsUnknownKeysAndKinds)
{
    EXPECT_THROW(event_from_line(R"({"ts":1,"source":"s","kind":"ALERT","attrs":{"alert_type":"x"},"extra":1})"), Error);
    EXPECT_THROW(event_from_line(R"({"ts":1,"source":"s","kind":"alert","attrs":{"alert_type":"x"}})"), Error);
    EXPECT_THROW(event_from_line(R"({"ts":1,"source":"s","kind":"ALERT"})"), Error);
    EXPECT_THROW(event_from_line("{not json"), Error);
}

TEST(Jsonl, TenThousandLinesChecksumStable)
{
    const EventList events = random_events(10'000, 4);
    std::stringstream first;
    write_events_jsonl(first, events);
    const std::string text = first.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 10'000);

    std::stringstream in(text);
    const ParseResult r = read_events_jsonl(in);
    ASSERT_EQ(r.events.size(), 10'000u);
    std::stringstream second;
    write_events_jsonl(second, r.events);
    EXPECT_EQ(fnv1a(second.str()), fnv1a(text));

    std::stringstream again;
    write_events_jsonl(again, random_events(10'000, 4));
    EXPECT_EQ(fnv1a(again.str()), fnv1a(text));
}

// -- CSV --------------------------------------------------------------------------

TEST(Csv, ThreeRowsInferCatalog)
{
    const std::string text = "ts,source,alert_type,label\n"
                             "1,wazuh,login,Normal\n"
                             "2,suricata,scan,Network Scan\n"
                             "3,suricata,scan,Network Scan\n";
    const CsvReadResult r = read_labeled_csv_text(text, CsvSchema{});
    EXPECT_EQ(r.trace.events.size(), 3u);
    EXPECT_EQ(r.trace.catalog.names(), (std::vector<std::string>{"Normal", "Network Scan"}));
    EXPECT_EQ(r.trace.events[2].label, StageId{1});
    EXPECT_EQ(r.trace.events[1].ts, 2 * kMicrosPerSecond);
    EXPECT_FALSE(r.sorted_applied);
    EXPECT_TRUE(validate_trace(r.trace).empty());
}

TEST(Csv, UnsortedRowsAreSorted)
{
    const std::string text = "ts,source,alert_type,label\n"
                             "5,a,x,Normal\n"
                             "2,a,y,Normal\n"
                             "2,a,z,Normal\n";
    const CsvReadResult r = read_labeled_csv_text(text, CsvSchema{});
    EXPECT_TRUE(r.sorted_applied);
    EXPECT_EQ(*r.trace.events[0].attr("alert_type"), "y");
    EXPECT_EQ(*r.trace.events[1].attr("alert_type"), "z");
    EXPECT_EQ(*r.trace.events[2].attr("alert_type"), "x");
}

TEST(Csv, NineStageCatalogLookup)
{
    const StageCatalog ait({"Normal", "Network Scan", "Service Scan", "WPScan", "Dirb Scan", "Webshell", "Reverse Shell",
                            "Password Cracking", "Privilege Escalation"});
    const std::string text = "time,host,rule,prio,stage\n"
                             "2022-01-21T10:00:00Z,wazuh,\"WordPress, scan\",3,WPScan\n";
    CsvSchema schema;
    schema.ts = "time";
    schema.source = "host";
    schema.alert_type = "rule";
    schema.priority = "prio";
    schema.label = "stage";
    const CsvReadResult r = read_labeled_csv_text(text, schema, ait);
    ASSERT_EQ(r.trace.events.size(), 1u);
    EXPECT_EQ(r.trace.events[0].label, StageId{3});
    EXPECT_EQ(*r.trace.events[0].attr("alert_type"), "WordPress, scan");
    EXPECT_EQ(r.trace.events[0].num("priority"), 3.0);
    EXPECT_EQ(r.trace.events[0].ts, 1642759200LL * kMicrosPerSecond);
}

TEST(Csv, Errors)
{
    try {
        read_labeled_csv_text("ts,source,label\n1,a,Normal\n", CsvSchema{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
    }
    try {
        read_labeled_csv_text("ts,source,alert_type,label\n1,a,x,Exfiltration\n", CsvSchema{}, StageCatalog());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownStageName);
    }
}

TEST(Csv, QuotedFields)
{
    const auto records = parse_csv("a,b\n\"x,\"\"y\"\"\",\"multi\nline\"\n");
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[1][0], "x,\"y\"");
    EXPECT_EQ(records[1][1], "multi\nline");
    EXPECT_THROW(parse_csv("\"open"), Error);
}

TEST(CatalogSidecar, RoundTrip)
{
    const StageCatalog c({"Normal", "Port Scan", "Web Crawling"});
    std::stringstream buf;
    write_catalog(buf, c);
    EXPECT_EQ(read_catalog(buf), c);
}
