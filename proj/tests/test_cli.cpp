#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include <modpred/graph.hpp>
#include <modpred/ingestion.hpp>
#include <modpred/synth.hpp>

namespace fs = std::filesystem;
using namespace modpred;
using bench::spec;

namespace {

struct Result {
    int status = -1;
    std::string out;
};

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

Result cli(const std::string& args, bool with_stderr = false)
{
    const std::string cmd = std::string("'") + MODPRED_CLI + "' " + args + (with_stderr ? " 2>&1" : " 2>/dev/null");
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed");
    Result r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int st = ::pclose(pipe);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines_of(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path() / ("modpred_cli_" + std::to_string(::getpid()) + "_" +
                                           ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
        scenario = bench::cicids_scenario();
        scenario.seed = 5;
        write_text(dir / "scenario.json", scenario_to_json(scenario).dump());
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write_graph(const std::string& name, const PredictorGraph& g)
    {
        const fs::path p = dir / (name + ".json");
        write_text(p, graph_to_json(g).dump());
        return p;
    }

    PredictorGraph window_graph(std::size_t window, std::size_t trees = 10) const
    {
        return window_stats_chain(scenario.catalog, window, bench::vocabulary(scenario), trees);
    }

    void synth(const std::string& name, std::uint64_t seed)
    {
        ASSERT_EQ(cli("synth " + q(dir / "scenario.json") + " --seed " + std::to_string(seed) + " --out " + q(dir / name)).status, 0);
    }

    fs::path dir;
    SynthScenario scenario;
};

} // namespace

TEST_F(Cli, SynthTrainEvalRunPipeline)
{
    synth("train.jsonl", 1);
    synth("test.jsonl", 2);
    EXPECT_TRUE(fs::exists(dir / "train.catalog"));
    const fs::path g = write_graph("g", window_graph(6));
    EXPECT_EQ(cli("validate " + q(g)).out, "OK\n");

    const Result tr = cli("train " + q(g) + " --data " + q(dir / "train.jsonl") + " --out " + q(dir / "model.json") + " --report " +
                          q(dir / "report.json"));
    ASSERT_EQ(tr.status, 0);
    EXPECT_NE(tr.out.find("forest kind=random_forest trained=yes"), std::string::npos);
    EXPECT_NE(tr.out.find("window kind=sliding_window trained=no"), std::string::npos);

    const Result ev = cli("eval " + q(dir / "model.json") + " --data " + q(dir / "test.jsonl"));
    ASSERT_EQ(ev.status, 0);
    const double acc = std::stod(ev.out.substr(ev.out.find("accuracy=") + 9));
    EXPECT_GT(acc, 0.6);
    EXPECT_NE(ev.out.find("timeliness="), std::string::npos);

    const Result run = cli("run " + q(dir / "model.json") + " --in " + q(dir / "test.jsonl") + " --out -");
    ASSERT_EQ(run.status, 0);
    const auto preds = lines_of(run.out);
    const auto events = read_events_jsonl((dir / "test.jsonl").string()).events;
    // Window of 6 emits once the window fills.
    EXPECT_EQ(preds.size(), events.size() - 5);
    const json first = json::parse(preds.front());
    EXPECT_EQ(first["sink"], "forest");
    EXPECT_EQ(first["probs"].size(), scenario.catalog.size());
    EXPECT_EQ(first["stage_name"], scenario.catalog.name(StageId{first["stage"].get<std::size_t>()}));
}

TEST_F(Cli, SameSeedSameBytes)
{
    synth("a.jsonl", 11);
    synth("b.jsonl", 11);
    synth("c.jsonl", 12);
    EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
    EXPECT_NE(slurp(dir / "a.jsonl"), slurp(dir / "c.jsonl"));

    const fs::path g = write_graph("g", window_graph(4));
    for (const char* m : {"m1.json", "m2.json"})
        ASSERT_EQ(cli("train " + q(g) + " --data " + q(dir / "a.jsonl") + " --seed 3 --out " + q(dir / m)).status, 0);
    EXPECT_EQ(slurp(dir / "m1.json"), slurp(dir / "m2.json"));
}

TEST_F(Cli, ConfigErrorsExitTwo)
{
    json doc = scenario_to_json(scenario);
    doc["background_rate"] = -1;
    write_text(dir / "bad.json", doc.dump());
    EXPECT_EQ(cli("synth " + q(dir / "bad.json") + " --out " + q(dir / "x.jsonl")).status, 2);
    EXPECT_FALSE(fs::exists(dir / "x.jsonl"));

    PredictorGraph cyc{scenario.catalog,
                       {bench::source(), spec("a", "sliding_window", {{"size", 2}}, {"b"}, true),
                        spec("b", "sliding_window", {{"size", 2}}, {"a"}, true)},
                       {"a"}};
    const Result v = cli("validate " + q(write_graph("cyc", cyc)));
    EXPECT_EQ(v.status, 2);
    EXPECT_NE(v.out.find("Cycle"), std::string::npos) << v.out;

    json unknown = graph_to_json(window_graph(2));
    unknown["components"][3]["kind"] = "neural_net";
    write_text(dir / "unknown.json", unknown.dump());
    EXPECT_EQ(cli("validate " + q(dir / "unknown.json")).status, 2);
    EXPECT_EQ(cli("select --candidates " + q(dir / "unknown.json") + " --data x").status, 2);

    EXPECT_EQ(cli("benchmark scenario9-like --out-dir " + q(dir / "b")).status, 2);
    EXPECT_EQ(cli("select --k 0 --candidates a --data b").status, 2);
    EXPECT_EQ(cli("").status, 2);
}

TEST_F(Cli, UnlabeledTrainingDataExitsThree)
{
    std::ostringstream s;
    for (int i = 0; i < 20; ++i)
        s << R"({"ts":)" << i * 1000 << R"(,"source":"s","kind":"ALERT","attrs":{"alert_type":"x"},"nums":[]})" << '\n';
    write_text(dir / "unlabeled.jsonl", s.str());
    write_text(dir / "unlabeled.catalog", "Normal\nAttack\n");
    PredictorGraph g{StageCatalog({"Normal", "Attack"}),
                     {bench::source(), spec("forest", "random_forest", bench::forest_params(3), {"alerts"})},
                     {"forest"}};
    const Result r = cli("train " + q(write_graph("g", g)) + " --data " + q(dir / "unlabeled.jsonl") + " --out " + q(dir / "m.json"), true);
    EXPECT_EQ(r.status, 3);
    EXPECT_NE(r.out.find("NoLabels"), std::string::npos) << r.out;
    EXPECT_FALSE(fs::exists(dir / "m.json"));
}

TEST_F(Cli, EvalJsonMatchesText)
{
    synth("train.jsonl", 1);
    synth("test.jsonl", 2);
    const fs::path g = write_graph("g", window_graph(3));
    ASSERT_EQ(cli("train " + q(g) + " --data " + q(dir / "train.jsonl") + " --out " + q(dir / "m.json") + " --report " +
                  q(dir / "r.json"))
                  .status,
              0);
    const std::string base = "eval " + q(dir / "m.json") + " --data " + q(dir / "test.jsonl");
    const Result text = cli(base);
    const Result js = cli(base + " --json --train-report " + q(dir / "r.json"));
    ASSERT_EQ(js.status, 0);
    const json j = json::parse(js.out);
    EXPECT_EQ(std::stod(text.out.substr(text.out.find("accuracy=") + 9)), j["accuracy"].get<double>());
    EXPECT_EQ(std::stod(text.out.substr(text.out.find("macro_f1=") + 9)), j["macro_f1"].get<double>());
    ASSERT_TRUE(j.contains("timeliness"));
    EXPECT_GT(j["training_seconds"].get<double>(), 0.0);
    EXPECT_EQ(j["training_seconds"].get<double>(), json::parse(slurp(dir / "r.json"))["total_seconds"].get<double>());
}

TEST_F(Cli, SelectGradualAndFull)
{
    for (int i = 1; i <= 3; ++i) synth("t" + std::to_string(i) + ".jsonl", static_cast<std::uint64_t>(i));
    PredictorGraph base{scenario.catalog, {bench::source(), spec("base", "majority_baseline", json::object(), {"alerts"})}, {"base"}};
    std::string cands;
    cands += " " + q(write_graph("baseline", base));
    cands += " " + q(write_graph("w2", window_graph(2, 5)));
    cands += " " + q(write_graph("w6", window_graph(6, 5)));
    cands += " " + q(write_graph("w10", window_graph(10, 5)));
    const std::string data = " --data " + q(dir / "t1.jsonl") + " " + q(dir / "t2.jsonl") + " " + q(dir / "t3.jsonl");

    const Result g = cli("select --json --candidates" + cands + data + " --out " + q(dir / "sel.json"));
    ASSERT_EQ(g.status, 0);
    const json trace = json::parse(g.out);
    ASSERT_EQ(trace["rounds"].size(), 3u);
    EXPECT_EQ(trace["rounds"][0]["eliminated"], "baseline");
    EXPECT_TRUE(fs::exists(dir / "sel.json"));
    EXPECT_NE(trace["winner"], "baseline");

    const Result f = cli("select --mode full --candidates" + cands + data);
    ASSERT_EQ(f.status, 0);
    const auto rows = lines_of(f.out);
    ASSERT_GE(rows.size(), 5u);
    EXPECT_EQ(rows[0], "candidate accuracy macro_f1 seconds samples");
    for (int i = 1; i <= 4; ++i) EXPECT_EQ(std::count(rows[i].begin(), rows[i].end(), ' '), 4) << rows[i];
    EXPECT_EQ(rows[5].rfind("winner=", 0), 0u);
}

TEST_F(Cli, RunIsPrefixCausal)
{
    synth("train.jsonl", 1);
    synth("test.jsonl", 2);
    ASSERT_EQ(cli("train " + q(write_graph("g", window_graph(4))) + " --data " + q(dir / "train.jsonl") + " --out " + q(dir / "m.json"))
                  .status,
              0);
    const auto events = lines_of(slurp(dir / "test.jsonl"));
    std::string half;
    for (std::size_t i = 0; i < events.size() / 2; ++i) half += events[i] + "\n";
    write_text(dir / "half.jsonl", half);
    const auto full = lines_of(cli("run " + q(dir / "m.json") + " --in " + q(dir / "test.jsonl")).out);
    const auto part = lines_of(cli("run " + q(dir / "m.json") + " --in " + q(dir / "half.jsonl")).out);
    ASSERT_FALSE(part.empty());
    ASSERT_LT(part.size(), full.size());
    for (std::size_t i = 0; i < part.size(); ++i) EXPECT_EQ(part[i], full[i]);
}

TEST_F(Cli, RunStreamsBeforeInputCloses)
{
    synth("train.jsonl", 1);
    ASSERT_EQ(cli("train " + q(write_graph("g", window_graph(1))) + " --data " + q(dir / "train.jsonl") + " --out " + q(dir / "m.json"))
                  .status,
              0);
    const auto events = lines_of(slurp(dir / "train.jsonl"));

    int to_child[2], from_child[2];
    ASSERT_EQ(::pipe(to_child), 0);
    ASSERT_EQ(::pipe(from_child), 0);
    const pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
        ::dup2(to_child[0], 0);
        ::dup2(from_child[1], 1);
        ::close(to_child[1]);
        ::close(from_child[0]);
        const std::string model = (dir / "m.json").string();
        ::execl(MODPRED_CLI, MODPRED_CLI, "run", model.c_str(), "--in", "-", "--out", "-", static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    const std::string first = events.front() + "\n";
    ASSERT_EQ(::write(to_child[1], first.data(), first.size()), static_cast<ssize_t>(first.size()));
    // Stdin is still open: the prediction for the first event must already be readable.
    std::string got;
    char c;
    while (::read(from_child[0], &c, 1) == 1 && c != '\n') got += c;
    EXPECT_EQ(json::parse(got)["ts"].get<Timestamp>(), event_from_line(events.front()).ts);
    ::close(to_child[1]);
    while (::read(from_child[0], &c, 1) == 1) {
    }
    ::close(from_child[0]);
    int st = 0;
    ::waitpid(pid, &st, 0);
    EXPECT_TRUE(WIFEXITED(st));
    EXPECT_EQ(WEXITSTATUS(st), 0);
}

TEST_F(Cli, AllFrozenGraphPersists)
{
    synth("train.jsonl", 1);
    PredictorGraph g{scenario.catalog,
                     {bench::source(), spec("base", "majority_baseline", {{"probs", {0.6, 0.1, 0.1, 0.1, 0.1}}}, {"alerts"}, true)},
                     {"base"}};
    const Result r = cli("train " + q(write_graph("g", g)) + " --data " + q(dir / "train.jsonl") + " --out " + q(dir / "m.json"));
    ASSERT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("base kind=majority_baseline trained=no samples=0"), std::string::npos);
    const auto preds = lines_of(cli("run " + q(dir / "m.json") + " --in " + q(dir / "train.jsonl")).out);
    ASSERT_FALSE(preds.empty());
    EXPECT_EQ(json::parse(preds.front())["stage"], 0);
}
