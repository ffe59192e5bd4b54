// modpred: generate, ingest, validate, train, evaluate, select and run
// attack-stage predictors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <modpred/graph.hpp>
#include <modpred/ingestion.hpp>
#include <modpred/metrics.hpp>
#include <modpred/selection.hpp>
#include <modpred/synth.hpp>

namespace fs = std::filesystem;
using namespace modpred;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

json read_json_file(const std::string& path, ErrorCode code)
{
    std::ifstream in(path);
    if (!in) throw Error(code, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(code, path + ": " + e.what());
    }
}

template <class J>
void write_json_file(const std::string& path, const J& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    out << j.dump(2) << '\n';
}

std::string catalog_path(const std::string& trace_path) { return fs::path(trace_path).replace_extension(".catalog").string(); }

void write_trace(const std::string& path, const LabeledTrace& t)
{
    write_events_jsonl(path, t.events);
    std::ofstream out(catalog_path(path), std::ios::binary);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + catalog_path(path));
    write_catalog(out, t.catalog);
}

void report_line_errors(const std::string& what, const ParseResult& r)
{
    for (const auto& e : r.errors) std::cerr << what << ":" << e.line << ": " << e.message << '\n';
}

/// Event JSON Lines plus the catalog sidecar when present (else `fallback`).
LabeledTrace load_trace(const std::string& path, const StageCatalog& fallback)
{
    ParseResult r = read_events_jsonl(path);
    report_line_errors(path, r);
    LabeledTrace t;
    t.trace_id = fs::path(path).stem().string();
    t.events = std::move(r.events);
    t.catalog = fallback;
    if (fs::exists(catalog_path(path))) {
        std::ifstream in(catalog_path(path));
        t.catalog = read_catalog(in);
    }
    const auto violations = validate_trace(t);
    if (!violations.empty())
        throw Error(ErrorCode::MalformedStream, path + ": event " + std::to_string(violations.front().index) + ": " +
                                                    violations.front().detail);
    return t;
}

std::vector<LabeledTrace> load_traces(const std::vector<std::string>& paths, const StageCatalog& fallback)
{
    std::vector<LabeledTrace> out;
    for (const auto& p : paths) out.push_back(load_trace(p, fallback));
    return out;
}

PredictorGraph load_graph(const std::string& path) { return graph_from_json(read_json_file(path, ErrorCode::BadConfig)); }

FittedPredictor load_model(const std::string& path) { return model_from_json(read_json_file(path, ErrorCode::BadModel)); }

nlohmann::ordered_json training_report_json(const TrainingReport& r)
{
    nlohmann::ordered_json j;
    j["total_seconds"] = r.total_seconds;
    j["total_samples"] = r.total_samples();
    j["components"] = nlohmann::ordered_json::array();
    for (const auto& c : r.components)
        j["components"].push_back({{"name", c.name},
                                   {"kind", c.kind},
                                   {"frozen", c.frozen},
                                   {"trained", c.trained},
                                   {"samples", c.samples},
                                   {"seconds", c.seconds}});
    return j;
}

void print_training_report(std::ostream& out, const TrainingReport& r)
{
    for (const auto& c : r.components)
        out << c.name << " kind=" << c.kind << " trained=" << (c.trained ? "yes" : "no") << " samples=" << c.samples
            << " seconds=" << format_real(c.seconds) << '\n';
    out << "total_seconds=" << format_real(r.total_seconds) << '\n';
}

nlohmann::ordered_json prediction_json(const Prediction& p, const StageCatalog& catalog)
{
    nlohmann::ordered_json j;
    j["ts"] = p.ts;
    j["sink"] = p.sink;
    j["stage"] = p.stage.index;
    j["stage_name"] = catalog.name(p.stage);
    j["probs"] = p.probs;
    return j;
}

// -- commands ---------------------------------------------------------------

struct SynthArgs {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_synth(const SynthArgs& a)
{
    SynthScenario s = scenario_from_json(read_json_file(a.scenario, ErrorCode::BadScenario));
    if (a.seed) s.seed = *a.seed;
    const LabeledTrace t = generate(s);
    write_trace(a.out, t);
    std::cout << "wrote " << t.events.size() << " events to " << a.out << '\n';
    return kExitOk;
}

struct BenchmarkArgs {
    std::string name;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int cmd_benchmark(const BenchmarkArgs& a)
{
    const Benchmark b = make_benchmark(a.name, a.seed);
    const fs::path dir(a.out_dir);
    fs::create_directories(dir / "candidates");
    for (std::size_t i = 0; i < b.train.size(); ++i)
        write_trace((dir / ("train-" + std::to_string(i + 1) + ".jsonl")).string(), b.train[i]);
    for (std::size_t i = 0; i < b.eval.size(); ++i)
        write_trace((dir / ("eval-" + std::to_string(i + 1) + ".jsonl")).string(), b.eval[i]);
    for (const auto& c : b.candidates) write_json_file((dir / "candidates" / (c.name + ".json")).string(), graph_to_json(c.graph));
    std::cout << "wrote " << b.train.size() << " training traces, " << b.eval.size() << " evaluation traces and "
              << b.candidates.size() << " candidate graphs to " << a.out_dir << '\n';
    return kExitOk;
}

struct IngestArgs {
    std::string format;
    std::string in;
    std::string out;
    int year = 1970;
    std::string source = "snort";
    std::optional<std::string> catalog;
    CsvSchema schema;
    std::optional<std::string> priority_col;
};

int cmd_ingest(IngestArgs a)
{
    if (a.format == "snort") {
        const auto lines = read_lines(a.in);
        ParseResult r = parse_snort_fast(lines, a.year, a.source);
        report_line_errors(a.in, r);
        write_events_jsonl(a.out, r.events);
        std::cout << "parsed " << r.events.size() << " alerts, " << r.errors.size() << " unparseable lines\n";
        return kExitOk;
    }
    std::optional<StageCatalog> catalog;
    if (a.catalog) {
        std::ifstream in(*a.catalog);
        if (!in) throw Error(ErrorCode::BadConfig, "cannot open " + *a.catalog);
        catalog = read_catalog(in);
    }
    a.schema.priority = a.priority_col;
    const CsvReadResult r = read_labeled_csv(a.in, a.schema, catalog);
    write_trace(a.out, r.trace);
    std::cout << "read " << r.trace.events.size() << " events" << (r.sorted_applied ? " (re-sorted by ts)" : "") << '\n';
    return kExitOk;
}

int cmd_validate(const std::string& path)
{
    const PredictorGraph g = load_graph(path);
    const auto violations = validate_graph(g);
    if (violations.empty()) {
        std::cout << "OK\n";
        return kExitOk;
    }
    for (const auto& v : violations) std::cout << v.to_string() << '\n';
    return kExitConfig;
}

struct TrainArgs {
    std::string graph;
    std::vector<std::string> data;
    std::string out;
    std::uint64_t seed = 0;
    std::optional<std::string> report;
};

int cmd_train(const TrainArgs& a)
{
    const PredictorGraph g = load_graph(a.graph);
    require_valid(g);
    const auto traces = load_traces(a.data, g.catalog);
    const FittedPredictor fitted = fit(g, traces, FitOptions{a.seed});
    write_json_file(a.out, model_to_json(fitted));
    if (a.report) write_json_file(*a.report, training_report_json(fitted.training_report()));
    print_training_report(std::cout, fitted.training_report());
    return kExitOk;
}

struct EvalArgs {
    std::string model;
    std::vector<std::string> data;
    bool as_json = false;
    std::string sink;
    std::optional<std::string> train_report;
};

int cmd_eval(const EvalArgs& a)
{
    const FittedPredictor fitted = load_model(a.model);
    const auto& g = fitted.graph();
    if (!a.sink.empty() && std::find(g.sinks.begin(), g.sinks.end(), a.sink) == g.sinks.end())
        throw Error(ErrorCode::BadConfig, "unknown sink \"" + a.sink + "\"");
    const auto traces = load_traces(a.data, g.catalog);
    EvalReport r = evaluate_predictor(fitted, traces, a.sink);
    // Model files carry no timings; the training report supplies them.
    r.training_seconds = 0.0;
    if (a.train_report) {
        const json rep = read_json_file(*a.train_report, ErrorCode::BadConfig);
        r.training_seconds = rep.value("total_seconds", 0.0);
    }
    if (a.as_json)
        std::cout << report_to_json(r, g.catalog).dump(2) << '\n';
    else
        std::cout << report_to_text(r, g.catalog);
    return kExitOk;
}

struct SelectArgs {
    std::vector<std::string> candidates;
    std::vector<std::string> data;
    std::size_t k = 3;
    std::string metric = "accuracy";
    std::string mode = "gradual";
    std::string schedule = "single";
    std::uint64_t seed = 0;
    double validation_fraction = 0.2;
    std::optional<std::string> out;
    bool as_json = false;
};

int cmd_select(const SelectArgs& a)
{
    if (a.candidates.empty()) throw Error(ErrorCode::BadConfig, "select needs at least one candidate");
    std::vector<Candidate> candidates;
    for (const auto& path : a.candidates) {
        PredictorGraph g = load_graph(path);
        require_valid(g);
        candidates.push_back({fs::path(path).stem().string(), std::move(g)});
    }
    SelectionConfig cfg;
    cfg.k = a.k;
    cfg.metric = a.metric == "macro_f1" ? SelectionMetric::MacroF1 : SelectionMetric::Accuracy;
    cfg.seed = a.seed;
    cfg.validation_fraction = a.validation_fraction;
    cfg.schedule = a.schedule == "cumulative" ? FoldSchedule::Cumulative : FoldSchedule::Single;
    const auto traces = load_traces(a.data, candidates.front().graph.catalog);

    if (a.mode == "gradual") {
        const SelectionResult r = gradual_select(candidates, traces, cfg);
        if (a.out) write_json_file(*a.out, model_to_json(r.predictor));
        if (a.as_json) {
            std::cout << selection_trace_to_json(r.trace).dump(2) << '\n';
        } else {
            for (const auto& round : r.trace.rounds) {
                std::cout << "round " << round.round << " folds=";
                for (std::size_t i = 0; i < round.folds_used.size(); ++i) std::cout << (i ? "," : "") << round.folds_used[i];
                std::cout << '\n';
                for (const auto& c : round.candidates)
                    std::cout << "  " << c.name << " metric=" << (c.failed ? std::string("-inf") : format_real(c.metric))
                              << " seconds=" << format_real(c.seconds) << " samples=" << c.samples
                              << (c.failed ? " failed: " + c.failure : std::string()) << '\n';
                std::cout << "  eliminated=" << round.eliminated << " cumulative_seconds=" << format_real(round.cumulative_seconds)
                          << '\n';
            }
            std::cout << "winner=" << r.trace.winner << '\n';
            std::cout << "selection_seconds=" << format_real(r.trace.selection_seconds) << '\n';
            std::cout << "final_fit_seconds=" << format_real(r.trace.final_fit_seconds) << '\n';
            std::cout << "summed_seconds=" << format_real(r.trace.summed_seconds()) << '\n';
            std::cout << "elapsed_seconds=" << format_real(r.trace.elapsed_seconds) << '\n';
        }
        return kExitOk;
    }

    const FullSelectionResult r = full_select(candidates, traces, cfg);
    if (a.out) write_json_file(*a.out, model_to_json(r.predictor));
    const StageCatalog& catalog = candidates.front().graph.catalog;
    if (a.as_json) {
        nlohmann::ordered_json j;
        j["winner"] = r.winner;
        j["candidates"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < r.results.size(); ++i) {
            nlohmann::ordered_json c;
            c["name"] = r.results[i].name;
            c["seconds"] = r.results[i].seconds;
            c["samples"] = r.results[i].samples;
            c["failed"] = r.results[i].failed;
            c["report"] = r.reports[i] ? report_to_json(*r.reports[i], catalog) : nlohmann::ordered_json(nullptr);
            j["candidates"].push_back(std::move(c));
        }
        j["summed_seconds"] = r.summed_seconds;
        j["elapsed_seconds"] = r.elapsed_seconds;
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << "candidate accuracy macro_f1 seconds samples\n";
        for (std::size_t i = 0; i < r.results.size(); ++i) {
            const auto& c = r.results[i];
            std::cout << c.name << ' ' << (r.reports[i] ? format_real(r.reports[i]->accuracy) : "failed") << ' '
                      << (r.reports[i] ? format_real(r.reports[i]->macro_f1) : "failed") << ' ' << format_real(c.seconds) << ' '
                      << c.samples << '\n';
        }
        std::cout << "winner=" << r.winner << '\n';
        std::cout << "summed_seconds=" << format_real(r.summed_seconds) << '\n';
        std::cout << "elapsed_seconds=" << format_real(r.elapsed_seconds) << '\n';
    }
    return kExitOk;
}

struct RunArgs {
    std::string model;
    std::string in;
    std::string out = "-";
};

int cmd_run(const RunArgs& a)
{
    const FittedPredictor fitted = load_model(a.model);
    const StageCatalog& catalog = fitted.graph().catalog;

    std::ifstream file_in;
    std::istream* in = &std::cin;
    if (a.in != "-") {
        file_in.open(a.in);
        if (!file_in) throw Error(ErrorCode::ParseError, "cannot open " + a.in);
        in = &file_in;
    }
    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (a.out != "-") {
        file_out.open(a.out, std::ios::binary);
        if (!file_out) throw Error(ErrorCode::ParseError, "cannot write " + a.out);
        out = &file_out;
    }

    OnlineRunner runner(fitted);
    ParseResult bad;
    std::size_t lineno = 0, non_empty = 0;
    std::string line;
    while (std::getline(*in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        ++non_empty;
        Event e;
        try {
            e = event_from_line(line);
        } catch (const Error& err) {
            std::cerr << a.in << ":" << lineno << ": " << err.what() << '\n';
            bad.errors.push_back({lineno, err.what()});
            continue;
        }
        for (const Prediction& p : runner.push(e)) *out << prediction_json(p, catalog).dump() << '\n' << std::flush;
    }
    detail::check_fatal(bad, non_empty, "event JSON lines");
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Compose, train, evaluate and run attack-stage predictors"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a labeled trace from a scenario document");
    c_synth->add_option("scenario", synth.scenario, "Scenario JSON")->required();
    c_synth->add_option("--seed", synth.seed, "Override the scenario seed");
    c_synth->add_option("--out", synth.out, "Output event JSON Lines file")->required();

    BenchmarkArgs bench;
    auto* c_bench = app.add_subcommand("benchmark", "Write a packaged benchmark's traces and candidate graphs");
    c_bench->add_option("name", bench.name, "scenario2-like, scenario3-like or scenario4-like")->required();
    c_bench->add_option("--seed", bench.seed, "Seed");
    c_bench->add_option("--out-dir", bench.out_dir, "Output directory")->required();

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Convert Snort fast alerts or a labeled CSV to event JSON Lines");
    c_ingest->add_option("--format", ingest.format, "snort or csv")->required()->check(CLI::IsMember({"snort", "csv"}));
    c_ingest->add_option("--in", ingest.in, "Input file")->required();
    c_ingest->add_option("--out", ingest.out, "Output event JSON Lines file")->required();
    c_ingest->add_option("--year", ingest.year, "Year for Snort timestamps (they carry none)");
    c_ingest->add_option("--source", ingest.source, "Source name for Snort alerts");
    c_ingest->add_option("--catalog", ingest.catalog, "Stage catalog file for CSV labels");
    c_ingest->add_option("--ts-col", ingest.schema.ts, "CSV timestamp column");
    c_ingest->add_option("--source-col", ingest.schema.source, "CSV source column");
    c_ingest->add_option("--type-col", ingest.schema.alert_type, "CSV alert type column");
    c_ingest->add_option("--priority-col", ingest.priority_col, "CSV priority column");
    c_ingest->add_option("--label-col", ingest.schema.label, "CSV label column");
    c_ingest->add_option("--ts-unit", ingest.schema.ts_unit, "Unit of numeric CSV timestamps")
        ->check(CLI::IsMember({"s", "ms", "us"}));
    c_ingest->add_option("--default-source", ingest.schema.default_source, "Source when the CSV has no source column");

    std::string validate_path;
    auto* c_validate = app.add_subcommand("validate", "Check a graph document");
    c_validate->add_option("graph", validate_path, "Graph JSON")->required();

    TrainArgs train;
    auto* c_train = app.add_subcommand("train", "Fit a predictor graph on labeled traces");
    c_train->add_option("graph", train.graph, "Graph JSON")->required();
    c_train->add_option("--data", train.data, "Labeled trace files")->required();
    c_train->add_option("--out", train.out, "Model file")->required();
    c_train->add_option("--seed", train.seed, "Seed");
    c_train->add_option("--report", train.report, "Write the training report as JSON");

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "Evaluate a model on labeled traces");
    c_eval->add_option("model", eval.model, "Model file")->required();
    c_eval->add_option("--data", eval.data, "Labeled trace files")->required();
    c_eval->add_flag("--json", eval.as_json, "Machine-readable output");
    c_eval->add_option("--sink", eval.sink, "Sink to score (default: the first)");
    c_eval->add_option("--train-report", eval.train_report, "Training report JSON for training_seconds");

    SelectArgs select;
    auto* c_select = app.add_subcommand("select", "Pick one predictor among candidate graphs");
    c_select->add_option("--candidates", select.candidates, "Candidate graph files")->required();
    c_select->add_option("--data", select.data, "Labeled trace files")->required();
    c_select->add_option("--k", select.k, "Number of training folds")->check(CLI::PositiveNumber);
    c_select->add_option("--metric", select.metric, "accuracy or macro_f1")->check(CLI::IsMember({"accuracy", "macro_f1"}));
    c_select->add_option("--mode", select.mode, "gradual or full")->check(CLI::IsMember({"gradual", "full"}));
    c_select->add_option("--schedule", select.schedule, "single or cumulative fold use per round")
        ->check(CLI::IsMember({"single", "cumulative"}));
    c_select->add_option("--seed", select.seed, "Seed");
    c_select->add_option("--validation-fraction", select.validation_fraction, "Held-out fraction");
    c_select->add_option("--out", select.out, "Write the selected model");
    c_select->add_flag("--json", select.as_json, "Machine-readable output");

    RunArgs run;
    auto* c_run = app.add_subcommand("run", "Stream events through a model, one prediction line per sink emission");
    c_run->add_option("model", run.model, "Model file")->required();
    c_run->add_option("--in", run.in, "Event JSON Lines file, or - for stdin")->required();
    c_run->add_option("--out", run.out, "Prediction JSON Lines file, or - for stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*c_synth) return cmd_synth(synth);
        if (*c_bench) return cmd_benchmark(bench);
        if (*c_ingest) return cmd_ingest(ingest);
        if (*c_validate) return cmd_validate(validate_path);
        if (*c_train) return cmd_train(train);
        if (*c_eval) return cmd_eval(eval);
        if (*c_select) return cmd_select(select);
        if (*c_run) return cmd_run(run);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_configuration_error(e.code()) ? kExitConfig : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitConfig;
}
