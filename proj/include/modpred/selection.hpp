#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "event.hpp"
#include "graph.hpp"
#include "metrics.hpp"

namespace modpred {

struct Candidate {
    std::string name;
    PredictorGraph graph;
};

/// Runs a fitted predictor over labeled traces and scores one sink (the first
/// by default) against the trace labels. Traces without any aligned
/// prediction are skipped; NoOverlap if none align at all.
inline EvalReport evaluate_predictor(const FittedPredictor& fitted, std::span<const LabeledTrace> traces,
                                     std::string sink = {})
{
    if (sink.empty()) sink = fitted.graph().sinks.front();
    std::vector<StageId> predicted, truth;
    for (const auto& trace : traces) {
        std::vector<Prediction> preds;
        for (Prediction& p : run_online(fitted, trace.events))
            if (p.sink == sink) preds.push_back(std::move(p));
        if (preds.empty()) continue;
        try {
            Alignment a = align_predictions(preds, trace);
            predicted.insert(predicted.end(), a.predicted.begin(), a.predicted.end());
            truth.insert(truth.end(), a.truth.begin(), a.truth.end());
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoOverlap) throw;
        }
    }
    if (predicted.empty()) throw Error(ErrorCode::NoOverlap, "no predictions aligned with labeled events");
    EvalReport r = evaluate(predicted, truth, fitted.graph().catalog);
    r.timeliness = window_size_of(fitted.graph());
    r.training_seconds = fitted.training_report().total_seconds;
    return r;
}

enum class SelectionMetric { Accuracy, MacroF1 };

/// How much data each elimination round trains on.
enum class FoldSchedule {
    /// Round r trains on fold ((r - 1) mod k) + 1 alone: 1/k of the training data.
    Single,
    /// Round r trains on folds 1..min(r, k).
    Cumulative,
};

struct SelectionConfig {
    std::size_t k = 3;
    SelectionMetric metric = SelectionMetric::Accuracy;
    std::uint64_t seed = 0;
    double validation_fraction = 0.2;
    FoldSchedule schedule = FoldSchedule::Single;

    void validate() const
    {
        if (k < 1) throw Error(ErrorCode::BadConfig, "selection: k must be >= 1");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw Error(ErrorCode::BadConfig, "selection: validation_fraction must be in (0, 1)");
    }
};

inline double metric_of(const EvalReport& r, SelectionMetric m) { return m == SelectionMetric::Accuracy ? r.accuracy : r.macro_f1; }

struct DataSplit {
    std::vector<LabeledTrace> validation;
    /// folds[i] is the i-th training fold (0-based here, 1-based in reports).
    std::vector<std::vector<LabeledTrace>> folds;
    bool trace_granular = true;

    std::vector<LabeledTrace> training_union(std::span<const std::size_t> fold_ids) const
    {
        std::vector<LabeledTrace> out;
        for (std::size_t f : fold_ids) out.insert(out.end(), folds[f].begin(), folds[f].end());
        return out;
    }

    std::vector<LabeledTrace> all_training() const
    {
        std::vector<std::size_t> ids(folds.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        return training_union(ids);
    }
};

inline LabeledTrace slice_trace(const LabeledTrace& t, std::size_t begin, std::size_t end, const std::string& suffix)
{
    LabeledTrace out;
    out.trace_id = t.trace_id + suffix;
    out.catalog = t.catalog;
    out.events.assign(t.events.begin() + static_cast<std::ptrdiff_t>(begin), t.events.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

/// Holds out the last traces (or, for a single trace, its last chronological
/// segment) for validation and cuts the remainder into k folds: whole traces
/// when at least k remain, otherwise k contiguous segments of every trace.
inline DataSplit split_data(std::span<const LabeledTrace> data, std::size_t k, double validation_fraction)
{
    if (data.empty()) throw Error(ErrorCode::EmptyInput, "selection needs training data");
    DataSplit split;
    std::vector<LabeledTrace> remainder;
    if (data.size() >= 2) {
        std::size_t n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(data.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
        remainder.assign(data.begin(), data.end() - static_cast<std::ptrdiff_t>(n_val));
        split.validation.assign(data.end() - static_cast<std::ptrdiff_t>(n_val), data.end());
    } else {
        const LabeledTrace& t = data.front();
        const std::size_t n = t.events.size();
        const auto cut = static_cast<std::size_t>(std::llround((1.0 - validation_fraction) * static_cast<double>(n)));
        remainder.push_back(slice_trace(t, 0, cut, "#train"));
        split.validation.push_back(slice_trace(t, cut, n, "#validation"));
    }

    split.folds.resize(k);
    if (remainder.size() >= k) {
        for (std::size_t f = 0; f < k; ++f)
            for (std::size_t i = f * remainder.size() / k; i < (f + 1) * remainder.size() / k; ++i)
                split.folds[f].push_back(remainder[i]);
    } else {
        split.trace_granular = false;
        for (const auto& t : remainder) {
            const std::size_t n = t.events.size();
            for (std::size_t f = 0; f < k; ++f)
                split.folds[f].push_back(slice_trace(t, f * n / k, (f + 1) * n / k, "#fold" + std::to_string(f + 1)));
        }
    }
    return split;
}

struct CandidateResult {
    std::string name;
    double metric = -std::numeric_limits<double>::infinity();
    double seconds = 0.0;
    std::size_t samples = 0;
    /// Deterministic training cost (samples x dims), used to break metric ties.
    double work = 0.0;
    bool failed = false;
    std::string failure;
};

struct SelectionRound {
    std::size_t round = 0;
    /// 1-based fold numbers trained on this round.
    std::vector<std::size_t> folds_used;
    std::vector<CandidateResult> candidates;
    std::string eliminated;
    double cumulative_seconds = 0.0;
    std::size_t cumulative_samples = 0;
};

struct SelectionTrace {
    std::vector<SelectionRound> rounds;
    std::string winner;
    /// Summed per-candidate training wall-clock over the elimination rounds.
    double selection_seconds = 0.0;
    std::size_t selection_samples = 0;
    /// Refit of the survivor on all training folds.
    double final_fit_seconds = 0.0;
    std::size_t final_fit_samples = 0;
    /// Wall-clock of the whole selection, including evaluation.
    double elapsed_seconds = 0.0;

    double summed_seconds() const { return selection_seconds + final_fit_seconds; }
};

namespace detail {

inline CandidateResult train_and_score(const Candidate& c, std::span<const LabeledTrace> train, const DataSplit& split,
                                       const SelectionConfig& config, std::optional<FittedPredictor>* keep = nullptr,
                                       std::optional<EvalReport>* report = nullptr)
{
    CandidateResult r;
    r.name = c.name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        FittedPredictor fitted = fit(c.graph, train, FitOptions{config.seed});
        r.seconds = fitted.training_report().total_seconds;
        r.samples = fitted.training_report().total_samples();
        r.work = fitted.training_report().total_work();
        EvalReport scored = evaluate_predictor(fitted, split.validation);
        r.metric = metric_of(scored, config.metric);
        if (report) report->emplace(std::move(scored));
        if (keep) keep->emplace(std::move(fitted));
    } catch (const Error& e) {
        if (r.seconds == 0.0) r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.failed = true;
        r.failure = e.what();
        r.metric = -std::numeric_limits<double>::infinity();
    }
    return r;
}

/// True when a ranks strictly worse than b: lower metric, then higher training
/// cost, then later position in the candidate list.
inline bool worse(const CandidateResult& a, std::size_t pos_a, const CandidateResult& b, std::size_t pos_b)
{
    if (a.metric != b.metric) return a.metric < b.metric;
    if (a.work != b.work) return a.work > b.work;
    return pos_a > pos_b;
}

} // namespace detail

struct SelectionResult {
    FittedPredictor predictor;
    SelectionTrace trace;
};

/// Gradual selection: each round trains every surviving candidate from
/// scratch on a fold schedule, ranks them on the validation slice and drops
/// the worst, until one remains; the survivor is refit on all training folds.
inline SelectionResult gradual_select(std::span<const Candidate> candidates, std::span<const LabeledTrace> data,
                                      const SelectionConfig& config)
{
    config.validate();
    if (candidates.empty()) throw Error(ErrorCode::BadConfig, "selection needs at least one candidate");
    for (const auto& c : candidates)
        if (c.graph.catalog != candidates.front().graph.catalog)
            throw Error(ErrorCode::BadConfig, "candidates must share one stage catalog");
    const auto started = std::chrono::steady_clock::now();
    const DataSplit split = split_data(data, config.k, config.validation_fraction);

    SelectionTrace trace;
    std::vector<std::size_t> alive(candidates.size());
    for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;

    for (std::size_t round = 1; alive.size() > 1; ++round) {
        SelectionRound rec;
        rec.round = round;
        if (config.schedule == FoldSchedule::Single) {
            rec.folds_used.push_back((round - 1) % config.k + 1);
        } else {
            for (std::size_t f = 1; f <= std::min(round, config.k); ++f) rec.folds_used.push_back(f);
        }
        std::vector<std::size_t> ids;
        for (std::size_t f : rec.folds_used) ids.push_back(f - 1);
        const std::vector<LabeledTrace> train = split.training_union(ids);

        std::size_t worst = 0;
        for (std::size_t a = 0; a < alive.size(); ++a) {
            rec.candidates.push_back(detail::train_and_score(candidates[alive[a]], train, split, config));
            trace.selection_seconds += rec.candidates.back().seconds;
            trace.selection_samples += rec.candidates.back().samples;
            if (a > 0 && detail::worse(rec.candidates[a], alive[a], rec.candidates[worst], alive[worst])) worst = a;
        }
        rec.eliminated = candidates[alive[worst]].name;
        rec.cumulative_seconds = trace.selection_seconds;
        rec.cumulative_samples = trace.selection_samples;
        alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(worst));
        trace.rounds.push_back(std::move(rec));
    }

    const Candidate& survivor = candidates[alive.front()];
    trace.winner = survivor.name;
    FittedPredictor fitted = fit(survivor.graph, split.all_training(), FitOptions{config.seed});
    trace.final_fit_seconds = fitted.training_report().total_seconds;
    trace.final_fit_samples = fitted.training_report().total_samples();
    trace.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(fitted), std::move(trace)};
}

struct FullSelectionResult {
    FittedPredictor predictor;
    std::string winner;
    std::vector<CandidateResult> results;
    /// Per-candidate validation reports; absent for candidates that failed to fit.
    std::vector<std::optional<EvalReport>> reports;
    double summed_seconds = 0.0;
    std::size_t summed_samples = 0;
    double elapsed_seconds = 0.0;
};

/// Trains every candidate on all training folds and keeps the best on the
/// validation slice (same tie rules as gradual_select).
inline FullSelectionResult full_select(std::span<const Candidate> candidates, std::span<const LabeledTrace> data,
                                       const SelectionConfig& config)
{
    config.validate();
    if (candidates.empty()) throw Error(ErrorCode::BadConfig, "selection needs at least one candidate");
    const auto started = std::chrono::steady_clock::now();
    const DataSplit split = split_data(data, config.k, config.validation_fraction);
    const std::vector<LabeledTrace> train = split.all_training();

    std::vector<CandidateResult> results;
    std::vector<std::optional<EvalReport>> reports;
    std::vector<std::optional<FittedPredictor>> fitted(candidates.size());
    double seconds = 0.0;
    std::size_t samples = 0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        reports.emplace_back();
        results.push_back(detail::train_and_score(candidates[i], train, split, config, &fitted[i], &reports.back()));
        seconds += results.back().seconds;
        samples += results.back().samples;
        if (i > 0 && detail::worse(results[best], best, results[i], i)) best = i;
    }
    if (!fitted[best]) throw Error(ErrorCode::InsufficientData, "no candidate could be fitted: " + results[best].failure);
    FullSelectionResult out{std::move(*fitted[best]), candidates[best].name, std::move(results), std::move(reports),
                            seconds, samples, 0.0};
    out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

inline nlohmann::ordered_json selection_trace_to_json(const SelectionTrace& t)
{
    nlohmann::ordered_json j;
    j["winner"] = t.winner;
    j["rounds"] = nlohmann::ordered_json::array();
    for (const auto& r : t.rounds) {
        nlohmann::ordered_json jr;
        jr["round"] = r.round;
        jr["folds_used"] = r.folds_used;
        jr["eliminated"] = r.eliminated;
        jr["cumulative_seconds"] = r.cumulative_seconds;
        jr["cumulative_samples"] = r.cumulative_samples;
        jr["candidates"] = nlohmann::ordered_json::array();
        for (const auto& c : r.candidates) {
            nlohmann::ordered_json jc;
            jc["name"] = c.name;
            jc["metric"] = std::isfinite(c.metric) ? nlohmann::ordered_json(c.metric) : nlohmann::ordered_json(nullptr);
            jc["seconds"] = c.seconds;
            jc["samples"] = c.samples;
            jc["failed"] = c.failed;
            if (c.failed) jc["failure"] = c.failure;
            jr["candidates"].push_back(std::move(jc));
        }
        j["rounds"].push_back(std::move(jr));
    }
    j["selection_seconds"] = t.selection_seconds;
    j["selection_samples"] = t.selection_samples;
    j["final_fit_seconds"] = t.final_fit_seconds;
    j["final_fit_samples"] = t.final_fit_samples;
    j["summed_seconds"] = t.summed_seconds();
    j["elapsed_seconds"] = t.elapsed_seconds;
    return j;
}

} // namespace modpred
