#pragma once

#include <charconv>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "event.hpp"

namespace modpred {

struct EvalReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    /// confusion[truth][predicted]
    std::vector<std::vector<std::size_t>> confusion;
    std::vector<double> per_class_precision;
    std::vector<double> per_class_recall;
    std::vector<double> per_class_f1;
    std::size_t n = 0;
    /// Window size of the predictor's aggregator, the timeliness proxy.
    std::optional<std::size_t> timeliness;
    double training_seconds = 0.0;
};

/// Precision, recall and F1 per catalog class (0 whenever a denominator is 0);
/// macro F1 averages over every catalog class, present in the data or not.
inline EvalReport evaluate(std::span<const StageId> predictions, std::span<const StageId> truths, const StageCatalog& catalog)
{
    if (predictions.size() != truths.size())
        throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                                   std::to_string(truths.size()) + " truths");
    if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "nothing to evaluate");
    const std::size_t s = catalog.size();
    EvalReport r;
    r.n = predictions.size();
    r.confusion.assign(s, std::vector<std::size_t>(s, 0));
    for (std::size_t i = 0; i < r.n; ++i) {
        if (!catalog.contains(predictions[i]) || !catalog.contains(truths[i]))
            throw Error(ErrorCode::UnknownStageName, "stage id outside catalog at position " + std::to_string(i));
        ++r.confusion[truths[i].index][predictions[i].index];
    }

    std::size_t correct = 0;
    for (std::size_t c = 0; c < s; ++c) correct += r.confusion[c][c];
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);

    double f1_sum = 0.0;
    for (std::size_t c = 0; c < s; ++c) {
        std::size_t predicted = 0, actual = 0;
        for (std::size_t k = 0; k < s; ++k) {
            predicted += r.confusion[k][c];
            actual += r.confusion[c][k];
        }
        const double tp = static_cast<double>(r.confusion[c][c]);
        const double precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
        const double recall = actual ? tp / static_cast<double>(actual) : 0.0;
        const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        r.per_class_precision.push_back(precision);
        r.per_class_recall.push_back(recall);
        r.per_class_f1.push_back(f1);
        f1_sum += f1;
    }
    r.macro_f1 = f1_sum / static_cast<double>(s);
    return r;
}

struct Alignment {
    std::vector<StageId> predicted;
    std::vector<StageId> truth;
    /// Predictions earlier than the first labeled event.
    std::size_t dropped = 0;
};

/// Pairs each prediction with the label of the latest labeled trace event at
/// or before its timestamp.
inline Alignment align_predictions(std::span<const Prediction> predictions, const LabeledTrace& trace)
{
    Alignment a;
    std::size_t cursor = 0;
    std::optional<StageId> current;
    Timestamp last = std::numeric_limits<Timestamp>::min();
    for (const Prediction& p : predictions) {
        if (p.ts < last) throw Error(ErrorCode::MalformedStream, "predictions not sorted by ts");
        last = p.ts;
        while (cursor < trace.events.size() && trace.events[cursor].ts <= p.ts) {
            if (trace.events[cursor].label) current = trace.events[cursor].label;
            ++cursor;
        }
        if (!current) {
            ++a.dropped;
            continue;
        }
        a.predicted.push_back(p.stage);
        a.truth.push_back(*current);
    }
    if (a.predicted.empty())
        throw Error(ErrorCode::NoOverlap, "no prediction follows a labeled event in trace \"" + trace.trace_id + "\"");
    return a;
}

inline std::string format_real(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::to_string(v);
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r, const StageCatalog& catalog)
{
    nlohmann::ordered_json j;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["macro_f1"] = r.macro_f1;
    j["timeliness"] = r.timeliness ? nlohmann::ordered_json(*r.timeliness) : nlohmann::ordered_json(nullptr);
    j["training_seconds"] = r.training_seconds;
    j["stages"] = catalog.names();
    j["per_class_precision"] = r.per_class_precision;
    j["per_class_recall"] = r.per_class_recall;
    j["per_class_f1"] = r.per_class_f1;
    j["confusion"] = r.confusion;
    return j;
}

/// Flat `key=value` text, one entry per line, same values as the JSON form.
inline std::string report_to_text(const EvalReport& r, const StageCatalog& catalog)
{
    std::ostringstream out;
    out << "n=" << r.n << '\n';
    out << "accuracy=" << format_real(r.accuracy) << '\n';
    out << "macro_f1=" << format_real(r.macro_f1) << '\n';
    out << "timeliness=" << (r.timeliness ? std::to_string(*r.timeliness) : std::string("none")) << '\n';
    out << "training_seconds=" << format_real(r.training_seconds) << '\n';
    for (std::size_t c = 0; c < catalog.size(); ++c) {
        const std::string& name = catalog.names()[c];
        out << "precision[" << name << "]=" << format_real(r.per_class_precision[c]) << '\n';
        out << "recall[" << name << "]=" << format_real(r.per_class_recall[c]) << '\n';
        out << "f1[" << name << "]=" << format_real(r.per_class_f1[c]) << '\n';
    }
    for (std::size_t t = 0; t < catalog.size(); ++t) {
        out << "confusion[" << catalog.names()[t] << "]=";
        for (std::size_t p = 0; p < catalog.size(); ++p) out << (p ? "," : "") << r.confusion[t][p];
        out << '\n';
    }
    return out.str();
}

} // namespace modpred
