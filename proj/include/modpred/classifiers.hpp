#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aggregators.hpp"
#include "error.hpp"
#include "event.hpp"
#include "rng.hpp"

namespace modpred {

using json = nlohmann::json;

struct TrainingMatrix {
    std::vector<std::vector<double>> rows;
    std::vector<StageId> labels;
    std::size_t dim = 0;

    std::size_t size() const noexcept { return rows.size(); }

    void add(std::vector<double> row, StageId label)
    {
        if (rows.empty() && dim == 0) dim = row.size();
        if (row.size() != dim)
            throw Error(ErrorCode::DimensionMismatch, "training row has dim " + std::to_string(row.size()) + ", expected " +
                                                          std::to_string(dim));
        rows.push_back(std::move(row));
        labels.push_back(label);
    }

    std::size_t distinct_labels() const
    {
        std::set<std::size_t> s;
        for (StageId l : labels) s.insert(l.index);
        return s.size();
    }
};

// ---------------------------------------------------------------------------
// Event -> feature vector adapter shared by the classifiers

/// Maps events of one kind to fixed-length vectors. Learned from training inputs:
/// FEATURE uses nums as-is; CATEGORY is one-hot over the categories seen;
/// ALERT is one-hot over alert types (plus OTHER) followed by its nums;
/// WINDOW is the flattened member encoding.
class Vectorizer {
public:
    static Vectorizer learn(std::span<const Event> events)
    {
        Vectorizer v;
        if (events.empty()) return v;
        v.kind_ = events.front().kind;
        for (const Event& e : events)
            if (e.kind != v.kind_)
                throw Error(ErrorCode::KindMismatch, "classifier input mixes " + std::string(to_string(v.kind_)) + " and " +
                                                         std::string(to_string(e.kind)));
        switch (v.kind_) {
        case EventKind::Feature:
            for (const auto& nv : events.front().nums) v.num_names_.push_back(nv.first);
            v.dim_ = v.num_names_.size();
            break;
        case EventKind::Category: {
            std::size_t max_cat = 0;
            for (const Event& e : events) max_cat = std::max(max_cat, category_of(e));
            v.categories_ = max_cat + 1;
            v.dim_ = v.categories_;
            break;
        }
        case EventKind::Alert: {
            v.alert_types_ = collect_alert_types(events);
            for (const auto& nv : events.front().nums) v.num_names_.push_back(nv.first);
            v.dim_ = v.alert_types_.size() + 1 + v.num_names_.size();
            break;
        }
        case EventKind::Window: {
            v.alert_types_ = collect_alert_types(events);
            for (const Event& e : events)
                if (e.members) v.window_members_ = std::max(v.window_members_, e.members->size());
            v.dim_ = v(events.front()).size();
            break;
        }
        default:
            throw Error(ErrorCode::KindMismatch, "classifiers cannot consume " + std::string(to_string(v.kind_)) + " events");
        }
        return v;
    }

    std::vector<double> operator()(const Event& e) const
    {
        if (e.kind != kind_)
            throw Error(ErrorCode::KindMismatch, "classifier fitted on " + std::string(to_string(kind_)) + " got " +
                                                     std::string(to_string(e.kind)));
        std::vector<double> out;
        switch (kind_) {
        case EventKind::Feature:
            out = e.values();
            break;
        case EventKind::Category: {
            out.assign(categories_, 0.0);
            const std::size_t c = category_of(e);
            if (c < categories_) out[c] = 1.0;
            break;
        }
        case EventKind::Alert: {
            out.assign(alert_types_.size() + 1, 0.0);
            const std::string* type = e.attr("alert_type");
            out[type ? detail::vocab_index(alert_types_, *type) : alert_types_.size()] = 1.0;
            for (const auto& name : num_names_) out.push_back(e.num(name).value_or(0.0));
            break;
        }
        case EventKind::Window:
            out = flatten_members(e, FlattenParams{alert_types_, window_members_});
            break;
        default:
            break;
        }
        if (dim_ != 0 && out.size() != dim_)
            throw Error(ErrorCode::DimensionMismatch, "classifier expects dim " + std::to_string(dim_) + ", got " +
                                                          std::to_string(out.size()));
        return out;
    }

    std::size_t dim() const noexcept { return dim_; }
    EventKind kind() const noexcept { return kind_; }

    json to_json() const
    {
        return json{{"kind", std::string(to_string(kind_))}, {"alert_types", alert_types_}, {"num_names", num_names_},
                    {"categories", categories_},              {"window_members", window_members_}, {"dim", dim_}};
    }

    static Vectorizer from_json(const json& j)
    {
        Vectorizer v;
        auto kind = parse_event_kind(j.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::BadModel, "vectorizer kind");
        v.kind_ = *kind;
        v.alert_types_ = j.at("alert_types").get<std::vector<std::string>>();
        v.num_names_ = j.at("num_names").get<std::vector<std::string>>();
        v.categories_ = j.at("categories").get<std::size_t>();
        v.window_members_ = j.at("window_members").get<std::size_t>();
        v.dim_ = j.at("dim").get<std::size_t>();
        return v;
    }

private:
    static std::size_t category_of(const Event& e)
    {
        const std::string* c = e.attr("category");
        if (!c) throw Error(ErrorCode::KindMismatch, "CATEGORY event without category attribute");
        return static_cast<std::size_t>(std::stoul(*c));
    }

    EventKind kind_ = EventKind::Feature;
    std::vector<std::string> alert_types_;
    std::vector<std::string> num_names_;
    std::size_t categories_ = 0;
    std::size_t window_members_ = 0;
    std::size_t dim_ = 0;
};

// ---------------------------------------------------------------------------
// Random forest (CART, Gini)

struct ForestParams {
    std::size_t n_trees = 50;
    std::optional<std::size_t> max_depth;
    std::size_t min_samples_split = 2;
    /// Default floor(sqrt(d)) over the features that vary in the training data.
    std::optional<std::size_t> features_per_split;
    bool bootstrap = true;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (n_trees < 1) throw Error(ErrorCode::BadConfig, "random_forest: n_trees must be >= 1");
        if (max_depth && *max_depth < 1) throw Error(ErrorCode::BadConfig, "random_forest: max_depth must be >= 1");
        if (min_samples_split < 2) throw Error(ErrorCode::BadConfig, "random_forest: min_samples_split must be >= 2");
        if (features_per_split && *features_per_split < 1)
            throw Error(ErrorCode::BadConfig, "random_forest: features_per_split must be >= 1");
    }
};

struct TreeNode {
    /// -1 marks a leaf.
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::vector<std::uint32_t> counts;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
public:
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

    const TreeNode& leaf_for(std::span<const double> x) const
    {
        std::size_t i = 0;
        while (!nodes_[i].is_leaf())
            i = x[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
        return nodes_[i];
    }

    static DecisionTree grow(const TrainingMatrix& data, std::span<const std::size_t> sample, std::span<const std::size_t> varying,
                             std::size_t n_classes, const ForestParams& params, Rng& rng)
    {
        DecisionTree tree;
        std::size_t mtry = params.features_per_split.value_or(
            static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(varying.size())))));
        mtry = std::clamp<std::size_t>(mtry, 1, std::max<std::size_t>(varying.size(), 1));
        std::vector<std::size_t> rows(sample.begin(), sample.end());
        tree.build(data, rows, 0, varying, mtry, n_classes, params, rng);
        return tree;
    }

    json to_json() const
    {
        json nodes = json::array();
        for (const TreeNode& n : nodes_)
            nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.counts}));
        return nodes;
    }

    static DecisionTree from_json(const json& j)
    {
        DecisionTree t;
        for (const json& n : j) {
            TreeNode node;
            node.feature = n.at(0).get<std::int32_t>();
            node.threshold = n.at(1).get<double>();
            node.left = n.at(2).get<std::uint32_t>();
            node.right = n.at(3).get<std::uint32_t>();
            node.counts = n.at(4).get<std::vector<std::uint32_t>>();
            t.nodes_.push_back(std::move(node));
        }
        if (t.nodes_.empty()) throw Error(ErrorCode::BadModel, "empty decision tree");
        return t;
    }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    struct Split {
        std::size_t feature = 0;
        double threshold = 0.0;
        double score = -1.0;
    };

    std::uint32_t build(const TrainingMatrix& data, std::vector<std::size_t>& rows, std::size_t depth,
                        std::span<const std::size_t> varying, std::size_t mtry, std::size_t n_classes,
                        const ForestParams& params, Rng& rng)
    {
        const auto index = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        std::vector<std::uint32_t> counts(n_classes, 0);
        for (std::size_t r : rows) ++counts[data.labels[r].index];
        const bool pure = std::count_if(counts.begin(), counts.end(), [](std::uint32_t c) { return c > 0; }) <= 1;
        const bool depth_limited = params.max_depth && depth >= *params.max_depth;
        if (pure || depth_limited || rows.size() < params.min_samples_split || varying.empty()) {
            nodes_[index].counts = std::move(counts);
            return index;
        }

        const Split split = best_split(data, rows, varying, mtry, n_classes, rng);
        if (split.score < 0.0) {
            nodes_[index].counts = std::move(counts);
            return index;
        }

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows)
            (data.rows[r][split.feature] <= split.threshold ? left_rows : right_rows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        const std::uint32_t left = build(data, left_rows, depth + 1, varying, mtry, n_classes, params, rng);
        const std::uint32_t right = build(data, right_rows, depth + 1, varying, mtry, n_classes, params, rng);
        nodes_[index].feature = static_cast<std::int32_t>(split.feature);
        nodes_[index].threshold = split.threshold;
        nodes_[index].left = left;
        nodes_[index].right = right;
        return index;
    }

    // Score is sum over both sides of (sum_c count_c^2) / side_size; maximizing it
    // minimizes the size-weighted Gini impurity.
    static Split best_split(const TrainingMatrix& data, std::span<const std::size_t> rows, std::span<const std::size_t> varying,
                            std::size_t mtry, std::size_t n_classes, Rng& rng)
    {
        Split best;
        std::vector<std::pair<double, std::size_t>> column(rows.size());
        std::vector<double> left(n_classes), right(n_classes);
        for (std::size_t pick : rng.sample_without_replacement(varying.size(), mtry)) {
            const std::size_t f = varying[pick];
            for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {data.rows[rows[i]][f], data.labels[rows[i]].index};
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;

            std::fill(left.begin(), left.end(), 0.0);
            std::fill(right.begin(), right.end(), 0.0);
            for (const auto& [x, y] : column) right[y] += 1.0;
            double left_sq = 0.0, right_sq = 0.0;
            for (double c : right) right_sq += c * c;

            const double n = static_cast<double>(column.size());
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                const std::size_t y = column[i].second;
                left_sq += 2.0 * left[y] + 1.0;
                right_sq -= 2.0 * right[y] - 1.0;
                left[y] += 1.0;
                right[y] -= 1.0;
                if (column[i].first == column[i + 1].first) continue;
                const double n_left = static_cast<double>(i + 1);
                const double score = left_sq / n_left + right_sq / (n - n_left);
                if (score > best.score) {
                    const double lo = column[i].first, hi = column[i + 1].first;
                    double threshold = lo + (hi - lo) / 2.0;
                    if (!(threshold < hi)) threshold = lo;
                    best = {f, threshold, score};
                }
            }
        }
        return best;
    }

    std::vector<TreeNode> nodes_;
};

class RandomForest {
public:
    static RandomForest fit(const TrainingMatrix& data, std::size_t n_classes, const ForestParams& params)
    {
        params.validate();
        if (data.size() == 0) throw Error(ErrorCode::NoLabels, "random forest training set has no labeled rows");
        if (data.distinct_labels() < 2)
            throw Error(ErrorCode::InsufficientData, "random forest needs at least 2 distinct labels");
        for (StageId l : data.labels)
            if (l.index >= n_classes) throw Error(ErrorCode::BadConfig, "label outside catalog");

        RandomForest forest;
        forest.n_classes_ = n_classes;
        forest.dim_ = data.dim;
        // Zero-variance features never become split candidates.
        for (std::size_t f = 0; f < data.dim; ++f) {
            const double first = data.rows.front()[f];
            if (std::any_of(data.rows.begin(), data.rows.end(), [&](const auto& r) { return r[f] != first; }))
                forest.varying_.push_back(f);
        }

        const std::size_t n = data.size();
        forest.trees_.reserve(params.n_trees);
        for (std::size_t t = 0; t < params.n_trees; ++t) {
            Rng rng(params.seed + t);
            std::vector<std::size_t> sample(n);
            if (params.bootstrap)
                for (std::size_t i = 0; i < n; ++i) sample[i] = rng.uniform_index(n);
            else
                std::iota(sample.begin(), sample.end(), std::size_t{0});
            forest.trees_.push_back(DecisionTree::grow(data, sample, forest.varying_, n_classes, params, rng));
        }
        return forest;
    }

    /// Mean over trees of the normalized leaf label distribution.
    std::vector<double> predict_proba(std::span<const double> x) const
    {
        if (x.size() != dim_)
            throw Error(ErrorCode::DimensionMismatch, "forest expects dim " + std::to_string(dim_) + ", got " +
                                                          std::to_string(x.size()));
        std::vector<double> probs(n_classes_, 0.0);
        for (const DecisionTree& tree : trees_) {
            const TreeNode& leaf = tree.leaf_for(x);
            double total = 0.0;
            for (std::uint32_t c : leaf.counts) total += c;
            for (std::size_t c = 0; c < n_classes_; ++c) probs[c] += leaf.counts[c] / total;
        }
        for (double& p : probs) p /= static_cast<double>(trees_.size());
        return probs;
    }

    Prediction predict(std::span<const double> x, Timestamp ts = 0, std::string sink = {}) const
    {
        return Prediction::from_probs(ts, std::move(sink), predict_proba(x));
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

    static constexpr int kFormatVersion = 1;

    json to_json() const
    {
        json trees = json::array();
        for (const auto& t : trees_) trees.push_back(t.to_json());
        return json{{"format_version", kFormatVersion}, {"n_classes", n_classes_}, {"dim", dim_},
                    {"varying", varying_},              {"trees", std::move(trees)}};
    }

    static RandomForest from_json(const json& j)
    {
        if (j.at("format_version").get<int>() != kFormatVersion)
            throw Error(ErrorCode::BadModel, "unsupported forest format version");
        RandomForest f;
        f.n_classes_ = j.at("n_classes").get<std::size_t>();
        f.dim_ = j.at("dim").get<std::size_t>();
        f.varying_ = j.at("varying").get<std::vector<std::size_t>>();
        for (const json& t : j.at("trees")) f.trees_.push_back(DecisionTree::from_json(t));
        if (f.trees_.empty()) throw Error(ErrorCode::BadModel, "forest without trees");
        return f;
    }

    friend bool operator==(const RandomForest&, const RandomForest&) = default;

private:
    std::size_t n_classes_ = 0;
    std::size_t dim_ = 0;
    std::vector<std::size_t> varying_;
    std::vector<DecisionTree> trees_;
};

// ---------------------------------------------------------------------------
// Majority baseline

class MajorityBaseline {
public:
    static MajorityBaseline fit(std::span<const StageId> labels, std::size_t n_classes)
    {
        if (labels.empty()) throw Error(ErrorCode::NoLabels, "baseline training set has no labels");
        MajorityBaseline b;
        b.probs_.assign(n_classes, 0.0);
        for (StageId l : labels) {
            if (l.index >= n_classes) throw Error(ErrorCode::BadConfig, "label outside catalog");
            b.probs_[l.index] += 1.0;
        }
        for (double& p : b.probs_) p /= static_cast<double>(labels.size());
        return b;
    }

    Prediction predict(Timestamp ts = 0, std::string sink = {}) const { return Prediction::from_probs(ts, std::move(sink), probs_); }

    const std::vector<double>& probs() const noexcept { return probs_; }

    json to_json() const { return json{{"probs", probs_}}; }
    static MajorityBaseline from_json(const json& j)
    {
        MajorityBaseline b;
        b.probs_ = j.at("probs").get<std::vector<double>>();
        return b;
    }

private:
    std::vector<double> probs_;
};

} // namespace modpred
