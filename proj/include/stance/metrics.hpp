#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "io.hpp"

namespace stance {

/// Macro-averaged F1 (percentage) over every label of `label_set`. A label that never occurs in
/// predictions or golds contributes 0 to the average.
inline double macro_f1(const std::vector<std::string>& predictions, const std::vector<std::string>& golds,
                       const std::vector<std::string>& label_set) {
    if (predictions.size() != golds.size()) {
        throw InvalidArgument("macro_f1: " + std::to_string(predictions.size()) + " predictions vs " +
                              std::to_string(golds.size()) + " golds");
    }
    if (golds.empty()) {
        throw InvalidArgument("macro_f1: empty input");
    }
    if (label_set.empty()) {
        throw InvalidArgument("macro_f1: empty label set");
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < label_set.size(); ++i) {
        index.emplace(label_set[i], i);
    }
    std::vector<double> tp(label_set.size(), 0.0), fp(label_set.size(), 0.0), fn(label_set.size(), 0.0);
    for (std::size_t i = 0; i < golds.size(); ++i) {
        const auto g = index.find(golds[i]);
        const auto p = index.find(predictions[i]);
        if (g != index.end() && p != index.end() && g->second == p->second) {
            tp[g->second] += 1.0;
            continue;
        }
        if (g != index.end()) {
            fn[g->second] += 1.0;
        }
        if (p != index.end()) {
            fp[p->second] += 1.0;
        }
    }
    double total = 0.0;
    for (std::size_t c = 0; c < label_set.size(); ++c) {
        const double denom = 2.0 * tp[c] + fp[c] + fn[c];
        total += denom == 0.0 ? 0.0 : 2.0 * tp[c] / denom;
    }
    return 100.0 * total / static_cast<double>(label_set.size());
}

/// Most frequent label of `labels`; ties go to the label that comes first in `inventory`.
inline std::string majority_label(const std::vector<std::string>& labels, const std::vector<std::string>& inventory) {
    if (labels.empty()) {
        throw InvalidArgument("majority of an empty label list");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& l : labels) {
        ++counts[l];
    }
    std::optional<std::string> best;
    std::size_t best_count = 0;
    for (const auto& l : inventory) {
        const auto it = counts.find(l);
        const std::size_t c = it == counts.end() ? 0 : it->second;
        if (!best || c > best_count) {
            best = l;
            best_count = c;
        }
    }
    for (const auto& [l, c] : counts) {
        if (c > best_count) {
            best = l;
            best_count = c;
        }
    }
    return *best;
}

/// Constant predictor of the majority class of `labels` (the test labels by default, or the
/// training labels when the caller passes those).
inline std::vector<std::string> majority_baseline(const std::vector<std::string>& labels, std::size_t test_size,
                                                  const std::vector<std::string>& inventory) {
    return std::vector<std::string>(test_size, majority_label(labels, inventory));
}

/// Mean macro-F1 of uniform random predictions over `trials` draws.
inline double random_baseline(const std::vector<std::string>& golds, const std::vector<std::string>& inventory,
                              std::uint64_t seed, std::size_t trials) {
    if (trials == 0) {
        throw InvalidArgument("random_baseline needs at least one trial");
    }
    if (inventory.empty()) {
        throw InvalidArgument("random_baseline needs a non-empty inventory");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, inventory.size() - 1);
    double total = 0.0;
    std::vector<std::string> preds(golds.size());
    for (std::size_t t = 0; t < trials; ++t) {
        for (auto& p : preds) {
            p = inventory[pick(rng)];
        }
        total += macro_f1(preds, golds, inventory);
    }
    return total / static_cast<double>(trials);
}

struct ReportMetadata {
    std::string config_hash;
    std::string strategy;
    std::string held_out;
    std::string description;
};

struct EvalReport {
    /// Dataset name -> macro-F1 percentage, in registry order.
    std::vector<std::pair<std::string, double>> scores;
    double average{0.0};
    ReportMetadata metadata;

    [[nodiscard]] std::optional<double> score(std::string_view dataset) const {
        for (const auto& [name, value] : scores) {
            if (name == dataset) {
                return value;
            }
        }
        return std::nullopt;
    }

    [[nodiscard]] io::json to_json() const {
        io::json per = io::json::object();
        io::json order = io::json::array();
        for (const auto& [name, value] : scores) {
            per[name] = value;
            order.push_back(name);
        }
        return {{"scores", per},
                {"order", order},
                {"average", average},
                {"metadata",
                 {{"config_hash", metadata.config_hash},
                  {"strategy", metadata.strategy},
                  {"held_out", metadata.held_out},
                  {"description", metadata.description}}}};
    }

    /// Plain-text table: one header row of dataset names, one row of scores, average first.
    [[nodiscard]] std::string render() const {
        std::ostringstream out;
        out << std::fixed << std::setprecision(2);
        if (!metadata.description.empty()) {
            out << metadata.description << '\n';
        }
        std::size_t width = 10;
        for (const auto& [name, _] : scores) {
            width = std::max(width, name.size() + 2);
        }
        out << std::left << std::setw(static_cast<int>(width)) << "dataset" << "F1 macro\n";
        out << std::left << std::setw(static_cast<int>(width)) << "avg." << average << '\n';
        for (const auto& [name, value] : scores) {
            out << std::left << std::setw(static_cast<int>(width)) << name << value << '\n';
        }
        return out.str();
    }
};

/// Unweighted mean over datasets; rows are sorted by registry order (unknown names last, by name).
inline EvalReport aggregate_report(const std::map<std::string, double>& per_dataset, ReportMetadata metadata = {},
                                   const Registry& registry = Registry::builtin()) {
    if (per_dataset.empty()) {
        throw InvalidArgument("aggregate_report: no scores");
    }
    EvalReport report;
    report.metadata = std::move(metadata);
    for (const auto& [name, value] : per_dataset) {
        if (!(value >= 0.0 && value <= 100.0)) {
            throw InvalidArgument("score for '" + name + "' is outside [0, 100]");
        }
        report.scores.emplace_back(name, value);
    }
    const auto unknown = registry.descriptors().size();
    std::stable_sort(report.scores.begin(), report.scores.end(), [&](const auto& a, const auto& b) {
        return registry.index_of(a.first).value_or(unknown) < registry.index_of(b.first).value_or(unknown);
    });
    double sum = 0.0;
    for (const auto& [_, value] : report.scores) {
        sum += value;
    }
    report.average = sum / static_cast<double>(report.scores.size());
    return report;
}

inline EvalReport report_from_json(const io::json& j) {
    EvalReport r;
    for (const auto& name : j.at("order")) {
        r.scores.emplace_back(name.get<std::string>(), j.at("scores").at(name.get<std::string>()).get<double>());
    }
    r.average = j.at("average").get<double>();
    const auto& m = j.at("metadata");
    r.metadata = {m.value("config_hash", ""), m.value("strategy", ""), m.value("held_out", ""), m.value("description", "")};
    return r;
}

/// Pearson r of `feature` against `scores`; nullopt when either side is constant.
inline std::optional<double> pearson(const std::vector<double>& feature, const std::vector<double>& scores) {
    if (feature.size() != scores.size()) {
        throw InvalidArgument("pearson: length mismatch");
    }
    const auto n = static_cast<double>(feature.size());
    if (feature.empty()) {
        return std::nullopt;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < feature.size(); ++i) {
        mx += feature[i];
        my += scores[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < feature.size(); ++i) {
        const double dx = feature[i] - mx;
        const double dy = scores[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        return std::nullopt;
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace stance
