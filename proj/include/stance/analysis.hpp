#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "corpus.hpp"
#include "error.hpp"
#include "io.hpp"
#include "label_embeddings.hpp"
#include "metrics.hpp"
#include "text.hpp"

namespace stance {

// ---------------------------------------------------------------------------------------------
// TF-IDF + logistic regression baseline

struct TfidfOptions {
    std::size_t max_features{15000};
    /// Inverse regularisation strength of each one-vs-rest classifier.
    double c{1.0};
    int max_iterations{100};
    double tolerance{1e-4};
};

/// Lower-cased casual tokens without stop-words or punctuation.
inline std::vector<std::string> tfidf_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (auto& tok : text::casual_tokenize(text::to_lower(s))) {
        if (!text::is_stopword(tok) && !text::is_punctuation(tok)) {
            out.push_back(std::move(tok));
        }
    }
    return out;
}

/// Unigram TF-IDF with smoothed idf and L2-normalised rows.
class TfidfVectorizer {
public:
    /// Keeps the `max_features` most frequent terms (ties by term) of `documents`.
    void fit(const std::vector<std::string>& documents, std::size_t max_features) {
        std::unordered_map<std::string, std::size_t> tf, df;
        for (const auto& doc : documents) {
            std::unordered_set<std::string> seen;
            for (auto& tok : tfidf_tokens(doc)) {
                ++tf[tok];
                if (seen.insert(tok).second) {
                    ++df[tok];
                }
            }
        }
        std::vector<std::pair<std::string, std::size_t>> terms(tf.begin(), tf.end());
        std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        if (terms.size() > max_features) {
            terms.resize(max_features);
        }
        std::sort(terms.begin(), terms.end());
        index_.clear();
        idf_.resize(static_cast<Eigen::Index>(terms.size()));
        const double n = static_cast<double>(documents.size());
        for (std::size_t i = 0; i < terms.size(); ++i) {
            index_.emplace(terms[i].first, i);
            idf_(static_cast<Eigen::Index>(i)) = std::log((1.0 + n) / (1.0 + static_cast<double>(df[terms[i].first]))) + 1.0;
        }
    }

    [[nodiscard]] std::size_t size() const { return index_.size(); }

    /// Sparse (term, weight) entries of one document, offset by `offset` columns.
    [[nodiscard]] std::vector<std::pair<std::size_t, double>> transform(std::string_view doc, std::size_t offset = 0) const {
        std::map<std::size_t, double> counts;
        for (const auto& tok : tfidf_tokens(doc)) {
            if (const auto it = index_.find(tok); it != index_.end()) {
                counts[it->second] += 1.0;
            }
        }
        double norm = 0.0;
        for (auto& [i, v] : counts) {
            v *= idf_(static_cast<Eigen::Index>(i));
            norm += v * v;
        }
        norm = std::sqrt(norm);
        std::vector<std::pair<std::size_t, double>> out;
        for (const auto& [i, v] : counts) {
            out.emplace_back(i + offset, v / norm);
        }
        return out;
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
    Eigen::VectorXd idf_;
};

/// L2-regularised binary logistic regression (labels ±1, unpenalised intercept) fit with L-BFGS.
inline Eigen::VectorXd fit_logistic(const Eigen::SparseMatrix<double, Eigen::RowMajor>& x, const Eigen::VectorXd& y,
                                    const TfidfOptions& options) {
    const Eigen::Index p = x.cols();
    auto objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
        const Eigen::VectorXd margin = (x * w.head(p)).array() + w(p);
        double loss = 0.5 * w.head(p).squaredNorm();
        Eigen::VectorXd coef(margin.size());
        for (Eigen::Index i = 0; i < margin.size(); ++i) {
            const double z = y(i) * margin(i);
            loss += options.c * (z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)));
            coef(i) = -options.c * y(i) / (1.0 + std::exp(z));
        }
        grad.resize(p + 1);
        grad.head(p) = w.head(p) + x.transpose() * coef;
        grad(p) = coef.sum();
        return loss;
    };
    const int memory = 10;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p + 1);
    Eigen::VectorXd g;
    double f = objective(w, g);
    std::vector<Eigen::VectorXd> s_hist, y_hist;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() <= options.tolerance) {
            break;
        }
        // Two-loop recursion.
        Eigen::VectorXd q = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t k = s_hist.size(); k-- > 0;) {
            alpha[k] = s_hist[k].dot(q) / y_hist[k].dot(s_hist[k]);
            q -= alpha[k] * y_hist[k];
        }
        if (!s_hist.empty()) {
            q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        }
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = y_hist[k].dot(q) / y_hist[k].dot(s_hist[k]);
            q += s_hist[k] * (alpha[k] - beta);
        }
        Eigen::VectorXd direction = -q;
        if (direction.dot(g) >= 0.0) {
            direction = -g;
            s_hist.clear();
            y_hist.clear();
        }
        double step = 1.0;
        Eigen::VectorXd w_new, g_new;
        double f_new = 0.0;
        for (int ls = 0; ls < 40; ++ls) {
            w_new = w + step * direction;
            f_new = objective(w_new, g_new);
            if (f_new <= f + 1e-4 * step * g.dot(direction)) {
                break;
            }
            step *= 0.5;
        }
        const Eigen::VectorXd s = w_new - w;
        const Eigen::VectorXd yk = g_new - g;
        if (s.dot(yk) > 1e-12) {
            s_hist.push_back(s);
            y_hist.push_back(yk);
            if (s_hist.size() > static_cast<std::size_t>(memory)) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
            }
        }
        const double decrease = f - f_new;
        w = std::move(w_new);
        g = std::move(g_new);
        f = f_new;
        if (decrease <= options.tolerance * std::max({std::abs(f), 1.0}) * 1e-3) {
            break;
        }
    }
    return w;
}

/// Predictions for the test split of `dataset`. The vocabulary is fit on the training pairs
/// (target and context together); target and context are vectorised separately and concatenated;
/// one one-vs-rest logistic classifier per training label. Ties go to the earlier inventory label.
inline std::vector<std::string> tfidf_logreg_baseline(const Dataset& dataset, const TfidfOptions& options = {},
                                                      Split eval_split = Split::Test) {
    const auto train = dataset.split(Split::Train);
    if (train.empty()) {
        throw InvalidArgument("dataset '" + dataset.name() + "' has no training examples");
    }
    const auto test = dataset.split(eval_split);
    std::vector<std::string> documents;
    for (const auto* e : train) {
        documents.push_back(e->target + " " + e->context);
    }
    TfidfVectorizer vectorizer;
    vectorizer.fit(documents, options.max_features);
    const std::size_t v = vectorizer.size();
    auto matrix = [&](const std::vector<const StanceExample*>& examples) {
        std::vector<Eigen::Triplet<double>> triplets;
        for (std::size_t r = 0; r < examples.size(); ++r) {
            for (const auto& [c, w] : vectorizer.transform(examples[r]->target, 0)) {
                triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), w);
            }
            for (const auto& [c, w] : vectorizer.transform(examples[r]->context, v)) {
                triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), w);
            }
        }
        Eigen::SparseMatrix<double, Eigen::RowMajor> m(static_cast<Eigen::Index>(examples.size()),
                                                       static_cast<Eigen::Index>(2 * v));
        m.setFromTriplets(triplets.begin(), triplets.end());
        return m;
    };
    const auto x_train = matrix(train);
    const auto x_test = matrix(test);

    std::vector<std::string> classes;
    for (const auto& l : dataset.descriptor.labels) {
        if (std::any_of(train.begin(), train.end(), [&](const auto* e) { return e->label == l; })) {
            classes.push_back(l);
        }
    }
    if (classes.size() == 1) {
        return std::vector<std::string>(test.size(), classes.front());
    }
    Eigen::MatrixXd scores(x_test.rows(), static_cast<Eigen::Index>(classes.size()));
    for (std::size_t c = 0; c < classes.size(); ++c) {
        Eigen::VectorXd y(x_train.rows());
        for (std::size_t i = 0; i < train.size(); ++i) {
            y(static_cast<Eigen::Index>(i)) = train[i]->label == classes[c] ? 1.0 : -1.0;
        }
        const auto w = fit_logistic(x_train, y, options);
        scores.col(static_cast<Eigen::Index>(c)) = (x_test * w.head(x_train.cols())).array() + w(x_train.cols());
    }
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c) {
            if (scores(i, c) > scores(i, best)) {
                best = c;
            }
        }
        out.push_back(classes[static_cast<std::size_t>(best)]);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Dataset features and correlation analysis

struct SplitOverlap {
    double target{0.0};
    double context{0.0};
    double full{0.0};
};

/// Percentage of `split` examples whose target / context / (target, context) pair also occurs in
/// the training split.
inline SplitOverlap split_overlap(const Dataset& dataset, Split split) {
    std::unordered_set<std::string> targets, contexts;
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto* e : dataset.split(Split::Train)) {
        targets.insert(e->target);
        contexts.insert(e->context);
        pairs.emplace(e->target, e->context);
    }
    const auto examples = dataset.split(split);
    if (examples.empty()) {
        return {};
    }
    double t = 0, c = 0, f = 0;
    for (const auto* e : examples) {
        t += targets.contains(e->target) ? 1 : 0;
        c += contexts.contains(e->context) ? 1 : 0;
        f += pairs.contains({e->target, e->context}) ? 1 : 0;
    }
    const double n = static_cast<double>(examples.size());
    return {100.0 * t / n, 100.0 * c / n, 100.0 * f / n};
}

struct DatasetFeatureVector {
    std::string dataset;
    /// (name, value) in a fixed order; see feature_names().
    std::vector<std::pair<std::string, double>> features;
};

/// Fixed feature order: split sizes, dev/test target and context overlap with train, word-type
/// count, one-hot source group / target kind / context kind, number of labels.
inline std::vector<std::string> feature_names() {
    std::vector<std::string> names = {"train_size",          "dev_size",           "test_size",
                                      "dev_target_overlap",  "dev_context_overlap", "test_target_overlap",
                                      "test_context_overlap", "vocabulary_size"};
    for (auto g : kAllSourceGroups) names.push_back("group=" + std::string(to_string(g)));
    for (auto k : kAllTargetKinds) names.push_back("target=" + std::string(to_string(k)));
    for (auto k : kAllContextKinds) names.push_back("context=" + std::string(to_string(k)));
    names.push_back("unique_labels");
    return names;
}

inline DatasetFeatureVector dataset_features(const Dataset& d) {
    const auto sizes = split_stats(d);
    const auto dev = split_overlap(d, Split::Dev);
    const auto test = split_overlap(d, Split::Test);
    std::vector<double> values = {static_cast<double>(sizes.train), static_cast<double>(sizes.dev),
                                  static_cast<double>(sizes.test), dev.target, dev.context, test.target, test.context,
                                  static_cast<double>(vocab_stats(d).unique_word_count)};
    for (auto g : kAllSourceGroups) values.push_back(d.descriptor.source_group == g ? 1.0 : 0.0);
    for (auto k : kAllTargetKinds) values.push_back(d.descriptor.target_kind == k ? 1.0 : 0.0);
    for (auto k : kAllContextKinds) values.push_back(d.descriptor.context_kind == k ? 1.0 : 0.0);
    values.push_back(static_cast<double>(d.descriptor.labels.size()));
    DatasetFeatureVector out{d.name(), {}};
    const auto names = feature_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        out.features.emplace_back(names[i], values[i]);
    }
    return out;
}

struct FeatureCorrelation {
    std::string feature;
    /// Absent when the feature (or the scores) are constant.
    std::optional<double> r;
};

/// Pearson r of every feature against the per-dataset scores (aligned by position).
inline std::vector<FeatureCorrelation> pearson_correlation(const std::vector<DatasetFeatureVector>& features,
                                                           const std::vector<double>& scores) {
    if (features.size() != scores.size()) {
        throw InvalidArgument("pearson_correlation: " + std::to_string(features.size()) + " feature vectors vs " +
                              std::to_string(scores.size()) + " scores");
    }
    if (features.size() < 3) {
        throw InvalidArgument("pearson_correlation needs at least three datasets");
    }
    std::vector<FeatureCorrelation> out;
    for (std::size_t f = 0; f < features.front().features.size(); ++f) {
        std::vector<double> column;
        for (const auto& fv : features) {
            if (fv.features.size() != features.front().features.size()) {
                throw InvalidArgument("feature vectors differ in length");
            }
            column.push_back(fv.features[f].second);
        }
        out.push_back({features.front().features[f].first, pearson(column, scores)});
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// 2-D dataset scatter

struct Scatter2D {
    Eigen::MatrixXd points;  // n x 2
    std::vector<std::string> datasets;  // per point
    std::map<std::string, Eigen::Vector2d> centroids;
};

using PairEncoder = std::function<Eigen::VectorXd(const StanceExample&)>;

/// Samples `n` pairs proportionally to dataset size, encodes them, projects to 2-D, and takes
/// per-dataset centroids of the projected points.
inline Scatter2D dataset_scatter_2d(const Corpus& corpus, const PairEncoder& encode, std::size_t n, std::uint64_t seed) {
    std::vector<const Dataset*> datasets;
    for (const auto& d : corpus.datasets()) {
        datasets.push_back(&d);
    }
    const auto sample = sample_proportional(datasets, n, seed);
    std::vector<Eigen::VectorXd> vectors;
    Scatter2D out;
    for (const auto& e : sample) {
        vectors.push_back(encode(e));
        out.datasets.push_back(e.dataset);
    }
    out.points = project_2d(stack_rows(vectors));
    std::map<std::string, std::pair<Eigen::Vector2d, double>> sums;
    for (std::size_t i = 0; i < out.datasets.size(); ++i) {
        auto& [sum, count] = sums.try_emplace(out.datasets[i], Eigen::Vector2d::Zero(), 0.0).first->second;
        sum += out.points.row(static_cast<Eigen::Index>(i)).transpose();
        count += 1.0;
    }
    for (const auto& [name, acc] : sums) {
        out.centroids[name] = acc.first / acc.second;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Static plots (SVG)

namespace detail {
inline std::string svg_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string palette(std::size_t i) {
    static const std::array<const char*, 16> colors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                                       "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
                                                       "#8c6d31", "#843c39", "#7b4173", "#3182bd"};
    return colors[i % colors.size()];
}
}  // namespace detail

/// Scatter plot with one colour per dataset and labelled centroids.
inline std::string scatter_svg(const Scatter2D& s, int width = 800, int height = 600) {
    const double margin = 40;
    const double min_x = s.points.col(0).minCoeff(), max_x = s.points.col(0).maxCoeff();
    const double min_y = s.points.col(1).minCoeff(), max_y = s.points.col(1).maxCoeff();
    auto px = [&](double x) { return margin + (x - min_x) / std::max(max_x - min_x, 1e-12) * (width - 2 * margin); };
    auto py = [&](double y) { return height - margin - (y - min_y) / std::max(max_y - min_y, 1e-12) * (height - 2 * margin); };
    std::map<std::string, std::size_t> color;
    for (const auto& [name, _] : s.centroids) {
        color.emplace(name, color.size());
    }
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
        out << "<circle cx=\"" << px(s.points(i, 0)) << "\" cy=\"" << py(s.points(i, 1)) << "\" r=\"1.5\" fill=\""
            << detail::palette(color[s.datasets[static_cast<std::size_t>(i)]]) << "\" fill-opacity=\"0.5\"/>\n";
    }
    for (const auto& [name, c] : s.centroids) {
        out << "<circle cx=\"" << px(c.x()) << "\" cy=\"" << py(c.y()) << "\" r=\"6\" fill=\"" << detail::palette(color[name])
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(c.x()) + 8 << "\" y=\"" << py(c.y()) + 4 << "\" font-size=\"12\">"
            << detail::svg_escape(name) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

/// Horizontal bar chart of correlations in [-1, 1]; undefined entries are drawn as "n/a".
inline std::string correlation_svg(const std::vector<FeatureCorrelation>& rows, int width = 700) {
    const int row_h = 18, label_w = 200, top = 20;
    const int height = top * 2 + row_h * static_cast<int>(rows.size());
    const double mid = label_w + (width - label_w) / 2.0;
    const double half = (width - label_w) / 2.0 - 10;
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << mid << "\" y1=\"" << top << "\" x2=\"" << mid << "\" y2=\"" << height - top
        << "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double y = top + static_cast<double>(i) * row_h;
        out << "<text x=\"4\" y=\"" << y + 13 << "\" font-size=\"12\">" << detail::svg_escape(rows[i].feature) << "</text>\n";
        if (rows[i].r) {
            const double r = *rows[i].r;
            const double x = r >= 0 ? mid : mid + r * half;
            out << "<rect x=\"" << x << "\" y=\"" << y + 3 << "\" width=\"" << std::abs(r) * half << "\" height=\""
                << row_h - 6 << "\" fill=\"" << (r >= 0 ? "#2ca02c" : "#d62728") << "\"/>\n";
            out << "<text x=\"" << (r >= 0 ? mid + r * half + 4 : mid + 4) << "\" y=\"" << y + 13
                << "\" font-size=\"11\">" << r << "</text>\n";
        } else {
            out << "<text x=\"" << mid + 4 << "\" y=\"" << y + 13 << "\" font-size=\"11\">n/a</text>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace stance
