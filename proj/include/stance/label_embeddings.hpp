#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "io.hpp"
#include "labelspace.hpp"
#include "log.hpp"
#include "text.hpp"

namespace stance {

enum class EmbeddingKind { StaticWord, ContextualEncoder };

/// Word vectors (static kind) or a sentence encoder (contextual kind). Immutable after load.
class EmbeddingTable {
public:
    using Encoder = std::function<Eigen::VectorXd(std::string_view)>;

    EmbeddingTable() = default;

    EmbeddingTable(std::unordered_map<std::string, Eigen::VectorXd> vocabulary, std::size_t dimension)
        : vocabulary_(std::move(vocabulary)), dimension_(dimension), kind_(EmbeddingKind::StaticWord) {
        if (vocabulary_.empty()) {
            throw InvalidArgument("embedding table is empty");
        }
        for (const auto& [word, vec] : vocabulary_) {
            if (static_cast<std::size_t>(vec.size()) != dimension_) {
                throw SchemaViolation("vector for '" + word + "' has dimension " + std::to_string(vec.size()) +
                                      ", expected " + std::to_string(dimension_));
            }
        }
    }

    /// Table backed by a pooled sentence representation (the sequence-start state of an encoder).
    static EmbeddingTable contextual(std::size_t dimension, Encoder encoder) {
        EmbeddingTable t;
        t.dimension_ = dimension;
        t.kind_ = EmbeddingKind::ContextualEncoder;
        t.encoder_ = std::move(encoder);
        return t;
    }

    [[nodiscard]] std::size_t dimension() const { return dimension_; }
    [[nodiscard]] std::size_t size() const { return vocabulary_.size(); }
    [[nodiscard]] EmbeddingKind kind() const { return kind_; }
    [[nodiscard]] const std::unordered_map<std::string, Eigen::VectorXd>& vocabulary() const { return vocabulary_; }

    [[nodiscard]] const Eigen::VectorXd* find(const std::string& word) const {
        const auto it = vocabulary_.find(word);
        return it == vocabulary_.end() ? nullptr : &it->second;
    }

    [[nodiscard]] Eigen::VectorXd encode(std::string_view sentence) const {
        if (!encoder_) {
            throw InvalidArgument("embedding table has no contextual encoder");
        }
        return encoder_(sentence);
    }

    /// Multiplies every vector by `factor`.
    [[nodiscard]] EmbeddingTable scaled(double factor) const {
        auto copy = *this;
        for (auto& [word, vec] : copy.vocabulary_) {
            vec *= factor;
        }
        if (encoder_) {
            copy.encoder_ = [inner = encoder_, factor](std::string_view s) -> Eigen::VectorXd { return inner(s) * factor; };
        }
        return copy;
    }

private:
    std::unordered_map<std::string, Eigen::VectorXd> vocabulary_;
    std::size_t dimension_{0};
    EmbeddingKind kind_{EmbeddingKind::StaticWord};
    Encoder encoder_;
};

/// Reads the word-vector text format: an optional "count dim" header, then one token followed
/// by `dim` decimals per line.
inline EmbeddingTable load_vectors(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open vector file " + path.string());
    }
    std::unordered_map<std::string, Eigen::VectorXd> vocabulary;
    std::size_t dimension = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto fields = text::split_whitespace(line);
        if (fields.empty()) {
            continue;
        }
        if (line_no == 1 && fields.size() == 2 &&
            fields[0].find_first_not_of("0123456789") == std::string::npos &&
            fields[1].find_first_not_of("0123456789") == std::string::npos) {
            continue;
        }
        if (fields.size() < 2) {
            throw SchemaViolation(path.string() + ":" + std::to_string(line_no) + ": token without a vector");
        }
        const std::size_t dim = fields.size() - 1;
        if (dimension == 0) {
            dimension = dim;
        } else if (dim != dimension) {
            throw SchemaViolation(path.string() + ":" + std::to_string(line_no) + ": dimension " + std::to_string(dim) +
                                  " differs from " + std::to_string(dimension));
        }
        Eigen::VectorXd vec(static_cast<Eigen::Index>(dim));
        for (std::size_t k = 0; k < dim; ++k) {
            try {
                vec(static_cast<Eigen::Index>(k)) = std::stod(fields[k + 1]);
            } catch (const std::exception&) {
                throw SchemaViolation(path.string() + ":" + std::to_string(line_no) + ": bad number '" + fields[k + 1] + "'");
            }
        }
        vocabulary.insert_or_assign(fields[0], std::move(vec));
    }
    if (vocabulary.empty()) {
        throw SchemaViolation("vector file " + path.string() + " has no vectors");
    }
    return EmbeddingTable(std::move(vocabulary), dimension);
}

struct EmbeddingOptions {
    /// Lower-case label names before static-vector lookup.
    bool lowercase{true};
};

/// Label-name vector. Static tables average the vectors of the whitespace-separated words that
/// are in vocabulary (out-of-vocabulary words are skipped with a warning); contextual tables
/// encode the raw name.
inline Eigen::VectorXd embed_label(const EmbeddingTable& table, std::string_view name, const EmbeddingOptions& options = {}) {
    if (table.kind() == EmbeddingKind::ContextualEncoder) {
        return table.encode(name);
    }
    const auto words = text::split_whitespace(options.lowercase ? text::to_lower(name) : std::string(name));
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table.dimension()));
    std::size_t found = 0;
    for (const auto& w : words) {
        if (const auto* vec = table.find(w)) {
            sum += *vec;
            ++found;
        } else {
            log::warn("label word '" + w + "' of '" + std::string(name) + "' is out of vocabulary; skipped");
        }
    }
    if (found == 0) {
        throw OutOfVocabulary("no word of label '" + std::string(name) + "' is in the vector vocabulary");
    }
    return sum / static_cast<double>(found);
}

/// Writes a static table in the word-vector text format read by load_vectors (sorted by word).
inline void save_vectors(const std::filesystem::path& path, const EmbeddingTable& table) {
    if (table.kind() != EmbeddingKind::StaticWord) {
        throw InvalidArgument("only static word-vector tables can be saved");
    }
    std::vector<std::string> words;
    for (const auto& [w, _] : table.vocabulary()) {
        words.push_back(w);
    }
    std::sort(words.begin(), words.end());
    io::write_atomic(path, [&](std::ostream& os) {
        os.precision(17);
        os << words.size() << ' ' << table.dimension() << '\n';
        for (const auto& w : words) {
            os << w;
            const auto& v = *table.find(w);
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                os << ' ' << v(i);
            }
            os << '\n';
        }
    });
}

inline double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size()) {
        throw InvalidArgument("cosine of vectors with different dimensions");
    }
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) {
        throw InvalidArgument("cosine is undefined for a zero vector");
    }
    return u.dot(v) / (nu * nv);
}

struct LabelVector {
    LabelId label;
    Eigen::VectorXd vector;
};

struct NearestResult {
    std::size_t index{0};
    double similarity{0.0};
};

/// Argmax of cosine similarity; ties resolve to the earliest candidate.
inline NearestResult nearest_label(const Eigen::VectorXd& query, const std::vector<LabelVector>& candidates) {
    if (candidates.empty()) {
        throw InvalidArgument("nearest_label needs at least one candidate");
    }
    NearestResult best{0, cosine(query, candidates[0].vector)};
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double sim = cosine(query, candidates[i].vector);
        if (sim > best.similarity) {
            best = {i, sim};
        }
    }
    return best;
}

inline NearestResult nearest_label(const LabelVector& query, const std::vector<LabelVector>& candidates) {
    return nearest_label(query.vector, candidates);
}

/// PCA to two dimensions. Rows of `points` are observations. Each output column is oriented so
/// that its largest-magnitude coordinate is positive.
inline Eigen::MatrixXd project_2d(const Eigen::MatrixXd& points) {
    if (points.rows() < 2) {
        throw InvalidArgument("project_2d needs at least two vectors");
    }
    const Eigen::RowVectorXd mean = points.colwise().mean();
    const Eigen::MatrixXd centered = points.rowwise() - mean;
    const double scale = centered.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        throw InvalidArgument("project_2d input has rank 0 (all vectors identical)");
    }
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(points.rows() - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    // Eigenvalues come in ascending order.
    const Eigen::Index d = cov.rows();
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(d, 2);
    basis.col(0) = solver.eigenvectors().col(d - 1);
    if (d >= 2) {
        basis.col(1) = solver.eigenvectors().col(d - 2);
    }
    Eigen::MatrixXd projected = centered * basis;
    for (Eigen::Index c = 0; c < 2; ++c) {
        Eigen::Index arg = 0;
        projected.col(c).cwiseAbs().maxCoeff(&arg);
        if (projected(arg, c) < 0.0) {
            projected.col(c) *= -1.0;
        }
    }
    return projected;
}

inline Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& vectors) {
    if (vectors.empty()) {
        return {};
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()), vectors.front().size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
    }
    return m;
}

}  // namespace stance
