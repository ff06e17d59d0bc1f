#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace stance {

enum class Split { Train, Dev, Test };
enum class SourceGroup { Debates, News, SocialMedia, Various };
enum class TargetKind { Claim, Headline, Person, Topic, None };
enum class ContextKind { Article, Claim, Post, Thread, Sentence, Tweet };

inline constexpr std::array kAllSplits{Split::Train, Split::Dev, Split::Test};
inline constexpr std::array kAllSourceGroups{SourceGroup::Debates, SourceGroup::News, SourceGroup::SocialMedia,
                                             SourceGroup::Various};
inline constexpr std::array kAllTargetKinds{TargetKind::Claim, TargetKind::Headline, TargetKind::Person,
                                            TargetKind::Topic, TargetKind::None};
inline constexpr std::array kAllContextKinds{ContextKind::Article, ContextKind::Claim,  ContextKind::Post,
                                             ContextKind::Thread,  ContextKind::Sentence, ContextKind::Tweet};

inline std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Dev: return "dev";
        case Split::Test: return "test";
    }
    return "?";
}

inline std::string_view to_string(SourceGroup g) {
    switch (g) {
        case SourceGroup::Debates: return "Debates";
        case SourceGroup::News: return "News";
        case SourceGroup::SocialMedia: return "SocialMedia";
        case SourceGroup::Various: return "Various";
    }
    return "?";
}

inline std::string_view to_string(TargetKind k) {
    switch (k) {
        case TargetKind::Claim: return "Claim";
        case TargetKind::Headline: return "Headline";
        case TargetKind::Person: return "Person";
        case TargetKind::Topic: return "Topic";
        case TargetKind::None: return "None";
    }
    return "?";
}

inline std::string_view to_string(ContextKind k) {
    switch (k) {
        case ContextKind::Article: return "Article";
        case ContextKind::Claim: return "Claim";
        case ContextKind::Post: return "Post";
        case ContextKind::Thread: return "Thread";
        case ContextKind::Sentence: return "Sentence";
        case ContextKind::Tweet: return "Tweet";
    }
    return "?";
}

namespace detail {
template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<Enum, N>& all, std::string_view what) {
    for (Enum e : all) {
        if (to_string(e) == s) {
            return e;
        }
    }
    throw SchemaViolation("unknown " + std::string(what) + " '" + std::string(s) + "'");
}
}  // namespace detail

inline Split parse_split(std::string_view s) { return detail::parse_enum(s, kAllSplits, "split"); }
inline SourceGroup parse_source_group(std::string_view s) {
    return detail::parse_enum(s, kAllSourceGroups, "source group");
}
inline TargetKind parse_target_kind(std::string_view s) {
    return detail::parse_enum(s, kAllTargetKinds, "target kind");
}
inline ContextKind parse_context_kind(std::string_view s) {
    return detail::parse_enum(s, kAllContextKinds, "context kind");
}

struct StanceExample {
    std::string id;
    std::string dataset;
    Split split{Split::Train};
    std::string target;
    std::string context;
    std::string label;

    friend bool operator==(const StanceExample&, const StanceExample&) = default;
    friend auto operator<=>(const StanceExample&, const StanceExample&) = default;
};

struct SplitStats {
    std::size_t train{0};
    std::size_t dev{0};
    std::size_t test{0};

    [[nodiscard]] std::size_t total() const { return train + dev + test; }
    [[nodiscard]] std::size_t operator[](Split s) const {
        return s == Split::Train ? train : (s == Split::Dev ? dev : test);
    }
    friend bool operator==(const SplitStats&, const SplitStats&) = default;
};

struct DatasetDescriptor {
    std::string name;
    SourceGroup source_group{SourceGroup::Various};
    TargetKind target_kind{TargetKind::Topic};
    ContextKind context_kind{ContextKind::Post};
    std::vector<std::string> labels;
    /// Reference split sizes, when known (used by data-gated checks only).
    std::optional<SplitStats> split_sizes;

    [[nodiscard]] bool has_label(std::string_view label) const {
        return std::find(labels.begin(), labels.end(), label) != labels.end();
    }
};

struct VocabStats {
    std::size_t unique_word_count{0};
    double mean_length{0.0};
    double p25_length{0.0};
    double median_length{0.0};
    double max_length{0.0};
};

inline void validate_descriptor(const DatasetDescriptor& d) {
    if (d.name.empty()) {
        throw SchemaViolation("descriptor with empty name");
    }
    if (d.labels.empty()) {
        throw SchemaViolation("descriptor '" + d.name + "' has no labels");
    }
    std::set<std::string> seen;
    for (const auto& label : d.labels) {
        if (!seen.insert(label).second) {
            throw SchemaViolation("descriptor '" + d.name + "' repeats label '" + label + "'");
        }
    }
}

inline io::json to_json(const DatasetDescriptor& d) {
    io::json j{{"name", d.name},
               {"source_group", to_string(d.source_group)},
               {"target_kind", to_string(d.target_kind)},
               {"context_kind", to_string(d.context_kind)},
               {"labels", d.labels}};
    if (d.split_sizes) {
        j["split_sizes"] = {{"train", d.split_sizes->train}, {"dev", d.split_sizes->dev}, {"test", d.split_sizes->test}};
    }
    return j;
}

inline DatasetDescriptor descriptor_from_json(const io::json& j) {
    try {
        DatasetDescriptor d;
        d.name = j.at("name").get<std::string>();
        d.source_group = parse_source_group(j.at("source_group").get<std::string>());
        d.target_kind = parse_target_kind(j.at("target_kind").get<std::string>());
        d.context_kind = parse_context_kind(j.at("context_kind").get<std::string>());
        d.labels = j.at("labels").get<std::vector<std::string>>();
        if (j.contains("split_sizes")) {
            const auto& s = j.at("split_sizes");
            d.split_sizes = SplitStats{s.at("train").get<std::size_t>(), s.at("dev").get<std::size_t>(),
                                       s.at("test").get<std::size_t>()};
        }
        validate_descriptor(d);
        return d;
    } catch (const io::json::exception& e) {
        throw SchemaViolation(std::string("malformed descriptor: ") + e.what());
    }
}

/// Ordered table of dataset descriptors. The built-in table lists the sixteen benchmark
/// datasets sorted by source group, then alphabetically.
class Registry {
public:
    Registry() = default;
    explicit Registry(std::vector<DatasetDescriptor> descriptors) : descriptors_(std::move(descriptors)) {
        std::set<std::string> names;
        for (const auto& d : descriptors_) {
            validate_descriptor(d);
            if (!names.insert(d.name).second) {
                throw SchemaViolation("registry lists dataset '" + d.name + "' twice");
            }
        }
    }

    static const Registry& builtin();

    /// Reads a JSON-lines registry file with one descriptor object per line.
    static Registry from_file(const std::filesystem::path& path) {
        std::vector<DatasetDescriptor> out;
        io::for_each_jsonl(path, [&](const io::json& row, std::size_t) { out.push_back(descriptor_from_json(row)); });
        return Registry(std::move(out));
    }

    void save(const std::filesystem::path& path) const {
        std::vector<io::json> rows;
        for (const auto& d : descriptors_) {
            rows.push_back(to_json(d));
        }
        io::write_jsonl_atomic(path, rows);
    }

    [[nodiscard]] const std::vector<DatasetDescriptor>& descriptors() const { return descriptors_; }

    [[nodiscard]] const DatasetDescriptor* find(std::string_view name) const {
        for (const auto& d : descriptors_) {
            if (d.name == name) {
                return &d;
            }
        }
        return nullptr;
    }

    [[nodiscard]] const DatasetDescriptor& at(std::string_view name) const {
        if (const auto* d = find(name)) {
            return *d;
        }
        throw DatasetNotFound("dataset '" + std::string(name) + "' is not in the registry");
    }

    /// Registry order index (used to sort reports).
    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < descriptors_.size(); ++i) {
            if (descriptors_[i].name == name) {
                return i;
            }
        }
        return std::nullopt;
    }

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& d : descriptors_) {
            out.push_back(d.name);
        }
        return out;
    }

private:
    std::vector<DatasetDescriptor> descriptors_;
};

inline const Registry& Registry::builtin() {
    using SG = SourceGroup;
    using TK = TargetKind;
    using CK = ContextKind;
    static const Registry registry(std::vector<DatasetDescriptor>{
        {"arc", SG::Debates, TK::Headline, CK::Post, {"unrelated", "disagree", "agree", "discuss"}, SplitStats{12382, 1851, 3559}},
        {"iac1", SG::Debates, TK::Topic, CK::Thread, {"pro", "anti", "other"}, SplitStats{4227, 454, 924}},
        {"perspectrum", SG::Debates, TK::Claim, CK::Sentence, {"support", "undermine"}, SplitStats{6978, 2071, 2773}},
        {"poldeb", SG::Debates, TK::Topic, CK::Post, {"for", "against"}, SplitStats{4753, 1151, 1230}},
        {"scd", SG::Debates, TK::None, CK::Post, {"for", "against"}, SplitStats{3251, 624, 964}},
        {"emergent", SG::News, TK::Headline, CK::Article, {"for", "observing", "against"}, SplitStats{1770, 301, 524}},
        {"fnc1", SG::News, TK::Headline, CK::Article, {"unrelated", "discuss", "agree", "disagree"}, SplitStats{42476, 7496, 25413}},
        {"snopes", SG::News, TK::Claim, CK::Article, {"agree", "refute"}, SplitStats{14416, 1868, 3154}},
        {"mtsd", SG::SocialMedia, TK::Person, CK::Tweet, {"against", "favor", "none"}, SplitStats{3718, 520, 1092}},
        {"rumor", SG::SocialMedia, TK::Topic, CK::Tweet, {"endorse", "deny", "unrelated", "question", "neutral"}, SplitStats{6093, 471, 505}},
        {"semeval2016t6", SG::SocialMedia, TK::Topic, CK::Tweet, {"against", "none", "favor"}, SplitStats{2497, 417, 1249}},
        {"semeval2019t7", SG::SocialMedia, TK::None, CK::Tweet, {"comment", "support", "query", "deny"}, SplitStats{5217, 1485, 1827}},
        {"wtwt", SG::SocialMedia, TK::Claim, CK::Tweet, {"comment", "unrelated", "support", "refute"}, SplitStats{25193, 7897, 18194}},
        {"argmin", SG::Various, TK::Topic, CK::Sentence, {"argument against", "argument for"}, SplitStats{6845, 1568, 2726}},
        {"ibmcs", SG::Various, TK::Topic, CK::Claim, {"pro", "con"}, SplitStats{935, 104, 1355}},
        {"vast", SG::Various, TK::Topic, CK::Post, {"con", "pro", "neutral"}, SplitStats{13477, 2062, 3006}},
    });
    return registry;
}

/// One dataset: its descriptor plus every example across splits, in file order
/// (train, then dev, then test).
struct Dataset {
    DatasetDescriptor descriptor;
    std::vector<StanceExample> examples;

    [[nodiscard]] const std::string& name() const { return descriptor.name; }

    [[nodiscard]] std::vector<const StanceExample*> split(Split s) const {
        std::vector<const StanceExample*> out;
        for (const auto& e : examples) {
            if (e.split == s) {
                out.push_back(&e);
            }
        }
        return out;
    }
};

/// Immutable after loading; safe to share across threads.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<Dataset> datasets) : datasets_(std::move(datasets)) {}

    [[nodiscard]] const std::vector<Dataset>& datasets() const { return datasets_; }
    [[nodiscard]] bool empty() const { return datasets_.empty(); }
    [[nodiscard]] std::size_t size() const { return datasets_.size(); }

    [[nodiscard]] const Dataset* find(std::string_view name) const {
        for (const auto& d : datasets_) {
            if (d.name() == name) {
                return &d;
            }
        }
        return nullptr;
    }

    [[nodiscard]] const Dataset& at(std::string_view name) const {
        if (const auto* d = find(name)) {
            return *d;
        }
        throw DatasetNotFound("dataset '" + std::string(name) + "' is not loaded");
    }

    [[nodiscard]] std::vector<DatasetDescriptor> descriptors() const {
        std::vector<DatasetDescriptor> out;
        for (const auto& d : datasets_) {
            out.push_back(d.descriptor);
        }
        return out;
    }

    /// Copy without the named dataset (leave-one-dataset-out).
    [[nodiscard]] Corpus without(std::string_view name) const {
        std::vector<Dataset> kept;
        for (const auto& d : datasets_) {
            if (d.name() != name) {
                kept.push_back(d);
            }
        }
        return Corpus(std::move(kept));
    }

private:
    std::vector<Dataset> datasets_;
};

inline void validate_example(const StanceExample& e, const DatasetDescriptor& d, std::string_view where = {}) {
    const std::string loc = where.empty() ? ("record '" + e.id + "'") : (std::string(where) + " (record '" + e.id + "')");
    if (e.dataset != d.name) {
        throw SchemaViolation(loc + ": dataset '" + e.dataset + "' does not match '" + d.name + "'");
    }
    if (e.context.empty()) {
        throw SchemaViolation(loc + ": empty context");
    }
    if (e.target.empty() && d.target_kind != TargetKind::None) {
        throw SchemaViolation(loc + ": empty target in a dataset with explicit targets");
    }
    if (!d.has_label(e.label)) {
        throw SchemaViolation(loc + ": label '" + e.label + "' is not in the inventory of '" + d.name + "'");
    }
}

inline io::json to_json(const StanceExample& e) {
    return io::json{{"id", e.id},           {"dataset", e.dataset}, {"split", to_string(e.split)},
                    {"target", e.target},   {"context", e.context}, {"label", e.label}};
}

inline StanceExample example_from_json(const io::json& j) {
    try {
        StanceExample e;
        e.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        e.dataset = j.at("dataset").get<std::string>();
        e.split = parse_split(j.at("split").get<std::string>());
        e.target = j.at("target").is_null() ? std::string{} : j.at("target").get<std::string>();
        e.context = j.at("context").get<std::string>();
        e.label = j.at("label").get<std::string>();
        return e;
    } catch (const io::json::exception& e) {
        throw SchemaViolation(std::string("malformed record: ") + e.what());
    }
}

inline std::filesystem::path split_path(const std::filesystem::path& root, std::string_view dataset, Split s) {
    return root / std::string(dataset) / (std::string(to_string(s)) + ".jsonl");
}

/// Loads `<root>/<dataset>/{train,dev,test}.jsonl` and validates every record. No
/// deduplication is performed; ids must be unique across the dataset's splits.
inline Dataset load_dataset(const std::filesystem::path& root, const DatasetDescriptor& descriptor) {
    Dataset dataset{descriptor, {}};
    std::unordered_set<std::string> ids;
    for (Split s : kAllSplits) {
        const auto path = split_path(root, descriptor.name, s);
        if (!std::filesystem::exists(path)) {
            throw DatasetNotFound("missing corpus file " + path.string());
        }
        io::for_each_jsonl(path, [&](const io::json& row, std::size_t line) {
            const std::string where = path.string() + ":" + std::to_string(line);
            StanceExample e;
            try {
                e = example_from_json(row);
            } catch (const SchemaViolation& err) {
                throw SchemaViolation(where + ": " + err.what());
            }
            if (e.split != s) {
                throw SchemaViolation(where + " (record '" + e.id + "'): split '" + std::string(to_string(e.split)) +
                                      "' stored in the " + std::string(to_string(s)) + " file");
            }
            validate_example(e, descriptor, where);
            if (!ids.insert(e.id).second) {
                throw SchemaViolation(where + ": id '" + e.id + "' appears more than once in '" + descriptor.name + "'");
            }
            dataset.examples.push_back(std::move(e));
        });
    }
    return dataset;
}

inline Corpus load_corpus(const std::filesystem::path& root, const std::vector<std::string>& names,
                          const Registry& registry = Registry::builtin()) {
    std::vector<Dataset> out;
    for (const auto& name : names) {
        out.push_back(load_dataset(root, registry.at(name)));
    }
    return Corpus(std::move(out));
}

/// Writes a dataset in the unified layout (one file per split).
inline void save_dataset(const std::filesystem::path& root, const Dataset& dataset) {
    for (Split s : kAllSplits) {
        std::vector<io::json> rows;
        for (const auto& e : dataset.examples) {
            if (e.split == s) {
                rows.push_back(to_json(e));
            }
        }
        io::write_jsonl_atomic(split_path(root, dataset.name(), s), rows);
    }
}

inline SplitStats split_stats(const Dataset& dataset) {
    SplitStats stats;
    for (const auto& e : dataset.examples) {
        switch (e.split) {
            case Split::Train: ++stats.train; break;
            case Split::Dev: ++stats.dev; break;
            case Split::Test: ++stats.test; break;
        }
    }
    return stats;
}

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

inline Tokenizer word_tokenizer() { return [](std::string_view s) { return text::casual_tokenize(s); }; }

namespace detail {
/// Linear-interpolation quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) {
        return 0.0;
    }
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}
}  // namespace detail

/// Word types (case preserved) over target and context; length statistics count the tokens of
/// the concatenated pair.
inline VocabStats vocab_stats(const Dataset& dataset, const Tokenizer& tokenize = word_tokenizer()) {
    std::unordered_set<std::string> types;
    std::vector<double> lengths;
    lengths.reserve(dataset.examples.size());
    for (const auto& e : dataset.examples) {
        std::size_t length = 0;
        for (const auto* field : {&e.target, &e.context}) {
            for (auto& tok : tokenize(*field)) {
                ++length;
                types.insert(std::move(tok));
            }
        }
        lengths.push_back(static_cast<double>(length));
    }
    VocabStats stats;
    stats.unique_word_count = types.size();
    if (!lengths.empty()) {
        std::sort(lengths.begin(), lengths.end());
        stats.mean_length = std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(lengths.size());
        stats.p25_length = detail::quantile_sorted(lengths, 0.25);
        stats.median_length = detail::quantile_sorted(lengths, 0.5);
        stats.max_length = lengths.back();
    }
    return stats;
}

/// Word types of a dataset with stop-words and pure punctuation removed, case preserved.
inline std::unordered_set<std::string> content_types(const Dataset& dataset, const Tokenizer& tokenize = word_tokenizer()) {
    std::unordered_set<std::string> types;
    for (const auto& e : dataset.examples) {
        for (const auto* field : {&e.target, &e.context}) {
            for (auto& tok : tokenize(*field)) {
                if (!text::is_stopword(tok) && !text::is_punctuation(tok)) {
                    types.insert(std::move(tok));
                }
            }
        }
    }
    return types;
}

/// Row-normalised vocabulary overlap: entry (i, j) = |types(i) ∩ types(j)| / |types(i)|.
inline Eigen::MatrixXd overlap_matrix(const std::vector<const Dataset*>& datasets,
                                      const Tokenizer& tokenize = word_tokenizer()) {
    if (datasets.size() < 2) {
        throw InvalidArgument("overlap_matrix needs at least two datasets");
    }
    std::vector<std::unordered_set<std::string>> types;
    for (const auto* d : datasets) {
        types.push_back(content_types(*d, tokenize));
        if (types.back().empty()) {
            throw InvalidArgument("dataset '" + d->name() + "' has an empty vocabulary; its overlap row is undefined");
        }
    }
    const auto n = static_cast<Eigen::Index>(datasets.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = types[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& col = types[static_cast<std::size_t>(j)];
            std::size_t shared = 0;
            for (const auto& t : row) {
                shared += col.contains(t) ? 1 : 0;
            }
            m(i, j) = static_cast<double>(shared) / static_cast<double>(row.size());
        }
    }
    return m;
}

/// Largest-remainder (Hamilton) apportionment of `n` seats over `sizes`. Remainder ties go to
/// the earlier entry.
inline std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, std::size_t n) {
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    if (n > total) {
        throw InvalidArgument("requested " + std::to_string(n) + " samples from " + std::to_string(total) + " examples");
    }
    std::vector<std::size_t> seats(sizes.size(), 0);
    if (total == 0 || n == 0) {
        return seats;
    }
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double quota = static_cast<double>(sizes[i]) * static_cast<double>(n) / static_cast<double>(total);
        seats[i] = static_cast<std::size_t>(std::floor(quota));
        assigned += seats[i];
        remainders.emplace_back(quota - std::floor(quota), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n; ++k) {
        const std::size_t i = remainders[k % remainders.size()].second;
        if (seats[i] < sizes[i]) {
            ++seats[i];
            ++assigned;
        }
    }
    return seats;
}

/// Samples `n` examples with per-dataset counts proportional to dataset sizes. Deterministic
/// for a fixed seed; output is grouped by dataset in input order.
inline std::vector<StanceExample> sample_proportional(const std::vector<const Dataset*>& datasets, std::size_t n,
                                                      std::uint64_t seed) {
    std::vector<std::size_t> sizes;
    for (const auto* d : datasets) {
        sizes.push_back(d->examples.size());
    }
    const auto counts = apportion(sizes, n);
    std::mt19937_64 rng(seed);
    std::vector<StanceExample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        std::vector<std::size_t> order(sizes[i]);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t k = 0; k < counts[i]; ++k) {
            out.push_back(datasets[i]->examples[order[k]]);
        }
    }
    return out;
}

}  // namespace stance
