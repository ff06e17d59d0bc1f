#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "corpus.hpp"
#include "error.hpp"
#include "io.hpp"
#include "label_embeddings.hpp"
#include "labelspace.hpp"
#include "log.hpp"
#include "model.hpp"
#include "text.hpp"
#include "trainer.hpp"

namespace stance {

enum class MappingKind { Hard, Weak, Soft };

inline std::string_view to_string(MappingKind k) {
    switch (k) {
        case MappingKind::Hard: return "hard";
        case MappingKind::Weak: return "weak";
        case MappingKind::Soft: return "soft";
    }
    return "?";
}

inline MappingKind parse_mapping_kind(std::string_view s) {
    if (s == "hard") return MappingKind::Hard;
    if (s == "weak") return MappingKind::Weak;
    if (s == "soft") return MappingKind::Soft;
    throw InvalidArgument("unknown mapping strategy '" + std::string(s) + "'");
}

struct OODPrediction {
    std::string id;
    /// Qualified in-domain label (or meta group for hard mapping).
    std::string in_domain_label;
    LabelId mapped_label;
    MappingKind strategy{MappingKind::Weak};
    /// Cosine similarity of the chosen label; absent for hard mapping and skipped comparisons.
    std::optional<double> score;
};

/// Label name as it is looked up in the embedding table: qualifier stripped, lower-cased.
inline std::string normalize_label_name(std::string_view name) {
    if (const auto parts = split_qualified(name)) {
        return text::to_lower(parts->second);
    }
    return text::to_lower(name);
}

/// Embeds label names once per name; names that cannot be embedded are remembered as such.
class LabelVectorCache {
public:
    explicit LabelVectorCache(const EmbeddingTable& table, EmbeddingOptions options = {}) : table_(&table), options_(options) {}

    const Eigen::VectorXd* get(std::string_view name) {
        const auto key = normalize_label_name(name);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            std::optional<Eigen::VectorXd> vec;
            try {
                vec = embed_label(*table_, key, options_);
                if (vec->norm() == 0.0) {
                    log::warn("label '" + key + "' has a zero embedding; skipped");
                    vec.reset();
                }
            } catch (const OutOfVocabulary& e) {
                log::warn(e.what());
            }
            it = cache_.emplace(key, std::move(vec)).first;
        }
        return it->second ? &*it->second : nullptr;
    }

private:
    const EmbeddingTable* table_;
    EmbeddingOptions options_;
    std::map<std::string, std::optional<Eigen::VectorXd>> cache_;
};

/// Most probable training-space label under the mixture distribution. The mask is the union of all
/// training labels unless `restrict_to` names one training dataset. Ties go to the lower index.
inline LabelId predict_in_domain(MoLEModel& model, const StanceExample& example,
                                 const std::optional<std::string>& restrict_to = std::nullopt) {
    const auto& space = model.label_space();
    const Mask mask = restrict_to ? space.mask_for(*restrict_to) : space.union_mask();
    const auto out = model.predict(model.tokenize(example), mask);
    return space.label(argmax_label(out.combined, mask));
}

namespace detail {

inline std::vector<LabelId> labels_in_group(const std::vector<LabelId>& inventory, HardGroup group, const GroupTable& groups) {
    std::vector<LabelId> out;
    for (const auto& l : inventory) {
        if (groups.find(l.qualified()) == group) {
            out.push_back(l);
        }
    }
    return out;
}

/// Held-out labels of `group`, or of the first neighbouring group that has any.
inline std::pair<HardGroup, std::vector<LabelId>> group_candidates(const std::vector<LabelId>& inventory, HardGroup group,
                                                                   const GroupTable& groups) {
    if (auto in_group = labels_in_group(inventory, group, groups); !in_group.empty()) {
        return {group, std::move(in_group)};
    }
    for (HardGroup g : groups.neighborhood(group)) {
        if (auto in_group = labels_in_group(inventory, g, groups); !in_group.empty()) {
            return {g, std::move(in_group)};
        }
    }
    throw UnmappedLabel("no held-out label belongs to any hard group");
}

inline void require_inventory(const std::vector<LabelId>& inventory) {
    if (inventory.empty()) {
        throw InvalidArgument("held-out inventory is empty");
    }
}

}  // namespace detail

/// Held-out label for a predicted meta group: the first inventory label of that group, falling
/// back along the group's neighbourhood.
inline LabelId hard_map(HardGroup predicted, const std::vector<LabelId>& held_out, const GroupTable& groups) {
    detail::require_inventory(held_out);
    return detail::group_candidates(held_out, predicted, groups).second.front();
}

/// Nearest held-out label name by cosine similarity over the whole inventory.
inline OODPrediction soft_map(const LabelId& predicted, const std::vector<LabelId>& held_out, LabelVectorCache& vectors) {
    detail::require_inventory(held_out);
    OODPrediction out;
    out.in_domain_label = predicted.qualified();
    out.strategy = MappingKind::Soft;
    if (held_out.size() == 1) {
        out.mapped_label = held_out.front();
        return out;
    }
    const auto* query = vectors.get(predicted.name);
    if (query == nullptr) {
        throw OutOfVocabulary("predicted label '" + predicted.qualified() + "' has no embedding");
    }
    std::vector<LabelVector> candidates;
    for (const auto& l : held_out) {
        if (const auto* v = vectors.get(l.name)) {
            candidates.push_back({l, *v});
        }
    }
    if (candidates.empty()) {
        throw OutOfVocabulary("no held-out label name has an embedding");
    }
    const auto best = nearest_label(*query, candidates);
    out.mapped_label = candidates[best.index].label;
    out.score = best.similarity;
    return out;
}

/// Held-out labels of the predicted label's hard group (or the first neighbouring group with
/// any); the most similar by label-name embedding wins. Singletons skip the comparison.
inline OODPrediction weak_map(const LabelId& predicted, const std::vector<LabelId>& held_out, LabelVectorCache& vectors,
                              const GroupTable& groups) {
    detail::require_inventory(held_out);
    const auto [group, pool] = detail::group_candidates(held_out, groups.group_of(predicted.qualified()), groups);
    OODPrediction out;
    out.in_domain_label = predicted.qualified();
    out.strategy = MappingKind::Weak;
    if (pool.size() == 1) {
        out.mapped_label = pool.front();
        return out;
    }
    const auto* query = vectors.get(predicted.name);
    std::vector<LabelVector> candidates;
    for (const auto& l : pool) {
        if (const auto* v = vectors.get(l.name)) {
            candidates.push_back({l, *v});
        }
    }
    if (query == nullptr || candidates.empty()) {
        log::warn("weak mapping of '" + predicted.qualified() + "' cannot compare embeddings; using the first " +
                  std::string(to_string(group)) + " label");
        out.mapped_label = pool.front();
        return out;
    }
    const auto best = nearest_label(*query, candidates);
    out.mapped_label = candidates[best.index].label;
    out.score = best.similarity;
    return out;
}

/// Inventory of a held-out dataset as label ids (global_index is the inventory position).
inline std::vector<LabelId> held_out_inventory(const DatasetDescriptor& d) {
    std::vector<LabelId> out;
    for (std::size_t i = 0; i < d.labels.size(); ++i) {
        out.push_back(LabelId{d.name, d.labels[i], i});
    }
    return out;
}

struct OODOptions {
    MappingKind strategy{MappingKind::Weak};
    std::optional<std::string> restrict_to;
};

/// Predicts every example of the held-out dataset. Hard mapping expects a model trained on meta
/// groups; weak and soft mapping need `vectors`.
inline std::vector<OODPrediction> predict_ood(MoLEModel& model, const std::vector<const StanceExample*>& examples,
                                              const DatasetDescriptor& held_out, const GroupTable& groups,
                                              const OODOptions& options, LabelVectorCache* vectors = nullptr) {
    if (model.label_space().contains_dataset(held_out.name)) {
        throw InvalidArgument("the model was trained on the held-out dataset '" + held_out.name + "'");
    }
    if (options.strategy != MappingKind::Hard && vectors == nullptr) {
        throw InvalidArgument(std::string(to_string(options.strategy)) + " mapping needs an embedding table");
    }
    const auto inventory = held_out_inventory(held_out);
    std::vector<OODPrediction> out;
    out.reserve(examples.size());
    for (const auto* e : examples) {
        const auto predicted = predict_in_domain(model, *e, options.restrict_to);
        OODPrediction p;
        switch (options.strategy) {
            case MappingKind::Hard:
                p.in_domain_label = predicted.name;
                p.mapped_label = hard_map(parse_hard_group(predicted.name), inventory, groups);
                p.strategy = MappingKind::Hard;
                break;
            case MappingKind::Weak: p = weak_map(predicted, inventory, *vectors, groups); break;
            case MappingKind::Soft: p = soft_map(predicted, inventory, *vectors); break;
        }
        p.id = e->id;
        out.push_back(std::move(p));
    }
    return out;
}

inline io::json to_json(const OODPrediction& p) {
    return {{"id", p.id},
            {"in_domain_label", p.in_domain_label},
            {"mapped_label", p.mapped_label.name},
            {"dataset", p.mapped_label.dataset},
            {"strategy", to_string(p.strategy)},
            {"score", p.score ? io::json(*p.score) : io::json(nullptr)}};
}

inline void write_predictions(const std::filesystem::path& path, const std::vector<OODPrediction>& predictions) {
    std::vector<io::json> rows;
    rows.reserve(predictions.size());
    for (const auto& p : predictions) {
        rows.push_back(to_json(p));
    }
    io::write_jsonl_atomic(path, rows);
}

/// Prediction rows as id -> mapped label name (enough for scoring without a model).
inline std::map<std::string, std::string> read_prediction_labels(const std::filesystem::path& path) {
    std::map<std::string, std::string> out;
    io::for_each_jsonl(path, [&](const io::json& row, std::size_t line_no) {
        if (!row.contains("id") || !row.contains("mapped_label")) {
            throw SchemaViolation(path.string() + ":" + std::to_string(line_no) + ": missing id or mapped_label");
        }
        const auto id = row.at("id").get<std::string>();
        if (!out.emplace(id, row.at("mapped_label").get<std::string>()).second) {
            throw SchemaViolation(path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + id + "'");
        }
    });
    return out;
}

}  // namespace stance
