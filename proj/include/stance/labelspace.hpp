#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "io.hpp"

namespace stance {

/// Meta-groups of the hard label mapping.
enum class HardGroup { Positive, Negative, Discuss, Other, Neutral };

inline constexpr std::array kAllHardGroups{HardGroup::Positive, HardGroup::Negative, HardGroup::Discuss,
                                           HardGroup::Other, HardGroup::Neutral};

inline std::string_view to_string(HardGroup g) {
    switch (g) {
        case HardGroup::Positive: return "Positive";
        case HardGroup::Negative: return "Negative";
        case HardGroup::Discuss: return "Discuss";
        case HardGroup::Other: return "Other";
        case HardGroup::Neutral: return "Neutral";
    }
    return "?";
}

/// Lower-case label used when a dataset is relabelled with meta-groups.
inline std::string meta_label(HardGroup g) { return text::to_lower(to_string(g)); }

inline HardGroup parse_hard_group(std::string_view s) {
    const auto lowered = text::to_lower(s);
    for (HardGroup g : kAllHardGroups) {
        if (meta_label(g) == lowered) {
            return g;
        }
    }
    throw InvalidArgument("unknown hard group '" + std::string(s) + "'");
}

inline std::string qualify(std::string_view dataset, std::string_view name) {
    return std::string(dataset) + "__" + std::string(name);
}

/// Splits "dataset__name"; returns nullopt when there is no qualifier.
inline std::optional<std::pair<std::string, std::string>> split_qualified(std::string_view qualified) {
    const auto pos = qualified.find("__");
    if (pos == std::string_view::npos) {
        return std::nullopt;
    }
    return std::pair{std::string(qualified.substr(0, pos)), std::string(qualified.substr(pos + 2))};
}

struct LabelId {
    std::string dataset;
    std::string name;
    std::size_t global_index{0};

    [[nodiscard]] std::string qualified() const { return qualify(dataset, name); }
    friend bool operator==(const LabelId&, const LabelId&) = default;
};

/// Hard-group assignment of dataset-qualified labels plus the group neighbourhoods (closest
/// first).
class GroupTable {
public:
    static constexpr std::string_view kVersion = "groups-v1";

    GroupTable() = default;

    /// Table exactly as published: ibmcs__pro and semeval2016t6__none have no group.
    static GroupTable verbatim() {
        GroupTable t;
        const std::map<HardGroup, std::vector<std::string>> rows = {
            {HardGroup::Positive,
             {"arc__agree", "argmin__argument for", "emergent__for", "fnc1__agree", "iac1__pro", "mtsd__favor",
              "perspectrum__support", "poldeb__for", "rumor__endorse", "scd__for", "semeval2016t6__favor",
              "semeval2019t7__support", "snopes__agree", "vast__pro", "wtwt__support"}},
            {HardGroup::Negative,
             {"arc__disagree", "argmin__argument against", "emergent__against", "fnc1__disagree", "iac1__anti",
              "ibmcs__con", "mtsd__against", "perspectrum__undermine", "poldeb__against", "rumor__deny",
              "scd__against", "semeval2016t6__against", "semeval2019t7__deny", "snopes__refute", "vast__con",
              "wtwt__refute"}},
            {HardGroup::Discuss,
             {"arc__discuss", "emergent__observing", "fnc1__discuss", "rumor__question", "semeval2019t7__query",
              "wtwt__comment"}},
            {HardGroup::Other,
             {"arc__unrelated", "fnc1__unrelated", "iac1__other", "mtsd__none", "rumor__unrelated",
              "semeval2019t7__comment", "wtwt__unrelated"}},
            {HardGroup::Neutral, {"rumor__neutral", "vast__neutral"}},
        };
        for (const auto& [group, labels] : rows) {
            for (const auto& label : labels) {
                t.assign(label, group);
            }
        }
        t.neighbors_ = {
            {HardGroup::Positive, {HardGroup::Other, HardGroup::Neutral, HardGroup::Discuss, HardGroup::Negative}},
            {HardGroup::Other, {HardGroup::Neutral, HardGroup::Discuss, HardGroup::Positive, HardGroup::Negative}},
            {HardGroup::Neutral, {HardGroup::Discuss, HardGroup::Other, HardGroup::Positive, HardGroup::Negative}},
            {HardGroup::Discuss, {HardGroup::Neutral, HardGroup::Other, HardGroup::Negative, HardGroup::Positive}},
            {HardGroup::Negative, {HardGroup::Discuss, HardGroup::Neutral, HardGroup::Other, HardGroup::Positive}},
        };
        return t;
    }

    /// Published table made total over the built-in inventories: ibmcs__pro joins Positive
    /// (mirroring ibmcs__con) and semeval2016t6__none joins Other (mirroring mtsd__none).
    static GroupTable repaired() {
        auto t = verbatim();
        t.assign("ibmcs__pro", HardGroup::Positive);
        t.assign("semeval2016t6__none", HardGroup::Other);
        return t;
    }

    /// Assigns (or reassigns) a qualified label to a group.
    void assign(const std::string& qualified_label, HardGroup group) { groups_[qualified_label] = group; }

    void set_neighborhood(HardGroup group, std::vector<HardGroup> neighbors) {
        validate_neighborhood(group, neighbors);
        neighbors_[group] = std::move(neighbors);
    }

    [[nodiscard]] std::optional<HardGroup> find(std::string_view qualified_label) const {
        if (const auto it = groups_.find(std::string(qualified_label)); it != groups_.end()) {
            return it->second;
        }
        return std::nullopt;
    }

    [[nodiscard]] HardGroup group_of(std::string_view qualified_label) const {
        if (auto g = find(qualified_label)) {
            return *g;
        }
        throw UnmappedLabel("label '" + std::string(qualified_label) + "' has no hard group");
    }

    [[nodiscard]] const std::vector<HardGroup>& neighborhood(HardGroup group) const {
        if (const auto it = neighbors_.find(group); it != neighbors_.end()) {
            return it->second;
        }
        throw InvalidArgument("no neighbourhood defined for group '" + std::string(to_string(group)) + "'");
    }

    [[nodiscard]] const std::map<std::string, HardGroup>& assignments() const { return groups_; }
    [[nodiscard]] const std::map<HardGroup, std::vector<HardGroup>>& neighborhoods() const { return neighbors_; }

    /// JSON-lines: a version line, one {"label","group"} line per assignment and one
    /// {"group","neighbors"} line per neighbourhood.
    void save(const std::filesystem::path& path) const {
        std::vector<io::json> rows;
        rows.push_back({{"kind", "version"}, {"version", kVersion}});
        for (HardGroup g : kAllHardGroups) {
            for (const auto& [label, group] : groups_) {
                if (group == g) {
                    rows.push_back({{"kind", "group"}, {"label", label}, {"group", to_string(group)}});
                }
            }
        }
        for (const auto& [group, neighbors] : neighbors_) {
            std::vector<std::string> names;
            for (auto n : neighbors) {
                names.emplace_back(to_string(n));
            }
            rows.push_back({{"kind", "neighborhood"}, {"group", to_string(group)}, {"neighbors", names}});
        }
        io::write_jsonl_atomic(path, rows);
    }

    static GroupTable load(const std::filesystem::path& path) {
        GroupTable t;
        io::for_each_jsonl(path, [&](const io::json& row, std::size_t line) {
            try {
                const auto kind = row.at("kind").get<std::string>();
                if (kind == "group") {
                    t.assign(row.at("label").get<std::string>(), parse_hard_group(row.at("group").get<std::string>()));
                } else if (kind == "neighborhood") {
                    std::vector<HardGroup> neighbors;
                    for (const auto& n : row.at("neighbors")) {
                        neighbors.push_back(parse_hard_group(n.get<std::string>()));
                    }
                    t.set_neighborhood(parse_hard_group(row.at("group").get<std::string>()), std::move(neighbors));
                } else if (kind != "version") {
                    throw SchemaViolation("unknown row kind '" + kind + "'");
                }
            } catch (const std::exception& e) {
                throw SchemaViolation(path.string() + ":" + std::to_string(line) + ": " + e.what());
            }
        });
        return t;
    }

private:
    static void validate_neighborhood(HardGroup group, const std::vector<HardGroup>& neighbors) {
        std::set<HardGroup> seen(neighbors.begin(), neighbors.end());
        if (seen.size() != neighbors.size() || seen.contains(group) || seen.size() != kAllHardGroups.size() - 1) {
            throw InvalidArgument("neighbourhood of '" + std::string(to_string(group)) +
                                  "' must list every other group exactly once");
        }
    }

    std::map<std::string, HardGroup> groups_;
    std::map<HardGroup, std::vector<HardGroup>> neighbors_;
};

using Mask = std::vector<bool>;

/// Global index over dataset-qualified labels with one visibility mask per dataset.
/// Immutable after construction.
class LabelSpace {
public:
    LabelSpace() = default;

    LabelSpace(std::vector<LabelId> labels, std::vector<std::string> datasets, GroupTable groups)
        : labels_(std::move(labels)), datasets_(std::move(datasets)), groups_(std::move(groups)) {
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i].global_index != i) {
                throw InvalidArgument("label indices must be 0..M-1 in order");
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return labels_.size(); }
    [[nodiscard]] const std::vector<LabelId>& labels() const { return labels_; }
    [[nodiscard]] const LabelId& label(std::size_t index) const { return labels_.at(index); }
    [[nodiscard]] const std::vector<std::string>& datasets() const { return datasets_; }
    [[nodiscard]] const GroupTable& groups() const { return groups_; }

    [[nodiscard]] bool contains_dataset(std::string_view dataset) const {
        return std::find(datasets_.begin(), datasets_.end(), dataset) != datasets_.end();
    }

    [[nodiscard]] std::size_t dataset_index(std::string_view dataset) const {
        const auto it = std::find(datasets_.begin(), datasets_.end(), dataset);
        if (it == datasets_.end()) {
            throw DatasetNotFound("dataset '" + std::string(dataset) + "' is not part of the label space");
        }
        return static_cast<std::size_t>(it - datasets_.begin());
    }

    [[nodiscard]] const LabelId& find(std::string_view dataset, std::string_view name) const {
        for (const auto& l : labels_) {
            if (l.dataset == dataset && l.name == name) {
                return l;
            }
        }
        throw InvalidArgument("label '" + qualify(dataset, name) + "' is not in the label space");
    }

    [[nodiscard]] std::vector<LabelId> labels_of(std::string_view dataset) const {
        (void)dataset_index(dataset);
        std::vector<LabelId> out;
        for (const auto& l : labels_) {
            if (l.dataset == dataset) {
                out.push_back(l);
            }
        }
        return out;
    }

    [[nodiscard]] Mask mask_for(std::string_view dataset) const {
        (void)dataset_index(dataset);
        Mask mask(labels_.size(), false);
        for (const auto& l : labels_) {
            mask[l.global_index] = (l.dataset == dataset);
        }
        return mask;
    }

    /// Union of the masks of every dataset in the space.
    [[nodiscard]] Mask union_mask() const { return Mask(labels_.size(), true); }

    [[nodiscard]] HardGroup hard_group_of(const LabelId& label) const { return groups_.group_of(label.qualified()); }

    [[nodiscard]] const std::vector<HardGroup>& neighborhood_of(HardGroup group) const {
        return groups_.neighborhood(group);
    }

    /// Identifies the label ordering; checkpoints store it to stay interpretable.
    [[nodiscard]] std::string version() const {
        std::uint64_t hash = 1469598103934665603ULL;
        for (const auto& l : labels_) {
            for (char c : l.qualified() + "|") {
                hash ^= static_cast<unsigned char>(c);
                hash *= 1099511628211ULL;
            }
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
        return "labels-v1-" + std::to_string(labels_.size()) + "-" + buf;
    }

private:
    std::vector<LabelId> labels_;
    std::vector<std::string> datasets_;
    GroupTable groups_;
};

/// Datasets are ordered as in the built-in registry (unknown datasets keep their relative
/// order after the known ones); labels follow descriptor order.
inline LabelSpace build_label_space(std::vector<DatasetDescriptor> descriptors,
                                    GroupTable groups = GroupTable::repaired()) {
    const auto& builtin = Registry::builtin();
    std::stable_sort(descriptors.begin(), descriptors.end(), [&](const auto& a, const auto& b) {
        const auto ia = builtin.index_of(a.name).value_or(builtin.descriptors().size());
        const auto ib = builtin.index_of(b.name).value_or(builtin.descriptors().size());
        return ia < ib;
    });
    std::vector<LabelId> labels;
    std::vector<std::string> datasets;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& d : descriptors) {
        if (std::find(datasets.begin(), datasets.end(), d.name) == datasets.end()) {
            datasets.push_back(d.name);
        }
        for (const auto& name : d.labels) {
            if (!seen.emplace(d.name, name).second) {
                throw InvalidArgument("duplicate label '" + qualify(d.name, name) + "'");
            }
            labels.push_back(LabelId{d.name, name, labels.size()});
        }
    }
    return LabelSpace(std::move(labels), std::move(datasets), std::move(groups));
}

/// Replaces every label with its meta-group name ("positive", "negative", ...).
inline std::vector<StanceExample> meta_relabel(const std::vector<StanceExample>& examples, const LabelSpace& space) {
    std::vector<StanceExample> out;
    out.reserve(examples.size());
    for (const auto& e : examples) {
        auto copy = e;
        copy.label = meta_label(space.groups().group_of(qualify(e.dataset, e.label)));
        out.push_back(std::move(copy));
    }
    return out;
}

/// Descriptor whose inventory is the set of meta-groups its labels map to (group order).
inline DatasetDescriptor meta_descriptor(const DatasetDescriptor& d, const GroupTable& groups) {
    std::set<HardGroup> present;
    for (const auto& label : d.labels) {
        present.insert(groups.group_of(qualify(d.name, label)));
    }
    auto out = d;
    out.labels.clear();
    for (HardGroup g : kAllHardGroups) {
        if (present.contains(g)) {
            out.labels.push_back(meta_label(g));
        }
    }
    return out;
}

/// Relabels a whole corpus with meta-groups (the training input of the hard-mapping variant).
inline Corpus meta_relabel(const Corpus& corpus, const LabelSpace& space) {
    std::vector<Dataset> out;
    for (const auto& d : corpus.datasets()) {
        out.push_back(Dataset{meta_descriptor(d.descriptor, space.groups()), meta_relabel(d.examples, space)});
    }
    return Corpus(std::move(out));
}

}  // namespace stance
