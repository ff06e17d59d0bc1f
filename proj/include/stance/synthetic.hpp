#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "corpus.hpp"
#include "label_embeddings.hpp"
#include "labelspace.hpp"

// Small separable multi-dataset stance corpus: every label expresses one of six concepts, each
// concept is signalled by its own cue words (shared across datasets), and every dataset names
// its labels differently. Used for end-to-end and mapping checks without real data.
namespace stance::synthetic {

enum class Concept { Agree, Disagree, Discuss, Unrelated, Comment, Neutral };
inline constexpr std::size_t kConceptCount = 6;

inline HardGroup group_of(Concept c) {
    switch (c) {
        case Concept::Agree: return HardGroup::Positive;
        case Concept::Disagree: return HardGroup::Negative;
        case Concept::Discuss: return HardGroup::Discuss;
        case Concept::Unrelated:
        case Concept::Comment: return HardGroup::Other;
        case Concept::Neutral: return HardGroup::Neutral;
    }
    return HardGroup::Other;
}

inline const std::vector<std::string>& cue_words(Concept c) {
    static const std::array<std::vector<std::string>, kConceptCount> cues = {{
        {"great", "correct", "exactly"},
        {"wrong", "false", "nonsense"},
        {"maybe", "wonder", "reportedly"},
        {"weather", "recipe", "football"},
        {"lol", "anyway", "btw"},
        {"both", "balanced", "undecided"},
    }};
    return cues[static_cast<std::size_t>(c)];
}

inline const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words = {
        "people", "said", "today", "this", "thing", "news", "story", "post", "week", "city", "report", "claim",
        "government", "company", "deal", "market", "school", "health", "game", "night", "public", "plan",
        "new", "time", "year", "group", "world", "water", "money", "energy", "law", "court"};
    return words;
}

inline const std::vector<std::string>& topics() {
    static const std::vector<std::string> words = {"tax reform", "climate policy", "vaccines", "the merger",
                                                   "school uniforms", "nuclear power", "gun control", "the election"};
    return words;
}

struct SyntheticLabel {
    std::string name;
    Concept meaning;
};

struct SyntheticDataset {
    std::string name;
    SourceGroup group;
    std::vector<SyntheticLabel> labels;
};

/// Eight datasets, two per source group. "syn_various_b" has two labels in the Other group
/// (offtopic, chatter), so group-level mapping alone cannot separate them.
inline const std::vector<SyntheticDataset>& suite() {
    static const std::vector<SyntheticDataset> s = {
        {"syn_debates_a", SourceGroup::Debates, {{"pro", Concept::Agree}, {"con", Concept::Disagree}}},
        {"syn_debates_b", SourceGroup::Debates,
         {{"favor", Concept::Agree}, {"against", Concept::Disagree}, {"none", Concept::Unrelated}}},
        {"syn_news_a", SourceGroup::News,
         {{"agree", Concept::Agree}, {"disagree", Concept::Disagree}, {"discuss", Concept::Discuss},
          {"unrelated", Concept::Unrelated}}},
        {"syn_news_b", SourceGroup::News,
         {{"support", Concept::Agree}, {"refute", Concept::Disagree}, {"observing", Concept::Discuss}}},
        {"syn_social_a", SourceGroup::SocialMedia,
         {{"endorse", Concept::Agree}, {"deny", Concept::Disagree}, {"question", Concept::Discuss},
          {"comment", Concept::Comment}}},
        {"syn_social_b", SourceGroup::SocialMedia,
         {{"for", Concept::Agree}, {"against", Concept::Disagree}, {"neutral", Concept::Neutral}}},
        {"syn_various_a", SourceGroup::Various,
         {{"yes", Concept::Agree}, {"no", Concept::Disagree}, {"banter", Concept::Comment}, {"mixed", Concept::Neutral}}},
        {"syn_various_b", SourceGroup::Various,
         {{"backing", Concept::Agree}, {"opposing", Concept::Disagree}, {"offtopic", Concept::Unrelated},
          {"chatter", Concept::Comment}}},
    };
    return s;
}

inline std::vector<std::string> dataset_names() {
    std::vector<std::string> out;
    for (const auto& d : suite()) {
        out.push_back(d.name);
    }
    return out;
}

inline DatasetDescriptor descriptor(const SyntheticDataset& d) {
    DatasetDescriptor out;
    out.name = d.name;
    out.source_group = d.group;
    out.target_kind = TargetKind::Topic;
    out.context_kind = ContextKind::Post;
    for (const auto& l : d.labels) {
        out.labels.push_back(l.name);
    }
    return out;
}

/// Repaired published groups plus every synthetic label.
inline GroupTable group_table() {
    auto t = GroupTable::repaired();
    for (const auto& d : suite()) {
        for (const auto& l : d.labels) {
            t.assign(qualify(d.name, l.name), group_of(l.meaning));
        }
    }
    return t;
}

struct SuiteOptions {
    std::size_t train_per_dataset{96};
    std::size_t dev_per_dataset{24};
    std::size_t test_per_dataset{24};
    std::uint64_t seed{7};
};

/// Labels cycle through the inventory (balanced); each context is 4-8 filler words with one cue
/// word of the label's concept at a random position.
inline Corpus make_corpus(const SuiteOptions& options = {}) {
    std::mt19937_64 rng(options.seed);
    const auto& fillers = filler_words();
    std::uniform_int_distribution<std::size_t> filler_pick(0, fillers.size() - 1);
    std::uniform_int_distribution<std::size_t> topic_pick(0, topics().size() - 1);
    std::uniform_int_distribution<int> length_pick(4, 8);
    std::vector<Dataset> datasets;
    for (const auto& spec : suite()) {
        Dataset d{descriptor(spec), {}};
        std::size_t serial = 0;
        for (const auto& [split, count] : {std::pair{Split::Train, options.train_per_dataset},
                                           std::pair{Split::Dev, options.dev_per_dataset},
                                           std::pair{Split::Test, options.test_per_dataset}}) {
            for (std::size_t i = 0; i < count; ++i) {
                const auto& label = spec.labels[i % spec.labels.size()];
                const auto& cues = cue_words(label.meaning);
                std::vector<std::string> words;
                const int n = length_pick(rng);
                for (int k = 0; k < n; ++k) {
                    words.push_back(fillers[filler_pick(rng)]);
                }
                std::uniform_int_distribution<std::size_t> pos(0, words.size());
                std::uniform_int_distribution<std::size_t> cue(0, cues.size() - 1);
                words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos(rng)), cues[cue(rng)]);
                std::string context;
                for (const auto& w : words) {
                    context += (context.empty() ? "" : " ") + w;
                }
                d.examples.push_back(StanceExample{spec.name + "-" + std::to_string(serial++), spec.name, split,
                                                   topics()[topic_pick(rng)], context, label.name});
            }
        }
        datasets.push_back(std::move(d));
    }
    return Corpus(std::move(datasets));
}

/// Label-name vectors: a concept axis, a hard-group axis at half weight, and small noise, so
/// both group membership and the concept inside a group are recoverable by cosine similarity.
inline EmbeddingTable label_embeddings(std::uint64_t seed = 11, double noise = 0.05) {
    constexpr Eigen::Index kGroups = 5;
    constexpr Eigen::Index kExtra = 3;
    const Eigen::Index dim = static_cast<Eigen::Index>(kConceptCount) + kGroups + kExtra;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise);
    std::unordered_map<std::string, Eigen::VectorXd> vocab;
    for (const auto& d : suite()) {
        for (const auto& l : d.labels) {
            if (vocab.contains(l.name)) {
                continue;
            }
            Eigen::VectorXd v(dim);
            for (Eigen::Index i = 0; i < dim; ++i) {
                v(i) = gauss(rng);
            }
            v(static_cast<Eigen::Index>(l.meaning)) += 1.0;
            v(static_cast<Eigen::Index>(kConceptCount) + static_cast<Eigen::Index>(group_of(l.meaning))) += 0.5;
            vocab.emplace(l.name, std::move(v));
        }
    }
    return EmbeddingTable(std::move(vocab), static_cast<std::size_t>(dim));
}

}  // namespace stance::synthetic
