#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "published_tables.hpp"
#include "stance/labelspace.hpp"
#include "test_util.hpp"

using namespace stance;
using stance::testing::TempDir;

namespace {
LabelSpace full_space(GroupTable groups = GroupTable::repaired()) {
    return build_label_space(Registry::builtin().descriptors(), std::move(groups));
}
}  // namespace

TEST(HardGroup, ParseAndMetaLabel) {
    for (auto g : kAllHardGroups) {
        EXPECT_EQ(parse_hard_group(to_string(g)), g);
        EXPECT_EQ(parse_hard_group(meta_label(g)), g);
    }
    EXPECT_EQ(meta_label(HardGroup::Negative), "negative");
    EXPECT_ANY_THROW(parse_hard_group("sideways"));
}

TEST(Qualify, RoundTripKeepsMultiWordNames) {
    EXPECT_EQ(qualify("argmin", "argument for"), "argmin__argument for");
    const auto parts = split_qualified("argmin__argument for");
    ASSERT_TRUE(parts);
    EXPECT_EQ(parts->first, "argmin");
    EXPECT_EQ(parts->second, "argument for");
    EXPECT_FALSE(split_qualified("plain"));
}

TEST(LabelSpace, FullRegistryHas48Labels) {
    const auto space = full_space();
    EXPECT_EQ(space.size(), 48u);
    EXPECT_EQ(space.datasets().size(), 16u);
    for (std::size_t i = 0; i < space.size(); ++i) {
        EXPECT_EQ(space.label(i).global_index, i);
    }
    EXPECT_EQ(space.label(0).qualified(), "arc__unrelated");
}

TEST(LabelSpace, MasksPartitionTheIndex) {
    const auto space = full_space();
    std::vector<int> cover(space.size(), 0);
    for (const auto& d : space.datasets()) {
        const auto m = space.mask_for(d);
        ASSERT_EQ(m.size(), space.size());
        std::size_t on = 0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            cover[i] += m[i] ? 1 : 0;
            on += m[i] ? 1 : 0;
        }
        EXPECT_EQ(on, Registry::builtin().at(d).labels.size()) << d;
    }
    EXPECT_TRUE(std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; }));
    const auto fnc1 = space.mask_for("fnc1");
    EXPECT_EQ(std::count(fnc1.begin(), fnc1.end(), true), 4);
}

TEST(LabelSpace, SingleDatasetMaskIsAllTrue) {
    const auto space = build_label_space({Registry::builtin().at("perspectrum")});
    EXPECT_EQ(space.size(), 2u);
    const auto m = space.mask_for("perspectrum");
    EXPECT_TRUE(std::all_of(m.begin(), m.end(), [](bool b) { return b; }));
}

TEST(LabelSpace, SharedNamesStayDistinct) {
    const auto space = build_label_space({Registry::builtin().at("poldeb"), Registry::builtin().at("scd")});
    const auto& a = space.find("poldeb", "for");
    const auto& b = space.find("scd", "for");
    EXPECT_NE(a.global_index, b.global_index);
}

TEST(LabelSpace, AbsentDatasetAndDuplicates) {
    auto descriptors = Registry::builtin().descriptors();
    std::erase_if(descriptors, [](const auto& d) { return d.name == "wtwt"; });
    const auto space = build_label_space(descriptors);
    EXPECT_THROW((void)space.mask_for("wtwt"), DatasetNotFound);
    auto dup = Registry::builtin().at("scd");
    EXPECT_THROW(build_label_space({dup, dup}), InvalidArgument);
}

TEST(LabelSpace, OrderIsRegistryOrderRegardlessOfInput) {
    auto reversed = Registry::builtin().descriptors();
    std::reverse(reversed.begin(), reversed.end());
    EXPECT_EQ(build_label_space(reversed).version(), full_space().version());
    EXPECT_NE(build_label_space({Registry::builtin().at("scd")}).version(), full_space().version());
}

TEST(GroupTable, VerbatimMatchesPublishedTable) {
    const auto t = GroupTable::verbatim();
    std::size_t total = 0;
    for (const auto& [group, labels] : stance::testing::published_groups()) {
        for (const auto& l : labels) {
            EXPECT_EQ(to_string(t.group_of(l)), group) << l;
            ++total;
        }
    }
    EXPECT_EQ(t.assignments().size(), total);
    for (const auto& [group, neighbors] : stance::testing::published_neighborhoods()) {
        std::vector<std::string> got;
        for (auto g : t.neighborhood(parse_hard_group(group))) got.emplace_back(to_string(g));
        EXPECT_EQ(got, neighbors) << group;
    }
}

TEST(GroupTable, PublishedExamples) {
    const auto space = full_space();
    EXPECT_EQ(space.hard_group_of(space.find("snopes", "agree")), HardGroup::Positive);
    EXPECT_EQ(space.hard_group_of(space.find("semeval2019t7", "comment")), HardGroup::Other);
    EXPECT_EQ(space.neighborhood_of(HardGroup::Discuss),
              (std::vector{HardGroup::Neutral, HardGroup::Other, HardGroup::Negative, HardGroup::Positive}));
}

TEST(GroupTable, IbmcsProDependsOnRepair) {
    EXPECT_THROW((void)GroupTable::verbatim().group_of("ibmcs__pro"), UnmappedLabel);
    EXPECT_EQ(GroupTable::repaired().group_of("ibmcs__pro"), HardGroup::Positive);
    EXPECT_EQ(GroupTable::repaired().group_of("semeval2016t6__none"), HardGroup::Other);
}

TEST(GroupTable, RepairedIsTotalOverRegistry) {
    const auto space = full_space();
    for (const auto& l : space.labels()) {
        EXPECT_NO_THROW((void)space.hard_group_of(l)) << l.qualified();
    }
}

TEST(GroupTable, NeighborhoodsArePermutationsOfOtherGroups) {
    const auto t = GroupTable::repaired();
    for (auto g : kAllHardGroups) {
        const auto& n = t.neighborhood(g);
        EXPECT_EQ(n.size(), kAllHardGroups.size() - 1);
        EXPECT_EQ(std::count(n.begin(), n.end(), g), 0);
        EXPECT_EQ(std::set<HardGroup>(n.begin(), n.end()).size(), n.size());
    }
    GroupTable custom;
    EXPECT_THROW(custom.set_neighborhood(HardGroup::Positive, {HardGroup::Positive}), InvalidArgument);
}

TEST(GroupTable, SaveLoadRoundTrip) {
    TempDir tmp;
    const auto t = GroupTable::repaired();
    t.save(tmp.path() / "groups.jsonl");
    const auto loaded = GroupTable::load(tmp.path() / "groups.jsonl");
    EXPECT_EQ(loaded.assignments(), t.assignments());
    EXPECT_EQ(loaded.neighborhoods(), t.neighborhoods());
}

TEST(MetaRelabel, GroupsReplaceLabels) {
    const auto space = full_space();
    const std::vector<StanceExample> in = {{"1", "snopes", Split::Train, "t", "c", "refute"}};
    EXPECT_EQ(meta_relabel(in, space).front().label, "negative");
    const auto again = meta_relabel(in, space);
    EXPECT_THROW(meta_relabel(again, space), UnmappedLabel);
}

TEST(MetaRelabel, FullCorpusYieldsFiveGroups) {
    std::vector<Dataset> datasets;
    for (const auto& d : Registry::builtin().descriptors()) {
        Dataset ds{d, {}};
        for (std::size_t i = 0; i < d.labels.size(); ++i) {
            ds.examples.push_back({d.name + std::to_string(i), d.name, Split::Train, "t", "c", d.labels[i]});
        }
        datasets.push_back(std::move(ds));
    }
    const Corpus corpus(std::move(datasets));
    const auto relabelled = meta_relabel(corpus, full_space());
    std::set<std::string> labels;
    for (const auto& d : relabelled.datasets()) {
        for (const auto& e : d.examples) {
            labels.insert(e.label);
            EXPECT_TRUE(d.descriptor.has_label(e.label));
        }
    }
    EXPECT_EQ(labels.size(), 5u);
    EXPECT_EQ(relabelled.at("perspectrum").descriptor.labels, (std::vector<std::string>{"positive", "negative"}));
    EXPECT_THROW(meta_relabel(corpus, full_space(GroupTable::verbatim())), UnmappedLabel);
}
