#include <random>

#include <gtest/gtest.h>

#include "stance/model.hpp"
#include "test_util.hpp"

using namespace stance;
using stance::testing::TempDir;

namespace {

MoLEModel make_model(const std::vector<DatasetDescriptor>& descriptors, ModelOptions options = {}) {
    options.encoder.hidden_size = 8;
    options.encoder.heads = 2;
    options.encoder.ffn_size = 16;
    options.encoder.layers = 1;
    options.encoder.max_length = 16;
    Vocabulary vocab({"alpha", "beta", "gamma", "claim"}, false);
    return MoLEModel(options, std::move(vocab), build_label_space(descriptors), descriptors);
}

const std::vector<DatasetDescriptor>& all_descriptors() { return Registry::builtin().descriptors(); }

}  // namespace

TEST(EncoderConfig, Validation) {
    EncoderConfig c;
    EXPECT_NO_THROW(c.validate());
    c.encoder_id = "roberta-base";
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.max_length = 3;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = {};
    c.heads = 3;
    EXPECT_THROW(c.validate(), InvalidArgument);
    EXPECT_EQ(encoder_config_from_json(to_json(EncoderConfig{})).hidden_size, 32);
}

TEST(Vocabulary, BuildsFromTrainingSplitOnly) {
    const DatasetDescriptor d{"toy", SourceGroup::News, TargetKind::Topic, ContextKind::Post, {"a", "b"}, std::nullopt};
    const Corpus corpus({Dataset{d,
                                 {{"1", "toy", Split::Train, "Topic", "seen words", "a"},
                                  {"2", "toy", Split::Test, "Topic", "hidden", "b"}}}});
    const auto vocab = Vocabulary::build(corpus, false);
    EXPECT_EQ(vocab.size(), 4u + 3u);
    EXPECT_EQ(vocab.encode("hidden"), std::vector<int>{Vocabulary::kUnk});
    EXPECT_NE(vocab.encode("seen").front(), Vocabulary::kUnk);
    const auto lower = Vocabulary::build(corpus, true);
    EXPECT_NE(lower.encode("TOPIC").front(), Vocabulary::kUnk);
}

TEST(Truncation, LongestFirst) {
    std::vector<int> ctx(150, 7), tgt(30, 8);
    truncate_longest_first(ctx, tgt, 97);
    EXPECT_EQ(ctx.size(), 67u);
    EXPECT_EQ(tgt.size(), 30u);
    std::vector<int> a(3), b(2);
    truncate_longest_first(a, b, 10);
    EXPECT_EQ(a.size() + b.size(), 5u);
    std::vector<int> c(5), e(5);
    truncate_longest_first(c, e, 9);
    EXPECT_EQ(c.size(), 5u);
    EXPECT_EQ(e.size(), 4u);
}

TEST(EncodePair, LayoutAndSegments) {
    const Vocabulary vocab({"alpha", "beta"}, false);
    const auto p = encode_pair("alpha beta", "beta", vocab, 16);
    EXPECT_EQ(p.ids.front(), Vocabulary::kCls);
    EXPECT_EQ(p.ids.size(), 6u);
    EXPECT_EQ(p.segments, (std::vector<int>{0, 0, 0, 0, 1, 1}));
    const auto implicit = encode_pair("alpha", "", vocab, 16);
    EXPECT_EQ(implicit.ids, (std::vector<int>{Vocabulary::kCls, 4, Vocabulary::kSep, Vocabulary::kSep}));
    EXPECT_THROW(encode_pair("", "beta", vocab, 16), InvalidArgument);
    const auto clipped = encode_pair("alpha alpha alpha alpha alpha", "beta beta", vocab, 6);
    EXPECT_EQ(clipped.ids.size(), 6u);
}

TEST(LabelDistribution, Examples) {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::VectorXd h = (Eigen::VectorXd(2) << 10, 0).finished();
    const auto p = label_distribution(h, eye, {true, true});
    EXPECT_NEAR(p(0), 1.0 / (1.0 + std::exp(-10.0)), 1e-15);
    EXPECT_NEAR(p(0), 0.99995, 1e-5);
    const auto one = label_distribution(h, eye, {false, true});
    EXPECT_EQ(one(1), 1.0);
    EXPECT_EQ(one(0), 0.0);
    EXPECT_THROW(label_distribution(h, eye, {false, false}), InvalidArgument);
}

TEST(LabelDistribution, ShiftInvariance) {
    Eigen::MatrixXd l(3, 2);
    l << 1, 0, 0, 1, 1, 1;
    const Eigen::VectorXd h = (Eigen::VectorXd(2) << 0.3, -0.7).finished();
    // Adding the same vector to every row shifts every logit by the same constant.
    Eigen::MatrixXd shifted = l;
    shifted.col(0).array() += 2.0;  // + 2 * h(0) for every label
    const auto a = label_distribution(h, l, {true, true, true});
    const auto b = label_distribution(h, shifted, {true, true, true});
    EXPECT_TRUE(a.isApprox(b, 1e-12));
}

TEST(CombineMoe, ArithmeticMean) {
    const Eigen::VectorXd p1 = (Eigen::VectorXd(2) << 0.2, 0.8).finished();
    const Eigen::VectorXd p2 = (Eigen::VectorXd(2) << 0.4, 0.6).finished();
    const Eigen::VectorXd pg = (Eigen::VectorXd(2) << 0.6, 0.4).finished();
    EXPECT_TRUE(combine_moe({p1, p2}, pg).isApprox((Eigen::VectorXd(2) << 0.4, 0.6).finished(), 1e-15));
    EXPECT_TRUE(combine_moe({pg, pg}, pg).isApprox(pg, 1e-15));
    const Eigen::VectorXd other = (Eigen::VectorXd(2) << 1.0, 0.0).finished();
    EXPECT_THROW(combine_moe({other}, pg), InvalidArgument);
}

TEST(CombineMoe, MaskDefinesSupport) {
    // An in-mask probability that underflowed to zero is still on the support.
    const Mask mask{true, true, false};
    const Eigen::VectorXd under = (Eigen::VectorXd(3) << 1.0, 0.0, 0.0).finished();
    const Eigen::VectorXd pg = (Eigen::VectorXd(3) << 0.5, 0.5, 0.0).finished();
    EXPECT_TRUE(combine_moe({under}, pg, &mask).isApprox((Eigen::VectorXd(3) << 0.75, 0.25, 0.0).finished(), 1e-15));
    const Eigen::VectorXd leak = (Eigen::VectorXd(3) << 0.5, 0.4, 0.1).finished();
    EXPECT_THROW(combine_moe({leak}, pg, &mask), InvalidArgument);
}

TEST(MoLEModel, OutputsAreMaskedDistributions) {
    auto model = make_model(all_descriptors());
    const auto pair = model.tokenize({"x", "fnc1", Split::Train, "claim", "alpha beta", "agree"});
    for (const auto& d : model.label_space().datasets()) {
        const auto mask = model.label_space().mask_for(d);
        const auto out = model.predict(pair, mask, model.domain_of(d));
        for (const auto* p : {&out.combined, &out.global_probs, &out.expert_probs[0], &out.expert_probs[3]}) {
            EXPECT_NEAR(p->sum(), 1.0, 1e-9);
            for (std::size_t j = 0; j < mask.size(); ++j) {
                if (!mask[j]) {
                    EXPECT_EQ((*p)(static_cast<Eigen::Index>(j)), 0.0);
                }
            }
        }
    }
}

TEST(MoLEModel, AddedLayersAndAdversaryShape) {
    auto model = make_model(all_descriptors());
    EXPECT_EQ(model.added_layer_names().size(), 5u);
    EXPECT_EQ(model.adversary_classes(), 16u);
    const auto pair = model.tokenize({"x", "fnc1", Split::Train, "claim", "alpha", "agree"});
    const auto out = model.predict(pair, model.label_space().union_mask());
    EXPECT_EQ(out.domain_logits.size(), 16);
    EXPECT_EQ(out.expert_pooled.rows(), 4);

    auto descriptors = all_descriptors();
    std::erase_if(descriptors, [](const auto& d) { return d.name == "emergent"; });
    EXPECT_EQ(make_model(descriptors).adversary_classes(), 15u);
    EXPECT_FALSE(make_model({Registry::builtin().at("scd")}).adversary_enabled());
}

TEST(MoLEModel, IdentityInitPassesEncoderThrough) {
    ModelOptions options;
    options.identity_init = true;
    auto model = make_model(all_descriptors(), options);
    const auto pair = model.tokenize({"x", "arc", Split::Train, "claim", "alpha gamma", "agree"});
    ag::Tape tape;
    const auto tokens = model.encode(tape, pair);
    const Eigen::RowVectorXd cls = tokens.value().row(0);
    for (std::size_t k = 0; k <= 4; ++k) {
        EXPECT_EQ(model.expert_forward(tape, tokens, k).value().row(0), cls) << k;
    }
    EXPECT_THROW(model.expert_forward(tape, tokens, 5), InvalidArgument);
}

TEST(MoLEModel, DistinctExpertsGiveDistinctOutputs) {
    auto model = make_model(all_descriptors());
    const auto pair = model.tokenize({"x", "arc", Split::Train, "claim", "alpha gamma", "agree"});
    const auto out = model.predict(pair, model.label_space().union_mask());
    EXPECT_FALSE(out.expert_pooled.row(0).isApprox(out.expert_pooled.row(1)));
}

TEST(MoLEModel, OwnExpertSetUsesOneExpert) {
    ModelOptions options;
    options.expert_set = ExpertSet::Own;
    auto model = make_model(all_descriptors(), options);
    const auto pair = model.tokenize({"x", "arc", Split::Train, "claim", "alpha", "agree"});
    const auto mask = model.label_space().mask_for("arc");
    const auto own = model.domain_of("arc");
    const auto out = model.predict(pair, mask, own);
    EXPECT_TRUE(out.combined.isApprox((out.expert_probs[own] + out.global_probs) / 2.0, 1e-14));
}

TEST(MoLEModel, CheckpointRoundTrip) {
    TempDir tmp;
    auto model = make_model(all_descriptors());
    model.save(tmp.path() / "model.json");
    auto loaded = MoLEModel::load(tmp.path() / "model.json");
    const StanceExample e{"x", "rumor", Split::Train, "claim", "beta gamma", "deny"};
    const auto mask = model.label_space().mask_for("rumor");
    EXPECT_EQ(model.predict(model.tokenize(e), mask).combined, loaded.predict(loaded.tokenize(e), mask).combined);
    EXPECT_EQ(loaded.label_space().version(), model.label_space().version());

    auto doc = model.to_json_doc();
    doc["label_space"]["version"] = "labels-v1-0-bogus";
    EXPECT_THROW(MoLEModel::from_json_doc(doc), SchemaViolation);
}

TEST(MoLEModel, DomainOfFollowsSourceGroup) {
    auto model = make_model(all_descriptors());
    EXPECT_EQ(model.domain_of("arc"), static_cast<std::size_t>(SourceGroup::Debates));
    EXPECT_EQ(model.domain_of("vast"), static_cast<std::size_t>(SourceGroup::Various));
    EXPECT_THROW((void)model.domain_of("nope"), DatasetNotFound);
}
