#include <gtest/gtest.h>

#include "stance/analysis.hpp"
#include "stance/synthetic.hpp"

using namespace stance;

namespace {

Dataset toy(const std::vector<std::tuple<Split, std::string, std::string, std::string>>& rows) {
    DatasetDescriptor d{"toy", SourceGroup::News, TargetKind::Claim, ContextKind::Article, {"pos", "neg", "meh"}, std::nullopt};
    Dataset out{d, {}};
    int i = 0;
    for (const auto& [split, target, context, label] : rows) {
        out.examples.push_back({"e" + std::to_string(i++), "toy", split, target, context, label});
    }
    return out;
}

}  // namespace

TEST(Tfidf, TokensDropStopwordsAndPunctuation) {
    EXPECT_EQ(tfidf_tokens("The Cat, and THE dog!"), (std::vector<std::string>{"cat", "dog"}));
}

TEST(Tfidf, VectorizerRowsAreUnitLength) {
    TfidfVectorizer v;
    v.fit({"red apple", "green apple", "red car"}, 10);
    EXPECT_EQ(v.size(), 4u);
    double norm = 0;
    for (const auto& [_, w] : v.transform("red apple apple", 0)) norm += w * w;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    EXPECT_TRUE(v.transform("unseen words", 0).empty());
    TfidfVectorizer capped;
    capped.fit({"red apple", "green apple", "red car"}, 2);
    EXPECT_EQ(capped.size(), 2u);
}

TEST(Tfidf, SeparableTrainEqualsTestScoresPerfectly) {
    std::vector<std::tuple<Split, std::string, std::string, std::string>> rows;
    for (int i = 0; i < 10; ++i) {
        for (auto split : {Split::Train, Split::Test}) {
            rows.emplace_back(split, "topic", "wonderful excellent " + std::to_string(i), "pos");
            rows.emplace_back(split, "topic", "terrible awful " + std::to_string(i), "neg");
            rows.emplace_back(split, "topic", "whatever shrug " + std::to_string(i), "meh");
        }
    }
    const auto d = toy(rows);
    const auto preds = tfidf_logreg_baseline(d);
    std::vector<std::string> golds;
    for (const auto* e : d.split(Split::Test)) golds.push_back(e->label);
    EXPECT_DOUBLE_EQ(macro_f1(preds, golds, d.descriptor.labels), 100.0);
}

TEST(Tfidf, IdenticalInputsWithDifferentLabelsCannotBeSeparated) {
    std::vector<std::tuple<Split, std::string, std::string, std::string>> rows;
    for (int i = 0; i < 6; ++i) {
        for (auto split : {Split::Train, Split::Test}) {
            rows.emplace_back(split, "same", "same words", i % 2 ? "pos" : "neg");
        }
    }
    const auto d = toy(rows);
    const auto preds = tfidf_logreg_baseline(d);
    std::vector<std::string> golds;
    for (const auto* e : d.split(Split::Test)) golds.push_back(e->label);
    EXPECT_LT(macro_f1(preds, golds, d.descriptor.labels), 100.0);
    EXPECT_TRUE(std::all_of(preds.begin(), preds.end(), [&](const auto& p) { return p == preds.front(); }));
}

TEST(Tfidf, SingleTrainingClass) {
    const auto d = toy({{Split::Train, "t", "a b", "meh"}, {Split::Test, "t", "c d", "pos"}});
    EXPECT_EQ(tfidf_logreg_baseline(d), std::vector<std::string>{"meh"});
}

TEST(Logistic, LearnsASeparatingDirection) {
    std::vector<Eigen::Triplet<double>> t;
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) {
        const double sign = i % 2 ? 1.0 : -1.0;
        t.emplace_back(i, 0, sign * (1.0 + i / 40.0));
        t.emplace_back(i, 1, 0.3);
        y(i) = sign;
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> x(40, 2);
    x.setFromTriplets(t.begin(), t.end());
    const auto w = fit_logistic(x, y, {});
    ASSERT_EQ(w.size(), 3);
    EXPECT_GT(w(0), 1.0);
    const Eigen::VectorXd margin = (x * w.head(2)).array() + w(2);
    for (int i = 0; i < 40; ++i) EXPECT_GT(margin(i) * y(i), 0.0);
}

TEST(Overlap, Percentages) {
    const auto d = toy({{Split::Train, "t1", "c1", "pos"},
                        {Split::Train, "t2", "c2", "neg"},
                        {Split::Test, "t1", "c2", "pos"},
                        {Split::Test, "t1", "c1", "pos"},
                        {Split::Test, "t9", "c9", "pos"},
                        {Split::Test, "t2", "c9", "pos"}});
    const auto o = split_overlap(d, Split::Test);
    EXPECT_DOUBLE_EQ(o.target, 75.0);
    EXPECT_DOUBLE_EQ(o.context, 50.0);
    EXPECT_DOUBLE_EQ(o.full, 25.0);
    const auto none = split_overlap(d, Split::Dev);
    EXPECT_EQ(none.target, 0.0);
}

TEST(Features, FixedOrderAndOneHot) {
    const auto d = toy({{Split::Train, "t1", "c1 c2", "pos"}, {Split::Dev, "t1", "c3", "neg"}, {Split::Test, "t2", "c1 c2", "meh"}});
    const auto f = dataset_features(d);
    const auto names = feature_names();
    ASSERT_EQ(f.features.size(), names.size());
    std::map<std::string, double> m(f.features.begin(), f.features.end());
    EXPECT_EQ(m.at("train_size"), 1.0);
    EXPECT_EQ(m.at("dev_target_overlap"), 100.0);
    EXPECT_EQ(m.at("test_context_overlap"), 100.0);
    EXPECT_EQ(m.at("group=" + std::string(to_string(SourceGroup::News))), 1.0);
    EXPECT_EQ(m.at("group=" + std::string(to_string(SourceGroup::Debates))), 0.0);
    EXPECT_EQ(m.at("unique_labels"), 3.0);
    double one_hot = 0;
    for (auto k : kAllContextKinds) one_hot += m.at("context=" + std::string(to_string(k)));
    EXPECT_EQ(one_hot, 1.0);
}

TEST(Correlation, PerFeatureAgainstScores) {
    std::vector<DatasetFeatureVector> fv;
    for (int i = 0; i < 4; ++i) {
        fv.push_back({"d" + std::to_string(i), {{"rising", i}, {"falling", -i}, {"flat", 1.0}}});
    }
    const auto r = pearson_correlation(fv, {10, 20, 30, 40});
    ASSERT_EQ(r.size(), 3u);
    EXPECT_NEAR(*r[0].r, 1.0, 1e-12);
    EXPECT_NEAR(*r[1].r, -1.0, 1e-12);
    EXPECT_FALSE(r[2].r.has_value());
    EXPECT_THROW(pearson_correlation(fv, {1, 2, 3}), InvalidArgument);
    fv.resize(2);
    EXPECT_THROW(pearson_correlation(fv, {1, 2}), InvalidArgument);
    EXPECT_NE(correlation_svg(r).find("<svg"), std::string::npos);
}

TEST(Scatter, PointsAndCentroids) {
    const auto corpus = synthetic::make_corpus({20, 4, 4, 3});
    // A deterministic encoder that separates datasets by name length and position.
    const PairEncoder encode = [](const StanceExample& e) {
        Eigen::VectorXd v(3);
        v << static_cast<double>(e.dataset.size()), static_cast<double>(e.context.size() % 7), static_cast<double>(e.dataset.back());
        return v;
    };
    const auto s = dataset_scatter_2d(corpus, encode, 64, 5);
    EXPECT_EQ(s.points.rows(), 64);
    EXPECT_EQ(s.points.cols(), 2);
    EXPECT_EQ(s.datasets.size(), 64u);
    for (const auto& [name, c] : s.centroids) {
        Eigen::Vector2d sum = Eigen::Vector2d::Zero();
        double n = 0;
        for (std::size_t i = 0; i < s.datasets.size(); ++i) {
            if (s.datasets[i] == name) {
                sum += s.points.row(static_cast<Eigen::Index>(i)).transpose();
                ++n;
            }
        }
        EXPECT_TRUE(c.isApprox(sum / n, 1e-12));
    }
    const auto svg = scatter_svg(s);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("syn_news_a"), std::string::npos);
}
