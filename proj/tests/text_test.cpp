#include <gtest/gtest.h>

#include "stance/text.hpp"

using namespace stance;

TEST(CasualTokenize, KeepsCaseAndSplitsPunctuation) {
    EXPECT_EQ(text::casual_tokenize("Hello, World!"), (std::vector<std::string>{"Hello", ",", "World", "!"}));
}

TEST(CasualTokenize, KeepsSocialMediaUnitsWhole) {
    const auto toks = text::casual_tokenize("@user loves #ClimateAction see https://t.co/x1?a=b now");
    EXPECT_EQ(toks, (std::vector<std::string>{"@user", "loves", "#ClimateAction", "see", "https://t.co/x1?a=b", "now"}));
}

TEST(CasualTokenize, InnerApostrophesHyphensAndDecimals) {
    EXPECT_EQ(text::casual_tokenize("don't well-known 3.14 end."),
              (std::vector<std::string>{"don't", "well-known", "3.14", "end", "."}));
}

TEST(CasualTokenize, EmptyAndWhitespaceOnly) {
    EXPECT_TRUE(text::casual_tokenize("").empty());
    EXPECT_TRUE(text::casual_tokenize(" \t\n ").empty());
}

TEST(SplitWhitespace, CollapsesRuns) {
    EXPECT_EQ(text::split_whitespace("  argument   for "), (std::vector<std::string>{"argument", "for"}));
}

TEST(Stopwords, CaseInsensitive) {
    EXPECT_TRUE(text::is_stopword("the"));
    EXPECT_TRUE(text::is_stopword("The"));
    EXPECT_FALSE(text::is_stopword("climate"));
}

TEST(Punctuation, OnlyPunctuationTokens) {
    EXPECT_TRUE(text::is_punctuation("!"));
    EXPECT_TRUE(text::is_punctuation("..."));
    EXPECT_FALSE(text::is_punctuation("a."));
    EXPECT_FALSE(text::is_punctuation(""));
}
