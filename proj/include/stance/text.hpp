#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace stance::text {

namespace detail {

inline bool is_word_byte(unsigned char c) {
    // Non-ASCII bytes are treated as word characters so UTF-8 letters stay inside a token.
    return std::isalnum(c) != 0 || c == '_' || c >= 0x80;
}

inline bool is_space(unsigned char c) { return std::isspace(c) != 0; }

inline bool starts_with_url(std::string_view s, std::size_t i) {
    const auto rest = s.substr(i);
    return rest.starts_with("http://") || rest.starts_with("https://") || rest.starts_with("www.");
}

}  // namespace detail

/// Case-preserving tokenizer in the spirit of a social-media "casual" tokenizer: URLs,
/// @mentions and #hashtags stay whole, words may contain inner apostrophes and hyphens,
/// numbers keep decimal points, and every other non-space character is its own token.
inline std::vector<std::string> casual_tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (detail::is_space(c)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        if (detail::starts_with_url(s, i)) {
            while (j < n && !detail::is_space(static_cast<unsigned char>(s[j]))) {
                ++j;
            }
        } else if ((c == '@' || c == '#') && i + 1 < n && detail::is_word_byte(static_cast<unsigned char>(s[i + 1]))) {
            j = i + 1;
            while (j < n && detail::is_word_byte(static_cast<unsigned char>(s[j]))) {
                ++j;
            }
        } else if (detail::is_word_byte(c)) {
            while (j < n) {
                const auto cj = static_cast<unsigned char>(s[j]);
                if (detail::is_word_byte(cj)) {
                    ++j;
                } else if ((cj == '\'' || cj == '-' || cj == '.') && j + 1 < n &&
                           detail::is_word_byte(static_cast<unsigned char>(s[j + 1])) &&
                           (cj != '.' || std::isdigit(static_cast<unsigned char>(s[j - 1])) != 0)) {
                    j += 2;
                } else {
                    break;
                }
            }
        } else {
            j = i + 1;
        }
        tokens.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return tokens;
}

/// Plain whitespace split, used for label names.
inline std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && detail::is_space(static_cast<unsigned char>(s[i]))) {
            ++i;
        }
        std::size_t j = i;
        while (j < s.size() && !detail::is_space(static_cast<unsigned char>(s[j]))) {
            ++j;
        }
        if (j > i) {
            out.emplace_back(s.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Fixed English stop-word list (the common NLTK English list). Matching is case-insensitive.
inline const std::unordered_set<std::string>& english_stopwords() {
    static const std::unordered_set<std::string> words = {
        "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
        "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his",
        "himself", "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself",
        "they", "them", "their", "theirs", "themselves", "what", "which", "who", "whom", "this",
        "that", "that'll", "these", "those", "am", "is", "are", "was", "were", "be", "been",
        "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an", "the",
        "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by", "for",
        "with", "about", "against", "between", "into", "through", "during", "before", "after",
        "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under",
        "again", "further", "then", "once", "here", "there", "when", "where", "why", "how", "all",
        "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
        "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just",
        "don", "don't", "should", "should've", "now", "d", "ll", "m", "o", "re", "ve", "y",
        "ain", "aren", "aren't", "couldn", "couldn't", "didn", "didn't", "doesn", "doesn't",
        "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn",
        "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't", "shouldn",
        "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn", "wouldn't"};
    return words;
}

inline bool is_stopword(std::string_view token) {
    return english_stopwords().contains(to_lower(token));
}

/// True when the token carries no letters or digits (pure punctuation).
inline bool is_punctuation(std::string_view token) {
    return !token.empty() && std::none_of(token.begin(), token.end(),
                        [](unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; });
}

}  // namespace stance::text
