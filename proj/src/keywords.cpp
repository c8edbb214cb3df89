#include "geostyle/keywords.hpp"

#include "geostyle/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace geostyle {

const std::set<std::string>& stopwords() {
    // Common English function words. Deliberately excludes content words
    // that show up in real event captions ("day", "king", "dad", ...).
    static const std::set<std::string> words{
        "about", "above", "after",  "again",   "all",    "also",    "am",      "an",
        "and",   "any",   "are",    "as",      "at",     "be",      "because", "been",
        "before", "being", "below", "between", "both",   "but",     "by",      "can",
        "cannot", "could", "did",   "do",      "does",   "doing",   "down",    "during",
        "each",  "few",   "for",    "from",    "further", "get",    "got",     "had",
        "has",   "have",  "having", "he",      "her",    "here",    "hers",    "herself",
        "him",   "himself", "his",  "how",     "if",     "in",      "into",    "is",
        "it",    "its",   "itself", "just",    "me",     "more",    "most",    "my",
        "myself", "no",   "nor",    "not",     "now",    "of",      "off",     "on",
        "once",  "only",  "or",     "other",   "our",    "ours",    "ourselves", "out",
        "over",  "own",   "same",   "she",     "should", "so",      "some",    "such",
        "than",  "that",  "the",    "their",   "theirs", "them",    "themselves", "then",
        "there", "these", "they",   "this",    "those",  "through", "to",      "too",
        "under", "until", "up",     "very",    "was",    "we",      "were",    "what",
        "when",  "where", "which",  "while",   "who",    "whom",    "why",     "will",
        "with",  "would", "you",    "your",    "yours",  "yourself", "yourselves", "via",
    };
    return words;
}

std::set<std::string> tokenize(const std::string& caption) {
    std::set<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (current.size() >= 2 && !stopwords().count(current)) {
            tokens.insert(current);
        }
        current.clear();
    };
    for (unsigned char ch : caption) {
        if (std::isalnum(ch)) {
            current.push_back(static_cast<char>(std::tolower(ch)));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

CaptionDoc make_caption_doc(std::string image_id, std::int64_t week,
                            const std::string& caption) {
    CaptionDoc doc;
    doc.image_id = std::move(image_id);
    doc.week = week;
    doc.terms = tokenize(caption);
    return doc;
}

std::vector<KeywordScore> tfidf_rank(const std::vector<CaptionDoc>& event_docs,
                                     const std::vector<CaptionDoc>& other_docs,
                                     std::size_t top_k) {
    if (event_docs.empty()) {
        throw InsufficientDataError("tfidf_rank: no captions in event weeks");
    }
    std::map<std::string, KeywordScore> table;
    for (const auto& doc : event_docs) {
        for (const auto& term : doc.terms) {
            auto& entry = table[term];
            entry.term = term;
            ++entry.tf;
            ++entry.df;
        }
    }
    for (const auto& doc : other_docs) {
        for (const auto& term : doc.terms) {
            auto it = table.find(term);
            if (it != table.end()) ++it->second.df;
        }
    }
    const double n_total = static_cast<double>(event_docs.size() + other_docs.size());
    std::vector<KeywordScore> scored;
    scored.reserve(table.size());
    for (auto& [term, entry] : table) {
        entry.score =
            static_cast<double>(entry.tf) * std::log(n_total / (1.0 + static_cast<double>(entry.df)));
        scored.push_back(entry);
    }
    std::sort(scored.begin(), scored.end(), [](const KeywordScore& a, const KeywordScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.term < b.term;
    });
    if (scored.size() > top_k) scored.resize(top_k);
    return scored;
}

} // namespace geostyle
