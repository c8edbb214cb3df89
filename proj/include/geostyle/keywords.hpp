#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace geostyle {

/// Caption of one image, reduced to its deduplicated token set. An image can
/// contribute to a term's frequency at most once.
struct CaptionDoc {
    std::string image_id;
    std::int64_t week = 0;
    std::set<std::string> terms;
};

struct KeywordScore {
    std::string term;
    std::int64_t tf = 0; // event documents containing the term
    std::int64_t df = 0; // documents in the combined corpus containing it
    double score = 0.0;  // tf * ln(N / (1 + df))
};

/// Lowercases, splits on non-alphanumeric characters, drops tokens shorter
/// than two characters and stoplist words. Hashtag markers disappear with
/// the split, so concatenations like "worldcup" survive intact.
std::set<std::string> tokenize(const std::string& caption);

/// The fixed English stoplist used by tokenize.
const std::set<std::string>& stopwords();

CaptionDoc make_caption_doc(std::string image_id, std::int64_t week,
                            const std::string& caption);

/// Ranks terms that distinguish event-week captions from the rest of the
/// corpus. Ties break alphabetically. Throws InsufficientDataError when
/// event_docs is empty (no explanation available).
std::vector<KeywordScore> tfidf_rank(const std::vector<CaptionDoc>& event_docs,
                                     const std::vector<CaptionDoc>& other_docs,
                                     std::size_t top_k);

} // namespace geostyle
