#pragma once

// Word-level text operations shared by the explainer, the faithfulness
// scores and the report renderer. Everything here is a pure function.

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace loofaith {

/// Whitespace-delimited tokens of a text. No element is empty or contains whitespace.
using WordSeq = std::vector<std::string>;

/// Half-open [begin, end) offsets.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin == end; }
    bool contains(const Span& other) const { return begin <= other.begin && other.end <= end; }
    bool overlaps(const Span& other) const { return begin < other.end && other.begin < end; }
    friend bool operator==(const Span&, const Span&) = default;
};

/// A contiguous slice of a sample's context; one of the candidate regions.
struct Region {
    std::string parent_id;
    std::size_t part_index = 0;
    WordSeq words;
    Span word_span;  // word offsets into the parent WordSeq
    Span char_span;  // byte offsets into the single-space-joined parent text

    std::string text() const;
    friend bool operator==(const Region&, const Region&) = default;
};

/// A contiguous group of words inside a region, the unit that gets masked.
struct MaskGroup {
    std::size_t part_index = 0;  // identifies the owning region
    std::size_t group_index = 0;
    WordSeq words;
    Span word_span;  // word offsets into the owning region

    std::string text() const;
    friend bool operator==(const MaskGroup&, const MaskGroup&) = default;
};

/// Token standing in for a masked word group.
inline constexpr std::string_view kMaskToken = "_";

/// Splits on runs of Unicode whitespace. Punctuation stays attached to words.
WordSeq tokenize(std::string_view text);

std::string join_words(const WordSeq& words, std::size_t begin, std::size_t end);
std::string join_words(const WordSeq& words);

/// Whitespace-normalized text: tokens joined by single spaces.
std::string normalize_whitespace(std::string_view text);

/// Sizes of a balanced partition of n items into min(k, n) parts. The first
/// n mod k parts receive the extra item. Throws InvalidParameter when k == 0.
std::vector<std::size_t> balanced_sizes(std::size_t n, std::size_t k);

/// Candidate regions of a context: min(p, |seq|) contiguous balanced parts.
std::vector<Region> split_into_parts(const WordSeq& seq, std::size_t p,
                                     std::string parent_id = {});

/// Candidate keyword groups of a region, balanced by the same remainder rule.
std::vector<MaskGroup> split_into_groups(const Region& region, std::size_t q);

/// Region text with group `group_index` collapsed into a single "_" token.
std::string mask_group(const Region& region, std::size_t group_index, std::size_t q);
std::string mask_group(const Region& region, const MaskGroup& group);

/// Lowercased word with punctuation removed. May be empty (e.g. for ",").
std::string normalize_word(std::string_view word);

/// Normalized words of a text, empties dropped.
WordSeq normalized_words(std::string_view text);

/// Word-bounded, case- and punctuation-insensitive containment. An empty
/// keyword (after normalization) is never contained.
bool contains_keyword(std::string_view haystack, std::string_view keyword);

/// Word ranges of `words` (indices into `words`) where the keyword occurs
/// under the same matching rule as contains_keyword.
std::vector<Span> find_keyword_occurrences(const WordSeq& words, std::string_view keyword);

}  // namespace loofaith
