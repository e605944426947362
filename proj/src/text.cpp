#include "loofaith/text.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "loofaith/error.hpp"
#include "utf8.hpp"

namespace loofaith {

std::string Region::text() const { return join_words(words); }

std::string MaskGroup::text() const { return join_words(words); }

WordSeq tokenize(std::string_view text) {
    WordSeq words;
    std::size_t start = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < text.size();) {
        const auto d = utf8::decode(text, i);
        if (utf8::is_space(d.cp)) {
            if (in_word) words.emplace_back(text.substr(start, i - start));
            in_word = false;
        } else if (!in_word) {
            start = i;
            in_word = true;
        }
        i += d.length;
    }
    if (in_word) words.emplace_back(text.substr(start));
    return words;
}

std::string join_words(const WordSeq& words, std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i != begin) out += ' ';
        out += words[i];
    }
    return out;
}

std::string join_words(const WordSeq& words) { return join_words(words, 0, words.size()); }

std::string normalize_whitespace(std::string_view text) { return join_words(tokenize(text)); }

std::vector<std::size_t> balanced_sizes(std::size_t n, std::size_t k) {
    if (k == 0) throw InvalidParameter("number of parts must be at least 1");
    const std::size_t parts = std::min(k, n);
    std::vector<std::size_t> sizes(parts, parts == 0 ? 0 : n / parts);
    for (std::size_t i = 0; i < (parts == 0 ? 0 : n % parts); ++i) ++sizes[i];
    return sizes;
}

std::vector<Region> split_into_parts(const WordSeq& seq, std::size_t p, std::string parent_id) {
    const auto sizes = balanced_sizes(seq.size(), p);
    std::vector<Region> regions;
    regions.reserve(sizes.size());

    std::size_t word = 0;
    std::size_t chars = 0;
    for (std::size_t part = 0; part < sizes.size(); ++part) {
        Region r;
        r.parent_id = parent_id;
        r.part_index = part;
        r.word_span = {word, word + sizes[part]};
        r.words.assign(seq.begin() + static_cast<std::ptrdiff_t>(word),
                       seq.begin() + static_cast<std::ptrdiff_t>(word + sizes[part]));
        // one separating space precedes every region but the first
        if (part > 0) ++chars;
        r.char_span.begin = chars;
        for (std::size_t i = 0; i < r.words.size(); ++i) chars += r.words[i].size() + (i > 0 ? 1 : 0);
        r.char_span.end = chars;
        word += sizes[part];
        regions.push_back(std::move(r));
    }
    return regions;
}

std::vector<MaskGroup> split_into_groups(const Region& region, std::size_t q) {
    const auto sizes = balanced_sizes(region.words.size(), q);
    std::vector<MaskGroup> groups;
    groups.reserve(sizes.size());
    std::size_t word = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
        MaskGroup group;
        group.part_index = region.part_index;
        group.group_index = g;
        group.word_span = {word, word + sizes[g]};
        group.words.assign(region.words.begin() + static_cast<std::ptrdiff_t>(word),
                           region.words.begin() + static_cast<std::ptrdiff_t>(word + sizes[g]));
        word += sizes[g];
        groups.push_back(std::move(group));
    }
    return groups;
}

std::string mask_group(const Region& region, const MaskGroup& group) {
    const auto& w = region.words;
    if (group.word_span.end > w.size() || group.word_span.empty())
        throw InvalidParameter("mask group does not lie inside its region");
    std::string out = join_words(w, 0, group.word_span.begin);
    if (!out.empty()) out += ' ';
    out += kMaskToken;
    if (group.word_span.end < w.size()) {
        out += ' ';
        out += join_words(w, group.word_span.end, w.size());
    }
    return out;
}

std::string mask_group(const Region& region, std::size_t group_index, std::size_t q) {
    if (region.words.empty()) throw InvalidParameter("cannot mask an empty region");
    const auto groups = split_into_groups(region, q);
    if (group_index >= groups.size())
        throw InvalidParameter(fmt::format("group index {} out of range [0, {})", group_index,
                                           groups.size()));
    return mask_group(region, groups[group_index]);
}

std::string normalize_word(std::string_view word) {
    std::string out;
    out.reserve(word.size());
    for (std::size_t i = 0; i < word.size();) {
        const auto d = utf8::decode(word, i);
        if (!utf8::is_punctuation(d.cp)) {
            if (d.length == 1) {
                out += utf8::ascii_lower(word[i]);
            } else {
                out.append(word.substr(i, d.length));
            }
        }
        i += d.length;
    }
    return out;
}

WordSeq normalized_words(std::string_view text) {
    WordSeq out;
    for (const auto& w : tokenize(text)) {
        auto n = normalize_word(w);
        if (!n.empty()) out.push_back(std::move(n));
    }
    return out;
}

namespace {

// Positions of `needle` inside `hay`, both already normalized.
template <typename Fn>
void for_each_match(const WordSeq& hay, const WordSeq& needle, Fn&& fn) {
    if (needle.empty() || needle.size() > hay.size()) return;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i)))
            fn(i);
    }
}

}  // namespace

bool contains_keyword(std::string_view haystack, std::string_view keyword) {
    const auto needle = normalized_words(keyword);
    const auto hay = normalized_words(haystack);
    bool found = false;
    for_each_match(hay, needle, [&](std::size_t) { found = true; });
    return found;
}

std::vector<Span> find_keyword_occurrences(const WordSeq& words, std::string_view keyword) {
    const auto needle = normalized_words(keyword);
    // normalized words, remembering where each came from
    WordSeq hay;
    std::vector<std::size_t> origin;
    for (std::size_t i = 0; i < words.size(); ++i) {
        auto n = normalize_word(words[i]);
        if (n.empty()) continue;
        hay.push_back(std::move(n));
        origin.push_back(i);
    }
    std::vector<Span> out;
    for_each_match(hay, needle, [&](std::size_t i) {
        out.push_back({origin[i], origin[i + needle.size() - 1] + 1});
    });
    return out;
}

}  // namespace loofaith
