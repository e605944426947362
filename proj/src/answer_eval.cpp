#include "loofaith/answer_eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>

#include <fmt/format.h>

#include "loofaith/embedding.hpp"
#include "loofaith/error.hpp"
#include "loofaith/text.hpp"
#include "utf8.hpp"

namespace loofaith {

void EvalConfig::validate() const {
    if (fuzzy_threshold < 0 || fuzzy_threshold > 100)
        throw InvalidParameter(fmt::format("fuzzy threshold {} outside [0, 100]", fuzzy_threshold));
    if (!(embed_threshold >= 0.0 && embed_threshold <= 1.0))
        throw InvalidParameter(fmt::format("embedding threshold {} outside [0, 1]", embed_threshold));
}

bool combine(const SubResults& s) { return s.exact || ((s.norm_exact || s.fuzzy || s.embed) && s.date); }

std::string normalize_answer(std::string_view text, const EvalConfig& config) {
    std::string out;
    for (const auto& word : tokenize(text)) {
        auto w = normalize_word(word);
        if (w.empty() || config.articles_to_strip.contains(w)) continue;
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

bool exact_match(std::string_view gold, std::string_view answer) { return gold == answer; }

std::size_t levenshtein(std::string_view a, std::string_view b) {
    const auto x = utf8::codepoints(a);
    const auto y = utf8::codepoints(b);
    std::vector<std::size_t> row(y.size() + 1);
    for (std::size_t j = 0; j <= y.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= x.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= y.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (x[i - 1] == y[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[y.size()];
}

int fuzzy_score(std::string_view gold, std::string_view answer, const EvalConfig& config) {
    const auto g = normalize_answer(gold, config);
    const auto a = normalize_answer(answer, config);
    const std::size_t len = std::max({utf8::codepoints(g).size(), utf8::codepoints(a).size(), std::size_t{1}});
    const std::size_t dist = levenshtein(g, a);
    // integer round-half-up of 100 * (len - dist) / len; only identical strings score 100
    const auto score = static_cast<int>((200 * (len - dist) + len) / (2 * len));
    return dist > 0 ? std::min(score, 99) : score;
}

double embed_similarity(std::string_view gold, std::string_view answer, EmbeddingProvider& provider) {
    const auto eg = provider.embed(gold);
    const auto ea = provider.embed(answer);
    return cosine_similarity(eg, ea);
}

// ---------------------------------------------------------------------------
// Dates

namespace {

constexpr std::array<std::string_view, 12> kMonths = {"january", "february", "march",     "april",
                                                      "may",     "june",     "july",      "august",
                                                      "september", "october", "november", "december"};

std::optional<int> parse_month_name(std::string_view token) {
    if (token == "sept") return 9;
    for (std::size_t i = 0; i < kMonths.size(); ++i) {
        if (token == kMonths[i] || (token.size() == 3 && kMonths[i].starts_with(token)))
            return static_cast<int>(i) + 1;
    }
    return std::nullopt;
}

std::optional<int> parse_digits(std::string_view s, std::size_t min_len, std::size_t max_len) {
    if (s.size() < min_len || s.size() > max_len) return std::nullopt;
    if (!std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) return std::nullopt;
    int v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

std::optional<int> parse_day(std::string_view s) {
    for (std::string_view suffix : {"st", "nd", "rd", "th"}) {
        if (s.size() > 2 && s.ends_with(suffix)) {
            s.remove_suffix(2);
            break;
        }
    }
    return parse_digits(s, 1, 2);
}

std::optional<int> parse_year(std::string_view s) { return parse_digits(s, 4, 4); }

int days_in_month(int year, int month) {
    static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return month == 2 && leap ? 29 : kDays[static_cast<std::size_t>(month - 1)];
}

std::optional<std::string> canonical(std::optional<int> year, std::optional<int> month, std::optional<int> day) {
    if (!year || !month || !day) return std::nullopt;
    if (*year < 1 || *month < 1 || *month > 12 || *day < 1 || *day > days_in_month(*year, *month))
        return std::nullopt;
    return fmt::format("{:04}-{:02}-{:02}", *year, *month, *day);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace

std::optional<std::string> normalize_date(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text) cleaned += c == ',' ? ' ' : utf8::ascii_lower(c);
    WordSeq tokens = tokenize(cleaned);
    for (auto& t : tokens)
        while (!t.empty() && t.back() == '.') t.pop_back();
    std::erase_if(tokens, [](const std::string& t) { return t.empty(); });

    switch (tokens.size()) {
        case 1: {
            const std::string_view t = tokens[0];
            if (auto y = parse_year(t)) return canonical(y, 1, 1);
            if (const auto parts = split(t, '-'); parts.size() == 3)
                return canonical(parse_year(parts[0]), parse_digits(parts[1], 1, 2), parse_digits(parts[2], 1, 2));
            if (const auto parts = split(t, '/'); parts.size() == 3)
                return canonical(parse_year(parts[2]), parse_digits(parts[0], 1, 2), parse_digits(parts[1], 1, 2));
            return std::nullopt;
        }
        case 2:
            return canonical(parse_year(tokens[1]), parse_month_name(tokens[0]), 1);
        case 3:
            if (auto m = parse_month_name(tokens[0])) return canonical(parse_year(tokens[2]), m, parse_day(tokens[1]));
            if (auto m = parse_month_name(tokens[1])) return canonical(parse_year(tokens[2]), m, parse_day(tokens[0]));
            return std::nullopt;
        default:
            return std::nullopt;
    }
}

// ---------------------------------------------------------------------------

EvalVerdict evaluate_one(std::string_view gold, std::string_view answer, const EvalConfig& config,
                         EmbeddingProvider* provider) {
    EvalVerdict v;
    const auto ng = normalize_answer(gold, config);
    const auto na = normalize_answer(answer, config);

    v.sub.exact = exact_match(gold, answer);
    v.sub.norm_exact = exact_match(ng, na);
    v.fuzzy_score = fuzzy_score(gold, answer, config);
    v.sub.fuzzy = v.fuzzy_score >= config.fuzzy_threshold;

    const auto dg = normalize_date(gold);
    const auto da = normalize_date(answer);
    v.sub.date = !dg || !da || *dg == *da;

    // The embedding only matters when nothing cheaper already settled the verdict.
    if (provider != nullptr && !v.sub.exact && !v.sub.norm_exact && !v.sub.fuzzy && v.sub.date) {
        try {
            v.embed_similarity = embed_similarity(ng, na, *provider);
            v.sub.embed = *v.embed_similarity >= config.embed_threshold;
        } catch (const EmbeddingUnavailable& e) {
            v.embed_error = e.what();
        }
    }
    v.correct = combine(v.sub);
    return v;
}

EvalVerdict evaluate(std::span<const std::string> gold_set, std::string_view answer, const EvalConfig& config,
                     EmbeddingProvider* provider) {
    if (gold_set.empty()) throw InvalidParameter("gold answer set must not be empty");
    EvalVerdict last;
    for (std::size_t i = 0; i < gold_set.size(); ++i) {
        last = evaluate_one(gold_set[i], answer, config, provider);
        last.gold_index = i;
        if (last.correct) return last;
    }
    return last;
}

}  // namespace loofaith
