#include "loofaith/report.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include <fmt/format.h>

#include "loofaith/error.hpp"

namespace loofaith {

namespace {

// Start offset of every word in the single-space-joined text, plus the total length.
std::vector<std::size_t> word_offsets(const WordSeq& words) {
    std::vector<std::size_t> offs;
    offs.reserve(words.size() + 1);
    std::size_t pos = 0;
    for (const auto& w : words) {
        offs.push_back(pos);
        pos += w.size() + 1;
    }
    offs.push_back(pos == 0 ? 0 : pos - 1);
    return offs;
}

Span chars_of(const WordSeq& words, const std::vector<std::size_t>& offs, Span word_span) {
    if (word_span.empty() || word_span.end > words.size())
        throw InvalidParameter(fmt::format("word span [{}, {}) outside a context of {} words", word_span.begin,
                                           word_span.end, words.size()));
    const auto last = word_span.end - 1;
    return {offs[word_span.begin], offs[last] + words[last].size()};
}

}  // namespace

std::vector<HighlightSpan> compute_highlights(const WordSeq& words, const ExplanationResult& explanation) {
    const auto offs = word_offsets(words);
    std::vector<HighlightSpan> spans;

    for (const auto& region : explanation.sufficient_regions) {
        spans.push_back({chars_of(words, offs, region.word_span), HighlightKind::sufficient});
        const auto it = explanation.nk_by_region.find(region.part_index);
        if (it == explanation.nk_by_region.end()) continue;
        for (const auto& g : it->second) {
            const Span abs{region.word_span.begin + g.word_span.begin, region.word_span.begin + g.word_span.end};
            if (!region.word_span.contains(abs))
                throw InvalidParameter(fmt::format("group {} lies outside region {}", g.group_index, region.part_index));
            spans.push_back({chars_of(words, offs, abs), HighlightKind::necessary});
        }
    }

    std::vector<Span> bold;
    for (const auto& k : explanation.self_keywords) {
        const auto occ = find_keyword_occurrences(words, k);
        bold.insert(bold.end(), occ.begin(), occ.end());
    }
    std::sort(bold.begin(), bold.end(), [](const Span& a, const Span& b) {
        return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
    });
    std::vector<Span> merged;
    for (const auto& s : bold) {
        if (!merged.empty() && s.begin <= merged.back().end) {
            merged.back().end = std::max(merged.back().end, s.end);
        } else {
            merged.push_back(s);
        }
    }
    for (const auto& s : merged) spans.push_back({chars_of(words, offs, s), HighlightKind::model_keyword});

    std::stable_sort(spans.begin(), spans.end(), [](const HighlightSpan& a, const HighlightSpan& b) {
        return a.kind != b.kind ? a.kind < b.kind : a.chars.begin < b.chars.begin;
    });
    return spans;
}

std::vector<Segment> flatten_highlights(std::size_t text_size, const std::vector<HighlightSpan>& spans) {
    std::set<std::size_t> cuts{0, text_size};
    for (const auto& s : spans) {
        if (s.chars.end > text_size) throw InvalidParameter("highlight span exceeds the text");
        cuts.insert(s.chars.begin);
        cuts.insert(s.chars.end);
    }
    std::vector<Segment> out;
    for (auto it = cuts.begin(); std::next(it) != cuts.end(); ++it) {
        const Span piece{*it, *std::next(it)};
        if (piece.empty()) continue;
        bool green = false, blue = false, bold = false;
        for (const auto& s : spans) {
            if (!s.chars.contains(piece)) continue;
            switch (s.kind) {
                case HighlightKind::sufficient: green = true; break;
                case HighlightKind::necessary: blue = true; break;
                case HighlightKind::model_keyword: bold = true; break;
            }
        }
        const Shade shade = blue ? Shade::blue : green ? Shade::green : Shade::none;
        if (!out.empty() && out.back().shade == shade && out.back().bold == bold && out.back().chars.end == piece.begin) {
            out.back().chars.end = piece.end;
        } else {
            out.push_back({piece, shade, bold});
        }
    }
    return out;
}

std::string html_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string render_context_html(std::string_view text, const std::vector<HighlightSpan>& spans) {
    std::string out;
    for (const auto& seg : flatten_highlights(text.size(), spans)) {
        const auto piece = html_escape(text.substr(seg.chars.begin, seg.chars.size()));
        std::string inner = seg.bold ? "<b>" + piece + "</b>" : piece;
        switch (seg.shade) {
            case Shade::none: out += inner; break;
            case Shade::green: out += fmt::format(R"(<span class="sr" style="background:{}">{}</span>)", kGreen, inner); break;
            case Shade::blue: out += fmt::format(R"(<span class="nk" style="background:{}">{}</span>)", kBlue, inner); break;
        }
    }
    return out;
}

std::string render_context_ansi(std::string_view text, const std::vector<HighlightSpan>& spans) {
    std::string out;
    for (const auto& seg : flatten_highlights(text.size(), spans)) {
        std::string codes;
        if (seg.shade == Shade::green) codes += "\x1b[42m";
        if (seg.shade == Shade::blue) codes += "\x1b[44m";
        if (seg.bold) codes += "\x1b[1m";
        out += codes;
        out += text.substr(seg.chars.begin, seg.chars.size());
        if (!codes.empty()) out += "\x1b[0m";
    }
    return out;
}

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += sep;
        out += s;
    }
    return out;
}

std::string keyword_list_html(const std::vector<std::string>& keywords) {
    std::string out = "<ul class=\"keywords\">";
    for (const auto& k : keywords) out += "<li>" + html_escape(k) + "</li>";
    return out + "</ul>";
}

}  // namespace

std::string render_sample_html(const Sample& sample, const ExplanationResult& explanation,
                               const std::optional<SampleFaithfulness>& score) {
    std::string out = fmt::format(R"(<div class="card{}" id="sample-{}">)",
                                  explanation.status == Status::ok ? "" : " failure", html_escape(sample.id));
    out += fmt::format("<h3>{}</h3>", html_escape(sample.id));
    out += fmt::format(R"(<p class="question"><b>Question:</b> {}</p>)", html_escape(sample.question));

    if (explanation.status != Status::ok) {
        out += fmt::format(R"(<p class="status">Explanation failed: {}</p>)", to_string(explanation.status));
        if (explanation.error) out += fmt::format(R"(<p class="error">{}</p>)", html_escape(*explanation.error));
        return out + "</div>";
    }

    const auto words = tokenize(sample.context);
    const auto spans = compute_highlights(words, explanation);
    out += fmt::format(R"(<div class="context">{}</div>)", render_context_html(join_words(words), spans));
    out += fmt::format(R"(<p class="thought"><b>Thought:</b> {}</p>)", html_escape(explanation.thought.value_or("")));
    out += "<div><b>Keywords:</b>" + keyword_list_html(explanation.self_keywords) + "</div>";
    out += fmt::format(R"(<p class="answer"><b>LLM Answer:</b> {}</p>)",
                       html_escape(explanation.original_answer.value_or("")));
    out += fmt::format(R"(<p class="gold"><b>Gold:</b> {}</p>)", html_escape(join(sample.gold_answers, " | ")));
    if (score) {
        out += fmt::format(R"(<p class="score"><b>Faithfulness:</b> {:.3f} (region {})</p>)", score->f_i,
                           score->argmax_part_index);
        out += R"(<table class="regions"><tr><th>region</th><th>f_sr</th><th>f_nk</th><th>(f_sr+f_nk)/2</th></tr>)";
        for (const auto& r : score->per_region)
            out += fmt::format("<tr><td>{}</td><td>{}</td><td>{:.3f}</td><td>{:.3f}</td></tr>", r.part_index, r.f_sr,
                               r.f_nk, r.combined);
        out += "</table>";
    }
    return out + "</div>";
}

std::string render_sample_ansi(const Sample& sample, const ExplanationResult& explanation,
                               const std::optional<SampleFaithfulness>& score) {
    std::string out = fmt::format("== {} ==\nQuestion: {}\n", sample.id, sample.question);
    if (explanation.status != Status::ok) return out + fmt::format("Explanation failed: {}\n", to_string(explanation.status));
    const auto words = tokenize(sample.context);
    out += render_context_ansi(join_words(words), compute_highlights(words, explanation)) + "\n";
    out += fmt::format("Thought: {}\nKeywords: {}\nLLM Answer: {}\n", explanation.thought.value_or(""),
                       join(explanation.self_keywords, ", "), explanation.original_answer.value_or(""));
    if (score) out += fmt::format("Faithfulness: {:.3f}\n", score->f_i);
    return out;
}

std::string render_report_html(std::string_view title, std::string_view stats_html,
                               const std::vector<std::string>& cards) {
    std::string out = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">";
    out += fmt::format("<title>{}</title>", html_escape(title));
    out += "<style>body{font-family:sans-serif;max-width:60em;margin:auto}"
           ".card{border:1px solid #ccc;border-radius:4px;padding:0.5em 1em;margin:1em 0}"
           ".card.failure{background:#fafafa;color:#555}"
           ".context{line-height:1.6}table{border-collapse:collapse}"
           "td,th{border:1px solid #ccc;padding:2px 8px}</style></head><body>\n";
    out += fmt::format("<h1>{}</h1>\n", html_escape(title));
    out += stats_html;
    out += "\n";
    for (const auto& c : cards) out += c + "\n";
    return out + "</body></html>\n";
}

// ---------------------------------------------------------------------------

void StageStats::validate() const {
    const std::size_t funnel[] = {retrieval_hard, correct_with_context, with_sufficient_regions,
                                  with_necessary_keywords, common_successful};
    for (std::size_t i = 1; i < std::size(funnel); ++i) {
        if (funnel[i] > funnel[i - 1])
            throw InvariantViolation(fmt::format("stage counts must not increase down the funnel: {} > {}",
                                                 funnel[i], funnel[i - 1]));
    }
    if (faithfulness_common && !(*faithfulness_common >= 0.0 && *faithfulness_common <= 1.0))
        throw InvariantViolation("faithfulness outside [0, 1]");
}

namespace {

bool passed_original(Status s) {
    return s == Status::ok || s == Status::no_sufficient_region || s == Status::no_necessary_keywords;
}

std::optional<double> mean_f(const std::vector<ResultRecord>& records, const std::unordered_set<std::string>* only) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (r.status != Status::ok || !r.faithfulness) continue;
        if (only && !only->contains(r.id)) continue;
        sum += r.faithfulness->f_i;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace

StageStats stage_stats(const std::vector<ResultRecord>& records) {
    StageStats s;
    for (const auto& r : records) {
        if (r.retrieval_hard.value_or(false)) ++s.retrieval_hard;
        if (passed_original(r.status)) ++s.correct_with_context;
        if (r.status == Status::ok || r.status == Status::no_necessary_keywords) ++s.with_sufficient_regions;
        if (r.status == Status::ok) ++s.with_necessary_keywords;
    }
    s.common_successful = s.with_necessary_keywords;
    s.faithfulness_common = mean_f(records, nullptr);
    return s;
}

std::vector<std::pair<std::string, StageStats>> compare_models(
    const std::vector<std::pair<std::string, std::vector<ResultRecord>>>& runs) {
    std::unordered_set<std::string> common;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::unordered_set<std::string> ok;
        for (const auto& r : runs[i].second)
            if (r.status == Status::ok && (i == 0 || common.contains(r.id))) ok.insert(r.id);
        common = std::move(ok);
    }
    std::vector<std::pair<std::string, StageStats>> out;
    for (const auto& [label, records] : runs) {
        auto s = stage_stats(records);
        s.common_successful = common.size();
        s.faithfulness_common = mean_f(records, &common);
        out.emplace_back(label, s);
    }
    return out;
}

StatsTables render_stats_table(const std::vector<std::pair<std::string, StageStats>>& models) {
    for (const auto& [label, s] : models) s.validate();

    using Getter = std::string (*)(const StageStats&);
    const std::pair<std::string_view, Getter> rows[] = {
        {"Retrieval-Hard Subset", [](const StageStats& s) { return std::to_string(s.retrieval_hard); }},
        {"Successful samples (original context)",
         [](const StageStats& s) { return std::to_string(s.correct_with_context); }},
        {"Successful Sufficient Regions", [](const StageStats& s) { return std::to_string(s.with_sufficient_regions); }},
        {"Successful Necessary Keywords", [](const StageStats& s) { return std::to_string(s.with_necessary_keywords); }},
        {"Common successful samples", [](const StageStats& s) { return std::to_string(s.common_successful); }},
        {"Faithfulness score (common)",
         [](const StageStats& s) {
             return s.faithfulness_common ? fmt::format("{:.3f}", *s.faithfulness_common) : std::string("—");
         }},
    };

    StatsTables t;
    std::size_t label_width = std::string_view("Models").size();
    for (const auto& [name, get] : rows) label_width = std::max(label_width, name.size());
    std::vector<std::size_t> col_width;
    for (const auto& [label, s] : models) col_width.push_back(std::max<std::size_t>(label.size(), 7));

    t.text = fmt::format("{:<{}}", "Models", label_width);
    for (std::size_t c = 0; c < models.size(); ++c) t.text += fmt::format("  {:>{}}", models[c].first, col_width[c]);
    t.text += "\n";
    t.html = "<table class=\"stats\">\n<tr><th>Models</th>";
    for (const auto& [label, s] : models) t.html += "<th>" + html_escape(label) + "</th>";
    t.html += "</tr>\n";

    for (const auto& [name, get] : rows) {
        t.text += fmt::format("{:<{}}", name, label_width);
        t.html += fmt::format("<tr><td>{}</td>", name);
        for (std::size_t c = 0; c < models.size(); ++c) {
            const auto cell = get(models[c].second);
            t.text += fmt::format("  {:>{}}", cell, col_width[c]);
            t.html += "<td>" + html_escape(cell) + "</td>";
        }
        t.text += "\n";
        t.html += "</tr>\n";
    }
    t.html += "</table>\n";
    return t;
}

}  // namespace loofaith
