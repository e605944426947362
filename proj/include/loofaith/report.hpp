#pragma once

// Highlighted explanation cards and stage-funnel tables.
//
// Sufficient regions are shaded green, necessary groups blue (blue wins where
// both apply) and occurrences of the model's own keywords are bold. Both the
// HTML and the ANSI serializer work from the same flattened segment list, so
// markup never interleaves.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "loofaith/dataset.hpp"
#include "loofaith/explain.hpp"
#include "loofaith/faithfulness.hpp"
#include "loofaith/text.hpp"

namespace loofaith {

enum class HighlightKind { sufficient, necessary, model_keyword };

struct HighlightSpan {
    Span chars;  // into the whitespace-normalized context
    HighlightKind kind = HighlightKind::sufficient;
    friend bool operator==(const HighlightSpan&, const HighlightSpan&) = default;
};

inline constexpr std::string_view kGreen = "#c8e6c9";
inline constexpr std::string_view kBlue = "#bbdefb";

/// Highlight layers of a sample's normalized context. Spans of one kind never
/// overlap; touching keyword occurrences are merged.
std::vector<HighlightSpan> compute_highlights(const WordSeq& context_words, const ExplanationResult& explanation);

enum class Shade { none, green, blue };

struct Segment {
    Span chars;
    Shade shade = Shade::none;
    bool bold = false;
    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Non-overlapping segments covering [0, text_size), adjacent segments differing in style.
std::vector<Segment> flatten_highlights(std::size_t text_size, const std::vector<HighlightSpan>& spans);

std::string html_escape(std::string_view text);

/// Context with nested <span>/<b> markup, no surrounding container.
std::string render_context_html(std::string_view normalized_context, const std::vector<HighlightSpan>& spans);

/// Context with ANSI background (42 green, 44 blue) and bold (1) escapes.
std::string render_context_ansi(std::string_view normalized_context, const std::vector<HighlightSpan>& spans);

/// Self-contained HTML card. Failed explanations render as a failure card
/// naming the status, without highlights.
std::string render_sample_html(const Sample& sample, const ExplanationResult& explanation,
                               const std::optional<SampleFaithfulness>& score);

/// Terminal rendering of the same card.
std::string render_sample_ansi(const Sample& sample, const ExplanationResult& explanation,
                               const std::optional<SampleFaithfulness>& score);

/// Complete HTML document: title, optional stats table, then the cards.
std::string render_report_html(std::string_view title, std::string_view stats_html,
                               const std::vector<std::string>& cards);

// ---------------------------------------------------------------------------

struct StageStats {
    std::size_t retrieval_hard = 0;
    std::size_t correct_with_context = 0;
    std::size_t with_sufficient_regions = 0;
    std::size_t with_necessary_keywords = 0;
    std::size_t common_successful = 0;
    std::optional<double> faithfulness_common;

    /// Throws InvariantViolation unless the counts are non-increasing down the funnel.
    void validate() const;
    friend bool operator==(const StageStats&, const StageStats&) = default;
};

/// Funnel of one model's run; the common subset is the model's own successes.
StageStats stage_stats(const std::vector<ResultRecord>& records);

/// Funnels of several models; the common subset is the set of sample ids
/// every model explained successfully, and F is averaged over it.
std::vector<std::pair<std::string, StageStats>> compare_models(
    const std::vector<std::pair<std::string, std::vector<ResultRecord>>>& runs);

struct StatsTables {
    std::string text;
    std::string html;
};

/// One row per funnel stage, one column per model, F to 3 decimals ("—" when absent).
StatsTables render_stats_table(const std::vector<std::pair<std::string, StageStats>>& models);

}  // namespace loofaith
