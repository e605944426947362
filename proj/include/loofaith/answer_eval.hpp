#pragma once

// Hybrid answer-correctness metric. A model answer counts as correct for a
// gold answer when it matches exactly, or when it matches loosely (normalized
// text, edit-distance ratio, or embedding similarity) and does not contradict
// the gold answer's date:
//
//   exact || ((norm_exact || fuzzy || embed) && date)
//
// `date` is vacuously true unless both strings parse as calendar dates.

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loofaith {

class EmbeddingProvider;

struct EvalConfig {
    int fuzzy_threshold = 90;      // percent, inclusive
    double embed_threshold = 0.9;  // cosine, inclusive
    std::set<std::string, std::less<>> articles_to_strip{"a", "an", "the"};

    /// Throws InvalidParameter when a threshold is out of range.
    void validate() const;
};

struct SubResults {
    bool exact = false;
    bool norm_exact = false;
    bool fuzzy = false;
    bool embed = false;
    bool date = false;  // DateMatch after the vacuous-truth rule

    friend bool operator==(const SubResults&, const SubResults&) = default;
};

/// The combined formula over already-computed sub-results.
bool combine(const SubResults& s);

struct EvalVerdict {
    bool correct = false;
    SubResults sub;
    int fuzzy_score = 0;
    std::optional<double> embed_similarity;  // absent when skipped or unavailable
    std::optional<std::string> embed_error;
    std::size_t gold_index = 0;  // gold answer the sub-results refer to
};

std::string normalize_answer(std::string_view text, const EvalConfig& config = {});

bool exact_match(std::string_view gold, std::string_view answer);

/// Edit distance over Unicode code points.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// round(100 * (1 - dist / maxlen)) on normalized strings; 100 when both are empty.
int fuzzy_score(std::string_view gold, std::string_view answer, const EvalConfig& config = {});

/// Cosine similarity of the provider's embeddings. Propagates EmbeddingUnavailable.
double embed_similarity(std::string_view gold, std::string_view answer, EmbeddingProvider& provider);

/// Canonical "YYYY-MM-DD" for a recognised date form, absent otherwise.
/// Recognised: "Month D, YYYY", "D Month YYYY", "YYYY-MM-DD", "MM/DD/YYYY",
/// "Month YYYY", "YYYY". Month names may be abbreviated; days may carry an
/// ordinal suffix. Missing day or month resolves to 01.
std::optional<std::string> normalize_date(std::string_view text);

/// Evaluates one answer against a single gold answer. `provider` may be null,
/// in which case the embedding sub-metric is false.
EvalVerdict evaluate_one(std::string_view gold, std::string_view answer, const EvalConfig& config,
                         EmbeddingProvider* provider);

/// OR over the gold set. The verdict carries the sub-results of the first
/// matching gold answer, or of the last one when none match. Throws
/// InvalidParameter on an empty gold set.
EvalVerdict evaluate(std::span<const std::string> gold_set, std::string_view answer,
                     const EvalConfig& config, EmbeddingProvider* provider);

}  // namespace loofaith
