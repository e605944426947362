#pragma once

// Perturbation-based explanation of one QA sample against a black-box model.
//
// The context is cut into p balanced candidate regions; a region is
// sufficient when the model, shown that region alone, still answers
// correctly. Each sufficient region is then cut into q balanced word groups;
// a group is necessary when masking it (replacing it with "_") makes the
// answer wrong. Calls per sample: 1 (no context) + 1 (full context) + p +
// q per examined sufficient region.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loofaith/answer_eval.hpp"
#include "loofaith/dataset.hpp"
#include "loofaith/provider.hpp"
#include "loofaith/text.hpp"

namespace loofaith {

enum class NkMode { all_sufficient_regions, first_sufficient_region };

struct ExplainConfig {
    std::size_t p = 3;
    std::size_t q = 5;
    NkMode run_nk_on = NkMode::all_sufficient_regions;

    void validate() const;
};

struct ExplanationResult {
    std::string sample_id;
    Status status = Status::ok;
    std::optional<bool> retrieval_hard;
    std::optional<std::string> no_context_answer;
    std::optional<std::string> original_answer;
    std::optional<std::string> thought;
    std::vector<std::string> self_keywords;
    std::vector<Region> sufficient_regions;
    // keyed by part_index; present for every region the NK stage examined
    std::map<std::size_t, std::vector<MaskGroup>> nk_by_region;
    CallLedger ledger;
    std::optional<std::string> error;
};

struct RetrievalCheck {
    bool hard = false;
    std::optional<std::string> answer;  // absent when the reply did not parse
};

/// Runs the explanation stages of one sample. Thread-safe as long as the
/// model client and embedding provider are.
class Explainer {
public:
    Explainer(ModelClient& model, EmbeddingProvider* embedder, EvalConfig eval = {}, ExplainConfig config = {});

    /// True when the model fails without context. Throws ProviderError.
    RetrievalCheck is_retrieval_hard(const Sample& sample, CallLedger& ledger);

    /// Regions whose standalone answer is correct. Throws ProviderError.
    std::vector<Region> sufficient_regions(const Sample& sample, CallLedger& ledger);

    /// Groups of `region` whose masking makes the answer incorrect. Throws ProviderError.
    std::vector<MaskGroup> necessary_keywords(const Sample& sample, const Region& region, CallLedger& ledger);

    /// Full staged pipeline with early exit; never throws for per-sample failures.
    ExplanationResult explain_sample(const Sample& sample);

    const ExplainConfig& config() const { return config_; }
    const EvalConfig& eval_config() const { return eval_; }

private:
    struct Answer {
        std::optional<ModelResponse> response;  // absent on ParseError
        std::string parse_error;
        bool correct = false;
    };

    Answer ask(const Sample& sample, const std::optional<std::string>& context, Stage stage, CallLedger& ledger);

    ModelClient& model_;
    EmbeddingProvider* embedder_;
    EvalConfig eval_;
    ExplainConfig config_;
};

/// Serializable view of an explanation (faithfulness left empty).
ResultRecord to_record(const ExplanationResult& result);

/// Rebuilds regions and groups from a saved record.
ExplanationResult from_record(const ResultRecord& record);

}  // namespace loofaith
