#pragma once

// End-to-end orchestration behind the command-line tool. Each command
// returns a process exit code and writes a human-readable summary to `out`.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "loofaith/answer_eval.hpp"
#include "loofaith/embedding.hpp"
#include "loofaith/explain.hpp"
#include "loofaith/provider.hpp"

namespace loofaith {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;    // bad flags, unreadable dataset, IO failures
inline constexpr int kExitProvider = 3;  // provider could not be set up or reached

struct RunConfig {
    std::filesystem::path dataset_path;
    std::filesystem::path output_dir;
    ProviderConfig provider;
    EvalConfig eval;
    ExplainConfig explain;
    std::size_t concurrency = 1;
    std::optional<std::size_t> limit;
    bool resume = true;  // skip ids already present in results.jsonl

    std::optional<std::filesystem::path> mock_fixture;
    std::string api_key_env = "LLM_API_KEY";

    // Remote embeddings; the offline hashed n-gram embedder is used otherwise.
    std::optional<std::string> embed_base_url;
    std::string embed_model = "text-embedding-3-small";
    std::string embed_api_key_env = "EMBED_API_KEY";

    /// Throws InvalidParameter.
    void validate() const;
    /// All defaults resolved; never contains credentials.
    nlohmann::json effective_json() const;
};

/// Chat backend selected by the config: the fixture mock when given, HTTP otherwise.
std::shared_ptr<ChatBackend> make_backend(const RunConfig& config);
std::unique_ptr<EmbeddingProvider> make_embedder(const RunConfig& config);

/// Explanation record with faithfulness attached when the sample is scorable.
ResultRecord score_record(const ExplanationResult& result);

/// filter -> explain -> score -> report. Writes results.jsonl, config.json,
/// report.html, stats.txt and stats.html under output_dir.
int cmd_run(const RunConfig& config, std::ostream& out);

/// Writes retrieval_hard.jsonl (input format) with the samples the model
/// cannot answer without context.
int cmd_filter_hard(const RunConfig& config, std::ostream& out);

/// Explanations only: results.jsonl with faithfulness left null.
int cmd_explain(const RunConfig& config, std::ostream& out);

/// Recomputes faithfulness for every record of `input` and writes `output`.
int cmd_score(const std::filesystem::path& input, const std::filesystem::path& output, std::ostream& out);

struct ReportInput {
    std::string label;
    std::filesystem::path results;
};

/// Merges one or more result files into report.html, stats.txt and stats.html.
/// Cards need the dataset for questions and contexts; without it only the
/// statistics are written.
int cmd_report(const std::vector<ReportInput>& inputs, const std::optional<std::filesystem::path>& dataset,
               const std::filesystem::path& output_dir, std::ostream& out);

}  // namespace loofaith
