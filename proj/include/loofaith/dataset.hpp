#pragma once

// JSON-Lines input (QA samples with contexts) and output (one result record
// per sample).

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "loofaith/provider.hpp"
#include "loofaith/text.hpp"

namespace loofaith {

struct Sample {
    std::string id;
    std::string question;
    std::string context;
    std::vector<std::string> gold_answers;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t skipped = 0;
    std::vector<std::string> diagnostics;  // one entry per skipped line

    std::size_t size() const { return samples.size(); }
};

/// Reads {id?, question, context, answers:[string]} lines. Invalid lines are
/// skipped and reported; a missing id becomes "line-<n>" (1-based).
/// Throws IOError when unreadable, EmptyDataset when nothing survives.
Dataset load_dataset(const std::filesystem::path& path);

/// Writes samples in the input format (used to hand filtered subsets between stages).
void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples);

// ---------------------------------------------------------------------------

/// Per-sample outcome. The first two failure reasons are filtering outcomes,
/// the next three are the explanation failures, the last two are operational.
enum class Status {
    ok,
    not_retrieval_hard,
    wrong_with_context,
    no_sufficient_region,
    no_necessary_keywords,
    provider_error,
    parse_error,
};

std::string_view to_string(Status status);
/// Throws InvalidParameter for an unknown name.
Status status_from_string(std::string_view name);

struct RegionRecord {
    std::size_t part_index = 0;
    Span word_span;
    Span char_span;
    std::string text;
    friend bool operator==(const RegionRecord&, const RegionRecord&) = default;
};

struct GroupRecord {
    std::size_t group_index = 0;
    Span word_span;  // inside the region
    std::string text;
    friend bool operator==(const GroupRecord&, const GroupRecord&) = default;
};

struct NecessaryRecord {
    std::size_t part_index = 0;
    std::vector<GroupRecord> groups;
    friend bool operator==(const NecessaryRecord&, const NecessaryRecord&) = default;
};

struct RegionScoreRecord {
    std::size_t part_index = 0;
    int f_sr = 0;
    double f_nk = 0.0;
    double combined = 0.0;
    std::vector<int> hits;
    friend bool operator==(const RegionScoreRecord&, const RegionScoreRecord&) = default;
};

struct FaithfulnessRecord {
    std::vector<RegionScoreRecord> regions;
    double f_i = 0.0;
    std::size_t argmax_part_index = 0;
    friend bool operator==(const FaithfulnessRecord&, const FaithfulnessRecord&) = default;
};

struct ResultRecord {
    std::string id;
    Status status = Status::ok;
    std::optional<bool> retrieval_hard;
    std::optional<std::string> answer_no_context;
    std::optional<std::string> answer_original;
    std::optional<std::string> thought;
    std::vector<std::string> model_keywords;
    std::vector<RegionRecord> sufficient_regions;
    std::vector<NecessaryRecord> necessary_keywords;
    std::optional<FaithfulnessRecord> faithfulness;
    CallLedger calls;
    std::optional<std::string> error;

    friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

/// Reals are rounded to 6 decimals on the way out so a load/save cycle is byte-stable.
void to_json(nlohmann::json& j, const ResultRecord& r);
void from_json(const nlohmann::json& j, ResultRecord& r);

/// One canonical JSON line (no trailing newline).
std::string to_jsonl_line(const ResultRecord& record);

/// Throws IOError on write failure.
void save_results(const std::filesystem::path& path, const std::vector<ResultRecord>& records);

/// Throws IOError when unreadable or when a line does not parse.
std::vector<ResultRecord> load_results(const std::filesystem::path& path);

/// Append-only record sink shared by concurrent workers.
class ResultAppender {
public:
    /// Throws IOError when the file cannot be opened.
    explicit ResultAppender(const std::filesystem::path& path);

    void append(const ResultRecord& record);

private:
    std::mutex mu_;
    std::ofstream out_;
};

}  // namespace loofaith
