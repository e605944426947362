// loofaith: explain a black-box model's context-dependent answers and score
// the faithfulness of its self-reported keywords.
//
//   loofaith run          --dataset qa.jsonl --out runs/gpt-4o --model gpt-4o
//   loofaith run          --dataset qa.jsonl --out runs/mock --mock fixture.json
//   loofaith filter-hard  --dataset qa.jsonl --out runs/gpt-4o
//   loofaith explain      --dataset qa.jsonl --out runs/gpt-4o
//   loofaith score        --results runs/gpt-4o/results.jsonl --output scored.jsonl
//   loofaith report       --results runs/a/results.jsonl --label A --results runs/b/results.jsonl --label B --out cmp

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "loofaith/error.hpp"
#include "loofaith/pipeline.hpp"

namespace {

using namespace loofaith;

struct RunFlags {
    RunConfig config;
    std::string nk_mode = "all";
    std::string few_shot_path;
    std::string cache_dir;
    std::vector<int> backoff_ms{1000, 2000, 4000};
    int timeout_ms = 60000;
    bool force = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    auto& c = f.config;
    cmd->add_option("--dataset", c.dataset_path, "QA samples, one JSON object per line")->required();
    cmd->add_option("--out", c.output_dir, "Output directory")->required();
    cmd->add_option("--model", c.provider.model_id, "Model identifier sent to the endpoint")->capture_default_str();
    cmd->add_option("--base-url", c.provider.base_url, "Chat-completions base URL")->capture_default_str();
    cmd->add_option("--p", c.explain.p, "Candidate regions per context")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--q", c.explain.q, "Keyword groups per region")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--nk-mode", f.nk_mode, "Regions to search for necessary keywords")
        ->check(CLI::IsMember({"all", "first"}))
        ->capture_default_str();
    cmd->add_option("--fuzzy-threshold", c.eval.fuzzy_threshold, "Fuzzy match threshold (percent)")
        ->capture_default_str()
        ->check(CLI::Range(0, 100));
    cmd->add_option("--embed-threshold", c.eval.embed_threshold, "Embedding cosine threshold")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--embed-url", c.embed_base_url, "Embeddings base URL (default: offline hashed n-grams)");
    cmd->add_option("--embed-model", c.embed_model, "Embedding model identifier")->capture_default_str();
    cmd->add_option("--concurrency", c.concurrency, "Samples processed in parallel")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--limit", c.limit, "Process at most this many samples")->check(CLI::PositiveNumber);
    cmd->add_flag("--resume,!--force", c.resume, "Skip samples already in results.jsonl (default) or redo them");
    cmd->add_option("--mock", c.mock_fixture, "Replay responses from a mock fixture instead of calling the API")
        ->check(CLI::ExistingFile);
    cmd->add_option("--api-key-env", c.api_key_env, "Environment variable holding the API key")->capture_default_str();
    cmd->add_option("--temperature", c.provider.temperature, "Sampling temperature")->capture_default_str();
    cmd->add_option("--max-retries", c.provider.max_retries, "Retries on transient failures")->capture_default_str();
    cmd->add_option("--retry-backoff-ms", f.backoff_ms, "Backoff schedule in milliseconds")->capture_default_str();
    cmd->add_option("--timeout-ms", f.timeout_ms, "Per-request timeout")->capture_default_str();
    cmd->add_option("--cache-dir", f.cache_dir, "Response cache directory (default: <out>/cache)");
    cmd->add_option("--few-shot", f.few_shot_path,
                    "JSON list of {question, context?, response} demonstrations prepended to every prompt")
        ->check(CLI::ExistingFile);
}

// Resolves the flags that need post-processing.
void finish(RunFlags& f) {
    auto& c = f.config;
    c.explain.run_nk_on = f.nk_mode == "first" ? NkMode::first_sufficient_region : NkMode::all_sufficient_regions;
    c.provider.retry_backoff.clear();
    for (int ms : f.backoff_ms) c.provider.retry_backoff.emplace_back(ms);
    c.provider.request_timeout = std::chrono::milliseconds(f.timeout_ms);
    if (!f.cache_dir.empty()) c.provider.cache_dir = f.cache_dir;
    if (!f.few_shot_path.empty()) {
        std::ifstream in(f.few_shot_path);
        const auto doc = nlohmann::json::parse(in);
        for (const auto& e : doc) {
            FewShotExample demo;
            demo.question = e.at("question").get<std::string>();
            if (e.contains("context") && !e.at("context").is_null()) demo.context = e.at("context").get<std::string>();
            demo.response = e.at("response").get<std::string>();
            c.provider.few_shot.push_back(std::move(demo));
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perturbation-based explanations and self-explanation faithfulness for black-box LLMs"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log diagnostics to stderr");

    RunFlags run, filter, explain;
    auto* run_cmd = app.add_subcommand("run", "Filter, explain, score and report end to end");
    add_run_flags(run_cmd, run);
    auto* filter_cmd = app.add_subcommand("filter-hard", "Keep samples the model cannot answer without context");
    add_run_flags(filter_cmd, filter);
    auto* explain_cmd = app.add_subcommand("explain", "Find sufficient regions and necessary keywords");
    add_run_flags(explain_cmd, explain);

    std::string score_in, score_out;
    auto* score_cmd = app.add_subcommand("score", "Compute faithfulness for a results file");
    score_cmd->add_option("--results", score_in, "Results written by explain or run")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--output", score_out, "Where to write the scored results (default: overwrite input)");

    std::vector<std::string> report_results, report_labels;
    std::string report_dataset, report_out;
    auto* report_cmd = app.add_subcommand("report", "Render stage statistics and highlighted explanations");
    report_cmd->add_option("--results", report_results, "Results file, one per model")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--label", report_labels, "Column label per results file (default: file path)");
    report_cmd->add_option("--dataset", report_dataset, "Dataset used for the run, to render per-sample cards");
    report_cmd->add_option("--out", report_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (*run_cmd) {
            finish(run);
            return cmd_run(run.config, std::cout);
        }
        if (*filter_cmd) {
            finish(filter);
            return cmd_filter_hard(filter.config, std::cout);
        }
        if (*explain_cmd) {
            finish(explain);
            return cmd_explain(explain.config, std::cout);
        }
        if (*score_cmd) return cmd_score(score_in, score_out.empty() ? score_in : score_out, std::cout);
        if (*report_cmd) {
            if (!report_labels.empty() && report_labels.size() != report_results.size()) {
                std::cerr << "error: give one --label per --results file\n";
                return kExitConfig;
            }
            std::vector<ReportInput> inputs;
            for (std::size_t i = 0; i < report_results.size(); ++i)
                inputs.push_back({report_labels.empty() ? report_results[i] : report_labels[i], report_results[i]});
            std::optional<std::filesystem::path> ds;
            if (!report_dataset.empty()) ds = report_dataset;
            return cmd_report(inputs, ds, report_out, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
