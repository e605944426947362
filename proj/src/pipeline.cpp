#include "loofaith/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <unordered_map>
#include <variant>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "loofaith/dataset.hpp"
#include "loofaith/error.hpp"
#include "loofaith/faithfulness.hpp"
#include "loofaith/report.hpp"

namespace loofaith {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kResultsFile = "results.jsonl";

std::string env_or_empty(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    return v ? std::string(v) : std::string();
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next.store(n);
            }
        }
    };
    if (workers <= 1 || n <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IOError(fmt::format("cannot write {}", path.string()));
    out << text;
    if (!out) throw IOError(fmt::format("write to {} failed", path.string()));
}

ordered_json provider_json(const ProviderConfig& p) {
    ordered_json j;
    j["base_url"] = p.base_url;
    j["model"] = p.model_id;
    j["temperature"] = p.temperature;
    j["max_retries"] = p.max_retries;
    std::vector<long long> backoff;
    for (auto d : p.retry_backoff) backoff.push_back(d.count());
    j["retry_backoff_ms"] = backoff;
    j["request_timeout_ms"] = p.request_timeout.count();
    j["max_in_flight"] = p.max_in_flight;
    j["cache_dir"] = p.cache_dir ? json(p.cache_dir->string()) : json(nullptr);
    j["few_shot_examples"] = p.few_shot.size();
    return j;
}

/// Everything cmd_run / cmd_explain / cmd_filter_hard need before touching samples.
struct Session {
    Dataset dataset;
    std::shared_ptr<ChatBackend> backend;
    std::unique_ptr<EmbeddingProvider> embedder;
    std::unique_ptr<ModelClient> client;
};

// Returns an exit code on failure.
std::variant<Session, int> open_session(const RunConfig& config, std::ostream& out) {
    Session s;
    try {
        config.validate();
        s.dataset = load_dataset(config.dataset_path);
    } catch (const Error& e) {
        fmt::print(out, "error: {}\n", e.what());
        return kExitConfig;
    }
    if (config.limit && s.dataset.samples.size() > *config.limit) s.dataset.samples.resize(*config.limit);

    try {
        s.backend = make_backend(config);
        s.backend->preflight();
    } catch (const Error& e) {
        fmt::print(out, "error: provider setup failed: {}\n", e.what());
        return kExitProvider;
    }
    try {
        s.embedder = make_embedder(config);
        fs::create_directories(config.output_dir);
        const auto cache = config.provider.cache_dir.value_or(config.output_dir / "cache");
        s.client = std::make_unique<ModelClient>(s.backend, cache, config.provider.few_shot);
        write_text(config.output_dir / "config.json", config.effective_json().dump(2) + "\n");
    } catch (const std::exception& e) {
        fmt::print(out, "error: {}\n", e.what());
        return kExitConfig;
    }
    return s;
}

std::vector<ResultRecord> explain_all(const RunConfig& config, Session& s, bool score, std::ostream& out) {
    const auto results_path = config.output_dir / kResultsFile;
    std::unordered_map<std::string, ResultRecord> done;
    if (config.resume && fs::exists(results_path)) {
        for (auto& r : load_results(results_path)) done.insert_or_assign(r.id, std::move(r));
    } else if (fs::exists(results_path)) {
        fs::remove(results_path);
    }

    const auto& samples = s.dataset.samples;
    std::vector<std::optional<ResultRecord>> slots(samples.size());
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (auto it = done.find(samples[i].id); it != done.end()) {
            slots[i] = it->second;
            if (score && !slots[i]->faithfulness && slots[i]->status == Status::ok)
                slots[i] = score_record(from_record(*slots[i]));
        } else {
            pending.push_back(i);
        }
    }
    if (!done.empty())
        fmt::print(out, "resuming: {} of {} samples already done\n", samples.size() - pending.size(), samples.size());

    Explainer explainer(*s.client, s.embedder.get(), config.eval, config.explain);
    {
        ResultAppender appender(results_path);
        parallel_for(pending.size(), config.concurrency, [&](std::size_t k) {
            const auto& sample = samples[pending[k]];
            const auto result = explainer.explain_sample(sample);
            auto record = score ? score_record(result) : to_record(result);
            appender.append(record);
            slots[pending[k]] = std::move(record);
        });
    }

    std::vector<ResultRecord> records;
    records.reserve(slots.size());
    for (auto& r : slots) records.push_back(std::move(*r));
    // canonical order: dataset order
    save_results(results_path, records);
    return records;
}

void print_summary(const std::vector<ResultRecord>& records, std::ostream& out) {
    std::map<Status, std::size_t> by_status;
    std::size_t calls = 0, network = 0;
    for (const auto& r : records) {
        ++by_status[r.status];
        calls += r.calls.total();
        network += r.calls.network_calls();
    }
    fmt::print(out, "samples: {}\n", records.size());
    for (const auto& [status, n] : by_status) fmt::print(out, "  {}: {}\n", to_string(status), n);
    fmt::print(out, "model calls: {} ({} sent, {} from cache)\n", calls, network, calls - network);
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    if (concurrency == 0) throw InvalidParameter("concurrency must be at least 1");
    if (limit && *limit == 0) throw InvalidParameter("limit must be at least 1");
    if (output_dir.empty()) throw InvalidParameter("an output directory is required");
    provider.validate();
    eval.validate();
    explain.validate();
}

json RunConfig::effective_json() const {
    ordered_json j;
    j["dataset"] = dataset_path.string();
    j["output_dir"] = output_dir.string();
    j["provider"] = provider_json(provider);
    j["mock_fixture"] = mock_fixture ? json(mock_fixture->string()) : json(nullptr);
    j["api_key_env"] = api_key_env;
    ordered_json ev;
    ev["fuzzy_threshold"] = eval.fuzzy_threshold;
    ev["embed_threshold"] = eval.embed_threshold;
    ev["articles_to_strip"] = eval.articles_to_strip;
    ev["embedder"] = embed_base_url ? "remote" : "hashed-char-3gram-256";
    ev["embed_base_url"] = embed_base_url ? json(*embed_base_url) : json(nullptr);
    ev["embed_model"] = embed_base_url ? json(embed_model) : json(nullptr);
    j["eval"] = std::move(ev);
    ordered_json ex;
    ex["p"] = explain.p;
    ex["q"] = explain.q;
    ex["run_nk_on"] = explain.run_nk_on == NkMode::all_sufficient_regions ? "all" : "first";
    j["explain"] = std::move(ex);
    j["concurrency"] = concurrency;
    j["limit"] = limit ? json(*limit) : json(nullptr);
    j["resume"] = resume;
    return json::parse(j.dump());
}

std::shared_ptr<ChatBackend> make_backend(const RunConfig& config) {
    if (config.mock_fixture) return FixtureChatBackend::from_file(*config.mock_fixture, config.provider.model_id);
    auto provider = config.provider;
    provider.max_in_flight = std::min(provider.max_in_flight, config.concurrency);
    return std::make_shared<HttpChatBackend>(provider, env_or_empty(config.api_key_env));
}

std::unique_ptr<EmbeddingProvider> make_embedder(const RunConfig& config) {
    if (!config.embed_base_url) return std::make_unique<HashedNgramEmbedder>();
    return std::make_unique<RemoteEmbedder>(RemoteEmbedderConfig{
        *config.embed_base_url, config.embed_model, env_or_empty(config.embed_api_key_env),
        config.provider.request_timeout});
}

ResultRecord score_record(const ExplanationResult& result) {
    auto record = to_record(result);
    if (result.status == Status::ok) record.faithfulness = to_record(sample_faithfulness(result));
    return record;
}

int cmd_run(const RunConfig& config, std::ostream& out) {
    auto opened = open_session(config, out);
    if (auto* code = std::get_if<int>(&opened)) return *code;
    auto& s = std::get<Session>(opened);
    try {
        const auto records = explain_all(config, s, true, out);

        std::vector<std::string> cards;
        std::vector<SampleFaithfulness> scores;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto explanation = from_record(records[i]);
            std::optional<SampleFaithfulness> score;
            if (explanation.status == Status::ok) {
                score = sample_faithfulness(explanation);
                scores.push_back(*score);
            }
            cards.push_back(render_sample_html(s.dataset.samples[i], explanation, score));
        }
        const auto stats = stage_stats(records);
        const auto tables = render_stats_table({{config.provider.model_id, stats}});
        write_text(config.output_dir / "stats.txt", tables.text);
        write_text(config.output_dir / "stats.html", tables.html);
        write_text(config.output_dir / "report.html",
                   render_report_html(fmt::format("Faithfulness report: {}", config.provider.model_id), tables.html,
                                      cards));

        print_summary(records, out);
        out << tables.text;
        const auto corpus = corpus_faithfulness(scores);
        if (corpus.F) {
            fmt::print(out, "F = {:.3f} over {} scored samples\n", *corpus.F, corpus.n_scored);
        } else {
            fmt::print(out, "F undefined: no sample was explained successfully\n");
        }
    } catch (const std::exception& e) {
        fmt::print(out, "error: {}\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_explain(const RunConfig& config, std::ostream& out) {
    auto opened = open_session(config, out);
    if (auto* code = std::get_if<int>(&opened)) return *code;
    try {
        const auto records = explain_all(config, std::get<Session>(opened), false, out);
        print_summary(records, out);
    } catch (const std::exception& e) {
        fmt::print(out, "error: {}\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_filter_hard(const RunConfig& config, std::ostream& out) {
    auto opened = open_session(config, out);
    if (auto* code = std::get_if<int>(&opened)) return *code;
    auto& s = std::get<Session>(opened);
    try {
        Explainer explainer(*s.client, s.embedder.get(), config.eval, config.explain);
        const auto& samples = s.dataset.samples;
        std::vector<int> hard(samples.size(), 0);
        std::atomic<std::size_t> failed{0};
        parallel_for(samples.size(), config.concurrency, [&](std::size_t i) {
            CallLedger ledger;
            try {
                hard[i] = explainer.is_retrieval_hard(samples[i], ledger).hard ? 1 : 0;
            } catch (const ProviderError& e) {
                spdlog::warn("sample {}: {}", samples[i].id, e.what());
                ++failed;
            }
        });
        std::vector<Sample> kept;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (hard[i]) kept.push_back(samples[i]);
        save_dataset(config.output_dir / "retrieval_hard.jsonl", kept);
        fmt::print(out, "samples: {}\nretrieval-hard: {}\nprovider errors: {}\n", samples.size(), kept.size(),
                   failed.load());
    } catch (const std::exception& e) {
        fmt::print(out, "error: {}\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_score(const fs::path& input, const fs::path& output, std::ostream& out) {
    try {
        auto records = load_results(input);
        std::vector<SampleFaithfulness> scores;
        for (auto& r : records) {
            r.faithfulness.reset();
            if (r.status != Status::ok) continue;
            const auto score = sample_faithfulness(from_record(r));
            r.faithfulness = to_record(score);
            scores.push_back(score);
        }
        save_results(output, records);
        const auto corpus = corpus_faithfulness(scores);
        if (corpus.F) {
            fmt::print(out, "F = {:.3f} over {} scored samples\n", *corpus.F, corpus.n_scored);
        } else {
            fmt::print(out, "F undefined: no scorable sample\n");
        }
    } catch (const std::exception& e) {
        fmt::print(out, "error: {}\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_report(const std::vector<ReportInput>& inputs, const std::optional<fs::path>& dataset,
               const fs::path& output_dir, std::ostream& out) {
    try {
        if (inputs.empty()) throw InvalidParameter("report needs at least one results file");
        std::vector<std::pair<std::string, std::vector<ResultRecord>>> runs;
        for (const auto& in : inputs) runs.emplace_back(in.label, load_results(in.results));
        const auto stats = compare_models(runs);
        const auto tables = render_stats_table(stats);
        fs::create_directories(output_dir);
        write_text(output_dir / "stats.txt", tables.text);
        write_text(output_dir / "stats.html", tables.html);

        std::vector<std::string> cards;
        if (dataset) {
            const auto ds = load_dataset(*dataset);
            std::unordered_map<std::string, const Sample*> by_id;
            for (const auto& sample : ds.samples) by_id.emplace(sample.id, &sample);
            for (const auto& [label, records] : runs) {
                cards.push_back(fmt::format("<h2>{}</h2>", html_escape(label)));
                for (const auto& r : records) {
                    const auto it = by_id.find(r.id);
                    if (it == by_id.end()) continue;
                    const auto explanation = from_record(r);
                    std::optional<SampleFaithfulness> score;
                    if (explanation.status == Status::ok) score = sample_faithfulness(explanation);
                    cards.push_back(render_sample_html(*it->second, explanation, score));
                }
            }
        }
        write_text(output_dir / "report.html", render_report_html("Faithfulness report", tables.html, cards));
        out << tables.text;
    } catch (const std::exception& e) {
        fmt::print(out, "error: {}\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}

}  // namespace loofaith
