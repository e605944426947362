#include "loofaith/provider.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "loofaith/digest.hpp"
#include "loofaith/error.hpp"
#include "utf8.hpp"

namespace loofaith {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

// ---------------------------------------------------------------------------
// Prompt

namespace {

constexpr std::string_view kQuestionLabel = "Question: ";

std::string user_content(std::string_view question, const std::optional<std::string>& context) {
    std::string out;
    if (context) {
        out += kContextPrefix;
        out += *context;
        out += ' ';
    }
    out += kQuestionLabel;
    out += question;
    return out;
}

}  // namespace

std::vector<ChatMessage> build_prompt(std::string_view question, const std::optional<std::string>& context,
                                      const std::vector<FewShotExample>& few_shot) {
    if (question.empty()) throw InvalidParameter("question must not be empty");
    std::vector<ChatMessage> messages;
    messages.reserve(2 + 2 * few_shot.size());
    messages.push_back({Role::system, std::string(kSystemPrompt)});
    for (const auto& demo : few_shot) {
        messages.push_back({Role::user, user_content(demo.question, demo.context)});
        messages.push_back({Role::assistant, demo.response});
    }
    messages.push_back({Role::user, user_content(question, context)});
    return messages;
}

PromptParts extract_prompt(const std::vector<ChatMessage>& messages) {
    const auto it = std::find_if(messages.rbegin(), messages.rend(),
                                 [](const ChatMessage& m) { return m.role == Role::user; });
    if (it == messages.rend()) throw InvalidParameter("prompt has no user message");
    std::string_view content = it->content;

    PromptParts parts;
    if (content.starts_with(kContextPrefix)) {
        content.remove_prefix(kContextPrefix.size());
        const std::string separator = " " + std::string(kQuestionLabel);
        const auto pos = content.rfind(separator);
        if (pos != std::string_view::npos) {
            parts.context = std::string(content.substr(0, pos));
            parts.question = std::string(content.substr(pos + separator.size()));
            return parts;
        }
        parts.context = std::string(content);
        return parts;
    }
    if (content.starts_with(kQuestionLabel)) content.remove_prefix(kQuestionLabel.size());
    parts.question = std::string(content);
    return parts;
}

// ---------------------------------------------------------------------------
// Response parsing

namespace {

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
    return s;
}

// Strips whitespace, then any quotes around the text, then trailing periods.
std::string_view strip_decorations(std::string_view s) {
    static constexpr std::string_view kQuotes[] = {"\"", "'", "`", "“", "”", "‘", "’"};
    for (bool changed = true; changed;) {
        changed = false;
        s = trim(s);
        for (auto q : kQuotes) {
            if (s.size() >= q.size() && s.starts_with(q)) {
                s.remove_prefix(q.size());
                changed = true;
            }
            if (s.size() >= q.size() && s.ends_with(q)) {
                s.remove_suffix(q.size());
                changed = true;
            }
        }
        while (!s.empty() && s.back() == '.') {
            s.remove_suffix(1);
            changed = true;
        }
    }
    return s;
}

std::string_view strip_trailing_comma(std::string_view s) {
    s = trim(s);
    while (!s.empty() && s.back() == ',') s = trim(s.substr(0, s.size() - 1));
    return s;
}

}  // namespace

ModelResponse parse_response(std::string_view raw) {
    static constexpr std::string_view kThought = "thought:";
    static constexpr std::string_view kKeywords = "keywords:";
    static constexpr std::string_view kAnswer = "short answer:";

    std::string lower(raw);
    for (char& c : lower) c = utf8::ascii_lower(c);

    const auto t = lower.find(kThought);
    const auto t_end = t == std::string::npos ? 0 : t + kThought.size();
    const auto k = lower.find(kKeywords, t_end);
    const auto k_end = k == std::string::npos ? t_end : k + kKeywords.size();
    const auto s = lower.find(kAnswer, k_end);
    if (s == std::string::npos) throw ParseError("response has no 'Short answer:' label");

    ModelResponse out;
    out.raw = std::string(raw);
    if (t != std::string::npos) {
        const auto t_stop = k != std::string::npos ? k : s;
        out.thought = std::string(strip_trailing_comma(raw.substr(t_end, t_stop - t_end)));
    }
    if (k != std::string::npos) {
        std::string_view list = strip_trailing_comma(raw.substr(k_end, s - k_end));
        if (list.starts_with('[') && list.ends_with(']')) list = list.substr(1, list.size() - 2);
        std::size_t start = 0;
        for (std::size_t i = 0; i <= list.size(); ++i) {
            if (i != list.size() && list[i] != ',') continue;
            const auto item = strip_decorations(list.substr(start, i - start));
            start = i + 1;
            if (item.empty()) continue;
            if (item.size() > kKeywordWarnLength)
                out.warnings.push_back(fmt::format("keyword longer than {} characters: '{}'", kKeywordWarnLength, item));
            out.keywords.emplace_back(item);
        }
    } else {
        out.warnings.emplace_back("response has no 'Keywords:' label; keyword list left empty");
    }
    out.answer = std::string(strip_decorations(raw.substr(s + kAnswer.size())));
    if (out.answer.empty()) throw ParseError("response has an empty short answer");
    return out;
}

std::string render_response(const ModelResponse& response) {
    std::string keywords;
    for (const auto& k : response.keywords) {
        if (!keywords.empty()) keywords += ", ";
        keywords += k;
    }
    return fmt::format("Thought: {}\nKeywords: {}\nShort answer: {}", response.thought, keywords, response.answer);
}

// ---------------------------------------------------------------------------
// Ledger

void CallLedger::record(Stage stage, bool cache_hit) {
    switch (stage) {
        case Stage::no_context: ++calls_no_context; break;
        case Stage::original_context: ++calls_original_context; break;
        case Stage::sufficient_region: ++calls_sr; break;
        case Stage::necessary_keyword: ++calls_nk; break;
    }
    if (cache_hit) ++cache_hits;
}

void to_json(json& j, const CallLedger& l) {
    j = json{{"no_context", l.calls_no_context},
             {"original_context", l.calls_original_context},
             {"sufficient_regions", l.calls_sr},
             {"necessary_keywords", l.calls_nk},
             {"cache_hits", l.cache_hits},
             {"total", l.total()}};
}

void from_json(const json& j, CallLedger& l) {
    j.at("no_context").get_to(l.calls_no_context);
    j.at("original_context").get_to(l.calls_original_context);
    j.at("sufficient_regions").get_to(l.calls_sr);
    j.at("necessary_keywords").get_to(l.calls_nk);
    j.at("cache_hits").get_to(l.cache_hits);
}

// ---------------------------------------------------------------------------
// Backends

void ProviderConfig::validate() const {
    if (max_retries < 0) throw InvalidParameter("max_retries must be >= 0");
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw InvalidParameter("temperature must be in [0, 2]");
    if (request_timeout.count() <= 0) throw InvalidParameter("request timeout must be positive");
    if (max_in_flight == 0 || max_in_flight > 1024) throw InvalidParameter("max_in_flight must be in [1, 1024]");
    if (model_id.empty()) throw InvalidParameter("model id must not be empty");
}

HttpChatBackend::HttpChatBackend(ProviderConfig config, std::string api_key)
    : config_(std::move(config)),
      api_key_(std::move(api_key)),
      endpoint_(http::parse_endpoint(config_.base_url)),
      in_flight_(static_cast<std::ptrdiff_t>(config_.max_in_flight)) {
    config_.validate();
}

json HttpChatBackend::request_body(const std::vector<ChatMessage>& messages) const {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return json{{"model", config_.model_id}, {"messages", std::move(msgs)}, {"temperature", config_.temperature}};
}

std::string HttpChatBackend::complete(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) throw InvalidParameter("cannot send an empty message list");
    const auto body = request_body(messages).dump();
    http::Headers headers;
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        http::Response res;
        {
            in_flight_.acquire();
            res = http::post_json(endpoint_, "/chat/completions", body, headers, config_.request_timeout);
            in_flight_.release();
        }
        if (res.ok()) {
            try {
                const auto doc = json::parse(res.body);
                return doc.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const json::exception& e) {
                throw ProviderError(fmt::format("malformed chat completion payload: {}", e.what()));
            }
        }
        last_error = res.status == 0 ? res.transport_error
                                     : fmt::format("HTTP {}: {}", res.status, res.body.substr(0, 200));
        if (!res.transient()) throw ProviderError(last_error);
        if (attempt < config_.max_retries && !config_.retry_backoff.empty()) {
            const auto idx = std::min(static_cast<std::size_t>(attempt), config_.retry_backoff.size() - 1);
            std::this_thread::sleep_for(config_.retry_backoff[idx]);
        }
    }
    throw ProviderError(fmt::format("giving up after {} attempts: {}", config_.max_retries + 1, last_error));
}

void HttpChatBackend::preflight() {
    http::Headers headers;
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
    const auto res = http::get(endpoint_, "/models", headers, config_.request_timeout);
    // Any HTTP status proves the endpoint is reachable.
    if (res.status == 0) throw ProviderError(fmt::format("endpoint {} unreachable: {}", config_.base_url, res.transport_error));
}

FixtureChatBackend::FixtureChatBackend(const json& fixture, std::string model_id, std::string default_response)
    : model_id_(std::move(model_id)), default_response_(std::move(default_response)) {
    if (!fixture.is_array()) throw InvalidParameter("mock fixture must be a JSON list");
    for (const auto& entry : fixture) {
        const auto question = entry.at("question").get<std::string>();
        std::optional<std::string> digest;
        if (entry.contains("context") && !entry.at("context").is_null()) {
            digest = sha256_hex(entry.at("context").get<std::string>());
        } else if (entry.contains("context_sha256") && !entry.at("context_sha256").is_null()) {
            digest = entry.at("context_sha256").get<std::string>();
        }
        table_[key(question, digest)] = entry.at("response").get<std::string>();
    }
}

std::unique_ptr<FixtureChatBackend> FixtureChatBackend::from_file(const fs::path& path, std::string model_id) {
    std::ifstream in(path);
    if (!in) throw IOError(fmt::format("cannot open mock fixture {}", path.string()));
    try {
        return std::make_unique<FixtureChatBackend>(json::parse(in), std::move(model_id));
    } catch (const json::exception& e) {
        throw IOError(fmt::format("invalid mock fixture {}: {}", path.string(), e.what()));
    }
}

std::string FixtureChatBackend::key(std::string_view question, const std::optional<std::string>& context_digest) {
    return fmt::format("{}\x1f{}", question, context_digest.value_or("-"));
}

std::string FixtureChatBackend::complete(const std::vector<ChatMessage>& messages) {
    const auto parts = extract_prompt(messages);
    std::optional<std::string> digest;
    if (parts.context) digest = sha256_hex(*parts.context);
    const auto it = table_.find(key(parts.question, digest));
    return it == table_.end() ? default_response_ : it->second;
}

ScriptedChatBackend::ScriptedChatBackend(Script script, std::string model_id)
    : script_(std::move(script)), model_id_(std::move(model_id)) {}

std::string ScriptedChatBackend::complete(const std::vector<ChatMessage>& messages) {
    return script_(extract_prompt(messages));
}

// ---------------------------------------------------------------------------
// Cache

namespace {

ordered_json messages_json(const std::vector<ChatMessage>& messages) {
    ordered_json arr = ordered_json::array();
    for (const auto& m : messages) {
        ordered_json o;
        o["role"] = to_string(m.role);
        o["content"] = m.content;
        arr.push_back(std::move(o));
    }
    return arr;
}

void write_atomically(const fs::path& target, const std::string& bytes) {
    std::ostringstream suffix;
    suffix << ".tmp." << std::this_thread::get_id();
    const fs::path tmp = target.string() + suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IOError(fmt::format("cannot write cache file {}", tmp.string()));
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IOError(fmt::format("cannot write cache file {}", tmp.string()));
    }
    fs::rename(tmp, target);
}

}  // namespace

std::string request_digest(std::string_view model_id, const std::vector<ChatMessage>& messages) {
    return sha256_hex(fmt::format("{}\n{}", model_id, messages_json(messages).dump()));
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IOError(fmt::format("cannot create cache directory {}: {}", dir_.string(), ec.message()));
}

std::optional<std::string> ResponseCache::lookup(const std::string& digest) const {
    std::ifstream in(dir_ / digest, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void ResponseCache::store(const std::string& digest, const std::string& raw, const json& metadata) const {
    write_atomically(dir_ / (digest + ".json"), metadata.dump(2) + "\n");
    write_atomically(dir_ / digest, raw);
}

// ---------------------------------------------------------------------------

ModelClient::ModelClient(std::shared_ptr<ChatBackend> backend, std::optional<fs::path> cache_dir,
                         std::vector<FewShotExample> few_shot)
    : backend_(std::move(backend)), few_shot_(std::move(few_shot)) {
    if (!backend_) throw InvalidParameter("model client needs a backend");
    model_id_ = backend_->model_id();
    if (cache_dir) cache_.emplace(*cache_dir);
}

std::string ModelClient::complete(const std::vector<ChatMessage>& messages, Stage stage, CallLedger& ledger) {
    if (messages.empty()) throw InvalidParameter("cannot send an empty message list");
    std::string digest;
    if (cache_) {
        digest = request_digest(model_id_, messages);
        if (auto hit = cache_->lookup(digest)) {
            ledger.record(stage, true);
            return *std::move(hit);
        }
    }
    auto raw = backend_->complete(messages);
    ledger.record(stage, false);
    if (cache_) {
        json meta;
        meta["model"] = model_id_;
        meta["messages"] = json::parse(messages_json(messages).dump());
        cache_->store(digest, raw, meta);
    }
    return raw;
}

std::string ModelClient::ask(std::string_view question, const std::optional<std::string>& context, Stage stage,
                             CallLedger& ledger) {
    return complete(build_prompt(question, context, few_shot_), stage, ledger);
}

}  // namespace loofaith
