#pragma once

// Access to the black-box model: prompt construction, transport backends
// (HTTP, fixture mock, scripted function), a content-addressed response cache,
// per-sample call accounting and parsing of the model's reply.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "loofaith/http.hpp"

namespace loofaith {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ModelResponse {
    std::string thought;
    std::vector<std::string> keywords;
    std::string answer;
    std::string raw;
    std::vector<std::string> warnings;
};

/// One demonstration prepended to every prompt.
struct FewShotExample {
    std::string question;
    std::optional<std::string> context;
    std::string response;  // assistant reply in the Thought/Keywords/Short answer format
};

inline constexpr std::string_view kSystemPrompt =
    "To answer the given question, first generate a thought that explains the answer according to "
    "the text, then identify the most important words (keywords) from the text that helped you with "
    "your thought, and finally provide a short answer.";

inline constexpr std::string_view kContextPrefix =
    "The following text might be useful in answering the question: ";

/// System message followed by the demonstrations and the user turn. Throws
/// InvalidParameter on an empty question.
std::vector<ChatMessage> build_prompt(std::string_view question, const std::optional<std::string>& context,
                                      const std::vector<FewShotExample>& few_shot = {});

/// Question and context recovered from a user message produced by build_prompt.
struct PromptParts {
    std::string question;
    std::optional<std::string> context;
};

/// Inverse of build_prompt for the final user message. Throws InvalidParameter
/// when no user message is present.
PromptParts extract_prompt(const std::vector<ChatMessage>& messages);

/// Throws ParseError when the "Short answer:" label or the answer text is missing.
ModelResponse parse_response(std::string_view raw);

/// Formats a response back into the assistant template.
std::string render_response(const ModelResponse& response);

/// Longest keyword accepted without a parse warning.
inline constexpr std::size_t kKeywordWarnLength = 40;

// ---------------------------------------------------------------------------

enum class Stage { no_context, original_context, sufficient_region, necessary_keyword };

/// Per-sample model call accounting. Call counters count logical calls,
/// whether or not they were served from the cache.
struct CallLedger {
    std::size_t calls_no_context = 0;
    std::size_t calls_original_context = 0;
    std::size_t calls_sr = 0;
    std::size_t calls_nk = 0;
    std::size_t cache_hits = 0;

    void record(Stage stage, bool cache_hit);
    std::size_t total() const { return calls_no_context + calls_original_context + calls_sr + calls_nk; }
    std::size_t network_calls() const { return total() - cache_hits; }
    friend bool operator==(const CallLedger&, const CallLedger&) = default;
};

void to_json(nlohmann::json& j, const CallLedger& ledger);
void from_json(const nlohmann::json& j, CallLedger& ledger);

// ---------------------------------------------------------------------------

struct ProviderConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model_id = "gpt-4o";
    double temperature = 0.0;
    int max_retries = 3;
    std::vector<std::chrono::milliseconds> retry_backoff{std::chrono::milliseconds(1000),
                                                         std::chrono::milliseconds(2000),
                                                         std::chrono::milliseconds(4000)};
    std::optional<std::filesystem::path> cache_dir;
    std::chrono::milliseconds request_timeout{60000};
    std::size_t max_in_flight = 4;
    std::vector<FewShotExample> few_shot;

    /// Throws InvalidParameter when a field is out of range.
    void validate() const;
};

/// Something that turns a message list into a raw reply.
/// Implementations must be safe for concurrent calls.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    virtual std::string model_id() const = 0;
    /// Throws ProviderError.
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
    /// Cheap reachability check before a run. Throws ProviderError.
    virtual void preflight() {}
};

/// Chat-completions client: POST {base_url}/chat/completions.
class HttpChatBackend final : public ChatBackend {
public:
    HttpChatBackend(ProviderConfig config, std::string api_key);

    std::string model_id() const override { return config_.model_id; }
    std::string complete(const std::vector<ChatMessage>& messages) override;
    void preflight() override;

    /// Request body for the given messages.
    nlohmann::json request_body(const std::vector<ChatMessage>& messages) const;

private:
    ProviderConfig config_;
    std::string api_key_;
    http::Endpoint endpoint_;
    std::counting_semaphore<1024> in_flight_;
};

/// Offline replay keyed on (question, sha256(context) or null).
/// Fixture file: JSON list of {question, context_sha256 | null, response};
/// an entry may give the plain `context` instead of its digest.
class FixtureChatBackend final : public ChatBackend {
public:
    static constexpr std::string_view kDefaultResponse = "Short answer: UNKNOWN";

    explicit FixtureChatBackend(const nlohmann::json& fixture, std::string model_id = "mock",
                                std::string default_response = std::string(kDefaultResponse));

    /// Throws IOError when the file cannot be read or parsed.
    static std::unique_ptr<FixtureChatBackend> from_file(const std::filesystem::path& path,
                                                         std::string model_id = "mock");

    std::string model_id() const override { return model_id_; }
    std::string complete(const std::vector<ChatMessage>& messages) override;

    std::size_t size() const { return table_.size(); }

private:
    static std::string key(std::string_view question, const std::optional<std::string>& context_digest);

    std::string model_id_;
    std::string default_response_;
    std::unordered_map<std::string, std::string> table_;
};

/// Replies computed by a function of the prompt; for tests and oracles.
class ScriptedChatBackend final : public ChatBackend {
public:
    using Script = std::function<std::string(const PromptParts&)>;

    explicit ScriptedChatBackend(Script script, std::string model_id = "scripted");

    std::string model_id() const override { return model_id_; }
    std::string complete(const std::vector<ChatMessage>& messages) override;

private:
    Script script_;
    std::string model_id_;
};

// ---------------------------------------------------------------------------

/// Hex digest identifying a request: sha256(model_id "\n" canonical messages JSON).
std::string request_digest(std::string_view model_id, const std::vector<ChatMessage>& messages);

/// One file per digest holding the raw reply, plus a "<digest>.json" sidecar
/// with the request. Writes go through a rename so concurrent writers of the
/// same key never expose a partial file.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> lookup(const std::string& digest) const;
    void store(const std::string& digest, const std::string& raw, const nlohmann::json& metadata) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

/// The model M as seen by the explainer: backend + optional cache + ledger.
class ModelClient {
public:
    ModelClient(std::shared_ptr<ChatBackend> backend, std::optional<std::filesystem::path> cache_dir = {},
                std::vector<FewShotExample> few_shot = {});

    const std::string& model_id() const { return model_id_; }
    ChatBackend& backend() { return *backend_; }

    /// Raw reply for `messages`, from the cache when possible. Throws ProviderError.
    std::string complete(const std::vector<ChatMessage>& messages, Stage stage, CallLedger& ledger);

    /// build_prompt + complete.
    std::string ask(std::string_view question, const std::optional<std::string>& context, Stage stage,
                    CallLedger& ledger);

private:
    std::shared_ptr<ChatBackend> backend_;
    std::string model_id_;
    std::optional<ResponseCache> cache_;
    std::vector<FewShotExample> few_shot_;
};

}  // namespace loofaith
