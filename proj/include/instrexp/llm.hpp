#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace instrexp::llm {

inline constexpr std::string_view kSystemPrompt = "You are a helpful assistant.";
inline constexpr int kDefaultMaxTokens = 256;

struct ChatRequest {
    std::string system_prompt{kSystemPrompt};
    std::string user_prompt;
    double temperature = 0.6;
    int max_tokens = kDefaultMaxTokens;
    std::string model_id;
    /// Forwarded to backends that support seeded sampling.
    std::optional<std::uint64_t> seed;

    /// Throws Error(InvalidArgument) on empty prompts, non-finite or
    /// out-of-range temperature, or non-positive max_tokens.
    void validate() const;
};

enum class GuidingSource { HandWritten, Bootstrapped };

struct GuidingInstruction {
    std::string guiding_id;
    std::string text;
    GuidingSource source = GuidingSource::HandWritten;

    bool operator==(const GuidingInstruction&) const = default;
};

/// "g01", "g02", ...
std::string guiding_id(std::size_t index);

/// Collapse the text to one paragraph and assign ids in order.
std::vector<GuidingInstruction> make_guiding(const std::vector<std::string>& texts, GuidingSource source);

// ---------------------------------------------------------------------------
// Prompt construction and reply parsing. All pure.

/// Meta-prompt asking the LLM for `count` rephrasing directives. The wording
/// (including "cononical") is kept verbatim unless `fix_typos` is set.
std::string guiding_meta_prompt(int count, bool fix_typos = false);

inline constexpr std::string_view kGenerationHeader =
    "Please follow the description of the given instruction to modify the input text behind the token [TEXT].";
inline constexpr std::string_view kKeepPlaceholders = "Keep the content within brackets (including '{}') unchanged.";

ChatRequest build_generation_prompt(const GuidingInstruction& g, std::string_view masked_text, bool has_placeholders);

/// Items introduced by "N." or "N)" markers, in order. Markdown bold markers
/// are stripped; an item continues over following non-blank lines and ends at
/// a blank line or the next marker. Text without any marker comes back as a
/// single item; empty input gives an empty list.
std::vector<std::string> parse_enumerated_response(std::string_view text);

// ---------------------------------------------------------------------------
// Backends

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// One completion. Throws Error(BackendUnavailable | BadResponse) or RateLimitedError.
    virtual std::string complete(const ChatRequest& req) = 0;
    virtual std::string name() const = 0;
};

struct MockFixture {
    std::string substring;
    std::optional<double> temperature;
    std::string response;
};

/// Canned replies. The first fixture whose substring occurs in the user prompt
/// (and whose temperature, if set, equals the request's) wins.
class MockChatBackend : public ChatBackend {
public:
    explicit MockChatBackend(std::vector<MockFixture> fixtures) : fixtures_(std::move(fixtures)) {}

    /// JSONL: {"match": {"substring": str, "temperature": float|null}, "response": str}
    static std::unique_ptr<MockChatBackend> from_file(const std::string& path);

    std::string complete(const ChatRequest& req) override;
    std::string name() const override { return "mock"; }

    std::size_t calls() const;

private:
    std::vector<MockFixture> fixtures_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

struct HttpEndpoint {
    std::string url;  // full chat-completions URL
    std::string api_key;
    std::string model;
    std::chrono::seconds timeout{60};

    /// INSTREXP_LLM_URL / INSTREXP_LLM_KEY / INSTREXP_LLM_MODEL.
    static HttpEndpoint from_env();
};

/// OpenAI-style chat-completions client.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

    std::string complete(const ChatRequest& req) override;
    std::string name() const override { return "http"; }

private:
    HttpEndpoint endpoint_;
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};
};

struct GatewayOptions {
    RetryPolicy retry;
    int max_concurrency = 4;
    /// Minimum spacing between request starts; zero disables the limiter.
    std::chrono::milliseconds min_interval{0};
    std::string default_model;
    std::function<void(std::chrono::milliseconds)> sleep;  // test hook; defaults to this_thread::sleep_for
};

/// Validates requests, bounds concurrency, rate-limits and retries transient failures.
class ChatGateway {
public:
    explicit ChatGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});

    std::string chat_generate(ChatRequest req);

    /// Ask the backend for `count` guiding instructions and parse the enumerated reply.
    /// Returns at most `count` items. Throws Error(ParseFailure) if none are recovered.
    std::vector<GuidingInstruction> bootstrap_guiding_instructions(int count, bool fix_typos = false,
                                                                   double temperature = 0.6);

    const std::string& backend_name() const { return backend_name_; }
    int max_concurrency() const { return options_.max_concurrency; }

private:
    void pace();
    void pause(std::chrono::milliseconds d);

    std::shared_ptr<ChatBackend> backend_;
    std::string backend_name_;
    GatewayOptions options_;
    std::counting_semaphore<> slots_;
    std::mutex pace_mu_;
    std::chrono::steady_clock::time_point last_start_{};
};

}  // namespace instrexp::llm
