#include "instrexp/llm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "http.hpp"
#include "instrexp/error.hpp"
#include "instrexp/text.hpp"

namespace instrexp::llm {

using nlohmann::json;

void ChatRequest::validate() const {
    if (text::trim(system_prompt).empty()) throw Error(ErrorCode::InvalidArgument, "system prompt is empty");
    if (text::trim(user_prompt).empty()) throw Error(ErrorCode::InvalidArgument, "user prompt is empty");
    if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0) {
        throw Error(ErrorCode::InvalidArgument, "temperature must be finite and in [0, 2]");
    }
    if (max_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_tokens must be positive");
}

std::string guiding_id(std::size_t index) {
    std::string n = std::to_string(index + 1);
    return "g" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n;
}

std::vector<GuidingInstruction> make_guiding(const std::vector<std::string>& texts, GuidingSource source) {
    std::vector<GuidingInstruction> out;
    for (const auto& t : texts) {
        auto norm = text::normalize(t);
        if (norm.empty()) continue;
        out.push_back({guiding_id(out.size()), std::move(norm), source});
    }
    return out;
}

std::string guiding_meta_prompt(int count, bool fix_typos) {
    return "Generate " + std::to_string(count) +
           " instructions about how to rephrase short text. Your response should be " +
           (fix_typos ? "canonical" : "cononical") + " and formatted as enumerations.";
}

ChatRequest build_generation_prompt(const GuidingInstruction& g, std::string_view masked_text, bool has_placeholders) {
    if (masked_text.empty()) throw Error(ErrorCode::InvalidArgument, "masked text is empty");
    ChatRequest req;
    req.user_prompt = std::string(kGenerationHeader) + "\n" + g.text;
    if (has_placeholders) req.user_prompt += " " + std::string(kKeepPlaceholders);
    req.user_prompt += "\n[TEXT]: ";
    req.user_prompt += masked_text;
    return req;
}

std::vector<std::string> parse_enumerated_response(std::string_view reply) {
    static const std::regex marker(R"(^\s*\d+[.)](\s+|$))");

    std::vector<std::string> items;
    std::optional<std::string> current;
    auto close = [&] {
        if (current) items.push_back(std::move(*current));
        current.reset();
    };

    std::size_t start = 0;
    bool any_marker = false;
    while (start <= reply.size()) {
        auto end = reply.find('\n', start);
        if (end == std::string_view::npos) end = reply.size();
        std::string line(reply.substr(start, end - start));
        start = end + 1;

        std::smatch m;
        if (std::regex_search(line, m, marker)) {
            any_marker = true;
            close();
            current = text::trim(line.substr(static_cast<std::size_t>(m.length(0))));
        } else if (text::trim(line).empty()) {
            close();
        } else if (current) {
            auto piece = text::trim(line);
            if (!current->empty()) current->push_back(' ');
            current->append(piece);
        }
        if (end == reply.size()) break;
    }
    close();

    if (!any_marker) {
        auto whole = text::trim(reply);
        if (whole.empty()) return {};
        return {whole};
    }

    std::vector<std::string> out;
    for (auto& item : items) {
        std::string stripped;
        for (std::size_t i = 0; i < item.size(); ++i) {
            if (item[i] == '*' && i + 1 < item.size() && item[i + 1] == '*') {
                ++i;
                continue;
            }
            stripped.push_back(item[i]);
        }
        stripped = text::trim(stripped);
        if (!stripped.empty()) out.push_back(std::move(stripped));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<MockChatBackend> MockChatBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open mock fixtures '" + path + "'");
    std::vector<MockFixture> fixtures;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            MockFixture f;
            const auto& match = j.at("match");
            f.substring = match.value("substring", "");
            if (match.contains("temperature") && !match.at("temperature").is_null()) {
                f.temperature = match.at("temperature").get<double>();
            }
            f.response = j.at("response").get<std::string>();
            fixtures.push_back(std::move(f));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::SchemaError, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return std::make_unique<MockChatBackend>(std::move(fixtures));
}

std::string MockChatBackend::complete(const ChatRequest& req) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    for (const auto& f : fixtures_) {
        if (req.user_prompt.find(f.substring) == std::string::npos) continue;
        if (f.temperature && std::abs(*f.temperature - req.temperature) > 1e-9) continue;
        return f.response;
    }
    throw Error(ErrorCode::BadResponse, "no mock fixture matches the request");
}

std::size_t MockChatBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

HttpEndpoint HttpEndpoint::from_env() {
    auto env = [](const char* name) {
        const char* v = std::getenv(name);
        return std::string(v ? v : "");
    };
    HttpEndpoint ep;
    ep.url = env("INSTREXP_LLM_URL");
    ep.api_key = env("INSTREXP_LLM_KEY");
    ep.model = env("INSTREXP_LLM_MODEL");
    if (ep.url.empty()) throw Error(ErrorCode::InvalidArgument, "INSTREXP_LLM_URL is not set");
    return ep;
}

std::string HttpChatBackend::complete(const ChatRequest& req) {
    json body = {
        {"model", req.model_id.empty() ? endpoint_.model : req.model_id},
        {"messages", json::array({{{"role", "system"}, {"content", req.system_prompt}},
                                  {{"role", "user"}, {"content", req.user_prompt}}})},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens},
    };
    if (req.seed) body["seed"] = *req.seed;
    auto reply = http::post_json(endpoint_.url, endpoint_.api_key, body, endpoint_.timeout);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadResponse, std::string("unexpected chat-completions payload: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

namespace {

class SlotGuard {
public:
    explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
    ~SlotGuard() { s_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<>& s_;
};

}  // namespace

ChatGateway::ChatGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : backend_(std::move(backend)),
      backend_name_(backend_ ? backend_->name() : ""),
      options_(std::move(options)),
      slots_(std::max(1, options_.max_concurrency)) {
    if (!backend_) throw Error(ErrorCode::InvalidArgument, "chat gateway needs a backend");
    if (options_.retry.max_attempts < 1) options_.retry.max_attempts = 1;
}

void ChatGateway::pause(std::chrono::milliseconds d) {
    if (d.count() <= 0) return;
    if (options_.sleep) {
        options_.sleep(d);
    } else {
        std::this_thread::sleep_for(d);
    }
}

void ChatGateway::pace() {
    if (options_.min_interval.count() <= 0) return;
    std::lock_guard lock(pace_mu_);
    auto now = std::chrono::steady_clock::now();
    auto ready = last_start_ + options_.min_interval;
    if (now < ready) {
        pause(std::chrono::duration_cast<std::chrono::milliseconds>(ready - now));
        now = std::chrono::steady_clock::now();
    }
    last_start_ = now;
}

std::string ChatGateway::chat_generate(ChatRequest req) {
    req.validate();
    if (req.model_id.empty()) req.model_id = options_.default_model;

    SlotGuard slot(slots_);
    auto backoff = options_.retry.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        pace();
        bool last = attempt >= options_.retry.max_attempts;
        try {
            spdlog::debug("llm request: backend={} temperature={} prompt_bytes={}", backend_name_, req.temperature,
                          req.user_prompt.size());
            auto reply = backend_->complete(req);
            if (text::trim(reply).empty()) throw Error(ErrorCode::BadResponse, "backend returned an empty message");
            spdlog::debug("llm reply: {} bytes", reply.size());
            return reply;
        } catch (const RateLimitedError& e) {
            if (last) throw;
            auto hinted = std::chrono::milliseconds(static_cast<long long>(e.retry_after_seconds() * 1000.0));
            spdlog::warn("rate limited (attempt {}), waiting", attempt);
            pause(std::max(backoff, hinted));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::BackendUnavailable) throw;
            if (last) {
                throw Error(ErrorCode::BackendUnavailable,
                            "giving up after " + std::to_string(attempt) + " attempts: " + e.detail());
            }
            spdlog::warn("backend unavailable (attempt {}): {}", attempt, e.detail());
            pause(backoff);
        }
        backoff = std::min(options_.retry.max_backoff,
                           std::chrono::milliseconds(static_cast<long long>(backoff.count() * options_.retry.multiplier)));
    }
}

std::vector<GuidingInstruction> ChatGateway::bootstrap_guiding_instructions(int count, bool fix_typos,
                                                                            double temperature) {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "guiding instruction count must be >= 1");
    ChatRequest req;
    req.user_prompt = guiding_meta_prompt(count, fix_typos);
    req.temperature = temperature;
    auto items = parse_enumerated_response(chat_generate(req));
    if (items.empty()) throw Error(ErrorCode::ParseFailure, "no enumerated guiding instructions in the reply");
    if (items.size() > static_cast<std::size_t>(count)) items.resize(static_cast<std::size_t>(count));
    return make_guiding(items, GuidingSource::Bootstrapped);
}

}  // namespace instrexp::llm
