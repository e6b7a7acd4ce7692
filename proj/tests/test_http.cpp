#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

#include "instrexp/embedding.hpp"
#include "instrexp/error.hpp"
#include "instrexp/llm.hpp"

using namespace instrexp;
using nlohmann::json;

namespace {

/// Local OpenAI-style server on an ephemeral port.
class FakeServer {
public:
    FakeServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            last_chat = json::parse(req.body);
            auth = req.get_header_value("Authorization");
            if (chat_status != 200) {
                res.status = chat_status;
                if (chat_status == 429) res.set_header("Retry-After", "2");
                res.set_content("{}", "application/json");
                return;
            }
            json reply = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", chat_reply}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
        server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body);
            ++embedding_calls;
            json data = json::array();
            for (std::size_t i = 0; i < body["input"].size(); ++i) {
                auto s = body["input"][i].get<std::string>();
                data.push_back({{"index", i}, {"embedding", {static_cast<double>(s.size()), 1.0, bad_dim ? 0.0 : 2.0}}});
                if (bad_dim && i == 0) data.back()["embedding"] = json::array({1.0});
            }
            res.set_content(json{{"data", data}}.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }

    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

    json last_chat;
    std::string auth;
    int chat_status = 200;
    std::string chat_reply = "1. Rewritten.";
    int embedding_calls = 0;
    bool bad_dim = false;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

llm::ChatRequest request() {
    llm::ChatRequest r;
    r.user_prompt = "Rewrite.";
    r.temperature = 0.75;
    r.seed = 17;
    return r;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("chat backend speaks the chat-completions protocol") {
    FakeServer server;
    llm::HttpChatBackend backend({server.url("/v1/chat/completions"), "secret", "model-x"});
    CHECK(backend.complete(request()) == "1. Rewritten.");
    CHECK(server.auth == "Bearer secret");
    CHECK(server.last_chat["model"] == "model-x");
    CHECK(server.last_chat["temperature"] == 0.75);
    CHECK(server.last_chat["seed"] == 17);
    CHECK(server.last_chat["messages"][0]["role"] == "system");
    CHECK(server.last_chat["messages"][0]["content"] == "You are a helpful assistant.");
    CHECK(server.last_chat["messages"][1]["content"] == "Rewrite.");
}

TEST_CASE("chat backend maps HTTP failures onto error codes") {
    FakeServer server;
    llm::HttpChatBackend backend({server.url("/v1/chat/completions"), "", "m"});

    server.chat_status = 429;
    try {
        backend.complete(request());
        FAIL("expected RateLimited");
    } catch (const RateLimitedError& e) {
        CHECK(e.retry_after_seconds() == 2.0);
    }
    server.chat_status = 503;
    CHECK(code_of([&] { backend.complete(request()); }) == ErrorCode::BackendUnavailable);
    server.chat_status = 400;
    CHECK(code_of([&] { backend.complete(request()); }) == ErrorCode::BadResponse);

    llm::HttpChatBackend wrong_path({server.url("/nope"), "", "m"});
    CHECK(code_of([&] { wrong_path.complete(request()); }) == ErrorCode::BadResponse);
}

TEST_CASE("unreachable endpoint is BackendUnavailable") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    llm::HttpChatBackend backend({"http://127.0.0.1:" + std::to_string(port) + "/v1", "", "m", std::chrono::seconds(2)});
    CHECK(code_of([&] { backend.complete(request()); }) == ErrorCode::BackendUnavailable);
}

TEST_CASE("gateway retries a recovering HTTP backend") {
    FakeServer server;
    server.chat_status = 503;
    auto backend = std::make_shared<llm::HttpChatBackend>(llm::HttpEndpoint{server.url("/v1/chat/completions"), "", "m"});
    llm::GatewayOptions opts;
    opts.sleep = [&](std::chrono::milliseconds) { server.chat_status = 200; };
    llm::ChatGateway gw(backend, opts);
    CHECK(gw.chat_generate(request()) == "1. Rewritten.");
}

TEST_CASE("embedding backend batches and keeps order") {
    FakeServer server;
    embed::HttpEmbedder embedder({server.url("/v1/embeddings"), "k", "emb"}, 2);
    std::vector<std::string> texts = {"a", "bb", "ccc"};
    auto vs = embedder.embed(texts);
    REQUIRE(vs.size() == 3);
    CHECK(server.embedding_calls == 2);
    CHECK(vs[0].values[0] == 1.0);
    CHECK(vs[2].values[0] == 3.0);
    CHECK(embedder.session_dim() == 3u);
}

TEST_CASE("embedding backend rejects inconsistent dimensions") {
    FakeServer server;
    server.bad_dim = true;
    embed::HttpEmbedder embedder({server.url("/v1/embeddings"), "", ""});
    std::vector<std::string> texts = {"a", "b"};
    CHECK(code_of([&] { embedder.embed(texts); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("endpoints come from the environment") {
    ::setenv("INSTREXP_LLM_URL", "http://localhost:1/v1/chat/completions", 1);
    ::setenv("INSTREXP_LLM_KEY", "k", 1);
    ::setenv("INSTREXP_LLM_MODEL", "m", 1);
    auto ep = llm::HttpEndpoint::from_env();
    CHECK(ep.url == "http://localhost:1/v1/chat/completions");
    CHECK(ep.model == "m");
    ::unsetenv("INSTREXP_LLM_URL");
    CHECK(code_of([] { llm::HttpEndpoint::from_env(); }) == ErrorCode::InvalidArgument);
    ::unsetenv("INSTREXP_EMB_URL");
    CHECK(code_of([] { embed::EmbeddingEndpoint::from_env(); }) == ErrorCode::InvalidArgument);
}
