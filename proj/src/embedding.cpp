#include "instrexp/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "http.hpp"
#include "instrexp/error.hpp"
#include "instrexp/text.hpp"

namespace instrexp::embed {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "cosine of vectors with dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine similarity of an all-zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<EmbeddingVector> Embedder::embed(std::span<const std::string> texts) {
    if (texts.empty()) return {};
    auto out = compute(texts);
    if (out.size() != texts.size()) {
        throw Error(ErrorCode::BadResponse, "embedder returned " + std::to_string(out.size()) + " vectors for " +
                                                std::to_string(texts.size()) + " texts");
    }
    std::lock_guard lock(mu_);
    for (const auto& v : out) {
        if (!dim_) dim_ = v.dim();
        if (v.dim() != *dim_ || v.dim() == 0) {
            throw Error(ErrorCode::DimensionMismatch, "embedding dim changed from " + std::to_string(*dim_) + " to " +
                                                          std::to_string(v.dim()) + " within a session");
        }
        for (double x : v.values) {
            if (!std::isfinite(x)) throw Error(ErrorCode::BadResponse, "embedding contains a non-finite component");
        }
    }
    return out;
}

std::optional<std::size_t> Embedder::session_dim() const {
    std::lock_guard lock(mu_);
    return dim_;
}

std::vector<EmbeddingVector> StubEmbedder::compute(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        std::string lowered;
        for (unsigned char c : t) lowered.push_back(static_cast<char>(std::tolower(c)));
        auto words = text::split_words(lowered);

        EmbeddingVector v{std::vector<double>(dim_, 0.0)};
        auto bump = [&](std::string_view feature) { v.values[text::fnv1a64(feature) % dim_] += 1.0; };
        bump("<s>");
        for (std::size_t i = 0; i < words.size(); ++i) {
            bump("1:" + std::string(words[i]));
            if (i + 1 < words.size()) bump("2:" + std::string(words[i]) + " " + std::string(words[i + 1]));
        }
        double norm = 0;
        for (double x : v.values) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v.values) x /= norm;
        out.push_back(std::move(v));
    }
    return out;
}

EmbeddingEndpoint EmbeddingEndpoint::from_env() {
    auto env = [](const char* name) {
        const char* v = std::getenv(name);
        return std::string(v ? v : "");
    };
    EmbeddingEndpoint ep;
    ep.url = env("INSTREXP_EMB_URL");
    ep.api_key = env("INSTREXP_EMB_KEY");
    ep.model = env("INSTREXP_EMB_MODEL");
    if (ep.url.empty()) throw Error(ErrorCode::InvalidArgument, "INSTREXP_EMB_URL is not set");
    return ep;
}

std::vector<EmbeddingVector> HttpEmbedder::compute(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    for (std::size_t begin = 0; begin < texts.size(); begin += batch_size_) {
        auto batch = texts.subspan(begin, std::min(batch_size_, texts.size() - begin));
        nlohmann::json body = {{"input", std::vector<std::string>(batch.begin(), batch.end())}};
        if (!endpoint_.model.empty()) body["model"] = endpoint_.model;
        auto reply = http::post_json(endpoint_.url, endpoint_.api_key, body, endpoint_.timeout);
        try {
            const auto& data = reply.at("data");
            std::vector<EmbeddingVector> got(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) {
                auto slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
                if (slot >= got.size()) throw Error(ErrorCode::BadResponse, "embedding index out of range");
                got[slot].values = data[i].at("embedding").get<std::vector<double>>();
            }
            out.insert(out.end(), got.begin(), got.end());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::BadResponse, std::string("unexpected embeddings payload: ") + e.what());
        }
    }
    return out;
}

}  // namespace instrexp::embed
