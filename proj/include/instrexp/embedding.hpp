#pragma once

#include <chrono>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace instrexp::embed {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

/// dot(a, b) / (|a| |b|). Throws Error(DimensionMismatch) or Error(ZeroVector).
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Text encoder. Callers use embed(); implementations override compute().
/// The first batch fixes the session dimension; later batches must match it.
class Embedder {
public:
    virtual ~Embedder() = default;

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts);

    virtual std::string name() const = 0;
    std::optional<std::size_t> session_dim() const;

protected:
    virtual std::vector<EmbeddingVector> compute(std::span<const std::string> texts) = 0;

private:
    mutable std::mutex mu_;
    std::optional<std::size_t> dim_;
};

/// Deterministic test double: lower-cased word unigrams and bigrams plus a
/// start marker, hashed into buckets, L2-normalized.
class StubEmbedder : public Embedder {
public:
    static constexpr std::size_t kDefaultDim = 64;

    explicit StubEmbedder(std::size_t dim = kDefaultDim) : dim_(dim) {}
    std::string name() const override { return "stub"; }

protected:
    std::vector<EmbeddingVector> compute(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
};

struct EmbeddingEndpoint {
    std::string url;
    std::string api_key;
    std::string model;
    std::chrono::seconds timeout{60};

    /// INSTREXP_EMB_URL / INSTREXP_EMB_KEY (model from INSTREXP_EMB_MODEL, optional).
    static EmbeddingEndpoint from_env();
};

/// OpenAI-style embeddings endpoint: {"input": [...]} -> {"data": [{"embedding": [...]}]}.
class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(EmbeddingEndpoint endpoint, std::size_t batch_size = 64)
        : endpoint_(std::move(endpoint)), batch_size_(batch_size) {}
    std::string name() const override { return "http"; }

protected:
    std::vector<EmbeddingVector> compute(std::span<const std::string> texts) override;

private:
    EmbeddingEndpoint endpoint_;
    std::size_t batch_size_;
};

}  // namespace instrexp::embed
