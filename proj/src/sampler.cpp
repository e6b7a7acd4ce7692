#include "instrexp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "instrexp/error.hpp"
#include "instrexp/text.hpp"

namespace instrexp::sampler {

const std::string& TaskPool::id_at(std::size_t i) const {
    if (i < originals.size()) return originals[i];
    return generated.at(i - originals.size()).template_id;
}

double TaskPool::probability_of(const std::string& template_id) const {
    if (!built()) throw Error(ErrorCode::DistributionUnbuilt, "pool '" + task_id + "' has no distribution");
    for (std::size_t i = 0; i < size(); ++i) {
        if (id_at(i) == template_id) return probabilities[i];
    }
    return 0.0;
}

std::vector<TaskPool> make_pools(std::span<const InstructionTemplate> templates) {
    std::map<std::string, TaskPool> by_task;
    for (const auto& t : templates) {
        auto& pool = by_task[t.task_id];
        pool.task_id = t.task_id;
        if (t.origin == Origin::Raw) {
            pool.originals.push_back(t.template_id);
        } else {
            if (!t.lineage) throw Error(ErrorCode::SchemaError, "generated template '" + t.template_id + "' has no lineage");
            pool.generated.push_back({t.template_id, t.lineage->root_template_id, 0.0});
        }
    }
    std::vector<TaskPool> out;
    for (auto& [_, pool] : by_task) {
        std::sort(pool.originals.begin(), pool.originals.end());
        std::sort(pool.generated.begin(), pool.generated.end(),
                  [](const auto& a, const auto& b) { return a.template_id < b.template_id; });
        out.push_back(std::move(pool));
    }
    return out;
}

double score_generated(const embed::EmbeddingVector& e_j, const embed::EmbeddingVector& e_origin,
                       std::span<const embed::EmbeddingVector> siblings, std::size_t n_siblings, Rng& rng) {
    double consistency = embed::cosine_similarity(e_j, e_origin);
    std::size_t n = std::min(n_siblings, siblings.size());
    if (n == 0) return consistency;
    // mean of differences, so equal similarities cancel exactly
    double sum = 0;
    for (auto idx : rng.sample_indices(siblings.size(), n)) sum += consistency - embed::cosine_similarity(e_j, siblings[idx]);
    return sum / static_cast<double>(n);
}

void score_pool(TaskPool& pool, const std::map<std::string, embed::EmbeddingVector>& embeddings,
                std::size_t n_siblings, std::uint64_t seed) {
    auto vec = [&](const std::string& id) -> const embed::EmbeddingVector& {
        auto it = embeddings.find(id);
        if (it == embeddings.end()) throw Error(ErrorCode::SchemaError, "no embedding for template '" + id + "'");
        return it->second;
    };

    for (auto& g : pool.generated) {
        std::vector<embed::EmbeddingVector> siblings;
        for (const auto& other : pool.generated) {
            if (other.origin_id == g.origin_id && other.template_id != g.template_id) {
                siblings.push_back(vec(other.template_id));
            }
        }
        auto rng = Rng::derive(seed, g.template_id);
        g.score = score_generated(vec(g.template_id), vec(g.origin_id), siblings, n_siblings, rng);
    }
    pool.probabilities.clear();
}

void score_pools(std::vector<TaskPool>& pools, std::span<const InstructionTemplate> templates,
                 embed::Embedder& embedder, std::size_t n_siblings, std::uint64_t seed) {
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    for (const auto& t : templates) {
        ids.push_back(t.template_id);
        texts.push_back(render_template(t));
    }
    auto vectors = embedder.embed(texts);
    std::map<std::string, embed::EmbeddingVector> table;
    for (std::size_t i = 0; i < ids.size(); ++i) table.insert_or_assign(ids[i], std::move(vectors[i]));
    for (auto& pool : pools) score_pool(pool, table, n_siblings, seed);
}

double default_epsilon(const TaskPool& pool) {
    if (pool.size() == 0) throw Error(ErrorCode::EmptyPool, "pool '" + pool.task_id + "' is empty");
    return static_cast<double>(pool.originals.size()) / static_cast<double>(pool.size());
}

TaskPool build_distribution(TaskPool pool, double epsilon, double softmax_temp) {
    if (pool.size() == 0) throw Error(ErrorCode::EmptyPool, "pool '" + pool.task_id + "' is empty");
    if (!std::isfinite(epsilon) || epsilon < 0.0 || epsilon > 1.0) {
        throw Error(ErrorCode::InconsistentEpsilon, "epsilon must be in [0, 1]");
    }
    if (!(softmax_temp > 0.0)) throw Error(ErrorCode::InvalidArgument, "softmax temperature must be positive");
    if (epsilon < 1.0 && pool.generated.empty()) {
        throw Error(ErrorCode::InconsistentEpsilon,
                    "pool '" + pool.task_id + "' has no generated templates to receive 1 - epsilon");
    }
    if (epsilon > 0.0 && pool.originals.empty()) {
        throw Error(ErrorCode::InconsistentEpsilon, "pool '" + pool.task_id + "' has no originals to receive epsilon");
    }

    pool.epsilon = epsilon;
    pool.probabilities.assign(pool.size(), 0.0);
    const double per_original = pool.originals.empty() ? 0.0 : epsilon / static_cast<double>(pool.originals.size());
    for (std::size_t i = 0; i < pool.originals.size(); ++i) pool.probabilities[i] = per_original;

    if (!pool.generated.empty()) {
        double top = pool.generated.front().score;
        for (const auto& g : pool.generated) top = std::max(top, g.score);
        std::vector<double> weights;
        for (const auto& g : pool.generated) weights.push_back(std::exp((g.score - top) / softmax_temp));
        double z = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (std::size_t j = 0; j < weights.size(); ++j) {
            pool.probabilities[pool.originals.size() + j] = (1.0 - epsilon) * weights[j] / z;
        }
    }
    return pool;
}

const std::string& sample_template(const TaskPool& pool, Rng& rng) {
    if (!pool.built()) throw Error(ErrorCode::DistributionUnbuilt, "pool '" + pool.task_id + "' has no distribution");
    std::vector<double> cumulative(pool.probabilities.size());
    std::partial_sum(pool.probabilities.begin(), pool.probabilities.end(), cumulative.begin());
    const double u = rng.uniform01() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) {
        // u landed on the rounding sliver past the last boundary; take the last nonzero entry
        it = std::prev(cumulative.end());
        while (it != cumulative.begin() && pool.probabilities[static_cast<std::size_t>(it - cumulative.begin())] == 0.0) --it;
    }
    return pool.id_at(static_cast<std::size_t>(it - cumulative.begin()));
}

EpsilonMode EpsilonMode::parse(std::string_view spec) {
    EpsilonMode m;
    if (spec == "default") return m;
    if (spec == "half") {
        m.kind = Kind::HalfDefault;
        return m;
    }
    if (spec == "double") {
        m.kind = Kind::DoubleDefault;
        return m;
    }
    if (spec.rfind("fixed:", 0) == 0) {
        m.kind = Kind::Fixed;
        try {
            m.value = std::stod(std::string(spec.substr(6)));
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad epsilon '" + std::string(spec) + "'");
        }
        if (!(m.value >= 0.0 && m.value <= 1.0)) throw Error(ErrorCode::InvalidArgument, "fixed epsilon must be in [0, 1]");
        return m;
    }
    throw Error(ErrorCode::InvalidArgument, "epsilon must be default|fixed:F|half|double, got '" + std::string(spec) + "'");
}

std::string EpsilonMode::to_string() const {
    switch (kind) {
        case Kind::Default: return "default";
        case Kind::HalfDefault: return "half";
        case Kind::DoubleDefault: return "double";
        case Kind::Fixed: return "fixed:" + text::format_fixed(value, 6);
    }
    return "default";
}

double EpsilonMode::resolve(const TaskPool& pool) const {
    switch (kind) {
        case Kind::Default: return default_epsilon(pool);
        case Kind::HalfDefault: return default_epsilon(pool) / 2.0;
        case Kind::DoubleDefault: return std::min(1.0, 2.0 * default_epsilon(pool));
        case Kind::Fixed: return value;
    }
    return default_epsilon(pool);
}

}  // namespace instrexp::sampler
