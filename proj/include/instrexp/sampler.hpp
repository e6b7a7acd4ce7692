#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instrexp/embedding.hpp"
#include "instrexp/random.hpp"
#include "instrexp/template.hpp"

namespace instrexp::sampler {

inline constexpr std::size_t kDefaultSiblings = 8;

struct GeneratedEntry {
    std::string template_id;
    std::string origin_id;  // raw ancestor
    double score = 0.0;

    bool operator==(const GeneratedEntry&) const = default;
};

/// Per-task sampling pool over original and generated templates.
struct TaskPool {
    std::string task_id;
    std::vector<std::string> originals;
    std::vector<GeneratedEntry> generated;
    std::optional<double> epsilon;
    /// Aligned with originals followed by generated; empty until built.
    std::vector<double> probabilities;

    bool built() const { return !probabilities.empty(); }
    std::size_t size() const { return originals.size() + generated.size(); }
    /// Template id at position i of the originals-then-generated order.
    const std::string& id_at(std::size_t i) const;
    double probability_of(const std::string& template_id) const;

    bool operator==(const TaskPool&) const = default;
};

/// Group templates by task: Raw ones become originals, Generated ones join
/// with their lineage root as origin. Pools are ordered by task_id, members by template_id.
std::vector<TaskPool> make_pools(std::span<const InstructionTemplate> templates);

/// Consistency minus diversity:
/// sim(e_j, e_origin) - mean over N sampled siblings of sim(e_j, e_sibling),
/// N = min(n_siblings, |siblings|), drawn uniformly without replacement.
/// Zero siblings gives a diversity term of 0.
double score_generated(const embed::EmbeddingVector& e_j, const embed::EmbeddingVector& e_origin,
                       std::span<const embed::EmbeddingVector> siblings, std::size_t n_siblings, Rng& rng);

/// Score every generated member. `embeddings` maps template_id to its vector.
/// Siblings of j are the other generated members sharing j's origin; each
/// template draws its siblings from its own stream derived from `seed`.
void score_pool(TaskPool& pool, const std::map<std::string, embed::EmbeddingVector>& embeddings,
                std::size_t n_siblings, std::uint64_t seed);

/// Embed the rendered text of every pool member and score all pools.
void score_pools(std::vector<TaskPool>& pools, std::span<const InstructionTemplate> templates,
                 embed::Embedder& embedder, std::size_t n_siblings, std::uint64_t seed);

/// |originals| / (|originals| + |generated|). Throws Error(EmptyPool).
double default_epsilon(const TaskPool& pool);

/// Originals get epsilon/|originals| each; generated share 1 - epsilon by
/// softmax(score / softmax_temp). Throws Error(InconsistentEpsilon) when the
/// mass has nowhere to go.
TaskPool build_distribution(TaskPool pool, double epsilon, double softmax_temp = 1.0);

/// Draw a template id. Throws Error(DistributionUnbuilt).
const std::string& sample_template(const TaskPool& pool, Rng& rng);

/// How epsilon is chosen per task: the default, a fixed value, or the
/// default halved / doubled (clamped to [0, 1]).
struct EpsilonMode {
    enum class Kind { Default, Fixed, HalfDefault, DoubleDefault } kind = Kind::Default;
    double value = 0.0;

    static EpsilonMode parse(std::string_view spec);  // default | fixed:F | half | double
    std::string to_string() const;
    double resolve(const TaskPool& pool) const;
};

}  // namespace instrexp::sampler
