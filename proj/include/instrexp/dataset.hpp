#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "instrexp/sampler.hpp"
#include "instrexp/template.hpp"

namespace instrexp::dataset {

struct BuildConfig {
    std::size_t per_task_cap = 1000;
    std::uint64_t seed = 42;
    /// Applied only to pools that arrive without a distribution.
    sampler::EpsilonMode epsilon_mode;
    /// Alternative template draws after a failed instantiation.
    int max_redraws = 3;
    int jobs = 4;

    void validate() const;
};

/// One instantiated training example.
struct DatasetRecord {
    std::string task_id;
    std::string instance_id;
    std::string template_id;
    std::string instruction_text;
    std::string target;
    std::optional<std::string> media_ref;

    bool operator==(const DatasetRecord&) const = default;
};

struct TaskBuildReport {
    std::size_t instances_available = 0;
    std::size_t instances_selected = 0;
    std::size_t records = 0;
    std::size_t redraws = 0;
    std::size_t skipped = 0;
    std::map<std::string, std::size_t> template_usage;
    std::vector<std::string> warnings;
};

struct BuildReport {
    std::map<std::string, TaskBuildReport> per_task;
    std::size_t total_records = 0;
};

struct BuildResult {
    std::vector<DatasetRecord> records;  // sorted by (task_id, instance_id)
    BuildReport report;
};

/// Pair every selected instance with one template sampled from its task's
/// pool and instantiate it. Each instance appears at most once. Tasks with
/// more instances than the cap are subsampled uniformly without replacement.
/// Throws Error(PoolMissing) if an instance's task has no pool, and
/// Error(SchemaError) on duplicate instance ids or unknown template ids.
BuildResult build_dataset(std::span<const InstanceRecord> instances, std::span<const sampler::TaskPool> pools,
                          std::span<const InstructionTemplate> templates, const BuildConfig& cfg);

}  // namespace instrexp::dataset
