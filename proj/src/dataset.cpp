#include "instrexp/dataset.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <unordered_map>

#include "instrexp/error.hpp"
#include "instrexp/random.hpp"

namespace instrexp::dataset {

void BuildConfig::validate() const {
    if (per_task_cap < 1) throw Error(ErrorCode::InvalidArgument, "per-task cap must be >= 1");
    if (max_redraws < 0) throw Error(ErrorCode::InvalidArgument, "max redraws must be >= 0");
    if (jobs < 1) throw Error(ErrorCode::InvalidArgument, "jobs must be >= 1");
}

namespace {

struct TaskOutput {
    std::vector<DatasetRecord> records;
    TaskBuildReport report;
};

TaskOutput build_task(const std::string& task_id, std::vector<const InstanceRecord*> instances,
                      const sampler::TaskPool& pool,
                      const std::unordered_map<std::string, const InstructionTemplate*>& templates,
                      const BuildConfig& cfg) {
    TaskOutput out;
    out.report.instances_available = instances.size();

    std::sort(instances.begin(), instances.end(),
              [](const auto* a, const auto* b) { return a->instance_id < b->instance_id; });
    if (instances.size() > cfg.per_task_cap) {
        auto pick_rng = Rng::derive(cfg.seed, "subsample:" + task_id);
        auto picked = pick_rng.sample_indices(instances.size(), cfg.per_task_cap);
        std::sort(picked.begin(), picked.end());
        std::vector<const InstanceRecord*> chosen;
        for (auto i : picked) chosen.push_back(instances[i]);
        instances = std::move(chosen);
    }
    out.report.instances_selected = instances.size();

    auto draw_rng = Rng::derive(cfg.seed, "templates:" + task_id);
    for (const auto* inst : instances) {
        std::set<std::string> failed;
        std::optional<DatasetRecord> record;
        for (int attempt = 0; attempt <= cfg.max_redraws && !record; ++attempt) {
            if (attempt > 0) ++out.report.redraws;
            const auto& tid = sampler::sample_template(pool, draw_rng);
            if (failed.count(tid)) continue;
            auto it = templates.find(tid);
            if (it == templates.end()) {
                throw Error(ErrorCode::SchemaError, "pool '" + task_id + "' refers to unknown template '" + tid + "'");
            }
            try {
                auto text = instantiate(*it->second, *inst);
                // instance data that itself looks like a placeholder would leak template syntax
                if (contains_placeholder_syntax(text)) {
                    failed.insert(tid);
                    continue;
                }
                record = DatasetRecord{task_id, inst->instance_id, tid, std::move(text), inst->target, inst->media_ref};
            } catch (const Error& e) {
                if (e.code() != ErrorCode::MissingField && e.code() != ErrorCode::TypeMismatch) throw;
                failed.insert(tid);
            }
        }
        if (!record) {
            ++out.report.skipped;
            continue;
        }
        ++out.report.template_usage[record->template_id];
        out.records.push_back(std::move(*record));
    }
    out.report.records = out.records.size();
    if (out.records.empty() && !instances.empty()) {
        out.report.warnings.push_back("every instantiation failed for task '" + task_id + "'");
    }
    return out;
}

}  // namespace

BuildResult build_dataset(std::span<const InstanceRecord> instances, std::span<const sampler::TaskPool> pools,
                          std::span<const InstructionTemplate> templates, const BuildConfig& cfg) {
    cfg.validate();

    std::unordered_map<std::string, const InstructionTemplate*> by_id;
    for (const auto& t : templates) by_id.insert_or_assign(t.template_id, &t);

    std::map<std::string, const sampler::TaskPool*> pool_of;
    for (const auto& p : pools) pool_of.insert_or_assign(p.task_id, &p);

    std::map<std::string, std::vector<const InstanceRecord*>> per_task;
    std::set<std::string> seen_ids;
    for (const auto& inst : instances) {
        if (!seen_ids.insert(inst.instance_id).second) {
            throw Error(ErrorCode::SchemaError, "duplicate instance_id '" + inst.instance_id + "'");
        }
        if (!pool_of.count(inst.task_id)) {
            throw Error(ErrorCode::PoolMissing, "no template pool for task '" + inst.task_id + "'");
        }
        per_task[inst.task_id].push_back(&inst);
    }

    // distributions for pools that arrive unbuilt
    std::map<std::string, sampler::TaskPool> ready;
    for (const auto& [task, _] : per_task) {
        const auto& pool = *pool_of.at(task);
        ready.emplace(task, pool.built() ? pool : sampler::build_distribution(pool, cfg.epsilon_mode.resolve(pool)));
    }

    // each task owns its rng streams, so running tasks concurrently cannot change output
    std::vector<std::string> tasks;
    for (const auto& [task, _] : per_task) tasks.push_back(task);
    std::vector<TaskOutput> outputs(tasks.size());
    const auto window = static_cast<std::size_t>(cfg.jobs);
    for (std::size_t begin = 0; begin < tasks.size(); begin += window) {
        std::vector<std::future<TaskOutput>> running;
        for (std::size_t i = begin; i < std::min(tasks.size(), begin + window); ++i) {
            running.push_back(std::async(std::launch::async, [&, i] {
                return build_task(tasks[i], per_task.at(tasks[i]), ready.at(tasks[i]), by_id, cfg);
            }));
        }
        for (std::size_t k = 0; k < running.size(); ++k) outputs[begin + k] = running[k].get();
    }

    BuildResult result;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        auto& o = outputs[i];
        result.records.insert(result.records.end(), std::make_move_iterator(o.records.begin()),
                              std::make_move_iterator(o.records.end()));
        result.report.per_task.emplace(tasks[i], std::move(o.report));
    }
    result.report.total_records = result.records.size();
    return result;
}

}  // namespace instrexp::dataset
