#pragma once

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "instrexp/candidate.hpp"
#include "instrexp/ppg.hpp"
#include "instrexp/template.hpp"

namespace instrexp::filter {

enum class DedupScope { PerTask, Global };

struct FilterConfig {
    ppg::MatchMode match_mode = ppg::MatchMode::Unordered;
    bool length_filter_enabled = true;
    double length_ratio_cap = 3.0;
    int absolute_word_cap = 60;
    /// Candidates may always grow by this many words over the original.
    int length_slack_words = 10;
    DedupScope dedup_scope = DedupScope::PerTask;

    void validate() const;
};

struct StageCounts {
    std::size_t valid = 0;
    std::size_t dup = 0;
    std::size_t placeholder = 0;
    std::size_t length = 0;
    std::size_t parse = 0;

    std::size_t total() const { return valid + dup + placeholder + length + parse; }
    void add(Verdict v);
    bool operator==(const StageCounts&) const = default;
};

struct FilterReport {
    std::map<std::string, StageCounts> per_task;

    StageCounts total() const;
};

/// Perfect-match duplicate tracking over normalized text (trim + collapse whitespace).
class Deduplicator {
public:
    explicit Deduplicator(DedupScope scope) : scope_(scope) {}

    bool contains(const std::string& task_id, std::string_view text) const;
    /// Record the text; false if it was already present.
    bool insert(const std::string& task_id, std::string_view text);

private:
    std::string key(const std::string& task_id, std::string_view text) const;

    DedupScope scope_;
    std::unordered_set<std::string> seen_;
};

/// Verdict updates for the dedup stage alone. Candidates are taken in
/// candidate_id order; the first occurrence survives.
std::vector<Verdict> dedup(std::span<const GenerationCandidate> candidates,
                           std::span<const InstructionTemplate> existing, const FilterConfig& cfg);

/// Valid if the placeholder sets match; originals without placeholders always pass.
Verdict placeholder_filter(const InstructionTemplate& candidate, const InstructionTemplate& original,
                           const FilterConfig& cfg);

bool exceeds_length(std::size_t candidate_words, std::size_t original_words, const FilterConfig& cfg);

/// RejectedLength if the candidate is too long relative to the original; no-op when disabled.
Verdict length_filter(const InstructionTemplate& candidate, const InstructionTemplate& original,
                      const FilterConfig& cfg);

/// Stateful parse -> dedup -> placeholder -> length chain. Feed candidates in
/// candidate_id order; the first failing stage becomes the verdict.
class FilterPipeline {
public:
    FilterPipeline(FilterConfig cfg, std::span<const InstructionTemplate> raw_templates);

    /// Make a template available as a parent for later candidates.
    void add_parent(const InstructionTemplate& t);

    Verdict apply(GenerationCandidate& c);

    const FilterReport& report() const { return report_; }
    const FilterConfig& config() const { return cfg_; }

private:
    const InstructionTemplate& parent_of(const GenerationCandidate& c) const;

    FilterConfig cfg_;
    Deduplicator dedup_;
    std::unordered_map<std::string, InstructionTemplate> parents_;
    FilterReport report_;
};

struct PipelineResult {
    std::vector<GenerationCandidate> candidates;  // all, sorted by candidate_id, terminal verdicts
    std::vector<GenerationCandidate> valid;       // Valid subset, same order
    FilterReport report;
};

/// Re-run every filter from scratch over a candidate set. Parents are resolved
/// among the raw templates and the candidates themselves.
PipelineResult run_pipeline(std::vector<GenerationCandidate> candidates,
                            std::span<const InstructionTemplate> raw_templates, const FilterConfig& cfg);

}  // namespace instrexp::filter
