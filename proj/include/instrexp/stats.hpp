#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "instrexp/random.hpp"
#include "instrexp/template.hpp"

namespace instrexp::stats {

struct CorpusStats {
    std::size_t n_instructions = 0;
    /// 0 with `empty` set when there are no instructions.
    double avg_word_length = 0.0;
    bool empty = true;
    std::map<std::size_t, std::size_t> length_histogram;
    /// Keyed by the first two whitespace tokens, placeholders included.
    /// One-word templates use "" as the second word.
    std::map<std::pair<std::string, std::string>, std::size_t> prefix2_distribution;
};

/// Word length counts whitespace tokens, one per placeholder.
CorpusStats corpus_stats(std::span<const InstructionTemplate> templates);

struct ProportionResult {
    double mean = 0.0;
    std::size_t pairs = 0;    // pairs that contributed
    std::size_t skipped = 0;  // failed to instantiate, or rendered empty
};

/// Mean over sampled (template, instance) pairs of
/// literal characters / characters of the instantiated instruction.
/// All pairs are used when there are at most `sample_cap` of them.
ProportionResult template_text_proportion(std::span<const InstructionTemplate> task_templates,
                                          std::span<const InstanceRecord> task_instances, std::size_t sample_cap,
                                          Rng& rng);

/// Pearson correlation. Throws Error(LengthMismatch) or Error(ZeroVariance);
/// fewer than two points is a LengthMismatch.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct TaskAttributes {
    std::string task_id;
    bool direct_question = false;
    bool option_inclusive = false;
    std::optional<double> template_text_proportion;
    /// True when either flag came from the heuristic rather than an annotation.
    bool heuristic = false;
};

/// Use annotations from the templates when present; otherwise
/// direct_question = some zero-placeholder template ends with '?', and
/// option_inclusive = some template has an `options` placeholder.
TaskAttributes task_attributes(const std::string& task_id, std::span<const InstructionTemplate> task_templates);

}  // namespace instrexp::stats
