#include "instrexp/postfilter.hpp"

#include <algorithm>

#include "instrexp/error.hpp"
#include "instrexp/text.hpp"

namespace instrexp {

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Pending: return "pending";
        case Verdict::Valid: return "valid";
        case Verdict::RejectedDuplicate: return "rejected_duplicate";
        case Verdict::RejectedPlaceholder: return "rejected_placeholder";
        case Verdict::RejectedLength: return "rejected_length";
        case Verdict::RejectedParse: return "rejected_parse";
    }
    return "pending";
}

Verdict verdict_from_string(std::string_view s) {
    for (auto v : {Verdict::Pending, Verdict::Valid, Verdict::RejectedDuplicate, Verdict::RejectedPlaceholder,
                   Verdict::RejectedLength, Verdict::RejectedParse}) {
        if (to_string(v) == s) return v;
    }
    throw Error(ErrorCode::SchemaError, "unknown verdict '" + std::string(s) + "'");
}

InstructionTemplate to_template(const GenerationCandidate& c) {
    auto t = parse_template(c.restored_text, c.candidate_id, c.task_id);
    t.origin = Origin::Generated;
    t.lineage = Lineage{c.parent_template_id, c.root_template_id, c.guiding_id, c.temperature, c.iteration};
    return t;
}

}  // namespace instrexp

namespace instrexp::filter {

void FilterConfig::validate() const {
    if (!(length_ratio_cap > 1.0)) throw Error(ErrorCode::InvalidArgument, "length ratio cap must be > 1");
    if (absolute_word_cap <= 0) throw Error(ErrorCode::InvalidArgument, "absolute word cap must be positive");
    if (length_slack_words < 0) throw Error(ErrorCode::InvalidArgument, "length slack must be non-negative");
}

void StageCounts::add(Verdict v) {
    switch (v) {
        case Verdict::Valid: ++valid; break;
        case Verdict::RejectedDuplicate: ++dup; break;
        case Verdict::RejectedPlaceholder: ++placeholder; break;
        case Verdict::RejectedLength: ++length; break;
        case Verdict::RejectedParse: ++parse; break;
        case Verdict::Pending: break;
    }
}

StageCounts FilterReport::total() const {
    StageCounts sum;
    for (const auto& [_, c] : per_task) {
        sum.valid += c.valid;
        sum.dup += c.dup;
        sum.placeholder += c.placeholder;
        sum.length += c.length;
        sum.parse += c.parse;
    }
    return sum;
}

std::string Deduplicator::key(const std::string& task_id, std::string_view text) const {
    auto norm = text::normalize(text);
    if (scope_ == DedupScope::Global) return norm;
    return task_id + '\x1f' + norm;
}

bool Deduplicator::contains(const std::string& task_id, std::string_view text) const {
    return seen_.count(key(task_id, text)) > 0;
}

bool Deduplicator::insert(const std::string& task_id, std::string_view text) {
    return seen_.insert(key(task_id, text)).second;
}

namespace {

std::vector<const GenerationCandidate*> by_id(std::span<const GenerationCandidate> candidates) {
    std::vector<const GenerationCandidate*> order;
    for (const auto& c : candidates) order.push_back(&c);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto* a, const auto* b) { return a->candidate_id < b->candidate_id; });
    return order;
}

}  // namespace

std::vector<Verdict> dedup(std::span<const GenerationCandidate> candidates,
                           std::span<const InstructionTemplate> existing, const FilterConfig& cfg) {
    Deduplicator seen(cfg.dedup_scope);
    for (const auto& t : existing) seen.insert(t.task_id, render_template(t));

    std::vector<Verdict> out(candidates.size(), Verdict::Pending);
    for (const auto* c : by_id(candidates)) {
        auto idx = static_cast<std::size_t>(c - candidates.data());
        if (!seen.insert(c->task_id, c->restored_text)) out[idx] = Verdict::RejectedDuplicate;
    }
    return out;
}

Verdict placeholder_filter(const InstructionTemplate& candidate, const InstructionTemplate& original,
                           const FilterConfig& cfg) {
    if (!original.has_placeholders()) return Verdict::Valid;
    return ppg::check_placeholder_match(original, candidate, cfg.match_mode) ? Verdict::Valid
                                                                              : Verdict::RejectedPlaceholder;
}

bool exceeds_length(std::size_t candidate_words, std::size_t original_words, const FilterConfig& cfg) {
    const double wc = static_cast<double>(candidate_words);
    const double wo = static_cast<double>(original_words);
    const double relative_cap = std::max(cfg.length_ratio_cap * wo, wo + cfg.length_slack_words);
    return wc > relative_cap || wc > static_cast<double>(cfg.absolute_word_cap);
}

Verdict length_filter(const InstructionTemplate& candidate, const InstructionTemplate& original,
                      const FilterConfig& cfg) {
    if (!cfg.length_filter_enabled) return Verdict::Valid;
    return exceeds_length(word_count(candidate), word_count(original), cfg) ? Verdict::RejectedLength
                                                                            : Verdict::Valid;
}

FilterPipeline::FilterPipeline(FilterConfig cfg, std::span<const InstructionTemplate> raw_templates)
    : cfg_(cfg), dedup_(cfg.dedup_scope) {
    cfg_.validate();
    for (const auto& t : raw_templates) {
        dedup_.insert(t.task_id, render_template(t));
        parents_.insert_or_assign(t.template_id, t);
    }
}

void FilterPipeline::add_parent(const InstructionTemplate& t) { parents_.insert_or_assign(t.template_id, t); }

const InstructionTemplate& FilterPipeline::parent_of(const GenerationCandidate& c) const {
    auto it = parents_.find(c.parent_template_id);
    if (it == parents_.end()) {
        throw Error(ErrorCode::SchemaError,
                    "candidate '" + c.candidate_id + "' refers to unknown parent '" + c.parent_template_id + "'");
    }
    return it->second;
}

Verdict FilterPipeline::apply(GenerationCandidate& c) {
    const auto& parent = parent_of(c);

    auto decide = [&]() -> Verdict {
        InstructionTemplate candidate;
        try {
            candidate = to_template(c);
        } catch (const Error&) {
            return Verdict::RejectedParse;
        }
        if (dedup_.contains(c.task_id, c.restored_text)) return Verdict::RejectedDuplicate;
        if (auto v = placeholder_filter(candidate, parent, cfg_); v != Verdict::Valid) return v;
        if (auto v = length_filter(candidate, parent, cfg_); v != Verdict::Valid) return v;
        return Verdict::Valid;
    };

    c.verdict = decide();
    if (c.verdict == Verdict::Valid) dedup_.insert(c.task_id, c.restored_text);
    report_.per_task[c.task_id].add(c.verdict);
    return c.verdict;
}

PipelineResult run_pipeline(std::vector<GenerationCandidate> candidates,
                            std::span<const InstructionTemplate> raw_templates, const FilterConfig& cfg) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.candidate_id < b.candidate_id; });

    FilterPipeline pipeline(cfg, raw_templates);
    for (const auto& c : candidates) {
        try {
            pipeline.add_parent(to_template(c));
        } catch (const Error&) {
        }
    }

    PipelineResult result;
    for (auto& c : candidates) {
        c.verdict = Verdict::Pending;
        pipeline.apply(c);
        if (c.verdict == Verdict::Valid) result.valid.push_back(c);
    }
    result.candidates = std::move(candidates);
    result.report = pipeline.report();
    return result;
}

}  // namespace instrexp::filter
