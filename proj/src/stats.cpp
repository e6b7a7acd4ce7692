#include "instrexp/stats.hpp"

#include <cmath>

#include "instrexp/error.hpp"
#include "instrexp/text.hpp"

namespace instrexp::stats {

CorpusStats corpus_stats(std::span<const InstructionTemplate> templates) {
    CorpusStats s;
    std::size_t total_words = 0;
    for (const auto& t : templates) {
        auto w = words(t);
        ++s.n_instructions;
        total_words += w.size();
        ++s.length_histogram[w.size()];
        std::string first = w.size() > 0 ? w[0] : "";
        std::string second = w.size() > 1 ? w[1] : "";
        ++s.prefix2_distribution[{first, second}];
    }
    s.empty = s.n_instructions == 0;
    if (!s.empty) s.avg_word_length = static_cast<double>(total_words) / static_cast<double>(s.n_instructions);
    return s;
}

ProportionResult template_text_proportion(std::span<const InstructionTemplate> task_templates,
                                          std::span<const InstanceRecord> task_instances, std::size_t sample_cap,
                                          Rng& rng) {
    ProportionResult r;
    const std::size_t n_pairs = task_templates.size() * task_instances.size();
    if (n_pairs == 0 || sample_cap == 0) return r;

    std::vector<std::size_t> pairs;
    if (n_pairs <= sample_cap) {
        for (std::size_t p = 0; p < n_pairs; ++p) pairs.push_back(p);
    } else {
        pairs = rng.sample_indices(n_pairs, sample_cap);
    }

    double sum = 0;
    for (auto p : pairs) {
        const auto& t = task_templates[p / task_instances.size()];
        const auto& x = task_instances[p % task_instances.size()];
        std::string rendered;
        try {
            rendered = instantiate(t, x);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MissingField && e.code() != ErrorCode::TypeMismatch) throw;
            ++r.skipped;
            continue;
        }
        auto total = text::utf8_length(rendered);
        if (total == 0) {
            ++r.skipped;
            continue;
        }
        sum += static_cast<double>(text::utf8_length(literal_text(t))) / static_cast<double>(total);
        ++r.pairs;
    }
    if (r.pairs > 0) r.mean = sum / static_cast<double>(r.pairs);
    return r;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    "series lengths differ (" + std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + ")");
    }
    if (xs.size() < 2) throw Error(ErrorCode::LengthMismatch, "pearson needs at least two points");
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx;
        double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "pearson of a constant series");
    double r = sxy / std::sqrt(sxx * syy);
    return std::fmax(-1.0, std::fmin(1.0, r));
}

TaskAttributes task_attributes(const std::string& task_id, std::span<const InstructionTemplate> task_templates) {
    TaskAttributes a;
    a.task_id = task_id;

    std::optional<bool> direct;
    std::optional<bool> options;
    for (const auto& t : task_templates) {
        if (!t.annotation) continue;
        if (t.annotation->direct_question) direct = *t.annotation->direct_question;
        if (t.annotation->option_inclusive) options = *t.annotation->option_inclusive;
    }

    if (!direct) {
        a.heuristic = true;
        direct = false;
        for (const auto& t : task_templates) {
            if (t.has_placeholders()) continue;
            auto body = text::trim(literal_text(t));
            if (!body.empty() && body.back() == '?') direct = true;
        }
    }
    if (!options) {
        a.heuristic = true;
        options = false;
        for (const auto& t : task_templates) {
            for (const auto& ph : list_placeholders(t)) {
                if (const auto* f = std::get_if<FieldRef>(&ph.kind); f && f->name == "options") options = true;
                if (const auto* j = std::get_if<JoinRef>(&ph.kind); j && j->list_field == "options") options = true;
            }
        }
    }
    a.direct_question = *direct;
    a.option_inclusive = *options;
    return a;
}

}  // namespace instrexp::stats
