#pragma once

#include <string>
#include <string_view>

#include "instrexp/template.hpp"

namespace instrexp {

enum class Verdict { Pending, Valid, RejectedDuplicate, RejectedPlaceholder, RejectedLength, RejectedParse };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

/// One rewritten instruction produced by the LLM, with provenance.
struct GenerationCandidate {
    std::string candidate_id;
    std::string task_id;
    std::string parent_template_id;
    std::string root_template_id;
    std::string guiding_id;
    double temperature = 0.0;
    int iteration = 0;
    std::string raw_output;     // the reply item before placeholder restoration
    std::string restored_text;  // format-string text with placeholders restored
    Verdict verdict = Verdict::Pending;

    bool operator==(const GenerationCandidate&) const = default;
};

/// The candidate as a Generated template (template_id = candidate_id).
/// Throws if restored_text does not parse.
InstructionTemplate to_template(const GenerationCandidate& c);

}  // namespace instrexp
