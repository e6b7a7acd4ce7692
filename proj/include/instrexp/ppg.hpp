#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "instrexp/template.hpp"

namespace instrexp::ppg {

/// Bijection between atomic masks ("{A}", "{B}", ...) and placeholder expressions.
struct MaskMap {
    std::vector<std::pair<std::string, PlaceholderExpr>> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
};

struct MaskedTemplate {
    std::string masked_text;
    MaskMap masks;
};

enum class MatchMode { Unordered, Ordered };

/// The n-th mask label in the sequence A..Z, AA..AZ, BA.., ..., ZZZZ.
/// Throws Error(MaskExhausted) past the last four-letter label.
std::string mask_label(std::size_t n);

/// Replace each unique placeholder (every occurrence) with the next mask not
/// already present in the template's literal text.
MaskedTemplate mask_placeholders(const InstructionTemplate& t);

/// Put placeholder expressions back. Single left-to-right pass, longest mask
/// first, so restored text is never rescanned.
std::string restore_placeholders(std::string_view generated, const MaskMap& m);

/// Unordered: same set of unique placeholders. Ordered: also the same
/// first-occurrence order. Occurrence counts are not compared.
/// Throws Error(InvalidExpr) / Error(UnbalancedBraces) if the candidate does not parse.
bool check_placeholder_match(const InstructionTemplate& original, std::string_view candidate_text, MatchMode mode);

bool check_placeholder_match(const InstructionTemplate& original, const InstructionTemplate& candidate, MatchMode mode);

std::string_view to_string(MatchMode mode);

}  // namespace instrexp::ppg
