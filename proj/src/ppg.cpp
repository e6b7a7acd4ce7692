#include "instrexp/ppg.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "instrexp/error.hpp"

namespace instrexp::ppg {

namespace {

constexpr std::size_t kMaxMaskLetters = 4;

std::vector<std::string> raw_texts(const std::vector<PlaceholderExpr>& phs) {
    std::vector<std::string> out;
    out.reserve(phs.size());
    for (const auto& p : phs) out.push_back(p.raw_text);
    return out;
}

}  // namespace

std::string_view to_string(MatchMode mode) {
    return mode == MatchMode::Ordered ? "ordered" : "unordered";
}

std::string mask_label(std::size_t n) {
    // bijective base-26
    std::string letters;
    std::size_t v = n + 1;
    while (v > 0) {
        --v;
        letters.insert(letters.begin(), static_cast<char>('A' + v % 26));
        v /= 26;
    }
    if (letters.size() > kMaxMaskLetters) throw Error(ErrorCode::MaskExhausted, "mask alphabet exhausted");
    return "{" + letters + "}";
}

MaskedTemplate mask_placeholders(const InstructionTemplate& t) {
    // masks may only collide with literal braces, which appear escaped in the masked text
    std::string escaped_literals;
    for (const auto& seg : t.segments) {
        if (const auto* lit = std::get_if<Literal>(&seg)) escaped_literals += escape_literal(lit->text) + '\n';
    }

    MaskedTemplate out;
    std::unordered_map<std::string, std::string> mask_of;
    std::size_t next = 0;
    for (const auto& ph : list_placeholders(t)) {
        std::string mask = mask_label(next++);
        while (escaped_literals.find(mask) != std::string::npos) mask = mask_label(next++);
        mask_of.emplace(ph.raw_text, mask);
        out.masks.entries.emplace_back(mask, ph);
    }

    for (const auto& seg : t.segments) {
        if (const auto* lit = std::get_if<Literal>(&seg)) {
            out.masked_text += escape_literal(lit->text);
        } else {
            out.masked_text += mask_of.at(std::get<PlaceholderExpr>(seg).raw_text);
        }
    }
    return out;
}

std::string restore_placeholders(std::string_view generated, const MaskMap& m) {
    if (m.empty()) return std::string(generated);

    std::vector<const std::pair<std::string, PlaceholderExpr>*> order;
    for (const auto& e : m.entries) order.push_back(&e);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto* a, const auto* b) { return a->first.size() > b->first.size(); });

    std::string out;
    out.reserve(generated.size());
    std::size_t i = 0;
    while (i < generated.size()) {
        bool replaced = false;
        if (generated[i] == '{') {
            for (const auto* e : order) {
                if (generated.compare(i, e->first.size(), e->first) == 0) {
                    out += "{" + e->second.raw_text + "}";
                    i += e->first.size();
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) out.push_back(generated[i++]);
    }
    return out;
}

bool check_placeholder_match(const InstructionTemplate& original, const InstructionTemplate& candidate, MatchMode mode) {
    auto want = raw_texts(list_placeholders(original));
    auto got = raw_texts(list_placeholders(candidate));
    if (mode == MatchMode::Ordered) return want == got;
    return std::set<std::string>(want.begin(), want.end()) == std::set<std::string>(got.begin(), got.end());
}

bool check_placeholder_match(const InstructionTemplate& original, std::string_view candidate_text, MatchMode mode) {
    return check_placeholder_match(original, parse_template(candidate_text), mode);
}

}  // namespace instrexp::ppg
