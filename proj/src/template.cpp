#include "instrexp/template.hpp"

#include <unordered_set>

#include "instrexp/error.hpp"
#include "instrexp/text.hpp"

namespace instrexp {

namespace {

constexpr std::string_view kJoinCall = ".join(";

void append_literal(std::vector<Segment>& segments, std::string_view chunk) {
    if (chunk.empty()) return;
    if (!segments.empty()) {
        if (auto* lit = std::get_if<Literal>(&segments.back())) {
            lit->text.append(chunk);
            return;
        }
    }
    segments.emplace_back(Literal{std::string(chunk)});
}

const FieldValue& lookup(const InstanceRecord& x, const std::string& name) {
    auto it = x.fields.find(name);
    if (it == x.fields.end()) {
        throw Error(ErrorCode::MissingField, "instance '" + x.instance_id + "' has no field '" + name + "'");
    }
    return it->second;
}

const std::string& as_string(const InstanceRecord& x, const std::string& name) {
    const auto& v = lookup(x, name);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw Error(ErrorCode::TypeMismatch, "field '" + name + "' of instance '" + x.instance_id + "' is a list, expected a string");
}

const std::vector<std::string>& as_list(const InstanceRecord& x, const std::string& name) {
    const auto& v = lookup(x, name);
    if (const auto* l = std::get_if<std::vector<std::string>>(&v)) return *l;
    throw Error(ErrorCode::TypeMismatch, "field '" + name + "' of instance '" + x.instance_id + "' is a string, expected a list");
}

std::string display_text(const InstructionTemplate& t) {
    std::string out;
    for (const auto& seg : t.segments) {
        if (const auto* lit = std::get_if<Literal>(&seg)) {
            out += lit->text;
        } else {
            out += "{" + std::get<PlaceholderExpr>(seg).raw_text + "}";
        }
    }
    return out;
}

}  // namespace

PlaceholderExpr PlaceholderExpr::parse(std::string_view raw) {
    if (text::is_identifier(raw)) return {std::string(raw), FieldRef{std::string(raw)}};

    auto dot = raw.find(kJoinCall);
    if (dot != std::string_view::npos && raw.back() == ')') {
        auto token = raw.substr(0, dot);
        auto list = raw.substr(dot + kJoinCall.size(), raw.size() - dot - kJoinCall.size() - 1);
        if (text::is_identifier(token) && text::is_identifier(list)) {
            return {std::string(raw), JoinRef{std::string(token), std::string(list)}};
        }
    }
    throw Error(ErrorCode::InvalidExpr, "'{" + std::string(raw) + "}' is not a placeholder (expected {name} or {token.join(list)})");
}

bool InstructionTemplate::has_placeholders() const {
    for (const auto& seg : segments) {
        if (std::holds_alternative<PlaceholderExpr>(seg)) return true;
    }
    return false;
}

InstructionTemplate parse_template(std::string_view s) {
    InstructionTemplate t;
    std::size_t i = 0;
    std::size_t run_start = 0;
    std::string pending;

    auto flush = [&](std::size_t end) {
        pending.append(s.substr(run_start, end - run_start));
    };

    while (i < s.size()) {
        char c = s[i];
        if (c == '{') {
            if (i + 1 < s.size() && s[i + 1] == '{') {
                flush(i);
                pending.push_back('{');
                i += 2;
                run_start = i;
                continue;
            }
            auto close = s.find_first_of("{}", i + 1);
            if (close == std::string_view::npos || s[close] == '{') {
                throw Error(ErrorCode::UnbalancedBraces, "unmatched '{' at offset " + std::to_string(i));
            }
            flush(i);
            append_literal(t.segments, pending);
            pending.clear();
            t.segments.emplace_back(PlaceholderExpr::parse(s.substr(i + 1, close - i - 1)));
            i = close + 1;
            run_start = i;
        } else if (c == '}') {
            if (i + 1 < s.size() && s[i + 1] == '}') {
                flush(i);
                pending.push_back('}');
                i += 2;
                run_start = i;
                continue;
            }
            throw Error(ErrorCode::UnbalancedBraces, "unmatched '}' at offset " + std::to_string(i));
        } else {
            ++i;
        }
    }
    flush(s.size());
    append_literal(t.segments, pending);
    return t;
}

InstructionTemplate parse_template(std::string_view text, std::string template_id, std::string task_id) {
    auto t = parse_template(text);
    t.template_id = std::move(template_id);
    t.task_id = std::move(task_id);
    return t;
}

std::string escape_literal(std::string_view literal) {
    std::string out;
    out.reserve(literal.size());
    for (char c : literal) {
        out.push_back(c);
        if (c == '{' || c == '}') out.push_back(c);
    }
    return out;
}

std::string render_template(const InstructionTemplate& t) {
    std::string out;
    for (const auto& seg : t.segments) {
        if (const auto* lit = std::get_if<Literal>(&seg)) {
            out += escape_literal(lit->text);
        } else {
            out += "{" + std::get<PlaceholderExpr>(seg).raw_text + "}";
        }
    }
    return out;
}

std::vector<PlaceholderExpr> list_placeholders(const InstructionTemplate& t) {
    std::vector<PlaceholderExpr> out;
    std::unordered_set<std::string> seen;
    for (const auto& seg : t.segments) {
        if (const auto* ph = std::get_if<PlaceholderExpr>(&seg)) {
            if (seen.insert(ph->raw_text).second) out.push_back(*ph);
        }
    }
    return out;
}

std::string instantiate(const InstructionTemplate& t, const InstanceRecord& x) {
    std::string out;
    for (const auto& seg : t.segments) {
        if (const auto* lit = std::get_if<Literal>(&seg)) {
            out += lit->text;
            continue;
        }
        const auto& ph = std::get<PlaceholderExpr>(seg);
        if (const auto* f = std::get_if<FieldRef>(&ph.kind)) {
            out += as_string(x, f->name);
        } else {
            const auto& j = std::get<JoinRef>(ph.kind);
            const auto& items = as_list(x, j.list_field);
            const auto& sep = as_string(x, j.token_field);
            for (std::size_t k = 0; k < items.size(); ++k) {
                if (k > 0) out += sep;
                out += items[k];
            }
        }
    }
    return out;
}

std::string literal_text(const InstructionTemplate& t) {
    std::string out;
    for (const auto& seg : t.segments) {
        if (const auto* lit = std::get_if<Literal>(&seg)) out += lit->text;
    }
    return out;
}

std::vector<std::string> words(const InstructionTemplate& t) {
    auto display = display_text(t);
    std::vector<std::string> out;
    for (auto w : text::split_words(display)) out.emplace_back(w);
    return out;
}

std::size_t word_count(const InstructionTemplate& t) {
    return text::count_words(display_text(t));
}

bool contains_placeholder_syntax(std::string_view s) {
    std::size_t pos = 0;
    while ((pos = s.find('{', pos)) != std::string_view::npos) {
        auto close = s.find('}', pos + 1);
        if (close == std::string_view::npos) return false;
        auto inner = s.substr(pos + 1, close - pos - 1);
        if (inner.find('{') == std::string_view::npos) {
            try {
                PlaceholderExpr::parse(inner);
                return true;
            } catch (const Error&) {
            }
        }
        ++pos;
    }
    return false;
}

}  // namespace instrexp
