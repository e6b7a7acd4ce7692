#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace instrexp {

/// `{name}`: substitute a string field.
struct FieldRef {
    std::string name;
    bool operator==(const FieldRef&) const = default;
};

/// `{token.join(items)}`: join a list field with a string field as separator.
struct JoinRef {
    std::string token_field;
    std::string list_field;
    bool operator==(const JoinRef&) const = default;
};

/// Content of one `{...}` slot. Grammar: `ident` | `ident.join(ident)`.
struct PlaceholderExpr {
    std::string raw_text;
    std::variant<FieldRef, JoinRef> kind;

    /// Throws Error(InvalidExpr) if `raw` is outside the grammar.
    static PlaceholderExpr parse(std::string_view raw);

    bool is_join() const { return std::holds_alternative<JoinRef>(kind); }
    bool operator==(const PlaceholderExpr& o) const { return raw_text == o.raw_text; }
};

struct Literal {
    std::string text;  // unescaped
    bool operator==(const Literal&) const = default;
};

using Segment = std::variant<Literal, PlaceholderExpr>;

enum class Origin { Raw, Generated };

/// Where a generated template came from.
struct Lineage {
    std::string parent_template_id;
    std::string root_template_id;
    std::string guiding_id;
    double temperature = 0.0;
    int iteration = 0;
    bool operator==(const Lineage&) const = default;
};

/// Optional per-task annotations carried in template files.
struct TaskAnnotation {
    std::optional<bool> direct_question;
    std::optional<bool> option_inclusive;
    bool operator==(const TaskAnnotation&) const = default;
};

struct InstructionTemplate {
    std::string template_id;
    std::string task_id;
    std::vector<Segment> segments;
    Origin origin = Origin::Raw;
    std::optional<Lineage> lineage;
    std::optional<TaskAnnotation> annotation;

    bool has_placeholders() const;
    bool operator==(const InstructionTemplate&) const = default;
};

using FieldValue = std::variant<std::string, std::vector<std::string>>;

struct InstanceRecord {
    std::string instance_id;
    std::string task_id;
    std::map<std::string, FieldValue> fields;
    std::string target;
    std::optional<std::string> media_ref;

    bool operator==(const InstanceRecord&) const = default;
};

/// Parse format-string text. `{{`/`}}` are literal braces; anything else in
/// braces must satisfy the placeholder grammar.
/// Throws Error(UnbalancedBraces) or Error(InvalidExpr).
InstructionTemplate parse_template(std::string_view text);

InstructionTemplate parse_template(std::string_view text, std::string template_id, std::string task_id);

/// Exact inverse of parse_template.
std::string render_template(const InstructionTemplate& t);

/// Escape literal braces for embedding in format-string text.
std::string escape_literal(std::string_view literal);

/// Unique placeholders in first-occurrence order.
std::vector<PlaceholderExpr> list_placeholders(const InstructionTemplate& t);

/// Render the template against one instance.
/// Throws Error(MissingField) or Error(TypeMismatch).
std::string instantiate(const InstructionTemplate& t, const InstanceRecord& x);

/// Concatenated unescaped literal text.
std::string literal_text(const InstructionTemplate& t);

/// Whitespace tokens of the rendered template, each placeholder counting as one token.
std::size_t word_count(const InstructionTemplate& t);

/// Whitespace tokens with placeholders kept as `{expr}` atoms.
std::vector<std::string> words(const InstructionTemplate& t);

/// True if `s` contains a substring that parses as a placeholder (`{ident}` or
/// `{ident.join(ident)}`).
bool contains_placeholder_syntax(std::string_view s);

}  // namespace instrexp
