#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "instrexp/random.hpp"
#include "instrexp/template.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return INSTREXP_TEST_DATA; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("instrexp_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string random_ident(instrexp::Rng& rng) {
    static const std::string first = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
    static const std::string rest = first + "0123456789";
    std::string s(1, first[rng.below(first.size())]);
    auto len = rng.below(8);
    for (std::uint64_t i = 0; i < len; ++i) s += rest[rng.below(rest.size())];
    return s;
}

/// Literal text drawn from an alphabet that includes braces (escaped on render),
/// letters that look like masks, and multi-byte characters.
inline std::string random_literal(instrexp::Rng& rng) {
    static const std::vector<std::string> pieces = {"a", "b", " ", "  ", "Z", "{", "}", "A", "B", "?", ".",
                                                    ",", "\n", "é", "图", "{A}", "{{", "AB", "x", "\t"};
    std::string s;
    auto len = rng.below(6);
    for (std::uint64_t i = 0; i < len; ++i) s += pieces[rng.below(pieces.size())];
    return s;
}

/// Format-string text with `n` placeholders (some repeated, some join forms).
inline std::string random_template_text(instrexp::Rng& rng, std::size_t n) {
    std::vector<std::string> used;
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
        std::string lit = random_literal(rng);
        std::string escaped;
        for (char c : lit) {
            escaped += c;
            if (c == '{' || c == '}') escaped += c;
        }
        text += escaped;
        std::string ph;
        if (!used.empty() && rng.below(5) == 0) {
            ph = used[rng.below(used.size())];
        } else if (rng.below(4) == 0) {
            ph = random_ident(rng) + ".join(" + random_ident(rng) + ")";
        } else {
            ph = random_ident(rng);
        }
        used.push_back(ph);
        text += "{" + ph + "}";
    }
    std::string tail = random_literal(rng);
    for (char c : tail) {
        text += c;
        if (c == '{' || c == '}') text += c;
    }
    return text;
}

}  // namespace testing
