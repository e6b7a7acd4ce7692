#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace instrexp::text {

/// Trim, then collapse every run of whitespace to a single space. Case is kept.
std::string normalize(std::string_view s);

std::string trim(std::string_view s);

/// Whitespace-separated tokens (ASCII whitespace).
std::vector<std::string_view> split_words(std::string_view s);

std::size_t count_words(std::string_view s);

/// Number of UTF-8 code points. Continuation bytes are not counted.
std::size_t utf8_length(std::string_view s);

/// 64-bit FNV-1a. Stable across platforms; used for ids, rng stream
/// derivation and the stub embedder, never for security.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL);

bool is_identifier(std::string_view s);

/// "%.2f" without locale dependence.
std::string format_fixed(double value, int decimals);

}  // namespace instrexp::text
