#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace egcr::detail {

/// ASCII lowercase folding; multi-byte UTF-8 sequences pass through.
std::string fold_case(std::string_view text);

bool is_word_char(char c) noexcept;

std::vector<std::string> split_whitespace(std::string_view text);

std::string trim(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// First `max_tokens` whitespace tokens joined by single spaces.
std::string truncate_tokens(std::string_view text, std::size_t max_tokens);

}  // namespace egcr::detail
