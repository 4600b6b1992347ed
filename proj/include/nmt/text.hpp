#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nmt::text {

// Minimal UTF-8 handling, enough for European-language corpora. Malformed
// bytes decode as U+FFFD and never throw.

std::vector<char32_t> decode_utf8(std::string_view s);
std::string encode_utf8(const std::vector<char32_t>& cps);
void append_utf8(std::string& out, char32_t cp);

bool is_letter(char32_t cp);
bool is_digit(char32_t cp);
bool is_space(char32_t cp);

inline bool is_alnum(char32_t cp) { return is_letter(cp) || is_digit(cp); }

// True when the string contains at least one letter.
bool has_letter(std::string_view s);

// True when every codepoint is a letter (empty string -> false).
bool all_letters(std::string_view s);

}  // namespace nmt::text
