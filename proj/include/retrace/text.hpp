#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace retrace::text {

// ASCII whitespace plus the common Unicode space separators.
bool is_space(char32_t c);

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);

/// Collapses every whitespace run to a single ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view s);

/// Canonical composition (NFC). Invalid UTF-8 sequences become U+FFFD.
std::string nfc(std::string_view utf8);

std::u32string to_u32(std::string_view utf8);
std::string to_utf8(std::u32string_view s);

/// Number of code points in a UTF-8 string.
std::size_t code_point_count(std::string_view utf8);

/// Decodes the code point starting at byte `pos`; advances `pos` past it.
char32_t decode_at(std::string_view utf8, std::size_t& pos);

bool is_upper(char32_t c);

std::string ascii_lower(std::string_view s);

}  // namespace retrace::text
