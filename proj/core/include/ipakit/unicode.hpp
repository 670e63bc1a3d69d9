#pragma once

#include <string>
#include <string_view>

namespace ipakit::unicode {

// Strict UTF-8 decoding; ill-formed input raises kInvalidUtf8 with the byte
// offset of the first bad sequence.
std::u32string decode_utf8(std::string_view text);

std::string encode_utf8(std::u32string_view text);
std::string encode_utf8(char32_t cp);

// Canonical decomposition (NFD).
std::u32string nfd(std::u32string_view text);

// Decode then decompose.
std::u32string decompose_utf8(std::string_view text);

bool is_whitespace(char32_t cp);

// Canonical combining class (0 for starters and spacing modifier letters).
unsigned combining_class(char32_t cp);

// "U+0261"
std::string code_point_label(char32_t cp);

}  // namespace ipakit::unicode
