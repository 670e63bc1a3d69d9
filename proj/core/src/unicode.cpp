#include "ipakit/unicode.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cstdio>

#include "ipakit/error.hpp"

namespace ipakit::unicode {

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t start = i;
    UChar32 cp;
    U8_NEXT(bytes, i, length, cp);
    if (cp < 0) {
      throw Error(ErrorCode::kInvalidUtf8,
                  "ill-formed UTF-8 at byte " + std::to_string(start),
                  static_cast<std::size_t>(start));
    }
    out.push_back(static_cast<char32_t>(cp));
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size() * 2);
  for (char32_t cp : text) {
    uint8_t buf[U8_MAX_LENGTH];
    int32_t n = 0;
    U8_APPEND_UNSAFE(buf, n, static_cast<UChar32>(cp));
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
  }
  return out;
}

std::string encode_utf8(char32_t cp) { return encode_utf8(std::u32string_view(&cp, 1)); }

std::u32string nfd(std::u32string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::kInvalidArgument, std::string("ICU NFD unavailable: ") + u_errorName(status));
  }
  icu::UnicodeString source =
      icu::UnicodeString::fromUTF32(reinterpret_cast<const UChar32*>(text.data()),
                                    static_cast<int32_t>(text.size()));
  if (normalizer->isNormalized(source, status) && U_SUCCESS(status)) {
    return std::u32string(text);
  }
  status = U_ZERO_ERROR;
  icu::UnicodeString decomposed = normalizer->normalize(source, status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::kInvalidArgument, std::string("NFD failed: ") + u_errorName(status));
  }
  std::u32string out(static_cast<std::size_t>(decomposed.countChar32()), U'\0');
  status = U_ZERO_ERROR;
  decomposed.toUTF32(reinterpret_cast<UChar32*>(out.data()), static_cast<int32_t>(out.size()), status);
  return out;
}

std::u32string decompose_utf8(std::string_view text) { return nfd(decode_utf8(text)); }

unsigned combining_class(char32_t cp) { return u_getCombiningClass(static_cast<UChar32>(cp)); }

bool is_whitespace(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0; }

std::string code_point_label(char32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
  return buf;
}

}  // namespace ipakit::unicode
