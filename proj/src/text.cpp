#include "toptrain/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "toptrain/error.hpp"

namespace toptrain::text {

namespace {

constexpr char32_t kInvalid = 0xFFFD;

icu::UnicodeString to_icu(std::string_view s) {
    return icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
}

std::string from_icu(const icu::UnicodeString& u) {
    std::string out;
    u.toUTF8String(out);
    return out;
}

}  // namespace

char32_t decode_next(std::string_view s, std::size_t& pos) {
    const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
    int32_t i = static_cast<int32_t>(pos);
    UChar32 c = 0;
    U8_NEXT(bytes, i, static_cast<int32_t>(s.size()), c);
    pos = static_cast<std::size_t>(i);
    return c < 0 ? kInvalid : static_cast<char32_t>(c);
}

char32_t decode_prev(std::string_view s, std::size_t pos) {
    const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
    int32_t i = static_cast<int32_t>(pos);
    UChar32 c = 0;
    U8_PREV(bytes, 0, i, c);
    return c < 0 ? kInvalid : static_cast<char32_t>(c);
}

bool is_valid_utf8(std::string_view s) {
    const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
    const auto n = static_cast<int32_t>(s.size());
    for (int32_t i = 0; i < n;) {
        UChar32 c = 0;
        U8_NEXT(bytes, i, n, c);
        if (c < 0) return false;
    }
    return true;
}

std::size_t codepoint_length(std::string_view s) {
    std::size_t count = 0;
    for (std::size_t pos = 0; pos < s.size(); ++count) decode_next(s, pos);
    return count;
}

std::size_t byte_offset_of(std::string_view s, std::size_t cp_index) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < cp_index; ++i) {
        if (pos >= s.size()) return std::string_view::npos;
        decode_next(s, pos);
    }
    return pos;
}

std::size_t codepoint_index_of(std::string_view s, std::size_t byte) {
    std::size_t count = 0;
    for (std::size_t pos = 0; pos < byte && pos < s.size(); ++count) decode_next(s, pos);
    return count;
}

std::string nfc(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error(std::string("ICU NFC unavailable: ") + u_errorName(status));
    icu::UnicodeString out = norm->normalize(to_icu(s), status);
    if (U_FAILURE(status)) throw Error(std::string("NFC normalization failed: ") + u_errorName(status));
    return from_icu(out);
}

bool is_unicode_space(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)); }

bool is_word_char(char32_t cp) {
    const auto c = static_cast<UChar32>(cp);
    const int32_t mask = U_GET_GC_MASK(c);
    return (mask & (U_GC_L_MASK | U_GC_N_MASK | U_GC_MN_MASK | U_GC_MC_MASK)) != 0;
}

std::vector<ByteSpan> whitespace_token_spans(std::string_view s) {
    std::vector<ByteSpan> spans;
    std::size_t pos = 0;
    bool inside = false;
    std::size_t start = 0;
    while (pos < s.size()) {
        const std::size_t here = pos;
        const char32_t cp = decode_next(s, pos);
        const bool space = is_unicode_space(cp);
        if (!space && !inside) {
            inside = true;
            start = here;
        } else if (space && inside) {
            inside = false;
            spans.push_back({start, here});
        }
    }
    if (inside) spans.push_back({start, s.size()});
    return spans;
}

std::size_t count_whitespace_tokens(std::string_view s) {
    std::size_t count = 0;
    std::size_t pos = 0;
    bool inside = false;
    while (pos < s.size()) {
        const bool space = is_unicode_space(decode_next(s, pos));
        if (!space && !inside) ++count;
        inside = !space;
    }
    return count;
}

std::string trim(std::string_view s) {
    const auto spans = whitespace_token_spans(s);
    if (spans.empty()) return {};
    return std::string(s.substr(spans.front().begin, spans.back().end - spans.front().begin));
}

std::string to_lower(std::string_view s) {
    icu::UnicodeString u = to_icu(s);
    u.toLower(icu::Locale::getRoot());
    return from_icu(u);
}

std::string fold_case(std::string_view s) {
    icu::UnicodeString u = to_icu(s);
    u.foldCase();
    return from_icu(u);
}

bool at_token_boundary(std::string_view s, std::size_t begin, std::size_t end) {
    if (begin >= end) return false;
    if (begin > 0) {
        std::size_t p = begin;
        const char32_t first = decode_next(s, p);
        if (is_word_char(first) && is_word_char(decode_prev(s, begin))) return false;
    }
    if (end < s.size()) {
        std::size_t p = end;
        const char32_t next = decode_next(s, p);
        if (is_word_char(next) && is_word_char(decode_prev(s, end))) return false;
    }
    return true;
}

}  // namespace toptrain::text
