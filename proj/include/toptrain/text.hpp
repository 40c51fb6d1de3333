#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by every module. All offsets exposed to file formats
// are code-point offsets (the convention of SQuAD-style answer_start);
// everything internal works on byte offsets.
namespace toptrain::text {

// Byte range [begin, end) inside a string.
struct ByteSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    bool operator==(const ByteSpan&) const = default;
};

bool is_valid_utf8(std::string_view s);

// Number of code points. Invalid sequences count one per byte.
std::size_t codepoint_length(std::string_view s);

// Byte offset of code point `cp_index`; npos when past the end.
std::size_t byte_offset_of(std::string_view s, std::size_t cp_index);

// Code-point index of byte offset `byte` (must lie on a boundary).
std::size_t codepoint_index_of(std::string_view s, std::size_t byte);

// Unicode NFC normalization.
std::string nfc(std::string_view s);

bool is_unicode_space(char32_t cp);
bool is_word_char(char32_t cp);  // letter or digit

// Decode the code point starting at `pos` and advance `pos` past it.
char32_t decode_next(std::string_view s, std::size_t& pos);

// Decode the code point that ends right before `pos`.
char32_t decode_prev(std::string_view s, std::size_t pos);

// Unicode-whitespace-delimited tokens, as byte spans into `s`.
std::vector<ByteSpan> whitespace_token_spans(std::string_view s);
std::size_t count_whitespace_tokens(std::string_view s);

std::string trim(std::string_view s);

// Full Unicode lower-casing and case folding.
std::string to_lower(std::string_view s);
std::string fold_case(std::string_view s);

// True when [begin, end) is not glued to a word character on either side:
// the match edge and its outside neighbour are not both letters/digits.
bool at_token_boundary(std::string_view s, std::size_t begin, std::size_t end);

}  // namespace toptrain::text
