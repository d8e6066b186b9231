#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "obf/ast.hpp"

namespace obf::frontend {

enum class TokenKind : std::uint8_t {
    Name,
    Number,
    String,
    Op,
    Newline,
    Indent,
    Dedent,
    EndMarker,
};

struct Token {
    TokenKind kind;
    std::string_view text;
    Span span;
    int line = 0;
    int column = 0;
};

struct TokenStream {
    std::vector<Token> tokens;
    std::vector<Comment> comments;
};

struct TokenizeOptions {
    /// Offset added to every span; used when tokenizing an embedded fragment.
    std::uint32_t base_offset = 0;
    int base_line = 1;
    int base_column = 0;
    /// Treat the whole input as if inside brackets: no NEWLINE/INDENT/DEDENT.
    bool bracketed = false;
};

/// Splits Python source into tokens. `source` must outlive the returned views.
/// Throws SyntaxError on unterminated strings, bad indentation or stray characters.
TokenStream tokenize(std::string_view source, const TokenizeOptions& options = {});

bool is_keyword(std::string_view word);
bool is_soft_keyword(std::string_view word);
bool is_identifier(std::string_view word);
bool is_dunder(std::string_view word);

}  // namespace obf::frontend
