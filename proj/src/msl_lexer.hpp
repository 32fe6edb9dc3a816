#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "msw/msl.hpp"

namespace msw::msl {

enum class Tok {
    Ident,
    Number,
    String,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Assign,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    AndAnd,
    OrOr,
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::int64_t value = 0;
    SourcePos pos;
};

// Identifiers may contain '#' and interior '-' followed by a letter, so
// `db-search-a` and `id#` are single names; write `a - b` for subtraction.
// A backslash before a newline inside a string joins the lines and drops the
// next line's indentation. `//` and `--` start line comments.
std::vector<Token> lex(std::string_view source);

}  // namespace msw::msl
