#include "msl_lexer.hpp"

#include <cctype>

#include "msw/error.hpp"

namespace msw::msl {

namespace {

bool alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
public:
    explicit Lexer(std::string_view s) : src_(s) {}

    std::vector<Token> run()
    {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.pos = {line_, col_};
            if (at_end()) {
                t.kind = Tok::End;
                out.push_back(t);
                return out;
            }
            const char c = peek();
            if (alpha(c)) {
                t.kind = Tok::Ident;
                t.text = ident();
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                t.kind = Tok::Number;
                t.value = number(t.pos);
            } else if (c == '"') {
                t.kind = Tok::String;
                t.text = string(t.pos);
            } else {
                t.kind = punct(t.pos);
            }
            out.push_back(std::move(t));
        }
    }

private:
    bool at_end() const { return pos_ >= src_.size(); }
    char peek(std::size_t k = 0) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }

    char get()
    {
        const char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space()
    {
        while (!at_end()) {
            const char c = peek();
            if (std::isspace(static_cast<unsigned char>(c))) {
                get();
            } else if ((c == '/' && peek(1) == '/') || (c == '-' && peek(1) == '-')) {
                while (!at_end() && peek() != '\n')
                    get();
            } else {
                break;
            }
        }
    }

    std::string ident()
    {
        std::string s;
        while (!at_end()) {
            const char c = peek();
            if (alnum(c) || c == '#')
                s.push_back(get());
            else if (c == '-' && alpha(peek(1)))
                s.push_back(get());
            else
                break;
        }
        return s;
    }

    std::int64_t number(SourcePos at)
    {
        std::int64_t v = 0;
        while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
            v = v * 10 + (get() - '0');
            if (v > 1'000'000'000'000LL)
                throw SyntaxError(at.line, at.col, "number too large");
        }
        if (!at_end() && alpha(peek()))
            throw SyntaxError(line_, col_, "malformed number");
        return v;
    }

    std::string string(SourcePos at)
    {
        get();  // opening quote
        std::string s;
        for (;;) {
            if (at_end())
                throw SyntaxError(at.line, at.col, "unterminated string");
            const char c = get();
            if (c == '"')
                return s;
            if (c == '\n')
                throw SyntaxError(at.line, at.col, "newline in string");
            if (c != '\\') {
                s.push_back(c);
                continue;
            }
            if (at_end())
                throw SyntaxError(at.line, at.col, "unterminated string");
            // Line continuation: skip trailing blanks, the newline and the
            // next line's indentation.
            std::size_t k = 0;
            while (peek(k) == ' ' || peek(k) == '\t' || peek(k) == '\r')
                ++k;
            if (peek(k) == '\n') {
                for (std::size_t i = 0; i <= k; ++i)
                    get();
                while (peek() == ' ' || peek() == '\t')
                    get();
                continue;
            }
            const char e = get();
            switch (e) {
            case 'n': s.push_back('\n'); break;
            case 't': s.push_back('\t'); break;
            default: s.push_back(e);
            }
        }
    }

    Tok punct(SourcePos at)
    {
        const char c = get();
        const char n = peek();
        switch (c) {
        case '(': return Tok::LParen;
        case ')': return Tok::RParen;
        case '[': return Tok::LBracket;
        case ']': return Tok::RBracket;
        case '{': return Tok::LBrace;
        case '}': return Tok::RBrace;
        case ',': return Tok::Comma;
        case ';': return Tok::Semi;
        case '.': return Tok::Dot;
        case '+': return Tok::Plus;
        case '-': return Tok::Minus;
        case '=':
            if (n == '=') {
                get();
                return Tok::Eq;
            }
            return Tok::Assign;
        case '!':
            if (n == '=') {
                get();
                return Tok::Ne;
            }
            break;
        case '<':
            if (n == '=') {
                get();
                return Tok::Le;
            }
            if (n == '>') {
                get();
                return Tok::Ne;
            }
            return Tok::Lt;
        case '>':
            if (n == '=') {
                get();
                return Tok::Ge;
            }
            return Tok::Gt;
        case '&':
            if (n == '&') {
                get();
                return Tok::AndAnd;
            }
            break;
        case '|':
            if (n == '|') {
                get();
                return Tok::OrOr;
            }
            break;
        default: break;
        }
        throw SyntaxError(at.line, at.col, std::string("unexpected character '") + c + "'");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

}  // namespace

std::vector<Token> lex(std::string_view source)
{
    return Lexer(source).run();
}

}  // namespace msw::msl
