#include "obf/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

#include "obf/errors.hpp"

namespace obf::frontend {

namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",     "assert", "async", "await",  "break",
    "class", "continue", "def",   "del",      "elif",   "else",   "except", "finally", "for",
    "from",  "global", "if",      "import",   "in",     "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise",   "return",   "try",    "while",  "with",  "yield",
};

constexpr std::array<std::string_view, 3> kThreeCharOps = {"**=", "//=", ">>="};
constexpr std::array<std::string_view, 2> kThreeCharOps2 = {"<<=", "..."};
constexpr std::array<std::string_view, 19> kTwoCharOps = {
    "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", ":=",
};
constexpr std::string_view kOneCharOps = "+-*/%@&|^~<>()[]{},:.;=";

bool is_name_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_name_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool is_string_prefix(std::string_view prefix) {
    std::string lower;
    for (char c : prefix) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return lower == "r" || lower == "u" || lower == "b" || lower == "f" || lower == "br" ||
           lower == "rb" || lower == "fr" || lower == "rf";
}

class Lexer {
public:
    Lexer(std::string_view src, const TokenizeOptions& opts) : src_(src), opts_(opts) {
        line_ = opts.base_line;
        line_start_ = 0;
        column_bias_ = opts.base_column;
        indents_.push_back(0);
    }

    TokenStream run() {
        bool at_line_start = !opts_.bracketed;
        while (true) {
            if (at_line_start) {
                at_line_start = false;
                if (!handle_indentation()) break;
            }
            if (pos_ >= src_.size()) break;
            unsigned char c = src_[pos_];
            if (c == '\n' || c == '\r') {
                consume_newline();
                if (depth_ == 0 && !opts_.bracketed) {
                    push_newline();
                    at_line_start = true;
                }
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\f') {
                ++pos_;
                continue;
            }
            if (c == '\\') {
                auto next = pos_ + 1;
                if (next < src_.size() && (src_[next] == '\n' || src_[next] == '\r')) {
                    pos_ = next;
                    consume_newline();
                    continue;
                }
                fail("unexpected character after line continuation character");
            }
            if (c == '#') {
                auto start = pos_;
                while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
                out_.comments.push_back({line_, std::string(src_.substr(start, pos_ - start))});
                continue;
            }
            if (is_name_start(c)) {
                lex_name_or_string();
                continue;
            }
            if (std::isdigit(c) || (c == '.' && pos_ + 1 < src_.size() &&
                                    std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                lex_number();
                continue;
            }
            if (c == '"' || c == '\'') {
                lex_string(pos_, pos_);
                continue;
            }
            lex_operator();
        }
        finish();
        return std::move(out_);
    }

private:
    [[noreturn]] void fail(const std::string& message) const {
        throw SyntaxError(line_, column(pos_) + 1, message);
    }

    int column(std::size_t at) const {
        return static_cast<int>(at - line_start_) + (line_ == opts_.base_line ? column_bias_ : 0);
    }

    void consume_newline() {
        if (src_[pos_] == '\r' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') ++pos_;
        ++pos_;
        ++line_;
        line_start_ = pos_;
    }

    void push(TokenKind kind, std::size_t start, std::size_t end, int line, int col) {
        Token tok;
        tok.kind = kind;
        tok.text = src_.substr(start, end - start);
        tok.span = {static_cast<std::uint32_t>(start + opts_.base_offset),
                    static_cast<std::uint32_t>(end + opts_.base_offset)};
        tok.line = line;
        tok.column = col;
        out_.tokens.push_back(tok);
    }

    void push_newline() {
        if (out_.tokens.empty()) return;
        auto last = out_.tokens.back().kind;
        if (last == TokenKind::Newline || last == TokenKind::Indent || last == TokenKind::Dedent) return;
        push(TokenKind::Newline, pos_, pos_, line_ - 1, 0);
    }

    // Returns false at end of input.
    bool handle_indentation() {
        while (true) {
            int width = 0;
            while (pos_ < src_.size()) {
                char c = src_[pos_];
                if (c == ' ') {
                    ++width;
                } else if (c == '\t') {
                    width = (width / 8 + 1) * 8;
                } else if (c == '\f') {
                    width = 0;
                } else {
                    break;
                }
                ++pos_;
            }
            if (pos_ >= src_.size()) return false;
            char c = src_[pos_];
            if (c == '#') {
                auto cstart = pos_;
                while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
                out_.comments.push_back({line_, std::string(src_.substr(cstart, pos_ - cstart))});
                if (pos_ >= src_.size()) return false;
                consume_newline();
                continue;
            }
            if (c == '\n' || c == '\r') {
                consume_newline();
                continue;
            }
            if (width > indents_.back()) {
                indents_.push_back(width);
                push(TokenKind::Indent, pos_, pos_, line_, 0);
            } else {
                while (width < indents_.back()) {
                    indents_.pop_back();
                    push(TokenKind::Dedent, pos_, pos_, line_, 0);
                }
                if (width != indents_.back()) fail("unindent does not match any outer indentation level");
            }
            return true;
        }
    }

    void lex_name_or_string() {
        auto start = pos_;
        while (pos_ < src_.size() && is_name_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        auto word = src_.substr(start, pos_ - start);
        if (pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'') && word.size() <= 2 &&
            is_string_prefix(word)) {
            lex_string(start, pos_);
            return;
        }
        push(TokenKind::Name, start, pos_, line_, column(start));
    }

    void lex_string(std::size_t start, std::size_t quote_at) {
        int start_line = line_;
        int start_col = column(start);
        char q = src_[quote_at];
        bool triple = quote_at + 2 < src_.size() && src_[quote_at + 1] == q && src_[quote_at + 2] == q;
        pos_ = quote_at + (triple ? 3 : 1);
        while (true) {
            if (pos_ >= src_.size()) {
                throw SyntaxError(start_line, start_col + 1, "unterminated string literal");
            }
            char c = src_[pos_];
            if (c == '\\') {
                ++pos_;
                if (pos_ < src_.size()) {
                    if (src_[pos_] == '\n' || src_[pos_] == '\r') {
                        consume_newline();
                    } else {
                        ++pos_;
                    }
                }
                continue;
            }
            if (c == '\n' || c == '\r') {
                if (!triple) throw SyntaxError(start_line, start_col + 1, "unterminated string literal");
                consume_newline();
                continue;
            }
            if (c == q) {
                if (!triple) {
                    ++pos_;
                    break;
                }
                if (pos_ + 2 < src_.size() && src_[pos_ + 1] == q && src_[pos_ + 2] == q) {
                    pos_ += 3;
                    break;
                }
            }
            ++pos_;
        }
        push(TokenKind::String, start, pos_, start_line, start_col);
    }

    void digits(bool (*accept)(unsigned char)) {
        while (pos_ < src_.size()) {
            unsigned char c = src_[pos_];
            if (accept(c)) {
                ++pos_;
            } else if (c == '_' && pos_ + 1 < src_.size() &&
                       accept(static_cast<unsigned char>(src_[pos_ + 1]))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    void lex_number() {
        auto start = pos_;
        auto is_dec = [](unsigned char c) { return std::isdigit(c) != 0; };
        auto at = [&](std::size_t i) -> char { return i < src_.size() ? src_[i] : '\0'; };
        char c0 = at(pos_);
        char c1 = static_cast<char>(std::tolower(static_cast<unsigned char>(at(pos_ + 1))));
        if (c0 == '0' && (c1 == 'x' || c1 == 'o' || c1 == 'b')) {
            pos_ += 2;
            if (at(pos_) == '_') ++pos_;
            if (c1 == 'x') {
                digits([](unsigned char c) { return std::isxdigit(c) != 0; });
            } else if (c1 == 'o') {
                digits([](unsigned char c) { return c >= '0' && c <= '7'; });
            } else {
                digits([](unsigned char c) { return c == '0' || c == '1'; });
            }
        } else {
            digits(is_dec);
            if (at(pos_) == '.') {
                ++pos_;
                digits(is_dec);
            }
            char e = at(pos_);
            if (e == 'e' || e == 'E') {
                auto save = pos_;
                ++pos_;
                if (at(pos_) == '+' || at(pos_) == '-') ++pos_;
                if (std::isdigit(static_cast<unsigned char>(at(pos_)))) {
                    digits(is_dec);
                } else {
                    pos_ = save;
                }
            }
            if (at(pos_) == 'j' || at(pos_) == 'J') ++pos_;
        }
        if (pos_ == start) fail("invalid number");
        push(TokenKind::Number, start, pos_, line_, column(start));
    }

    void lex_operator() {
        auto rest = src_.substr(pos_);
        auto emit = [&](std::size_t len) {
            push(TokenKind::Op, pos_, pos_ + len, line_, column(pos_));
            pos_ += len;
        };
        for (auto op : kThreeCharOps)
            if (rest.substr(0, 3) == op) return emit(3);
        for (auto op : kThreeCharOps2)
            if (rest.substr(0, 3) == op) return emit(3);
        for (auto op : kTwoCharOps)
            if (rest.substr(0, 2) == op) return emit(2);
        char c = rest[0];
        if (kOneCharOps.find(c) != std::string_view::npos) {
            if (c == '(' || c == '[' || c == '{') {
                ++depth_;
            } else if (c == ')' || c == ']' || c == '}') {
                if (depth_ == 0 && !opts_.bracketed) fail(std::string("unmatched '") + c + "'");
                if (depth_ > 0) --depth_;
            }
            return emit(1);
        }
        if (c == '!' && opts_.bracketed) return emit(1);
        fail(std::string("invalid character '") + c + "'");
    }

    void finish() {
        if (!opts_.bracketed) {
            if (depth_ > 0) fail("unexpected EOF: unclosed bracket");
            push_newline_at_eof();
            while (indents_.size() > 1) {
                indents_.pop_back();
                push(TokenKind::Dedent, pos_, pos_, line_, 0);
            }
        }
        push(TokenKind::EndMarker, pos_, pos_, line_, column(pos_));
    }

    void push_newline_at_eof() {
        if (out_.tokens.empty()) return;
        auto last = out_.tokens.back().kind;
        if (last == TokenKind::Newline || last == TokenKind::Dedent || last == TokenKind::Indent) return;
        push(TokenKind::Newline, pos_, pos_, line_, column(pos_));
    }

    std::string_view src_;
    TokenizeOptions opts_;
    TokenStream out_;
    std::size_t pos_ = 0;
    std::size_t line_start_ = 0;
    int line_ = 1;
    int column_bias_ = 0;
    int depth_ = 0;
    std::vector<int> indents_;
};

}  // namespace

TokenStream tokenize(std::string_view source, const TokenizeOptions& options) {
    return Lexer(source, options).run();
}

bool is_keyword(std::string_view word) {
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

bool is_soft_keyword(std::string_view word) {
    return word == "match" || word == "case" || word == "_";
}

bool is_identifier(std::string_view word) {
    if (word.empty() || !is_name_start(static_cast<unsigned char>(word[0]))) return false;
    return std::all_of(word.begin(), word.end(),
                       [](char c) { return is_name_char(static_cast<unsigned char>(c)); });
}

bool is_dunder(std::string_view word) {
    return word.size() > 4 && word.substr(0, 2) == "__" && word.substr(word.size() - 2) == "__";
}

}  // namespace obf::frontend
