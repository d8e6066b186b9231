#include <algorithm>
#include <numeric>
#include <string>
#include <utility>

#include "obf/errors.hpp"
#include "obf/frontend.hpp"
#include "obf/tokenizer.hpp"

namespace obf::frontend {

namespace {

bool is_comparison_op(std::string_view op) {
    return op == "<" || op == ">" || op == "==" || op == ">=" || op == "<=" || op == "!=";
}

bool is_augassign_op(std::string_view op) {
    return op == "+=" || op == "-=" || op == "*=" || op == "/=" || op == "//=" || op == "%=" ||
           op == "@=" || op == "&=" || op == "|=" || op == "^=" || op == ">>=" || op == "<<=" ||
           op == "**=";
}

struct SharedState {
    std::string_view source;
    std::vector<Occurrence> occurrences;
};

class Parser {
public:
    Parser(SharedState& state, std::vector<Token> tokens) : st_(state), toks_(std::move(tokens)) {}

    NodePtr parse_module() {
        auto module = make_node(NodeKind::Module, {0, static_cast<std::uint32_t>(st_.source.size())}, 1);
        while (!at(TokenKind::EndMarker)) {
            if (at(TokenKind::Newline)) {
                next();
                continue;
            }
            if (at(TokenKind::Indent)) fail_here("unexpected indent");
            statement(module->kids);
        }
        mark_docstring(module->kids);
        return module;
    }

    NodePtr parse_single_expression() {
        while (at(TokenKind::Newline)) next();
        auto expr = testlist_star_expr();
        while (at(TokenKind::Newline)) next();
        if (!at(TokenKind::EndMarker)) fail_here("unexpected token after expression");
        return expr;
    }

    NodePtr parse_fstring_expression() {
        NodePtr expr;
        if (at_kw("yield")) {
            expr = yield_expr();
        } else {
            expr = testlist_star_expr();
        }
        if (!at(TokenKind::EndMarker)) fail_here("f-string: expecting '}'");
        return expr;
    }

private:
    // ---- token helpers ---------------------------------------------------

    const Token& peek(std::size_t ahead = 0) const {
        auto i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    bool at(TokenKind kind) const { return peek().kind == kind; }
    bool at_op(std::string_view op, std::size_t ahead = 0) const {
        const auto& t = peek(ahead);
        return t.kind == TokenKind::Op && t.text == op;
    }
    bool at_kw(std::string_view kw, std::size_t ahead = 0) const {
        const auto& t = peek(ahead);
        return t.kind == TokenKind::Name && t.text == kw;
    }
    bool at_identifier(std::size_t ahead = 0) const {
        const auto& t = peek(ahead);
        return t.kind == TokenKind::Name && !is_keyword(t.text);
    }
    const Token& next() {
        const auto& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    const Token& prev() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }

    [[noreturn]] void fail_at(const Token& t, const std::string& message) const {
        throw SyntaxError(t.line, t.column + 1, message);
    }
    [[noreturn]] void fail_here(const std::string& message) const {
        const auto& t = peek();
        std::string shown;
        switch (t.kind) {
            case TokenKind::Newline: shown = "NEWLINE"; break;
            case TokenKind::Indent: shown = "INDENT"; break;
            case TokenKind::Dedent: shown = "DEDENT"; break;
            case TokenKind::EndMarker: shown = "EOF"; break;
            default: shown = "'" + std::string(t.text) + "'";
        }
        fail_at(t, message + " (at " + shown + ")");
    }

    const Token& expect_op(std::string_view op) {
        if (!at_op(op)) fail_here("expected '" + std::string(op) + "'");
        return next();
    }
    const Token& expect_kw(std::string_view kw) {
        if (!at_kw(kw)) fail_here("expected '" + std::string(kw) + "'");
        return next();
    }
    void expect_newline() {
        if (at(TokenKind::Newline)) {
            next();
            return;
        }
        if (at(TokenKind::EndMarker)) return;
        fail_here("invalid syntax");
    }

    int add_occurrence(std::string name, Span span, Role role) {
        st_.occurrences.push_back({std::move(name), span, role});
        return static_cast<int>(st_.occurrences.size() - 1);
    }

    NodePtr ident(Role role) {
        if (!at_identifier()) fail_here("expected identifier");
        const auto& t = next();
        auto node = make_node(NodeKind::Ident, t.span, t.line);
        node->value = std::string(t.text);
        node->occurrence = add_occurrence(node->value, t.span, role);
        return node;
    }

    static void finish(Node& node, const Token& last) { node.span.end = last.span.end; }

    NodePtr start_node(NodeKind kind) {
        const auto& t = peek();
        return make_node(kind, {t.span.begin, t.span.end}, t.line);
    }

    // ---- statements --------------------------------------------------------

    void statement(std::vector<NodePtr>& out) {
        if (at_op("@") || at_kw("def") || at_kw("class") || at_kw("if") || at_kw("while") ||
            at_kw("for") || at_kw("try") || at_kw("with") ||
            (at_kw("async") && (at_kw("def", 1) || at_kw("for", 1) || at_kw("with", 1)))) {
            out.push_back(compound_statement());
            return;
        }
        bool starts_with_match = at_kw("match") && !at_op("=", 1) && !at_op(".", 1);
        try {
            simple_statements(out);
        } catch (const SyntaxError& e) {
            if (starts_with_match) {
                throw SyntaxError(e.line(), e.column(), "match statements are not supported");
            }
            throw;
        }
    }

    void simple_statements(std::vector<NodePtr>& out) {
        while (true) {
            out.push_back(small_statement());
            if (at_op(";")) {
                next();
                if (at(TokenKind::Newline) || at(TokenKind::EndMarker)) break;
                continue;
            }
            break;
        }
        expect_newline();
    }

    NodePtr small_statement() {
        auto first = peek();
        NodePtr node;
        if (at_kw("pass")) {
            node = start_node(NodeKind::Pass);
            next();
        } else if (at_kw("break")) {
            node = start_node(NodeKind::Break);
            next();
        } else if (at_kw("continue")) {
            node = start_node(NodeKind::Continue);
            next();
        } else if (at_kw("return")) {
            node = start_node(NodeKind::Return);
            next();
            if (!ends_simple_statement()) {
                node->kids.push_back(testlist_star_expr());
            } else {
                node->kids.push_back(nullptr);
            }
        } else if (at_kw("raise")) {
            node = start_node(NodeKind::Raise);
            next();
            if (!ends_simple_statement()) {
                node->kids.push_back(test());
                if (at_kw("from")) {
                    next();
                    node->kids.push_back(test());
                } else {
                    node->kids.push_back(nullptr);
                }
            } else {
                node->kids.push_back(nullptr);
                node->kids.push_back(nullptr);
            }
        } else if (at_kw("global") || at_kw("nonlocal")) {
            node = start_node(at_kw("global") ? NodeKind::Global : NodeKind::Nonlocal);
            next();
            node->kids.push_back(ident(Role::Reference));
            while (at_op(",")) {
                next();
                node->kids.push_back(ident(Role::Reference));
            }
        } else if (at_kw("del")) {
            node = start_node(NodeKind::Delete);
            next();
            while (true) {
                auto target = at_op("*") ? star_expr() : expr();
                set_context(*target, kDel);
                node->kids.push_back(std::move(target));
                if (!at_op(",")) break;
                next();
                if (ends_simple_statement()) break;
            }
        } else if (at_kw("assert")) {
            node = start_node(NodeKind::Assert);
            next();
            node->kids.push_back(test());
            if (at_op(",")) {
                next();
                node->kids.push_back(test());
            } else {
                node->kids.push_back(nullptr);
            }
        } else if (at_kw("import")) {
            node = import_name();
        } else if (at_kw("from")) {
            node = import_from();
        } else {
            node = expression_statement();
        }
        node->line = first.line;
        node->span.begin = first.span.begin;
        finish(*node, prev());
        return node;
    }

    bool ends_simple_statement() const {
        return at(TokenKind::Newline) || at(TokenKind::EndMarker) || at_op(";");
    }

    NodePtr dotted_name() {
        auto seq = start_node(NodeKind::Seq);
        auto part = ident(Role::ImportAlias);
        part->flags |= kModulePath;
        st_.occurrences[part->occurrence].role = Role::ImportAlias;
        seq->kids.push_back(std::move(part));
        while (at_op(".")) {
            next();
            auto more = ident(Role::ImportAlias);
            more->flags |= kModulePath;
            seq->kids.push_back(std::move(more));
        }
        finish(*seq, prev());
        return seq;
    }

    NodePtr import_name() {
        auto node = start_node(NodeKind::Import);
        next();
        while (true) {
            auto alias = start_node(NodeKind::Alias);
            alias->kids.push_back(dotted_name());
            if (at_kw("as")) {
                next();
                alias->kids.push_back(ident(Role::ImportAlias));
            } else {
                alias->kids.push_back(nullptr);
            }
            finish(*alias, prev());
            node->kids.push_back(std::move(alias));
            if (!at_op(",")) break;
            next();
        }
        return node;
    }

    NodePtr import_from() {
        auto node = start_node(NodeKind::ImportFrom);
        next();
        std::string dots;
        while (at_op(".") || at_op("...")) {
            dots += std::string(next().text);
        }
        node->value = dots;
        if (at_kw("import")) {
            if (dots.empty()) fail_here("expected module name");
            node->kids.push_back(make_node(NodeKind::Seq));
        } else {
            node->kids.push_back(dotted_name());
        }
        expect_kw("import");
        auto names = start_node(NodeKind::Seq);
        if (at_op("*")) {
            next();
            node->flags |= kStar;
        } else {
            bool paren = false;
            if (at_op("(")) {
                next();
                paren = true;
            }
            while (true) {
                auto alias = start_node(NodeKind::Alias);
                auto dotted = make_node(NodeKind::Seq, peek().span, peek().line);
                auto name = ident(Role::ImportAlias);
                dotted->kids.push_back(std::move(name));
                alias->kids.push_back(std::move(dotted));
                if (at_kw("as")) {
                    next();
                    alias->kids[0]->kids[0]->flags |= kImportedName;
                    alias->kids.push_back(ident(Role::ImportAlias));
                } else {
                    alias->kids.push_back(nullptr);
                }
                finish(*alias, prev());
                names->kids.push_back(std::move(alias));
                if (!at_op(",")) break;
                next();
                if (paren && at_op(")")) break;
            }
            if (paren) expect_op(")");
        }
        node->kids.push_back(std::move(names));
        return node;
    }

    NodePtr expression_statement() {
        auto first = at_kw("yield") ? yield_expr() : testlist_star_expr();
        if (at_op(":")) {
            next();
            if (first->kind != NodeKind::Name && first->kind != NodeKind::Attribute &&
                first->kind != NodeKind::Subscript) {
                fail_here("illegal target for annotation");
            }
            set_context(*first, kStore);
            auto node = make_node(NodeKind::AnnAssign, first->span, first->line);
            node->kids.push_back(std::move(first));
            node->kids.push_back(test());
            if (at_op("=")) {
                next();
                node->kids.push_back(at_kw("yield") ? yield_expr() : testlist_star_expr());
            } else {
                node->kids.push_back(nullptr);
            }
            return node;
        }
        if (peek().kind == TokenKind::Op && is_augassign_op(peek().text)) {
            if (first->kind != NodeKind::Name && first->kind != NodeKind::Attribute &&
                first->kind != NodeKind::Subscript) {
                fail_here("illegal expression for augmented assignment");
            }
            set_context(*first, kStore);
            auto node = make_node(NodeKind::AugAssign, first->span, first->line);
            node->value = std::string(next().text);
            node->kids.push_back(std::move(first));
            node->kids.push_back(at_kw("yield") ? yield_expr() : testlist());
            return node;
        }
        if (at_op("=")) {
            auto node = make_node(NodeKind::Assign, first->span, first->line);
            std::vector<NodePtr> parts;
            parts.push_back(std::move(first));
            while (at_op("=")) {
                next();
                parts.push_back(at_kw("yield") ? yield_expr() : testlist_star_expr());
            }
            for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
                set_context(*parts[i], kStore);
            }
            node->kids = std::move(parts);
            return node;
        }
        auto node = make_node(NodeKind::ExprStmt, first->span, first->line);
        node->kids.push_back(std::move(first));
        return node;
    }

    void set_context(Node& node, NodeFlag flag) {
        switch (node.kind) {
            case NodeKind::Name:
                node.flags |= flag;
                if (flag == kStore) st_.occurrences[node.occurrence].role = Role::Definition;
                return;
            case NodeKind::Attribute:
            case NodeKind::Subscript:
                node.flags |= flag;
                return;
            case NodeKind::Tuple:
            case NodeKind::List:
                node.flags |= flag;
                for (auto& kid : node.kids) set_context(*kid, flag);
                return;
            case NodeKind::Starred:
                node.flags |= flag;
                set_context(*node.kids[0], flag);
                return;
            default:
                throw SyntaxError(node.line, 0,
                                  "cannot assign to " + std::string(kind_name(node.kind)));
        }
    }

    NodePtr compound_statement() {
        const auto first = peek();
        NodePtr node;
        if (at_op("@")) {
            node = decorated();
        } else if (at_kw("async")) {
            next();
            if (at_kw("def")) {
                node = funcdef(make_node(NodeKind::Seq));
            } else if (at_kw("for")) {
                node = for_stmt();
            } else {
                node = with_stmt();
            }
            node->flags |= kAsync;
        } else if (at_kw("def")) {
            node = funcdef(make_node(NodeKind::Seq));
        } else if (at_kw("class")) {
            node = classdef(make_node(NodeKind::Seq));
        } else if (at_kw("if")) {
            node = if_stmt();
        } else if (at_kw("while")) {
            node = while_stmt();
        } else if (at_kw("for")) {
            node = for_stmt();
        } else if (at_kw("try")) {
            node = try_stmt();
        } else {
            node = with_stmt();
        }
        node->line = first.line;
        node->span.begin = first.span.begin;
        return node;
    }

    NodePtr block() {
        expect_op(":");
        auto body = start_node(NodeKind::Seq);
        if (at(TokenKind::Newline)) {
            next();
            if (!at(TokenKind::Indent)) fail_here("expected an indented block");
            next();
            while (!at(TokenKind::Dedent) && !at(TokenKind::EndMarker)) {
                if (at(TokenKind::Newline)) {
                    next();
                    continue;
                }
                statement(body->kids);
            }
            if (at(TokenKind::Dedent)) next();
        } else {
            simple_statements(body->kids);
        }
        finish(*body, prev());
        return body;
    }

    void mark_docstring(std::vector<NodePtr>& body) {
        if (body.empty()) return;
        auto& first = *body.front();
        if (first.kind != NodeKind::ExprStmt || first.kids[0]->kind != NodeKind::String) return;
        for (const auto& part : first.kids[0]->kids) {
            if (part->kind != NodeKind::StrPart) return;
            auto prefix_end = part->value.find_first_of("'\"");
            auto prefix = part->value.substr(0, prefix_end);
            if (prefix.find_first_of("bB") != std::string::npos) return;
        }
        first.flags |= kDocstring;
    }

    NodePtr decorated() {
        auto decorators = start_node(NodeKind::Seq);
        while (at_op("@")) {
            next();
            decorators->kids.push_back(namedexpr_test());
            expect_newline();
        }
        if (at_kw("async") && at_kw("def", 1)) {
            next();
            auto node = funcdef(std::move(decorators));
            node->flags |= kAsync;
            return node;
        }
        if (at_kw("def")) return funcdef(std::move(decorators));
        if (at_kw("class")) return classdef(std::move(decorators));
        fail_here("expected function or class after decorator");
    }

    NodePtr funcdef(NodePtr decorators) {
        auto node = start_node(NodeKind::FunctionDef);
        expect_kw("def");
        node->kids.push_back(ident(Role::Definition));
        node->kids.push_back(std::move(decorators));
        expect_op("(");
        node->kids.push_back(parameters(")", true));
        expect_op(")");
        if (at_op("->")) {
            next();
            node->kids.push_back(test());
        } else {
            node->kids.push_back(nullptr);
        }
        auto body = block();
        mark_docstring(body->kids);
        node->kids.push_back(std::move(body));
        finish(*node, prev());
        return node;
    }

    NodePtr parameters(std::string_view closer, bool annotations) {
        auto args = start_node(NodeKind::Arguments);
        bool seen_star = false;
        bool seen_slash = false;
        bool seen_default = false;
        while (!at_op(closer)) {
            if (at_op("/")) {
                if (seen_slash || seen_star || args->kids.empty()) fail_here("invalid '/' in parameters");
                seen_slash = true;
                args->kids.push_back(start_node(NodeKind::SlashMarker));
                next();
            } else if (at_op("**")) {
                auto param = start_node(NodeKind::Param);
                next();
                param->value = "**";
                param_body(*param, annotations, false);
                args->kids.push_back(std::move(param));
                if (at_op(",")) next();
                if (!at_op(closer)) fail_here("arguments cannot follow var-keyword argument");
                break;
            } else if (at_op("*")) {
                if (seen_star) fail_here("* argument may appear only once");
                seen_star = true;
                auto star = start_node(NodeKind::StarMarker);
                next();
                if (at_op(",") || at_op(closer)) {
                    args->kids.push_back(std::move(star));
                } else {
                    auto param = make_node(NodeKind::Param, star->span, star->line);
                    param->value = "*";
                    param_body(*param, annotations, false);
                    args->kids.push_back(std::move(param));
                }
            } else {
                auto param = start_node(NodeKind::Param);
                param_body(*param, annotations, true);
                if (param->kids[2]) {
                    seen_default = true;
                } else if (seen_default && !seen_star) {
                    fail_here("non-default argument follows default argument");
                }
                args->kids.push_back(std::move(param));
            }
            if (!at_op(",")) break;
            next();
        }
        finish(*args, prev());
        return args;
    }

    void param_body(Node& param, bool annotations, bool allow_default) {
        param.kids.push_back(ident(Role::Definition));
        if (annotations && at_op(":")) {
            next();
            param.kids.push_back(test());
        } else {
            param.kids.push_back(nullptr);
        }
        if (allow_default && at_op("=")) {
            next();
            param.kids.push_back(test());
        } else {
            param.kids.push_back(nullptr);
        }
        finish(param, prev());
    }

    NodePtr classdef(NodePtr decorators) {
        auto node = start_node(NodeKind::ClassDef);
        expect_kw("class");
        node->kids.push_back(ident(Role::Definition));
        node->kids.push_back(std::move(decorators));
        auto bases = start_node(NodeKind::Seq);
        if (at_op("(")) {
            next();
            call_arguments(bases->kids);
            expect_op(")");
        }
        node->kids.push_back(std::move(bases));
        auto body = block();
        mark_docstring(body->kids);
        node->kids.push_back(std::move(body));
        finish(*node, prev());
        return node;
    }

    NodePtr if_stmt() {
        auto node = start_node(NodeKind::If);
        next();  // 'if' or 'elif'
        node->kids.push_back(namedexpr_test());
        node->kids.push_back(block());
        auto orelse = start_node(NodeKind::Seq);
        if (at_kw("elif")) {
            orelse->kids.push_back(if_stmt());
        } else if (at_kw("else")) {
            next();
            orelse = block();
        }
        node->kids.push_back(std::move(orelse));
        finish(*node, prev());
        return node;
    }

    NodePtr while_stmt() {
        auto node = start_node(NodeKind::While);
        next();
        node->kids.push_back(namedexpr_test());
        node->kids.push_back(block());
        node->kids.push_back(else_block());
        finish(*node, prev());
        return node;
    }

    NodePtr else_block() {
        if (at_kw("else")) {
            next();
            return block();
        }
        return make_node(NodeKind::Seq, peek().span, peek().line);
    }

    NodePtr for_stmt() {
        auto node = start_node(NodeKind::For);
        expect_kw("for");
        auto target = exprlist();
        set_context(*target, kStore);
        node->kids.push_back(std::move(target));
        expect_kw("in");
        node->kids.push_back(testlist());
        node->kids.push_back(block());
        node->kids.push_back(else_block());
        finish(*node, prev());
        return node;
    }

    NodePtr try_stmt() {
        auto node = start_node(NodeKind::Try);
        expect_kw("try");
        node->kids.push_back(block());
        auto handlers = start_node(NodeKind::Seq);
        while (at_kw("except")) {
            auto handler = start_node(NodeKind::ExceptHandler);
            next();
            if (!at_op(":")) {
                handler->kids.push_back(test());
                if (at_kw("as")) {
                    next();
                    handler->kids.push_back(ident(Role::Definition));
                } else {
                    handler->kids.push_back(nullptr);
                }
            } else {
                handler->kids.push_back(nullptr);
                handler->kids.push_back(nullptr);
            }
            handler->kids.push_back(block());
            finish(*handler, prev());
            handlers->kids.push_back(std::move(handler));
        }
        node->kids.push_back(std::move(handlers));
        auto orelse = make_node(NodeKind::Seq, peek().span, peek().line);
        if (at_kw("else")) {
            if (node->kids[1]->kids.empty()) fail_here("else without except");
            next();
            orelse = block();
        }
        node->kids.push_back(std::move(orelse));
        auto finalbody = make_node(NodeKind::Seq, peek().span, peek().line);
        if (at_kw("finally")) {
            next();
            finalbody = block();
        }
        if (node->kids[1]->kids.empty() && finalbody->kids.empty()) {
            fail_here("expected 'except' or 'finally' block");
        }
        node->kids.push_back(std::move(finalbody));
        finish(*node, prev());
        return node;
    }

    NodePtr with_stmt() {
        auto node = start_node(NodeKind::With);
        expect_kw("with");
        auto items = start_node(NodeKind::Seq);
        bool parsed = false;
        if (at_op("(")) {
            // Parenthesized with-items; fall back to an ordinary expression if this fails.
            auto save_pos = pos_;
            auto save_occ = st_.occurrences.size();
            try {
                next();
                while (true) {
                    items->kids.push_back(with_item());
                    if (!at_op(",")) break;
                    next();
                    if (at_op(")")) break;
                }
                expect_op(")");
                if (!at_op(":")) throw SyntaxError(peek().line, peek().column, "not parenthesized items");
                parsed = true;
            } catch (const SyntaxError&) {
                pos_ = save_pos;
                st_.occurrences.resize(save_occ);
                items->kids.clear();
            }
        }
        if (!parsed) {
            while (true) {
                items->kids.push_back(with_item());
                if (!at_op(",")) break;
                next();
            }
        }
        node->kids.push_back(std::move(items));
        node->kids.push_back(block());
        finish(*node, prev());
        return node;
    }

    NodePtr with_item() {
        auto item = start_node(NodeKind::WithItem);
        item->kids.push_back(test());
        if (at_kw("as")) {
            next();
            auto target = expr();
            set_context(*target, kStore);
            item->kids.push_back(std::move(target));
        } else {
            item->kids.push_back(nullptr);
        }
        finish(*item, prev());
        return item;
    }

    // ---- expressions -------------------------------------------------------

    bool starts_expression() const {
        const auto& t = peek();
        switch (t.kind) {
            case TokenKind::Name:
                return !is_keyword(t.text) || t.text == "None" || t.text == "True" ||
                       t.text == "False" || t.text == "not" || t.text == "lambda" || t.text == "await" ||
                       t.text == "yield";
            case TokenKind::Number:
            case TokenKind::String:
                return true;
            case TokenKind::Op:
                return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" ||
                       t.text == "~" || t.text == "*" || t.text == "...";
            default:
                return false;
        }
    }

    NodePtr make_tuple(std::vector<NodePtr> elts, const Token& first) {
        auto tuple = make_node(NodeKind::Tuple, first.span, first.line);
        tuple->kids = std::move(elts);
        finish(*tuple, prev());
        return tuple;
    }

    // testlist_star_expr: (test | star_expr) (',' (test | star_expr))* [',']
    NodePtr testlist_star_expr() {
        auto first_tok = peek();
        auto first = at_op("*") ? star_expr() : namedexpr_or_test();
        if (!at_op(",")) return first;
        std::vector<NodePtr> elts;
        elts.push_back(std::move(first));
        while (at_op(",")) {
            next();
            if (!starts_expression()) break;
            elts.push_back(at_op("*") ? star_expr() : namedexpr_or_test());
        }
        return make_tuple(std::move(elts), first_tok);
    }

    NodePtr testlist() {
        auto first_tok = peek();
        auto first = at_op("*") ? star_expr() : test();
        if (!at_op(",")) return first;
        std::vector<NodePtr> elts;
        elts.push_back(std::move(first));
        while (at_op(",")) {
            next();
            if (!starts_expression()) break;
            elts.push_back(at_op("*") ? star_expr() : test());
        }
        return make_tuple(std::move(elts), first_tok);
    }

    NodePtr exprlist() {
        auto first_tok = peek();
        auto first = at_op("*") ? star_expr() : expr();
        if (!at_op(",")) return first;
        std::vector<NodePtr> elts;
        elts.push_back(std::move(first));
        while (at_op(",")) {
            next();
            if (!starts_expression() || at_kw("in")) break;
            elts.push_back(at_op("*") ? star_expr() : expr());
        }
        return make_tuple(std::move(elts), first_tok);
    }

    NodePtr star_expr() {
        auto node = start_node(NodeKind::Starred);
        expect_op("*");
        node->kids.push_back(expr());
        finish(*node, prev());
        return node;
    }

    // Accepts an unparenthesized walrus only where the grammar allows namedexpr_test.
    NodePtr namedexpr_or_test() { return namedexpr_test(); }

    NodePtr namedexpr_test() {
        if (at_identifier() && at_op(":=", 1)) {
            auto node = start_node(NodeKind::NamedExpr);
            const auto& t = next();
            auto target = make_node(NodeKind::Name, t.span, t.line);
            target->value = std::string(t.text);
            target->flags |= kStore;
            target->occurrence = add_occurrence(target->value, t.span, Role::Definition);
            next();  // :=
            node->kids.push_back(std::move(target));
            node->kids.push_back(test());
            finish(*node, prev());
            return node;
        }
        return test();
    }

    NodePtr test() {
        if (at_kw("lambda")) return lambdef();
        auto first_tok = peek();
        auto body = or_test();
        if (at_kw("if")) {
            // A conditional expression requires 'else'; a bare 'if' here belongs to a comprehension.
            auto save = pos_;
            next();
            auto cond = or_test();
            if (!at_kw("else")) {
                pos_ = save;
                return body;
            }
            next();
            auto orelse = test();
            auto node = make_node(NodeKind::IfExp, first_tok.span, first_tok.line);
            node->kids.push_back(std::move(body));
            node->kids.push_back(std::move(cond));
            node->kids.push_back(std::move(orelse));
            finish(*node, prev());
            return node;
        }
        return body;
    }

    NodePtr lambdef() {
        auto node = start_node(NodeKind::Lambda);
        expect_kw("lambda");
        node->kids.push_back(parameters(":", false));
        expect_op(":");
        node->kids.push_back(test());
        finish(*node, prev());
        return node;
    }

    NodePtr bool_chain(std::string_view op, NodePtr (Parser::*operand)()) {
        auto first_tok = peek();
        auto first = (this->*operand)();
        if (!at_kw(op)) return first;
        auto node = make_node(NodeKind::BoolOp, first_tok.span, first_tok.line);
        node->value = std::string(op);
        node->kids.push_back(std::move(first));
        while (at_kw(op)) {
            next();
            node->kids.push_back((this->*operand)());
        }
        finish(*node, prev());
        return node;
    }

    NodePtr or_test() { return bool_chain("or", &Parser::and_test); }
    NodePtr and_test() { return bool_chain("and", &Parser::not_test); }

    NodePtr not_test() {
        if (at_kw("not")) {
            auto node = start_node(NodeKind::UnaryOp);
            next();
            node->value = "not";
            node->kids.push_back(not_test());
            finish(*node, prev());
            return node;
        }
        return comparison();
    }

    std::string comparison_operator() {
        const auto& t = peek();
        if (t.kind == TokenKind::Op && is_comparison_op(t.text)) {
            next();
            return std::string(t.text);
        }
        if (at_kw("in")) {
            next();
            return "in";
        }
        if (at_kw("not") && at_kw("in", 1)) {
            next();
            next();
            return "not in";
        }
        if (at_kw("is")) {
            next();
            if (at_kw("not")) {
                next();
                return "is not";
            }
            return "is";
        }
        return {};
    }

    NodePtr comparison() {
        auto first_tok = peek();
        auto left = expr();
        auto op = comparison_operator();
        if (op.empty()) return left;
        auto node = make_node(NodeKind::Compare, first_tok.span, first_tok.line);
        node->kids.push_back(std::move(left));
        while (!op.empty()) {
            node->aux.push_back(op);
            node->kids.push_back(expr());
            op = comparison_operator();
        }
        finish(*node, prev());
        return node;
    }

    template <typename Accept>
    NodePtr binary_level(Accept accept, NodePtr (Parser::*operand)()) {
        auto first_tok = peek();
        auto left = (this->*operand)();
        while (peek().kind == TokenKind::Op && accept(peek().text)) {
            auto node = make_node(NodeKind::BinOp, first_tok.span, first_tok.line);
            node->value = std::string(next().text);
            node->kids.push_back(std::move(left));
            node->kids.push_back((this->*operand)());
            finish(*node, prev());
            left = std::move(node);
        }
        return left;
    }

    NodePtr expr() {
        return binary_level([](std::string_view op) { return op == "|"; }, &Parser::xor_expr);
    }
    NodePtr xor_expr() {
        return binary_level([](std::string_view op) { return op == "^"; }, &Parser::and_expr);
    }
    NodePtr and_expr() {
        return binary_level([](std::string_view op) { return op == "&"; }, &Parser::shift_expr);
    }
    NodePtr shift_expr() {
        return binary_level([](std::string_view op) { return op == "<<" || op == ">>"; },
                            &Parser::arith_expr);
    }
    NodePtr arith_expr() {
        return binary_level([](std::string_view op) { return op == "+" || op == "-"; }, &Parser::term);
    }
    NodePtr term() {
        return binary_level(
            [](std::string_view op) { return op == "*" || op == "/" || op == "//" || op == "%" || op == "@"; },
            &Parser::factor);
    }

    NodePtr factor() {
        if (at_op("-") || at_op("+") || at_op("~")) {
            auto node = start_node(NodeKind::UnaryOp);
            node->value = std::string(next().text);
            node->kids.push_back(factor());
            finish(*node, prev());
            return node;
        }
        return power();
    }

    NodePtr power() {
        auto first_tok = peek();
        auto base = await_primary();
        if (at_op("**")) {
            next();
            auto node = make_node(NodeKind::BinOp, first_tok.span, first_tok.line);
            node->value = "**";
            node->kids.push_back(std::move(base));
            node->kids.push_back(factor());
            finish(*node, prev());
            return node;
        }
        return base;
    }

    NodePtr await_primary() {
        if (at_kw("await")) {
            auto node = start_node(NodeKind::Await);
            next();
            node->kids.push_back(primary());
            finish(*node, prev());
            return node;
        }
        return primary();
    }

    NodePtr primary() {
        auto first_tok = peek();
        auto node = atom();
        while (true) {
            if (at_op("(")) {
                next();
                auto call = make_node(NodeKind::Call, first_tok.span, first_tok.line);
                call->kids.push_back(std::move(node));
                call_arguments(call->kids);
                expect_op(")");
                finish(*call, prev());
                node = std::move(call);
            } else if (at_op("[")) {
                next();
                auto sub = make_node(NodeKind::Subscript, first_tok.span, first_tok.line);
                sub->kids.push_back(std::move(node));
                sub->kids.push_back(subscript_list());
                expect_op("]");
                finish(*sub, prev());
                node = std::move(sub);
            } else if (at_op(".")) {
                next();
                auto attr = make_node(NodeKind::Attribute, first_tok.span, first_tok.line);
                attr->kids.push_back(std::move(node));
                attr->kids.push_back(ident(Role::Attribute));
                finish(*attr, prev());
                node = std::move(attr);
            } else {
                return node;
            }
        }
    }

    void call_arguments(std::vector<NodePtr>& out) {
        bool seen_keyword = false;
        while (!at_op(")")) {
            if (at_op("**")) {
                auto kw = start_node(NodeKind::Keyword);
                next();
                kw->kids.push_back(nullptr);
                kw->kids.push_back(test());
                finish(*kw, prev());
                out.push_back(std::move(kw));
                seen_keyword = true;
            } else if (at_op("*")) {
                auto star = start_node(NodeKind::Starred);
                next();
                star->kids.push_back(test());
                finish(*star, prev());
                out.push_back(std::move(star));
            } else if (at_identifier() && at_op("=", 1)) {
                auto kw = start_node(NodeKind::Keyword);
                kw->kids.push_back(ident(Role::KeywordArgument));
                next();  // '='
                kw->kids.push_back(test());
                finish(*kw, prev());
                out.push_back(std::move(kw));
                seen_keyword = true;
            } else {
                auto first_tok = peek();
                auto arg = namedexpr_test();
                if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
                    arg = comprehension(NodeKind::GeneratorExp, std::move(arg), first_tok);
                } else if (seen_keyword) {
                    fail_here("positional argument follows keyword argument");
                }
                out.push_back(std::move(arg));
            }
            if (!at_op(",")) break;
            next();
        }
    }

    NodePtr subscript_list() {
        auto first_tok = peek();
        auto first = subscript();
        if (!at_op(",")) return first;
        std::vector<NodePtr> elts;
        elts.push_back(std::move(first));
        while (at_op(",")) {
            next();
            if (at_op("]")) break;
            elts.push_back(subscript());
        }
        return make_tuple(std::move(elts), first_tok);
    }

    NodePtr subscript() {
        auto first_tok = peek();
        NodePtr lower;
        if (!at_op(":")) {
            lower = at_op("*") ? star_expr() : namedexpr_test();
            if (!at_op(":")) return lower;
        }
        auto slice = make_node(NodeKind::Slice, first_tok.span, first_tok.line);
        expect_op(":");
        slice->kids.push_back(std::move(lower));
        if (!at_op(":") && !at_op("]") && !at_op(",")) {
            slice->kids.push_back(test());
        } else {
            slice->kids.push_back(nullptr);
        }
        if (at_op(":")) {
            next();
            if (!at_op("]") && !at_op(",")) {
                slice->kids.push_back(test());
            } else {
                slice->kids.push_back(nullptr);
            }
        } else {
            slice->kids.push_back(nullptr);
        }
        finish(*slice, prev());
        return slice;
    }

    NodePtr comprehension(NodeKind kind, NodePtr elt, const Token& first_tok) {
        auto node = make_node(kind, first_tok.span, first_tok.line);
        node->kids.push_back(std::move(elt));
        while (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
            auto comp = start_node(NodeKind::Comprehension);
            if (at_kw("async")) {
                next();
                comp->flags |= kAsync;
            }
            expect_kw("for");
            auto target = exprlist();
            set_context(*target, kStore);
            comp->kids.push_back(std::move(target));
            expect_kw("in");
            comp->kids.push_back(or_test());
            while (at_kw("if")) {
                next();
                comp->kids.push_back(or_test_nocond());
            }
            finish(*comp, prev());
            node->kids.push_back(std::move(comp));
        }
        finish(*node, prev());
        return node;
    }

    NodePtr or_test_nocond() {
        if (at_kw("lambda")) return lambdef();
        return or_test();
    }

    NodePtr yield_expr() {
        auto node = start_node(NodeKind::Yield);
        expect_kw("yield");
        if (at_kw("from")) {
            next();
            node->kind = NodeKind::YieldFrom;
            node->kids.push_back(test());
        } else if (starts_expression() && !at_kw("yield")) {
            node->kids.push_back(testlist_star_expr());
        } else {
            node->kids.push_back(nullptr);
        }
        finish(*node, prev());
        return node;
    }

    NodePtr atom() {
        const auto& t = peek();
        switch (t.kind) {
            case TokenKind::Name: {
                if (t.text == "None" || t.text == "True" || t.text == "False") {
                    auto node = start_node(NodeKind::Constant);
                    node->value = std::string(next().text);
                    return node;
                }
                if (is_keyword(t.text)) fail_here("invalid syntax");
                auto node = start_node(NodeKind::Name);
                node->value = std::string(next().text);
                node->occurrence = add_occurrence(node->value, node->span, Role::Reference);
                return node;
            }
            case TokenKind::Number: {
                auto node = start_node(NodeKind::Number);
                node->value = std::string(next().text);
                return node;
            }
            case TokenKind::String:
                return strings();
            case TokenKind::Op:
                if (t.text == "(") return paren_atom();
                if (t.text == "[") return list_atom();
                if (t.text == "{") return brace_atom();
                if (t.text == "...") {
                    auto node = start_node(NodeKind::Constant);
                    node->value = "...";
                    next();
                    return node;
                }
                break;
            default:
                break;
        }
        fail_here("invalid syntax");
    }

    NodePtr paren_atom() {
        const auto open = next();
        if (at_op(")")) {
            next();
            auto tuple = make_node(NodeKind::Tuple, open.span, open.line);
            finish(*tuple, prev());
            return tuple;
        }
        if (at_kw("yield")) {
            auto y = yield_expr();
            expect_op(")");
            return y;
        }
        auto first = at_op("*") ? star_expr() : namedexpr_test();
        if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
            auto gen = comprehension(NodeKind::GeneratorExp, std::move(first), open);
            expect_op(")");
            gen->span.end = prev().span.end;
            return gen;
        }
        if (at_op(")")) {
            next();
            if (first->kind == NodeKind::Starred) fail_at(open, "cannot use starred expression here");
            return first;
        }
        std::vector<NodePtr> elts;
        elts.push_back(std::move(first));
        while (at_op(",")) {
            next();
            if (at_op(")")) break;
            elts.push_back(at_op("*") ? star_expr() : namedexpr_test());
        }
        expect_op(")");
        auto tuple = make_node(NodeKind::Tuple, open.span, open.line);
        tuple->kids = std::move(elts);
        finish(*tuple, prev());
        return tuple;
    }

    NodePtr list_atom() {
        const auto open = next();
        auto list = make_node(NodeKind::List, open.span, open.line);
        if (at_op("]")) {
            next();
            finish(*list, prev());
            return list;
        }
        auto first = at_op("*") ? star_expr() : namedexpr_test();
        if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
            auto comp = comprehension(NodeKind::ListComp, std::move(first), open);
            expect_op("]");
            comp->span.end = prev().span.end;
            return comp;
        }
        list->kids.push_back(std::move(first));
        while (at_op(",")) {
            next();
            if (at_op("]")) break;
            list->kids.push_back(at_op("*") ? star_expr() : namedexpr_test());
        }
        expect_op("]");
        finish(*list, prev());
        return list;
    }

    NodePtr dict_item() {
        if (at_op("**")) {
            auto ds = start_node(NodeKind::DoubleStar);
            next();
            ds->kids.push_back(expr());
            finish(*ds, prev());
            return ds;
        }
        auto kv = start_node(NodeKind::KeyValue);
        kv->kids.push_back(test());
        expect_op(":");
        kv->kids.push_back(test());
        finish(*kv, prev());
        return kv;
    }

    NodePtr brace_atom() {
        const auto open = next();
        if (at_op("}")) {
            next();
            auto dict = make_node(NodeKind::Dict, open.span, open.line);
            finish(*dict, prev());
            return dict;
        }
        if (at_op("**")) {
            auto dict = make_node(NodeKind::Dict, open.span, open.line);
            dict->kids.push_back(dict_item());
            return finish_dict(std::move(dict));
        }
        auto first = at_op("*") ? star_expr() : namedexpr_test();
        if (at_op(":") && first->kind != NodeKind::Starred) {
            next();
            auto kv = make_node(NodeKind::KeyValue, first->span, first->line);
            kv->kids.push_back(std::move(first));
            kv->kids.push_back(test());
            finish(*kv, prev());
            if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
                auto comp = comprehension(NodeKind::DictComp, std::move(kv), open);
                expect_op("}");
                comp->span.end = prev().span.end;
                return comp;
            }
            auto dict = make_node(NodeKind::Dict, open.span, open.line);
            dict->kids.push_back(std::move(kv));
            return finish_dict(std::move(dict));
        }
        if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
            auto comp = comprehension(NodeKind::SetComp, std::move(first), open);
            expect_op("}");
            comp->span.end = prev().span.end;
            return comp;
        }
        auto set = make_node(NodeKind::Set, open.span, open.line);
        set->kids.push_back(std::move(first));
        while (at_op(",")) {
            next();
            if (at_op("}")) break;
            set->kids.push_back(at_op("*") ? star_expr() : namedexpr_test());
        }
        expect_op("}");
        finish(*set, prev());
        return set;
    }

    NodePtr finish_dict(NodePtr dict) {
        while (at_op(",")) {
            next();
            if (at_op("}")) break;
            dict->kids.push_back(dict_item());
        }
        expect_op("}");
        finish(*dict, prev());
        return dict;
    }

    // ---- strings -----------------------------------------------------------

    NodePtr strings() {
        auto node = start_node(NodeKind::String);
        bool saw_bytes = false;
        bool saw_text = false;
        while (at(TokenKind::String)) {
            const auto& t = next();
            auto quote = t.text.find_first_of("'\"");
            auto prefix = t.text.substr(0, quote);
            bool is_bytes = prefix.find_first_of("bB") != std::string_view::npos;
            (is_bytes ? saw_bytes : saw_text) = true;
            if (prefix.find_first_of("fF") != std::string_view::npos) {
                node->kids.push_back(fstring(t));
            } else {
                auto part = make_node(NodeKind::StrPart, t.span, t.line);
                part->value = std::string(t.text);
                node->kids.push_back(std::move(part));
            }
        }
        if (saw_bytes && saw_text) fail_at(prev(), "cannot mix bytes and nonbytes literals");
        finish(*node, prev());
        return node;
    }

    NodePtr fstring(const Token& t) {
        auto quote_at = t.text.find_first_of("'\"");
        char q = t.text[quote_at];
        bool triple = t.text.size() >= quote_at + 6 && t.text[quote_at + 1] == q && t.text[quote_at + 2] == q;
        std::size_t qlen = triple ? 3 : 1;
        auto node = make_node(NodeKind::FString, t.span, t.line);
        node->value = std::string(t.text.substr(0, quote_at + qlen));
        node->aux.push_back(std::string(t.text.substr(t.text.size() - qlen)));
        auto body = t.text.substr(quote_at + qlen, t.text.size() - quote_at - 2 * qlen);
        FStringContext ctx{t, body, t.span.begin + static_cast<std::uint32_t>(quote_at + qlen)};
        std::size_t pos = 0;
        fstring_parts(ctx, pos, false, node->kids);
        if (pos != body.size()) fail_at(t, "f-string: single '}' is not allowed");
        return node;
    }

    struct FStringContext {
        const Token& token;
        std::string_view body;
        std::uint32_t body_offset;
    };

    int line_at(std::uint32_t offset) const {
        auto upto = st_.source.substr(0, std::min<std::size_t>(offset, st_.source.size()));
        return 1 + static_cast<int>(std::count(upto.begin(), upto.end(), '\n'));
    }

    void fstring_parts(const FStringContext& ctx, std::size_t& pos, bool in_spec, std::vector<NodePtr>& out) {
        std::string literal;
        std::uint32_t literal_start = static_cast<std::uint32_t>(pos);
        auto flush = [&] {
            if (literal.empty()) return;
            auto lit = make_node(NodeKind::FLiteral,
                                 {ctx.body_offset + literal_start, ctx.body_offset + static_cast<std::uint32_t>(pos)},
                                 ctx.token.line);
            lit->value = std::move(literal);
            literal.clear();
            out.push_back(std::move(lit));
        };
        const auto& body = ctx.body;
        while (pos < body.size()) {
            char c = body[pos];
            if (c == '{') {
                if (!in_spec && pos + 1 < body.size() && body[pos + 1] == '{') {
                    if (literal.empty()) literal_start = static_cast<std::uint32_t>(pos);
                    literal += "{{";
                    pos += 2;
                    continue;
                }
                flush();
                out.push_back(fstring_field(ctx, pos));
                literal_start = static_cast<std::uint32_t>(pos);
                continue;
            }
            if (c == '}') {
                if (in_spec) break;
                if (pos + 1 < body.size() && body[pos + 1] == '}') {
                    if (literal.empty()) literal_start = static_cast<std::uint32_t>(pos);
                    literal += "}}";
                    pos += 2;
                    continue;
                }
                fail_at(ctx.token, "f-string: single '}' is not allowed");
            }
            if (literal.empty()) literal_start = static_cast<std::uint32_t>(pos);
            literal += c;
            ++pos;
        }
        flush();
    }

    NodePtr fstring_field(const FStringContext& ctx, std::size_t& pos) {
        const auto& body = ctx.body;
        ++pos;  // '{'
        std::size_t start = pos;
        int depth = 0;
        std::size_t k = pos;
        while (k < body.size()) {
            char c = body[k];
            if (c == '\'' || c == '"') {
                bool triple = k + 2 < body.size() && body[k + 1] == c && body[k + 2] == c;
                k += triple ? 3 : 1;
                while (k < body.size()) {
                    if (body[k] == '\\') {
                        k += 2;
                        continue;
                    }
                    if (body[k] == c && (!triple || (k + 2 < body.size() && body[k + 1] == c && body[k + 2] == c))) {
                        k += triple ? 3 : 1;
                        break;
                    }
                    ++k;
                }
                continue;
            }
            if (c == '(' || c == '[' || c == '{') {
                ++depth;
            } else if (c == ')' || c == ']' || c == '}') {
                if (depth == 0) break;
                --depth;
            } else if (depth == 0) {
                if ((c == '!' || c == '=' || c == '<' || c == '>') && k + 1 < body.size() && body[k + 1] == '=') {
                    k += 2;
                    continue;
                }
                if (c == '!' || c == ':' || c == '=') break;
            }
            ++k;
        }
        if (k >= body.size()) fail_at(ctx.token, "f-string: expecting '}'");
        auto expr_text = body.substr(start, k - start);
        if (expr_text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
            fail_at(ctx.token, "f-string: empty expression not allowed");
        }
        auto expr_offset = ctx.body_offset + static_cast<std::uint32_t>(start);
        TokenizeOptions opts;
        opts.base_offset = expr_offset;
        opts.base_line = line_at(expr_offset);
        opts.bracketed = true;
        auto stream = tokenize(expr_text, opts);
        Parser sub(st_, std::move(stream.tokens));
        auto field = make_node(NodeKind::FField, {expr_offset, expr_offset + static_cast<std::uint32_t>(expr_text.size())},
                               ctx.token.line);
        field->kids.push_back(sub.parse_fstring_expression());
        pos = k;
        std::string debug;
        if (body[pos] == '=') {
            auto after = pos + 1;
            while (after < body.size() && (body[after] == ' ' || body[after] == '\t')) ++after;
            debug = std::string(body.substr(pos, after - pos));
            pos = after;
        }
        field->aux.push_back(debug);
        field->aux.push_back(debug.empty() ? std::string() : std::string(expr_text));
        if (pos < body.size() && body[pos] == '!') {
            if (pos + 1 >= body.size()) fail_at(ctx.token, "f-string: expecting '}'");
            char conv = body[pos + 1];
            if (conv != 'r' && conv != 's' && conv != 'a') fail_at(ctx.token, "f-string: invalid conversion character");
            field->value = std::string(1, conv);
            pos += 2;
        }
        if (pos < body.size() && body[pos] == ':') {
            ++pos;
            auto spec = make_node(NodeKind::Seq, {ctx.body_offset + static_cast<std::uint32_t>(pos), 0}, ctx.token.line);
            fstring_parts(ctx, pos, true, spec->kids);
            field->kids.push_back(std::move(spec));
        } else {
            field->kids.push_back(nullptr);
        }
        if (pos >= body.size() || body[pos] != '}') fail_at(ctx.token, "f-string: expecting '}'");
        ++pos;
        return field;
    }

    SharedState& st_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// A string holding exactly one identifier, e.g. the "name" in getattr(obj, "name").
void mark_literal_name(Node& str, SharedState& state) {
    if (str.kind != NodeKind::String || str.kids.size() != 1) return;
    auto& part = *str.kids[0];
    if (part.kind != NodeKind::StrPart) return;
    const auto& raw = part.value;
    auto quote = raw.find_first_of("'\"");
    if (quote == std::string::npos || raw.size() < quote + 2) return;
    auto prefix = raw.substr(0, quote);
    if (prefix.find_first_of("bBfF") != std::string::npos) return;
    if (raw.size() >= quote + 6 && raw[quote + 1] == raw[quote] && raw[quote + 2] == raw[quote]) return;
    auto content = raw.substr(quote + 1, raw.size() - quote - 2);
    if (!is_identifier(content) || is_keyword(content)) return;
    auto begin = part.span.begin + static_cast<std::uint32_t>(quote + 1);
    Span span{begin, begin + static_cast<std::uint32_t>(content.size())};
    state.occurrences.push_back({content, span, Role::StringLiteral});
    part.occurrence = static_cast<int>(state.occurrences.size() - 1);
}

void mark_reflection(Node& node, SharedState& state) {
    if (node.kind == NodeKind::Call && node.kids.size() >= 3 && node.kids[0]->kind == NodeKind::Name) {
        const auto& fn = node.kids[0]->value;
        if (fn == "getattr" || fn == "setattr" || fn == "hasattr" || fn == "delattr") {
            mark_literal_name(*node.kids[2], state);
        }
    }
    if (node.kind == NodeKind::Assign && node.kids.size() == 2 && node.kids[0]->kind == NodeKind::Name &&
        node.kids[0]->value == "__slots__") {
        auto& value = *node.kids[1];
        if (value.kind == NodeKind::String) {
            mark_literal_name(value, state);
        } else if (value.kind == NodeKind::Tuple || value.kind == NodeKind::List) {
            for (auto& elt : value.kids) mark_literal_name(*elt, state);
        }
    }
    for (auto& kid : node.kids) {
        if (kid) mark_reflection(*kid, state);
    }
}

void remap_occurrences(Node& node, const std::vector<int>& remap) {
    if (node.occurrence >= 0) node.occurrence = remap[node.occurrence];
    for (auto& kid : node.kids) {
        if (kid) remap_occurrences(*kid, remap);
    }
}

SyntaxTree build_tree(std::string code, bool expression_only) {
    SharedState state;
    state.source = code;
    auto stream = tokenize(code, TokenizeOptions{0, 1, 0, expression_only});
    Parser parser(state, std::move(stream.tokens));
    auto root = expression_only ? parser.parse_single_expression() : parser.parse_module();
    mark_reflection(*root, state);

    std::vector<int> order(state.occurrences.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return state.occurrences[a].span.begin < state.occurrences[b].span.begin;
    });
    std::vector<int> remap(order.size());
    std::vector<Occurrence> sorted;
    sorted.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        remap[order[i]] = static_cast<int>(i);
        sorted.push_back(std::move(state.occurrences[order[i]]));
    }
    remap_occurrences(*root, remap);
    return SyntaxTree(std::move(code), std::move(root), std::move(sorted), std::move(stream.comments));
}

}  // namespace

SyntaxTree parse(std::string code) { return build_tree(std::move(code), false); }

SyntaxTree parse_expression(std::string code) { return build_tree(std::move(code), true); }

}  // namespace obf::frontend
