#include <algorithm>
#include <string>

#include "obf/frontend.hpp"

namespace obf::frontend {

namespace {

enum Prec : int {
    kNamed = 1,
    kLambda,
    kIfExp,
    kOr,
    kAnd,
    kNot,
    kCmp,
    kBor,
    kBxor,
    kBand,
    kShift,
    kArith,
    kTerm,
    kFactor,
    kPower,
    kAwait,
    kPrimary,
    kAtom,
};

int binop_precedence(const std::string& op) {
    if (op == "|") return kBor;
    if (op == "^") return kBxor;
    if (op == "&") return kBand;
    if (op == "<<" || op == ">>") return kShift;
    if (op == "+" || op == "-") return kArith;
    if (op == "**") return kPower;
    return kTerm;
}

int precedence(const Node& n) {
    switch (n.kind) {
        case NodeKind::Lambda: return kLambda;
        case NodeKind::IfExp: return kIfExp;
        case NodeKind::BoolOp: return n.value == "or" ? kOr : kAnd;
        case NodeKind::UnaryOp: return n.value == "not" ? kNot : kFactor;
        case NodeKind::Compare: return kCmp;
        case NodeKind::BinOp: return binop_precedence(n.value);
        case NodeKind::Await: return kAwait;
        case NodeKind::Call:
        case NodeKind::Attribute:
        case NodeKind::Subscript: return kPrimary;
        case NodeKind::Starred: return kBor;
        default: return kAtom;
    }
}

void collect_renamable(const Node& node, std::vector<const Node*>& out) {
    if ((node.kind == NodeKind::Name || node.kind == NodeKind::Ident) && node.occurrence >= 0) {
        out.push_back(&node);
    }
    for (const auto& kid : node.kids) {
        if (kid) collect_renamable(*kid, out);
    }
}

// Rebuilds the raw text of a `{expr=}` field with the current identifier spellings.
std::string debug_text(const Node& field) {
    std::string text = field.aux.size() > 1 ? field.aux[1] : std::string();
    std::vector<const Node*> names;
    collect_renamable(*field.kids[0], names);
    std::sort(names.begin(), names.end(),
              [](const Node* a, const Node* b) { return a->span.begin > b->span.begin; });
    for (const auto* n : names) {
        if (n->span.begin < field.span.begin) continue;
        auto offset = n->span.begin - field.span.begin;
        auto length = n->span.end - n->span.begin;
        if (offset + length > text.size()) continue;
        text.replace(offset, length, n->value);
    }
    return text;
}

class ExprEmitter {
public:
    std::string operator()(const Node& n, int min_prec) const {
        auto text = render(n);
        if (precedence(n) < min_prec) return "(" + text + ")";
        return text;
    }

    std::string render(const Node& n) const {
        switch (n.kind) {
            case NodeKind::Name:
            case NodeKind::Ident:
            case NodeKind::Number:
            case NodeKind::Constant:
            case NodeKind::StrPart:
            case NodeKind::FLiteral:
                return n.value;
            case NodeKind::String: {
                std::string out;
                for (const auto& part : n.kids) {
                    if (!out.empty()) out += ' ';
                    out += render(*part);
                }
                return out;
            }
            case NodeKind::FString: {
                std::string out = n.value;
                for (const auto& part : n.kids) out += render(*part);
                out += n.aux.empty() ? std::string() : n.aux[0];
                return out;
            }
            case NodeKind::FField: return fstring_field(n);
            case NodeKind::BinOp: {
                int p = binop_precedence(n.value);
                if (n.value == "**") {
                    return (*this)(*n.kids[0], kAwait) + " ** " + (*this)(*n.kids[1], kFactor);
                }
                return (*this)(*n.kids[0], p) + " " + n.value + " " + (*this)(*n.kids[1], p + 1);
            }
            case NodeKind::UnaryOp:
                if (n.value == "not") return "not " + (*this)(*n.kids[0], kNot);
                return n.value + (*this)(*n.kids[0], kFactor);
            case NodeKind::BoolOp: {
                int p = precedence(n);
                std::string out;
                for (std::size_t i = 0; i < n.kids.size(); ++i) {
                    if (i) out += " " + n.value + " ";
                    out += (*this)(*n.kids[i], p + 1);
                }
                return out;
            }
            case NodeKind::Compare: {
                std::string out = (*this)(*n.kids[0], kBor);
                for (std::size_t i = 1; i < n.kids.size(); ++i) {
                    out += " " + n.aux[i - 1] + " " + (*this)(*n.kids[i], kBor);
                }
                return out;
            }
            case NodeKind::NamedExpr:
                return "(" + (*this)(*n.kids[0], kAtom) + " := " + (*this)(*n.kids[1], kLambda) + ")";
            case NodeKind::Lambda: {
                auto args = arguments(*n.kids[0]);
                return "lambda" + (args.empty() ? "" : " " + args) + ": " + (*this)(*n.kids[1], kLambda);
            }
            case NodeKind::IfExp:
                return (*this)(*n.kids[0], kOr) + " if " + (*this)(*n.kids[1], kOr) + " else " +
                       (*this)(*n.kids[2], kLambda);
            case NodeKind::Call: {
                std::string out = (*this)(*n.kids[0], kPrimary) + "(";
                for (std::size_t i = 1; i < n.kids.size(); ++i) {
                    if (i > 1) out += ", ";
                    out += argument(*n.kids[i]);
                }
                return out + ")";
            }
            case NodeKind::Keyword:
            case NodeKind::Starred:
                return argument(n);
            case NodeKind::Attribute: {
                const auto& value = *n.kids[0];
                std::string recv = (*this)(value, kPrimary);
                if (value.kind == NodeKind::Number) recv = "(" + recv + ")";
                return recv + "." + n.kids[1]->value;
            }
            case NodeKind::Subscript:
                return (*this)(*n.kids[0], kPrimary) + "[" + subscript(*n.kids[1]) + "]";
            case NodeKind::Slice: {
                std::string out;
                if (n.kids[0]) out += (*this)(*n.kids[0], kLambda);
                out += ":";
                if (n.kids[1]) out += (*this)(*n.kids[1], kLambda);
                if (n.kids[2]) out += ":" + (*this)(*n.kids[2], kLambda);
                return out;
            }
            case NodeKind::Tuple: {
                if (n.kids.empty()) return "()";
                auto inner = elements(n.kids);
                if (n.kids.size() == 1) inner += ",";
                return "(" + inner + ")";
            }
            case NodeKind::List: return "[" + elements(n.kids) + "]";
            case NodeKind::Set: return "{" + elements(n.kids) + "}";
            case NodeKind::Dict: {
                std::string out = "{";
                for (std::size_t i = 0; i < n.kids.size(); ++i) {
                    if (i) out += ", ";
                    out += dict_item(*n.kids[i]);
                }
                return out + "}";
            }
            case NodeKind::ListComp: return "[" + comprehension(n) + "]";
            case NodeKind::SetComp:
            case NodeKind::DictComp: return "{" + comprehension(n) + "}";
            case NodeKind::GeneratorExp: return "(" + comprehension(n) + ")";
            case NodeKind::Await: return "await " + (*this)(*n.kids[0], kPrimary);
            case NodeKind::Yield:
                if (!n.kids[0]) return "(yield)";
                return "(yield " + (*this)(*n.kids[0], kLambda) + ")";
            case NodeKind::YieldFrom: return "(yield from " + (*this)(*n.kids[0], kLambda) + ")";
            case NodeKind::KeyValue:
            case NodeKind::DoubleStar: return dict_item(n);
            default: return "<" + std::string(kind_name(n.kind)) + ">";
        }
    }

    std::string arguments(const Node& args) const {
        std::string out;
        for (std::size_t i = 0; i < args.kids.size(); ++i) {
            const auto& a = *args.kids[i];
            if (i) out += ", ";
            if (a.kind == NodeKind::SlashMarker) {
                out += "/";
            } else if (a.kind == NodeKind::StarMarker) {
                out += "*";
            } else {
                out += a.value + a.kids[0]->value;
                if (a.kids[1]) out += ": " + (*this)(*a.kids[1], kLambda);
                if (a.kids[2]) out += (a.kids[1] ? " = " : "=") + (*this)(*a.kids[2], kLambda);
            }
        }
        return out;
    }

    std::string argument(const Node& a) const {
        if (a.kind == NodeKind::Starred) return "*" + (*this)(*a.kids[0], kBor);
        if (a.kind == NodeKind::Keyword) {
            if (!a.kids[0]) return "**" + (*this)(*a.kids[1], kBor);
            return a.kids[0]->value + "=" + (*this)(*a.kids[1], kLambda);
        }
        return (*this)(a, kLambda);
    }

private:
    std::string elements(const std::vector<NodePtr>& kids) const {
        std::string out;
        for (std::size_t i = 0; i < kids.size(); ++i) {
            if (i) out += ", ";
            out += (*this)(*kids[i], kLambda);
        }
        return out;
    }

    std::string subscript(const Node& s) const {
        if (s.kind == NodeKind::Tuple && !s.kids.empty()) {
            auto inner = elements(s.kids);
            if (s.kids.size() == 1) inner += ",";
            return inner;
        }
        return (*this)(s, kLambda);
    }

    std::string dict_item(const Node& item) const {
        if (item.kind == NodeKind::DoubleStar) return "**" + (*this)(*item.kids[0], kBor);
        return (*this)(*item.kids[0], kLambda) + ": " + (*this)(*item.kids[1], kLambda);
    }

    std::string comprehension(const Node& n) const {
        std::string out = n.kind == NodeKind::DictComp ? dict_item(*n.kids[0]) : (*this)(*n.kids[0], kLambda);
        for (std::size_t i = 1; i < n.kids.size(); ++i) {
            const auto& c = *n.kids[i];
            out += c.has(kAsync) ? " async for " : " for ";
            out += (*this)(*c.kids[0], kBor) + " in " + (*this)(*c.kids[1], kOr);
            for (std::size_t j = 2; j < c.kids.size(); ++j) out += " if " + (*this)(*c.kids[j], kOr);
        }
        return out;
    }

    std::string fstring_field(const Node& f) const {
        std::string expr;
        bool debug = !f.aux.empty() && !f.aux[0].empty();
        if (debug) {
            expr = debug_text(f);
        } else {
            expr = (*this)(*f.kids[0], kIfExp);
            if (!expr.empty() && expr.front() == '{') expr = " " + expr;
        }
        std::string out = "{" + expr;
        if (debug) out += f.aux[0];
        if (!f.value.empty()) out += "!" + f.value;
        if (f.kids.size() > 1 && f.kids[1]) {
            out += ":";
            for (const auto& part : f.kids[1]->kids) out += render(*part);
        }
        return out + "}";
    }
};

class StmtEmitter {
public:
    StmtEmitter(const SyntaxTree& tree, const EmitOptions& options) : opts_(options) {
        if (opts_.keep_comments) {
            comments_ = tree.comments();
            std::stable_sort(comments_.begin(), comments_.end(),
                             [](const Comment& a, const Comment& b) { return a.line < b.line; });
        }
    }

    std::string run(const Node& module) {
        body(module.kids, 0, true);
        flush_comments(1 << 30, 0);
        return out_;
    }

private:
    void line(int depth, const std::string& text) {
        out_.append(static_cast<std::size_t>(depth * opts_.indent_width), ' ');
        out_ += text;
        out_ += '\n';
    }

    void flush_comments(int before_line, int depth) {
        while (next_comment_ < comments_.size() && comments_[next_comment_].line < before_line) {
            line(depth, comments_[next_comment_].text);
            ++next_comment_;
        }
    }

    bool skipped(const Node& s) const { return !opts_.keep_docstrings && s.has(kDocstring); }

    void body(const std::vector<NodePtr>& stmts, int depth, bool module_level = false) {
        bool any = false;
        for (const auto& s : stmts) {
            if (skipped(*s)) continue;
            statement(*s, depth);
            any = true;
        }
        if (!any && !module_level) line(depth, "pass");
    }

    void suite(const std::string& header, const Node& seq, int depth) {
        line(depth, header + ":");
        body(seq.kids, depth + 1);
    }

    std::string targets_joined(const std::vector<NodePtr>& kids, std::size_t from, std::size_t to,
                               const std::string& sep) const {
        std::string out;
        for (std::size_t i = from; i < to; ++i) {
            if (i > from) out += sep;
            out += ex_(*kids[i], kLambda);
        }
        return out;
    }

    void statement(const Node& s, int depth) {
        flush_comments(s.line, depth);
        switch (s.kind) {
            case NodeKind::FunctionDef: {
                for (const auto& d : s.kids[1]->kids) line(depth, "@" + ex_(*d, kNamed));
                std::string header = s.has(kAsync) ? "async def " : "def ";
                header += s.kids[0]->value + "(" + ex_.arguments(*s.kids[2]) + ")";
                if (s.kids[3]) header += " -> " + ex_(*s.kids[3], kLambda);
                suite(header, *s.kids[4], depth);
                return;
            }
            case NodeKind::ClassDef: {
                for (const auto& d : s.kids[1]->kids) line(depth, "@" + ex_(*d, kNamed));
                std::string header = "class " + s.kids[0]->value;
                const auto& bases = s.kids[2]->kids;
                if (!bases.empty()) {
                    header += "(";
                    for (std::size_t i = 0; i < bases.size(); ++i) {
                        if (i) header += ", ";
                        header += ex_.argument(*bases[i]);
                    }
                    header += ")";
                }
                suite(header, *s.kids[3], depth);
                return;
            }
            case NodeKind::If: {
                suite("if " + ex_(*s.kids[0], kNamed), *s.kids[1], depth);
                const Node* orelse = s.kids[2].get();
                while (orelse->kids.size() == 1 && orelse->kids[0]->kind == NodeKind::If) {
                    const auto& elif = *orelse->kids[0];
                    flush_comments(elif.line, depth);
                    suite("elif " + ex_(*elif.kids[0], kNamed), *elif.kids[1], depth);
                    orelse = elif.kids[2].get();
                }
                if (!orelse->kids.empty()) suite("else", *orelse, depth);
                return;
            }
            case NodeKind::While:
                suite("while " + ex_(*s.kids[0], kNamed), *s.kids[1], depth);
                if (!s.kids[2]->kids.empty()) suite("else", *s.kids[2], depth);
                return;
            case NodeKind::For: {
                std::string header = s.has(kAsync) ? "async for " : "for ";
                header += ex_(*s.kids[0], kBor) + " in " + ex_(*s.kids[1], kLambda);
                suite(header, *s.kids[2], depth);
                if (!s.kids[3]->kids.empty()) suite("else", *s.kids[3], depth);
                return;
            }
            case NodeKind::With: {
                std::string header = s.has(kAsync) ? "async with " : "with ";
                const auto& items = s.kids[0]->kids;
                for (std::size_t i = 0; i < items.size(); ++i) {
                    if (i) header += ", ";
                    header += ex_(*items[i]->kids[0], kLambda);
                    if (items[i]->kids[1]) header += " as " + ex_(*items[i]->kids[1], kBor);
                }
                suite(header, *s.kids[1], depth);
                return;
            }
            case NodeKind::Try: {
                suite("try", *s.kids[0], depth);
                for (const auto& h : s.kids[1]->kids) {
                    flush_comments(h->line, depth);
                    std::string header = "except";
                    if (h->kids[0]) header += " " + ex_(*h->kids[0], kLambda);
                    if (h->kids[1]) header += " as " + h->kids[1]->value;
                    suite(header, *h->kids[2], depth);
                }
                if (!s.kids[2]->kids.empty()) suite("else", *s.kids[2], depth);
                if (!s.kids[3]->kids.empty()) suite("finally", *s.kids[3], depth);
                return;
            }
            default:
                line(depth, simple(s));
        }
    }

    std::string simple(const Node& s) const {
        switch (s.kind) {
            case NodeKind::Pass: return "pass";
            case NodeKind::Break: return "break";
            case NodeKind::Continue: return "continue";
            case NodeKind::Return:
                return s.kids[0] ? "return " + ex_(*s.kids[0], kLambda) : "return";
            case NodeKind::Delete: return "del " + targets_joined(s.kids, 0, s.kids.size(), ", ");
            case NodeKind::Assign:
                return targets_joined(s.kids, 0, s.kids.size() - 1, " = ") + " = " + ex_(*s.kids.back(), kLambda);
            case NodeKind::AugAssign:
                return ex_(*s.kids[0], kLambda) + " " + s.value + " " + ex_(*s.kids[1], kLambda);
            case NodeKind::AnnAssign: {
                auto out = ex_(*s.kids[0], kLambda) + ": " + ex_(*s.kids[1], kLambda);
                if (s.kids[2]) out += " = " + ex_(*s.kids[2], kLambda);
                return out;
            }
            case NodeKind::Raise: {
                std::string out = "raise";
                if (s.kids[0]) out += " " + ex_(*s.kids[0], kLambda);
                if (s.kids[1]) out += " from " + ex_(*s.kids[1], kLambda);
                return out;
            }
            case NodeKind::Assert: {
                auto out = "assert " + ex_(*s.kids[0], kLambda);
                if (s.kids[1]) out += ", " + ex_(*s.kids[1], kLambda);
                return out;
            }
            case NodeKind::Import: {
                std::string out = "import ";
                for (std::size_t i = 0; i < s.kids.size(); ++i) {
                    if (i) out += ", ";
                    out += alias(*s.kids[i]);
                }
                return out;
            }
            case NodeKind::ImportFrom: {
                std::string out = "from " + s.value + dotted(*s.kids[0]) + " import ";
                if (s.has(kStar)) return out + "*";
                const auto& names = s.kids[1]->kids;
                for (std::size_t i = 0; i < names.size(); ++i) {
                    if (i) out += ", ";
                    out += alias(*names[i]);
                }
                return out;
            }
            case NodeKind::Global:
            case NodeKind::Nonlocal: {
                std::string out = s.kind == NodeKind::Global ? "global " : "nonlocal ";
                for (std::size_t i = 0; i < s.kids.size(); ++i) {
                    if (i) out += ", ";
                    out += s.kids[i]->value;
                }
                return out;
            }
            case NodeKind::ExprStmt: return ex_(*s.kids[0], kNamed);
            default: return "<" + std::string(kind_name(s.kind)) + ">";
        }
    }

    static std::string dotted(const Node& seq) {
        std::string out;
        for (std::size_t i = 0; i < seq.kids.size(); ++i) {
            if (i) out += ".";
            out += seq.kids[i]->value;
        }
        return out;
    }

    static std::string alias(const Node& a) {
        auto out = dotted(*a.kids[0]);
        if (a.kids[1]) out += " as " + a.kids[1]->value;
        return out;
    }

    const EmitOptions& opts_;
    ExprEmitter ex_;
    std::vector<Comment> comments_;
    std::size_t next_comment_ = 0;
    std::string out_;
};

}  // namespace

std::string emit(const SyntaxTree& tree, const EmitOptions& options) {
    StmtEmitter emitter(tree, options);
    return emitter.run(tree.root());
}

std::string emit_expression(const Node& expr) { return ExprEmitter{}(expr, kNamed); }

}  // namespace obf::frontend
