#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace obf::frontend {

struct Span {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;

    friend bool operator==(const Span&, const Span&) = default;
};

// Child layouts are fixed per kind; optional children are null pointers.
//
//   Module          body...
//   Seq             items...                    (generic list container)
//   FunctionDef     [Ident name, Seq decorators, Arguments, returns?, Seq body]
//   ClassDef        [Ident name, Seq decorators, Seq bases(expr|Keyword), Seq body]
//   Return          [value?]
//   Delete          targets...
//   Assign          targets..., value
//   AugAssign       [target, value]             value = operator, e.g. "+="
//   AnnAssign       [target, annotation, value?]
//   For             [target, iter, Seq body, Seq orelse]
//   While           [test, Seq body, Seq orelse]
//   If              [test, Seq body, Seq orelse]
//   With            [Seq items(WithItem), Seq body]
//   WithItem        [context, target?]
//   Raise           [exc?, cause?]
//   Try             [Seq body, Seq handlers(ExceptHandler), Seq orelse, Seq finalbody]
//   ExceptHandler   [type?, Ident name?, Seq body]
//   Assert          [test, msg?]
//   Import          aliases(Alias)...
//   ImportFrom      [Seq module(Ident), Seq names(Alias)]   value = leading dots, flag Star
//   Alias           [Seq dotted(Ident), Ident asname?]
//   Global/Nonlocal Ident...
//   ExprStmt        [value]
//   Pass/Break/Continue
//
//   BoolOp          operands...                 value = "and" | "or"
//   NamedExpr       [Name target, value]
//   BinOp           [left, right]               value = operator
//   UnaryOp         [operand]                   value = "not" | "-" | "+" | "~"
//   Lambda          [Arguments, body]
//   IfExp           [body, test, orelse]
//   Dict            items(KeyValue | DoubleStar)...
//   KeyValue        [key, value]
//   DoubleStar      [value]
//   Set/List/Tuple  elements...
//   ListComp/SetComp/GeneratorExp [elt, Comprehension...]
//   DictComp        [KeyValue, Comprehension...]
//   Comprehension   [target, iter, conditions...]
//   Await/YieldFrom [value]
//   Yield           [value?]
//   Compare         [left, comparators...]      aux = operators
//   Call            [func, args(expr | Starred | Keyword)...]
//   Keyword         [Ident name?, value]        null name means **value
//   Attribute       [value, Ident attr]
//   Subscript       [value, slice]
//   Slice           [lower?, upper?, step?]
//   Starred         [value]
//   Name            value = identifier
//   Number          value = literal text
//   Constant        value = "None" | "True" | "False" | "..."
//   String          parts(StrPart | FString)...
//   StrPart         value = raw token text
//   FString         parts(FLiteral | FField)... value = prefix and opening quote, aux[0] = closing quote
//   FLiteral        value = raw text
//   FField          [expr, Seq spec(FLiteral | FField)?]  value = conversion, aux[0] = debug marker
//   Arguments       Param | SlashMarker | StarMarker ...
//   Param           [Ident name, annotation?, default?]    value = "" | "*" | "**"
//   Ident           value = identifier
enum class NodeKind : std::uint8_t {
    Module,
    Seq,
    FunctionDef,
    ClassDef,
    Return,
    Delete,
    Assign,
    AugAssign,
    AnnAssign,
    For,
    While,
    If,
    With,
    WithItem,
    Raise,
    Try,
    ExceptHandler,
    Assert,
    Import,
    ImportFrom,
    Alias,
    Global,
    Nonlocal,
    ExprStmt,
    Pass,
    Break,
    Continue,
    BoolOp,
    NamedExpr,
    BinOp,
    UnaryOp,
    Lambda,
    IfExp,
    Dict,
    KeyValue,
    DoubleStar,
    Set,
    List,
    Tuple,
    ListComp,
    SetComp,
    GeneratorExp,
    DictComp,
    Comprehension,
    Await,
    Yield,
    YieldFrom,
    Compare,
    Call,
    Keyword,
    Attribute,
    Subscript,
    Slice,
    Starred,
    Name,
    Number,
    Constant,
    String,
    StrPart,
    FString,
    FLiteral,
    FField,
    Arguments,
    Param,
    SlashMarker,
    StarMarker,
    Ident,
};

std::string_view kind_name(NodeKind kind);

enum NodeFlag : std::uint32_t {
    kAsync = 1u << 0,
    kStore = 1u << 1,
    kDel = 1u << 2,
    kStar = 1u << 3,         // ImportFrom with '*'
    kModulePath = 1u << 4,   // Ident that names a module in an import
    kImportedName = 1u << 5, // Ident naming the source attribute in `from m import x as y`
    kDocstring = 1u << 6,    // ExprStmt holding a docstring
};

struct Node;
using NodePtr = std::unique_ptr<Node>;

struct Node {
    NodeKind kind;
    std::uint32_t flags = 0;
    std::string value;
    std::vector<std::string> aux;
    std::vector<NodePtr> kids;
    Span span;
    int line = 0;
    int occurrence = -1;  // index into SyntaxTree::occurrences for Name/Ident/reflective strings

    explicit Node(NodeKind k) : kind(k) {}

    bool has(NodeFlag flag) const noexcept { return (flags & flag) != 0; }
    Node* kid(std::size_t i) const noexcept { return i < kids.size() ? kids[i].get() : nullptr; }

    NodePtr clone() const;
};

NodePtr make_node(NodeKind kind, Span span = {}, int line = 0);

/// Syntactic role of an identifier occurrence.
enum class Role : std::uint8_t {
    Definition,
    Reference,
    Attribute,
    KeywordArgument,
    ImportAlias,
    StringLiteral,
};

std::string_view role_name(Role role);

struct Occurrence {
    std::string name;
    Span span;
    Role role;
};

struct Comment {
    int line;
    std::string text;
};

/// A parsed module together with its identifier occurrences.
class SyntaxTree {
public:
    SyntaxTree() = default;
    SyntaxTree(std::string source, NodePtr root, std::vector<Occurrence> occurrences,
               std::vector<Comment> comments);

    SyntaxTree(const SyntaxTree& other);
    SyntaxTree& operator=(const SyntaxTree& other);
    SyntaxTree(SyntaxTree&&) noexcept = default;
    SyntaxTree& operator=(SyntaxTree&&) noexcept = default;

    const std::string& source() const noexcept { return source_; }
    const Node& root() const noexcept { return *root_; }
    Node& root() noexcept { return *root_; }
    const std::vector<Occurrence>& occurrences() const noexcept { return occurrences_; }
    const std::vector<Comment>& comments() const noexcept { return comments_; }

    /// Returns a copy where every occurrence with a replacement gets the new name.
    /// `replacements` is indexed by occurrence; empty strings leave a name unchanged.
    SyntaxTree renamed(const std::vector<std::string>& replacements) const;

    /// Nodes carrying an occurrence, indexed like occurrences().
    std::vector<const Node*> occurrence_nodes() const;

private:
    std::string source_;
    NodePtr root_;
    std::vector<Occurrence> occurrences_;
    std::vector<Comment> comments_;
};

/// Span- and formatting-independent rendering used for structural comparison.
std::string dump(const Node& node);

inline bool structurally_equal(const SyntaxTree& a, const SyntaxTree& b) {
    return dump(a.root()) == dump(b.root());
}

/// Calls fn(node) on every node in pre-order.
template <typename Fn>
void walk(const Node& node, Fn&& fn) {
    fn(node);
    for (const auto& kid : node.kids) {
        if (kid) walk(*kid, fn);
    }
}

}  // namespace obf::frontend
