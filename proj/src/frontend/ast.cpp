#include "obf/ast.hpp"

#include <array>

namespace obf::frontend {

namespace {

constexpr std::array<std::string_view, static_cast<std::size_t>(NodeKind::Ident) + 1> kKindNames = {
    "Module",      "Seq",        "FunctionDef", "ClassDef",      "Return",     "Delete",
    "Assign",      "AugAssign",  "AnnAssign",   "For",           "While",      "If",
    "With",        "WithItem",   "Raise",       "Try",           "ExceptHandler", "Assert",
    "Import",      "ImportFrom", "Alias",       "Global",        "Nonlocal",   "ExprStmt",
    "Pass",        "Break",      "Continue",    "BoolOp",        "NamedExpr",  "BinOp",
    "UnaryOp",     "Lambda",     "IfExp",       "Dict",          "KeyValue",   "DoubleStar",
    "Set",         "List",       "Tuple",       "ListComp",      "SetComp",    "GeneratorExp",
    "DictComp",    "Comprehension", "Await",    "Yield",         "YieldFrom",  "Compare",
    "Call",        "Keyword",    "Attribute",   "Subscript",     "Slice",      "Starred",
    "Name",        "Number",     "Constant",    "String",        "StrPart",    "FString",
    "FLiteral",    "FField",     "Arguments",   "Param",         "SlashMarker", "StarMarker",
    "Ident",
};

void dump_into(const Node& node, std::string& out) {
    out += '(';
    out += kind_name(node.kind);
    // The docstring marker is derived from position, not syntax.
    if (auto flags = node.flags & ~static_cast<std::uint32_t>(kDocstring); flags != 0) {
        out += " #";
        out += std::to_string(flags);
    }
    if (!node.value.empty()) {
        out += " '";
        out += node.value;
        out += '\'';
    }
    for (const auto& a : node.aux) {
        out += " ^";
        out += a;
    }
    for (const auto& kid : node.kids) {
        out += ' ';
        if (kid) {
            dump_into(*kid, out);
        } else {
            out += '_';
        }
    }
    out += ')';
}

void apply_renames(Node& node, const std::vector<Occurrence>& occurrences,
                   const std::vector<std::string>& replacements) {
    if (node.occurrence >= 0 && static_cast<std::size_t>(node.occurrence) < replacements.size()) {
        const auto& replacement = replacements[node.occurrence];
        if (!replacement.empty()) {
            if (node.kind == NodeKind::StrPart) {
                const auto& occ = occurrences[node.occurrence];
                auto offset = occ.span.begin - node.span.begin;
                node.value.replace(offset, occ.span.end - occ.span.begin, replacement);
            } else {
                node.value = replacement;
            }
        }
    }
    for (auto& kid : node.kids) {
        if (kid) apply_renames(*kid, occurrences, replacements);
    }
}

void collect_occurrence_nodes(const Node& node, std::vector<const Node*>& out) {
    if (node.occurrence >= 0 && static_cast<std::size_t>(node.occurrence) < out.size()) {
        out[node.occurrence] = &node;
    }
    for (const auto& kid : node.kids) {
        if (kid) collect_occurrence_nodes(*kid, out);
    }
}

}  // namespace

std::string_view kind_name(NodeKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::string_view role_name(Role role) {
    switch (role) {
        case Role::Definition: return "definition-site";
        case Role::Reference: return "reference-site";
        case Role::Attribute: return "attribute";
        case Role::KeywordArgument: return "keyword-argument";
        case Role::ImportAlias: return "import-alias";
        case Role::StringLiteral: return "string-literal";
    }
    return "unknown";
}

NodePtr Node::clone() const {
    auto copy = std::make_unique<Node>(kind);
    copy->flags = flags;
    copy->value = value;
    copy->aux = aux;
    copy->span = span;
    copy->line = line;
    copy->occurrence = occurrence;
    copy->kids.reserve(kids.size());
    for (const auto& kid : kids) {
        copy->kids.push_back(kid ? kid->clone() : nullptr);
    }
    return copy;
}

NodePtr make_node(NodeKind kind, Span span, int line) {
    auto node = std::make_unique<Node>(kind);
    node->span = span;
    node->line = line;
    return node;
}

SyntaxTree::SyntaxTree(std::string source, NodePtr root, std::vector<Occurrence> occurrences,
                       std::vector<Comment> comments)
    : source_(std::move(source)),
      root_(std::move(root)),
      occurrences_(std::move(occurrences)),
      comments_(std::move(comments)) {}

SyntaxTree::SyntaxTree(const SyntaxTree& other)
    : source_(other.source_),
      root_(other.root_ ? other.root_->clone() : nullptr),
      occurrences_(other.occurrences_),
      comments_(other.comments_) {}

SyntaxTree& SyntaxTree::operator=(const SyntaxTree& other) {
    if (this != &other) {
        SyntaxTree copy(other);
        *this = std::move(copy);
    }
    return *this;
}

SyntaxTree SyntaxTree::renamed(const std::vector<std::string>& replacements) const {
    SyntaxTree copy(*this);
    apply_renames(*copy.root_, occurrences_, replacements);
    for (std::size_t i = 0; i < copy.occurrences_.size() && i < replacements.size(); ++i) {
        if (!replacements[i].empty()) copy.occurrences_[i].name = replacements[i];
    }
    return copy;
}

std::vector<const Node*> SyntaxTree::occurrence_nodes() const {
    std::vector<const Node*> out(occurrences_.size(), nullptr);
    if (root_) collect_occurrence_nodes(*root_, out);
    return out;
}

std::string dump(const Node& node) {
    std::string out;
    dump_into(node, out);
    return out;
}

}  // namespace obf::frontend
