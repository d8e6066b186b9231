#pragma once

#include <string>
#include <string_view>

#include "obf/ast.hpp"

namespace obf::frontend {

/// Grammar version accepted by the parser. `match` statements are not supported.
inline constexpr std::string_view kLanguageVersion = "3.10";

/// Parses a Python module. Throws SyntaxError on invalid input.
SyntaxTree parse(std::string code);

/// Parses a single expression (used for literals and call specs).
SyntaxTree parse_expression(std::string code);

struct EmitOptions {
    bool keep_docstrings = false;
    bool keep_comments = false;
    int indent_width = 4;
};

/// Renders canonical source. The output re-parses to a structurally equal tree
/// (docstrings and comments excepted unless retained).
std::string emit(const SyntaxTree& tree, const EmitOptions& options = {});

/// Renders one expression node in canonical form.
std::string emit_expression(const Node& expr);

}  // namespace obf::frontend
