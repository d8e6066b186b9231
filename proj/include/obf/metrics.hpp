#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "obf/ast.hpp"
#include "obf/record.hpp"
#include "obf/scopes.hpp"

namespace obf::metrics {

struct FunctionComplexity {
    std::string qualname;  // e.g. "Game.sweep", "outer.<locals>.inner"
    int line = 0;
    int cc = 1;
};

struct ComplexityReport {
    std::vector<FunctionComplexity> functions;  // source order
    int unit_cc_max = 1;
    int unit_cc_sum = 1;
};

/// McCabe complexity per function: 1 + decision points (if/elif, for, while,
/// except clauses, boolean operator short circuits, conditional expressions,
/// comprehension conditions). Lambdas count toward the enclosing function.
ComplexityReport cyclomatic(const frontend::SyntaxTree& tree);

enum class Aggregate { Max, Sum };

/// Units whose aggregate CC reaches `threshold`, in input order. Throws DomainError on threshold < 1.
std::vector<SourceUnit> filter_corpus(const std::vector<SourceUnit>& units, int threshold,
                                      Aggregate aggregate = Aggregate::Max);

struct LengthSummary {
    int count = 0;
    double median = 0;
    double mean = 0;
    double p90 = 0;
    std::map<int, int> histogram;  // length -> bindings
};

struct IdentifierStats {
    std::vector<std::pair<std::string, int>> lengths;  // renameable bindings, id order
    LengthSummary summary;
    std::map<std::string, LengthSummary> by_kind;
};

LengthSummary summarize_lengths(std::vector<int> lengths);

/// Name-length statistics over the renameable bindings of `graph`.
IdentifierStats identifier_stats(const scopes::ScopeGraph& graph, const scopes::RenamePolicy& policy = {});

nlohmann::json to_json(const ComplexityReport& report);
nlohmann::json to_json(const IdentifierStats& stats);
/// "length,count" rows for plotting.
std::string histogram_csv(const LengthSummary& summary);

}  // namespace obf::metrics
