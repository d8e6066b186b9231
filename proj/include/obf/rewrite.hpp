#pragma once

#include <cstdint>
#include <string>

#include "obf/frontend.hpp"
#include "obf/record.hpp"
#include "obf/strategies.hpp"

namespace obf::rewrite {

struct RewriteOptions {
    // Natural-language text outside identifiers; dropped by default.
    bool keep_docstrings = false;
    bool keep_comments = false;
};

/// Renames every occurrence of every mapped binding in the unit and its test code.
/// A map with no entries and no fingerprint is the identity map.
/// Throws StaleMap when the map was not built from this unit under its policy.
SourceUnit obfuscate(const SourceUnit& unit, const strategies::NameMap& map, const RewriteOptions& options = {});

struct PipelineOptions {
    scopes::RenamePolicy policy;
    strategies::BuildOptions build;
    RewriteOptions rewrite;
};

/// Builds all four variants from one scope graph with a shared seed. A failing
/// strategy is recorded in `failures` and the record is partial.
ObfuscationRecord obfuscate_all(const SourceUnit& unit, std::uint64_t seed, const PipelineOptions& options = {});

/// True when `variant` differs from `original` only by a consistent renaming of
/// bindings: same tree shape, and occurrence i resolves to binding B in one iff it
/// resolves to the corresponding binding in the other. `why` receives the first mismatch.
bool alpha_equivalent(const SourceUnit& original, const SourceUnit& variant, const scopes::RenamePolicy& policy = {},
                      std::string* why = nullptr);

nlohmann::json to_json(const ObfuscationRecord& record);

}  // namespace obf::rewrite
