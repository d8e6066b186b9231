#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "obf/ast.hpp"

namespace obf::scopes {

using frontend::SyntaxTree;

enum class BindingKind : std::uint8_t {
    Class,
    Function,
    Method,
    Parameter,
    Local,
    GlobalVar,
    ComprehensionVar,
    ImportAlias,
    AttributeSlot,
};

std::string_view kind_name(BindingKind kind);

enum class ScopeKind : std::uint8_t { Module, Class, Function, Comprehension };

std::string_view kind_name(ScopeKind kind);

struct Scope {
    int id = 0;
    ScopeKind kind = ScopeKind::Module;
    int parent = -1;
    std::string name;
};

/// Which tree an occurrence index refers to.
enum class Source : std::uint8_t { Unit, Test };

struct OccurrenceRef {
    Source src = Source::Unit;
    int index = 0;

    friend auto operator<=>(const OccurrenceRef&, const OccurrenceRef&) = default;
};

struct Binding {
    int id = 0;
    std::string name;
    BindingKind kind = BindingKind::Local;
    int scope_id = 0;
    /// Renameable under the policy given to analyze().
    bool renameable = false;
    std::vector<OccurrenceRef> occurrences;
    /// First defining occurrence (or first occurrence when none defines it).
    OccurrenceRef first_definition;

    // Facts consulted by renameable_set().
    std::vector<std::string> blockers;  // structural reasons the name must stay
    bool reflected = false;             // named by a reflective string literal
    bool attribute_accessed = false;    // reached through `.name` somewhere
    bool alias_only = false;            // import binding introduced only via `as`
};

enum class ReflectionPolicy : std::uint8_t { Strict, RewriteLiterals };

std::string_view policy_name(ReflectionPolicy policy);
ReflectionPolicy parse_policy(std::string_view text);

struct RenamePolicy {
    ReflectionPolicy reflection = ReflectionPolicy::Strict;
    bool rename_attributes = true;
    bool rename_import_aliases = false;
};

inline constexpr int kExternal = -1;

struct ScopeGraph {
    std::vector<Scope> scopes;
    std::vector<Binding> bindings;
    /// Occurrence index -> binding id or kExternal.
    std::vector<int> unit_resolution;
    std::vector<int> test_resolution;
    /// Every identifier spelled anywhere in the unit or its tests.
    std::set<std::string> identifiers;

    int resolve(OccurrenceRef ref) const;

    /// Digest of bindings and their occurrences; changes whenever the unit does.
    std::string fingerprint() const;
};

/// Resolves every identifier occurrence of `unit` (and `test`, which shares the
/// unit's module namespace). Throws AnalysisError on star-imports or a
/// `nonlocal` without an enclosing binding.
ScopeGraph analyze(const SyntaxTree& unit, const SyntaxTree* test = nullptr, const RenamePolicy& policy = {});

/// Binding ids that may be renamed under `policy`, ascending.
std::vector<int> renameable_set(const ScopeGraph& graph, const RenamePolicy& policy = {});

bool is_builtin(std::string_view name);
const std::vector<std::string_view>& builtin_names();

}  // namespace obf::scopes
