#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "obf/scopes.hpp"

namespace obf::strategies {

using scopes::Binding;
using scopes::BindingKind;
using scopes::RenamePolicy;
using scopes::ScopeGraph;

enum class Tag : std::uint8_t { Alpha, Ambiguity, CrossDomain, Misleading };

inline constexpr std::array<Tag, 4> kAllTags = {Tag::Alpha, Tag::Ambiguity, Tag::CrossDomain, Tag::Misleading};

std::string_view tag_name(Tag tag);
Tag parse_tag(std::string_view text);

struct Strategy {
    Tag tag = Tag::Alpha;
    std::uint64_t seed = 0;
    std::string lexicon_version;  // crossdomain and misleading only
};

/// Deterministic generator: mt19937_64 seeded through splitmix64, with our own
/// bounded draws so results do not depend on the standard library's distributions.
class Prng {
public:
    explicit Prng(std::uint64_t seed);
    std::uint64_t next();
    /// Uniform integer in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
/// Combines a seed with further values into one derived seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts);
std::uint64_t hash_text(std::string_view text);

// ---- lexicons ----------------------------------------------------------------

enum class EntryKind : std::uint8_t { Any, Function, Value, Class };

struct LexiconEntry {
    std::string name;
    EntryKind kind = EntryKind::Any;
};

struct Lexicon {
    std::string version;
    std::vector<LexiconEntry> entries;
};

/// One entry per line, `#` starts a comment, optional `function:`/`value:`/`class:` prefix.
Lexicon parse_lexicon(std::string_view text, std::string version);
/// Loads a lexicon file; its version is the file stem.
Lexicon load_lexicon(const std::filesystem::path& path);
/// Lexicons shipped with the harness.
const Lexicon& bundled_crossdomain();
const Lexicon& bundled_misleading();

// ---- generators ----------------------------------------------------------------

std::string gen_alpha(BindingKind kind, int ordinal);

struct AmbiguousOptions {
    bool allow_digit = false;  // adds '1' to the body alphabet
};
std::string gen_ambiguous(std::uint64_t seed, int ordinal, const AmbiguousOptions& options = {});

std::string gen_crossdomain(std::uint64_t seed, int ordinal, const Lexicon& lexicon);

/// Word stems of an identifier: split on '_' and case changes, lowercased, digits
/// dropped, light suffix stripping.
std::set<std::string> stems(std::string_view name);

std::string gen_misleading(std::uint64_t seed, const Binding& binding, const Lexicon& lexicon);

// ---- name maps ---------------------------------------------------------------------

struct NameMapEntry {
    int binding_id = -1;  // not serialized; recovered by position
    std::string from;
    std::string to;
    BindingKind kind = BindingKind::Local;
    std::string scope;
};

struct NameMap {
    std::string task_id;
    Strategy strategy;
    scopes::ReflectionPolicy reflection = scopes::ReflectionPolicy::Strict;
    bool rename_attributes = true;
    bool rename_import_aliases = false;
    std::string fingerprint;
    std::vector<NameMapEntry> entries;  // ordered by binding id

    RenamePolicy policy() const;
    const NameMapEntry* find(int binding_id) const;
};

struct BuildOptions {
    const Lexicon* crossdomain = nullptr;  // defaults to the bundled lexicons
    const Lexicon* misleading = nullptr;
    AmbiguousOptions ambiguous;
    std::string task_id;
};

/// Assigns every renameable binding a fresh name. Names are unique within the
/// unit and avoid every identifier already present, keywords and builtins.
NameMap build_map(const ScopeGraph& graph, const Strategy& strategy, const RenamePolicy& policy = {},
                  const BuildOptions& options = {});

/// Dotted path of a scope, e.g. "Game.sweep" or "<module>".
std::string scope_path(const ScopeGraph& graph, int scope_id);

nlohmann::json to_json(const NameMap& map);
NameMap name_map_from_json(const nlohmann::json& j);
std::string serialize(const NameMap& map);

}  // namespace obf::strategies
