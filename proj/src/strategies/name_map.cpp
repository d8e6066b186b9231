#include <algorithm>
#include <map>

#include "obf/errors.hpp"
#include "obf/strategies.hpp"
#include "obf/tokenizer.hpp"

namespace obf::strategies {

using scopes::OccurrenceRef;

RenamePolicy NameMap::policy() const {
    return RenamePolicy{reflection, rename_attributes, rename_import_aliases};
}

const NameMapEntry* NameMap::find(int binding_id) const {
    for (const auto& e : entries) {
        if (e.binding_id == binding_id) return &e;
    }
    return nullptr;
}

std::string scope_path(const ScopeGraph& graph, int scope_id) {
    std::vector<std::string> parts;
    for (int s = scope_id; s >= 0; s = graph.scopes[s].parent) {
        if (graph.scopes[s].kind == scopes::ScopeKind::Module) break;
        parts.push_back(graph.scopes[s].name);
    }
    if (parts.empty()) return "<module>";
    std::string out;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (!out.empty()) out += '.';
        out += *it;
    }
    return out;
}

namespace {

enum class AlphaGroup { Class, Method, Var };

AlphaGroup alpha_group(BindingKind kind) {
    if (kind == BindingKind::Class) return AlphaGroup::Class;
    if (kind == BindingKind::Function || kind == BindingKind::Method) return AlphaGroup::Method;
    return AlphaGroup::Var;
}

class Assigner {
public:
    explicit Assigner(const ScopeGraph& graph) : taken_(graph.identifiers) {
        for (auto b : scopes::builtin_names()) taken_.emplace(b);
    }

    bool free(const std::string& name) const {
        return !taken_.count(name) && !frontend::is_keyword(name) && !frontend::is_soft_keyword(name) &&
               !frontend::is_dunder(name);
    }

    void take(const std::string& name) { taken_.insert(name); }

private:
    std::set<std::string> taken_;
};

}  // namespace

NameMap build_map(const ScopeGraph& graph, const Strategy& strategy, const RenamePolicy& policy,
                  const BuildOptions& options) {
    NameMap map;
    map.task_id = options.task_id;
    map.strategy = strategy;
    map.reflection = policy.reflection;
    map.rename_attributes = policy.rename_attributes;
    map.rename_import_aliases = policy.rename_import_aliases;
    map.fingerprint = graph.fingerprint();

    const Lexicon& crossdomain = options.crossdomain ? *options.crossdomain : bundled_crossdomain();
    const Lexicon& misleading = options.misleading ? *options.misleading : bundled_misleading();
    switch (strategy.tag) {
        case Tag::CrossDomain: map.strategy.lexicon_version = crossdomain.version; break;
        case Tag::Misleading: map.strategy.lexicon_version = misleading.version; break;
        default: map.strategy.lexicon_version.clear(); break;
    }

    std::vector<int> ids = scopes::renameable_set(graph, policy);
    std::vector<int> order = ids;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return graph.bindings[a].first_definition < graph.bindings[b].first_definition;
    });

    Assigner names(graph);
    std::map<int, std::string> assigned;
    std::map<AlphaGroup, int> alpha_counter;
    int ordinal = 0;
    for (int id : order) {
        const Binding& b = graph.bindings[id];
        std::string name;
        switch (strategy.tag) {
            case Tag::Alpha: {
                auto& counter = alpha_counter[alpha_group(b.kind)];
                do {
                    name = gen_alpha(b.kind, ++counter);
                } while (!names.free(name));
                break;
            }
            case Tag::Ambiguity:
                do {
                    name = gen_ambiguous(strategy.seed, ++ordinal, options.ambiguous);
                } while (!names.free(name));
                break;
            case Tag::CrossDomain:
                do {
                    name = gen_crossdomain(strategy.seed, ++ordinal, crossdomain);
                } while (!names.free(name));
                break;
            case Tag::Misleading: {
                const std::string base = gen_misleading(strategy.seed, b, misleading);
                name = base;
                for (int n = 2; !names.free(name); ++n) name = base + "_" + std::to_string(n);
                break;
            }
        }
        names.take(name);
        assigned[id] = name;
    }

    for (int id : ids) {
        const Binding& b = graph.bindings[id];
        map.entries.push_back({id, b.name, assigned.at(id), b.kind, scope_path(graph, b.scope_id)});
    }
    return map;
}

// ---- serialization ------------------------------------------------------------------------

namespace {

BindingKind parse_binding_kind(const std::string& text) {
    for (int k = 0; k <= static_cast<int>(BindingKind::AttributeSlot); ++k) {
        auto kind = static_cast<BindingKind>(k);
        if (scopes::kind_name(kind) == text) return kind;
    }
    throw Error("unknown binding kind: " + text);
}

}  // namespace

nlohmann::json to_json(const NameMap& map) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : map.entries) {
        entries.push_back({{"from", e.from}, {"to", e.to}, {"kind", scopes::kind_name(e.kind)}, {"scope", e.scope}});
    }
    return {
        {"task_id", map.task_id},
        {"strategy", tag_name(map.strategy.tag)},
        {"seed", map.strategy.seed},
        {"lexicon_version", map.strategy.lexicon_version},
        {"policy",
         {{"reflection", scopes::policy_name(map.reflection)},
          {"rename_attributes", map.rename_attributes},
          {"rename_import_aliases", map.rename_import_aliases}}},
        {"fingerprint", map.fingerprint},
        {"entries", entries},
    };
}

NameMap name_map_from_json(const nlohmann::json& j) {
    try {
        NameMap map;
        map.task_id = j.value("task_id", "");
        map.strategy.tag = parse_tag(j.at("strategy").get<std::string>());
        map.strategy.seed = j.at("seed").get<std::uint64_t>();
        map.strategy.lexicon_version = j.value("lexicon_version", "");
        if (j.contains("policy")) {
            const auto& p = j.at("policy");
            map.reflection = scopes::parse_policy(p.value("reflection", "strict"));
            map.rename_attributes = p.value("rename_attributes", true);
            map.rename_import_aliases = p.value("rename_import_aliases", false);
        }
        map.fingerprint = j.value("fingerprint", "");
        for (const auto& e : j.at("entries")) {
            NameMapEntry entry;
            entry.from = e.at("from").get<std::string>();
            entry.to = e.at("to").get<std::string>();
            entry.kind = parse_binding_kind(e.at("kind").get<std::string>());
            entry.scope = e.value("scope", "");
            map.entries.push_back(std::move(entry));
        }
        return map;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(std::string("malformed name map: ") + ex.what());
    }
}

std::string serialize(const NameMap& map) { return to_json(map).dump(2); }

}  // namespace obf::strategies
