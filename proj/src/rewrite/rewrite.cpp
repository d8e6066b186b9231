#include "obf/rewrite.hpp"

#include <map>
#include <optional>

#include "obf/errors.hpp"

namespace obf {

std::string_view status_name(VerdictStatus status) {
    switch (status) {
        case VerdictStatus::Equivalent: return "EQUIVALENT";
        case VerdictStatus::Divergent: return "DIVERGENT";
        case VerdictStatus::OriginalFails: return "ORIGINAL_FAILS";
        case VerdictStatus::RunnerError: return "RUNNER_ERROR";
        case VerdictStatus::Timeout: return "TIMEOUT";
    }
    return "RUNNER_ERROR";
}

VerdictStatus parse_status(std::string_view text) {
    for (auto s : {VerdictStatus::Equivalent, VerdictStatus::Divergent, VerdictStatus::OriginalFails,
                   VerdictStatus::RunnerError, VerdictStatus::Timeout}) {
        if (status_name(s) == text) return s;
    }
    throw Error("unknown verdict status: " + std::string(text));
}

}  // namespace obf

namespace obf::rewrite {

using frontend::Node;
using frontend::NodeKind;
using frontend::SyntaxTree;
using scopes::OccurrenceRef;
using scopes::ScopeGraph;
using scopes::Source;
using strategies::NameMap;
using strategies::Tag;

namespace {

struct Parsed {
    SyntaxTree unit;
    std::optional<SyntaxTree> test;

    explicit Parsed(const SourceUnit& su) : unit(frontend::parse(su.code)) {
        if (!su.test_code.empty()) test = frontend::parse(su.test_code);
    }

    const SyntaxTree* test_ptr() const { return test ? &*test : nullptr; }
};

bool identity_map(const NameMap& map) { return map.entries.empty() && map.fingerprint.empty(); }

// Binding id -> new name, after checking that `map` describes `graph`.
std::map<int, std::string> bind_entries(const ScopeGraph& graph, const NameMap& map) {
    std::map<int, std::string> out;
    if (identity_map(map)) return out;
    if (!map.fingerprint.empty() && map.fingerprint != graph.fingerprint()) {
        throw StaleMap("name map fingerprint " + map.fingerprint + " does not match unit " + graph.fingerprint());
    }
    auto ids = scopes::renameable_set(graph, map.policy());
    if (ids.size() != map.entries.size()) {
        throw StaleMap("name map has " + std::to_string(map.entries.size()) + " entries, unit has " +
                       std::to_string(ids.size()) + " renameable bindings");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& b = graph.bindings[ids[i]];
        const auto& e = map.entries[i];
        if (e.from != b.name || e.kind != b.kind) {
            throw StaleMap("name map entry " + std::to_string(i) + " (" + e.from + ") does not match binding " + b.name);
        }
        out[b.id] = e.to;
    }
    return out;
}

std::string render(const SyntaxTree& tree, const std::vector<int>& resolution, const std::map<int, std::string>& names,
                   const RewriteOptions& options) {
    std::vector<std::string> replacements(tree.occurrences().size());
    for (std::size_t i = 0; i < resolution.size(); ++i) {
        auto it = names.find(resolution[i]);
        if (it != names.end()) replacements[i] = it->second;
    }
    frontend::EmitOptions emit;
    emit.keep_docstrings = options.keep_docstrings;
    emit.keep_comments = options.keep_comments;
    return frontend::emit(tree.renamed(replacements), emit);
}

SourceUnit apply(const SourceUnit& unit, const Parsed& parsed, const ScopeGraph& graph, const NameMap& map,
                 const RewriteOptions& options) {
    auto names = bind_entries(graph, map);
    SourceUnit out = unit;
    out.code = render(parsed.unit, graph.unit_resolution, names, options);
    if (parsed.test) out.test_code = render(*parsed.test, graph.test_resolution, names, options);
    return out;
}

}  // namespace

SourceUnit obfuscate(const SourceUnit& unit, const NameMap& map, const RewriteOptions& options) {
    Parsed parsed(unit);
    auto graph = scopes::analyze(parsed.unit, parsed.test_ptr(), map.policy());
    return apply(unit, parsed, graph, map, options);
}

ObfuscationRecord obfuscate_all(const SourceUnit& unit, std::uint64_t seed, const PipelineOptions& options) {
    ObfuscationRecord record;
    record.task_id = unit.task_id;
    record.original = unit;
    record.seed = seed;
    Parsed parsed(unit);
    auto graph = scopes::analyze(parsed.unit, parsed.test_ptr(), options.policy);
    for (Tag tag : strategies::kAllTags) {
        try {
            auto build = options.build;
            build.task_id = unit.task_id;
            auto map = strategies::build_map(graph, {tag, seed, ""}, options.policy, build);
            auto renamed = apply(unit, parsed, graph, map, options.rewrite);
            record.variants[tag] = Variant{renamed.code, renamed.test_code, std::move(map)};
        } catch (const Error& e) {
            record.failures[tag] = e.what();
        }
    }
    return record;
}

// ---- alpha-equivalence --------------------------------------------------------------

namespace {

struct Pairing {
    std::vector<std::pair<int, int>> occurrences;
    std::string mismatch;
};

std::string strip_occurrence(const Node& n, const SyntaxTree& tree) {
    const auto& occ = tree.occurrences()[n.occurrence];
    std::string v = n.value;
    v.erase(occ.span.begin - n.span.begin, occ.span.end - occ.span.begin);
    return v;
}

bool same_shape(const Node& a, const SyntaxTree& ta, const Node& b, const SyntaxTree& tb, Pairing& p) {
    auto fail = [&](const std::string& what) {
        p.mismatch = what + " at line " + std::to_string(a.line);
        return false;
    };
    if (a.kind != b.kind) return fail("node kind differs");
    if (a.flags != b.flags) return fail("node flags differ");
    if ((a.occurrence >= 0) != (b.occurrence >= 0)) return fail("occurrence presence differs");
    if (a.occurrence >= 0) {
        p.occurrences.emplace_back(a.occurrence, b.occurrence);
        if (a.kind == NodeKind::StrPart && strip_occurrence(a, ta) != strip_occurrence(b, tb)) {
            return fail("string literal differs");
        }
    } else if (a.value != b.value) {
        return fail("value '" + a.value + "' differs from '" + b.value + "'");
    }
    if (a.kind == NodeKind::FField) {
        if (a.aux.empty() != b.aux.empty() || (!a.aux.empty() && a.aux[0] != b.aux[0])) return fail("f-string field differs");
    } else if (a.aux != b.aux) {
        return fail("auxiliary text differs");
    }
    if (a.kids.size() != b.kids.size()) return fail("child count differs");
    for (std::size_t i = 0; i < a.kids.size(); ++i) {
        if (!a.kids[i] != !b.kids[i]) return fail("optional child differs");
        if (a.kids[i] && !same_shape(*a.kids[i], ta, *b.kids[i], tb, p)) return false;
    }
    return true;
}

}  // namespace

bool alpha_equivalent(const SourceUnit& original, const SourceUnit& variant, const scopes::RenamePolicy& policy,
                      std::string* why) {
    auto fail = [&](const std::string& what) {
        if (why) *why = what;
        return false;
    };
    if (original.test_code.empty() != variant.test_code.empty()) return fail("test code presence differs");
    // Compare canonical renderings so docstrings and layout do not matter.
    auto canonical = [](const SourceUnit& su) {
        SourceUnit out = su;
        out.code = frontend::emit(frontend::parse(su.code));
        if (!su.test_code.empty()) out.test_code = frontend::emit(frontend::parse(su.test_code));
        return out;
    };
    Parsed pa(canonical(original));
    Parsed pb(canonical(variant));
    auto ga = scopes::analyze(pa.unit, pa.test_ptr(), policy);
    auto gb = scopes::analyze(pb.unit, pb.test_ptr(), policy);

    std::map<int, int> forward;
    std::map<int, int> backward;
    auto check_tree = [&](const SyntaxTree& ta, const SyntaxTree& tb, Source src, const char* label) {
        Pairing p;
        if (!same_shape(ta.root(), ta, tb.root(), tb, p)) return fail(std::string(label) + ": " + p.mismatch);
        for (auto [ia, ib] : p.occurrences) {
            int ra = ga.resolve({src, ia});
            int rb = gb.resolve({src, ib});
            const auto& na = ta.occurrences()[ia].name;
            const auto& nb = tb.occurrences()[ib].name;
            auto where = std::string(label) + " occurrence '" + na + "'/'" + nb + "'";
            if (ra == scopes::kExternal || rb == scopes::kExternal) {
                if (ra != rb) return fail(where + ": resolved on one side only");
                if (na != nb) return fail(where + ": external name changed");
                continue;
            }
            if (!ga.bindings[ra].renameable && na != nb) return fail(where + ": non-renameable name changed");
            auto [f, fnew] = forward.emplace(ra, rb);
            auto [b, bnew] = backward.emplace(rb, ra);
            if (f->second != rb || b->second != ra) return fail(where + ": binding structure differs");
        }
        return true;
    };
    if (!check_tree(pa.unit, pb.unit, Source::Unit, "unit")) return false;
    if (pa.test && !check_tree(*pa.test, *pb.test, Source::Test, "test")) return false;
    return true;
}

// ---- serialization ---------------------------------------------------------------------

nlohmann::json to_json(const ObfuscationRecord& record) {
    nlohmann::json variants = nlohmann::json::object();
    for (const auto& [tag, v] : record.variants) {
        variants[std::string(strategies::tag_name(tag))] = {
            {"code", v.code}, {"test", v.test_code}, {"name_map", strategies::to_json(v.map)}};
    }
    nlohmann::json verdicts = nlohmann::json::object();
    for (const auto& [tag, v] : record.verdicts) {
        auto tests = [](const std::vector<TestOutcome>& list) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& t : list) arr.push_back({{"name", t.name}, {"outcome", t.outcome}});
            return arr;
        };
        verdicts[std::string(strategies::tag_name(tag))] = {
            {"status", status_name(v.status)}, {"original", tests(v.original)}, {"variant", tests(v.variant)},
            {"detail", v.detail},           {"limit_seconds", v.limit_seconds}};
    }
    nlohmann::json failures = nlohmann::json::object();
    for (const auto& [tag, msg] : record.failures) failures[std::string(strategies::tag_name(tag))] = msg;
    return {
        {"task_id", record.task_id},
        {"seed", record.seed},
        {"origin", record.original.origin},
        {"original_code", record.original.code},
        {"original_test", record.original.test_code},
        {"variants", variants},
        {"verdicts", verdicts},
        {"failures", failures},
        {"partial", record.partial()},
    };
}

}  // namespace obf::rewrite
