#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "obf/errors.hpp"
#include "obf/scopes.hpp"
#include "obf/tokenizer.hpp"

namespace obf::scopes {

using frontend::Node;
using frontend::NodeKind;
using frontend::Role;

std::string_view kind_name(BindingKind kind) {
    switch (kind) {
        case BindingKind::Class: return "class";
        case BindingKind::Function: return "function";
        case BindingKind::Method: return "method";
        case BindingKind::Parameter: return "parameter";
        case BindingKind::Local: return "local";
        case BindingKind::GlobalVar: return "global_var";
        case BindingKind::ComprehensionVar: return "comprehension_var";
        case BindingKind::ImportAlias: return "import_alias";
        case BindingKind::AttributeSlot: return "attribute_slot";
    }
    return "unknown";
}

std::string_view kind_name(ScopeKind kind) {
    switch (kind) {
        case ScopeKind::Module: return "module";
        case ScopeKind::Class: return "class";
        case ScopeKind::Function: return "function";
        case ScopeKind::Comprehension: return "comprehension";
    }
    return "unknown";
}

std::string_view policy_name(ReflectionPolicy policy) {
    return policy == ReflectionPolicy::Strict ? "strict" : "rewrite-literals";
}

ReflectionPolicy parse_policy(std::string_view text) {
    if (text == "strict") return ReflectionPolicy::Strict;
    if (text == "rewrite-literals") return ReflectionPolicy::RewriteLiterals;
    throw Error("unknown policy: " + std::string(text));
}

int ScopeGraph::resolve(OccurrenceRef ref) const {
    const auto& table = ref.src == Source::Unit ? unit_resolution : test_resolution;
    if (ref.index < 0 || static_cast<std::size_t>(ref.index) >= table.size()) return kExternal;
    return table[ref.index];
}

std::string ScopeGraph::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    for (const auto& b : bindings) {
        mix(std::to_string(b.id));
        mix(b.name);
        mix(kind_name(b.kind));
        for (const auto& o : b.occurrences) {
            mix(o.src == Source::Unit ? "u" : "t");
            mix(std::to_string(o.index));
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool binding_renameable(const Binding& b, const RenamePolicy& policy) {
    if (!b.blockers.empty()) return false;
    if (b.reflected && policy.reflection == ReflectionPolicy::Strict) return false;
    if (!policy.rename_attributes && (b.attribute_accessed || b.kind == BindingKind::AttributeSlot)) return false;
    if (b.kind == BindingKind::ImportAlias && !(policy.rename_import_aliases && b.alias_only)) return false;
    return true;
}

std::vector<int> renameable_set(const ScopeGraph& graph, const RenamePolicy& policy) {
    std::vector<int> out;
    for (const auto& b : graph.bindings) {
        if (binding_renameable(b, policy)) out.push_back(b.id);
    }
    return out;
}

namespace {

// Attribute names of builtin containers and strings; an unknown receiver using one
// of these cannot be tied to an in-unit member.
const std::set<std::string, std::less<>> kBuiltinTypeAttributes = {
    "add",        "append",     "capitalize", "center",     "clear",     "copy",       "count",
    "decode",     "difference", "discard",    "encode",     "endswith",  "extend",     "find",
    "format",     "fromkeys",   "get",        "imag",       "index",     "insert",     "intersection",
    "isalnum",    "isalpha",    "isdigit",    "islower",    "isspace",   "isupper",    "items",
    "join",       "keys",       "lower",      "lstrip",     "pop",       "popitem",    "read",
    "real",       "remove",     "replace",    "reverse",    "rfind",     "rstrip",     "setdefault",
    "sort",       "split",      "splitlines", "startswith", "strip",     "title",      "union",
    "update",     "upper",      "values",     "write",      "close",     "issubset",   "issuperset",
    "symmetric_difference",     "zfill",      "ljust",      "rjust",     "partition",  "rpartition",
    "bit_length", "conjugate",  "denominator", "numerator", "hex",       "is_integer", "readline",
    "readlines",  "seek",       "tell",       "flush",      "most_common", "appendleft", "popleft",
    "move_to_end", "elements",  "subtract",   "total_seconds", "date",   "time",       "year",
    "month",      "day",        "hour",       "minute",     "second",
};

struct DefSite {
    OccurrenceRef ref;
    int scope;
    std::string name;
    BindingKind kind;
    int def_scope = -1;  // scope opened by a def/class
    bool import_alias = false;
    bool import_plain = false;
};

struct RefSite {
    OccurrenceRef ref;
    int scope;
    std::string name;
};

struct Fact {
    const Node* value = nullptr;
    int scope = 0;
    bool annotation = false;
};

struct PendingAttr {
    Source src;
    const Node* node;
    int scope;
    bool store;
};

struct PendingCall {
    Source src;
    const Node* node;
    int scope;
};

struct PendingLiteral {
    OccurrenceRef ref;
    std::string name;
    int slots_class;  // class scope for __slots__ entries, else -1
};

struct ScopeData {
    Scope info;
    std::set<std::string> assigned;
    std::set<std::string> globals;
    std::set<std::string> nonlocals;
    std::map<std::string, int> symbols;  // name -> raw binding
    int owner_class = -1;                // method scopes: the class scope
    bool is_static = false;
    std::string receiver;                // first parameter name of a method
    std::vector<const Node*> bases;
    Source src = Source::Unit;
    std::vector<int> base_classes;
    bool external_base = false;
};

enum class TypeState { Unset, Typed, External, Unknown };

struct RawBinding {
    std::string name;
    BindingKind kind;
    int scope;
    std::vector<OccurrenceRef> occs;
    std::set<std::string> blockers;
    bool defined_in_unit = false;
    bool reflected = false;
    bool attribute_accessed = false;
    bool saw_plain_import = false;
    bool saw_alias_import = false;
    int class_scope = -1;          // class bindings: scope of the (last) class body
    std::vector<int> def_scopes;   // function bindings: scopes of each def
    TypeState type = TypeState::Unset;
    int type_class = -1;
};

enum class AttrStatus { Resolved, KnownExternal, Unknown };

struct AttrResult {
    AttrStatus status = AttrStatus::Unknown;
    int binding = -1;
};

struct Receiver {
    enum Kind { Typed, Super, External, Unknown } kind = Unknown;
    int cls = -1;
};

class Analyzer {
public:
    Analyzer(const SyntaxTree& unit, const SyntaxTree* test) : unit_(unit), test_(test) {
        unit_res_.assign(unit.occurrences().size(), -1);
        if (test) test_res_.assign(test->occurrences().size(), -1);
    }

    ScopeGraph run(const RenamePolicy& policy) {
        new_scope(ScopeKind::Module, -1, "<module>", Source::Unit);
        src_ = Source::Unit;
        visit_body(unit_.root().kids, 0);
        if (test_) {
            src_ = Source::Test;
            visit_body(test_->root().kids, 0);
        }
        create_bindings();
        resolve_names();
        link_classes();
        compute_types(false);
        resolve_attribute_stores();
        compute_types(true);
        unify_inheritance();
        resolve_attribute_loads();
        resolve_keywords();
        resolve_literals();
        apply_blockers();
        return finish(policy);
    }

private:
    // ---- helpers -------------------------------------------------------------

    const SyntaxTree& tree(Source s) const { return s == Source::Unit ? unit_ : *test_; }
    std::vector<int>& res(Source s) { return s == Source::Unit ? unit_res_ : test_res_; }
    int resolution(OccurrenceRef r) const {
        const auto& v = r.src == Source::Unit ? unit_res_ : test_res_;
        return v[r.index];
    }
    void set_resolution(OccurrenceRef r, int binding) {
        res(r.src)[r.index] = binding;
        if (binding >= 0) raw_[binding].occs.push_back(r);
    }
    OccurrenceRef ref(const Node& n) const { return {src_, n.occurrence}; }

    int new_scope(ScopeKind kind, int parent, std::string name, Source src) {
        ScopeData d;
        d.info.id = static_cast<int>(scopes_.size());
        d.info.kind = kind;
        d.info.parent = parent;
        d.info.name = std::move(name);
        d.src = src;
        scopes_.push_back(std::move(d));
        return scopes_.back().info.id;
    }

    void define(const Node& ident, int scope, BindingKind kind, int def_scope = -1, bool alias = false,
                bool plain = false) {
        if (ident.occurrence < 0) return;
        scopes_[scope].assigned.insert(ident.value);
        defs_.push_back({ref(ident), scope, ident.value, kind, def_scope, alias, plain});
    }

    void reference(const Node& ident, int scope) {
        if (ident.occurrence < 0) return;
        refs_.push_back({ref(ident), scope, ident.value});
    }

    BindingKind store_kind(int scope) const {
        switch (scopes_[scope].info.kind) {
            case ScopeKind::Module: return BindingKind::GlobalVar;
            case ScopeKind::Class: return BindingKind::AttributeSlot;
            case ScopeKind::Comprehension: return BindingKind::ComprehensionVar;
            default: return BindingKind::Local;
        }
    }

    int nearest_non_comprehension(int scope) const {
        while (scopes_[scope].info.kind == ScopeKind::Comprehension) scope = scopes_[scope].info.parent;
        return scope;
    }

    // ---- pass 1: scopes, definition and reference sites ----------------------

    void visit_body(const std::vector<frontend::NodePtr>& body, int scope) {
        for (const auto& s : body) visit_stmt(*s, scope);
    }

    void visit_opt(const Node* n, int scope) {
        if (n) visit_expr(*n, scope);
    }

    void record_fact(const Node& target, const Node* value, int scope) {
        if (target.kind == NodeKind::Name && target.occurrence >= 0) {
            facts_.emplace(ref(target), Fact{value, scope, false});
        } else if (target.kind == NodeKind::Attribute && target.kids[1]->occurrence >= 0) {
            facts_.emplace(ref(*target.kids[1]), Fact{value, scope, false});
        }
    }

    void visit_stmt(const Node& s, int scope) {
        switch (s.kind) {
            case NodeKind::FunctionDef: visit_function(s, scope); return;
            case NodeKind::ClassDef: visit_class(s, scope); return;
            case NodeKind::Assign: {
                const auto* value = s.kids.back().get();
                for (std::size_t i = 0; i + 1 < s.kids.size(); ++i) record_fact(*s.kids[i], value, scope);
                if (scope_is_class(scope) && s.kids.size() == 2 && s.kids[0]->kind == NodeKind::Name &&
                    s.kids[0]->value == "__slots__") {
                    slots_owner_[value] = scope;
                }
                for (const auto& k : s.kids) visit_expr(*k, scope);
                return;
            }
            case NodeKind::AnnAssign:
                if (s.kids[2]) record_fact(*s.kids[0], s.kids[2].get(), scope);
                for (const auto& k : s.kids) visit_opt(k.get(), scope);
                return;
            case NodeKind::Import:
                for (const auto& alias : s.kids) visit_alias(*alias, scope, false);
                return;
            case NodeKind::ImportFrom:
                if (s.has(frontend::kStar)) throw AnalysisError("star import makes external names ambiguous");
                for (const auto& part : s.kids[0]->kids) external(*part);
                for (const auto& alias : s.kids[1]->kids) visit_alias(*alias, scope, true);
                return;
            case NodeKind::Global:
            case NodeKind::Nonlocal:
                for (const auto& ident : s.kids) {
                    (s.kind == NodeKind::Global ? scopes_[scope].globals : scopes_[scope].nonlocals).insert(ident->value);
                    reference(*ident, scope);
                }
                return;
            case NodeKind::ExceptHandler:
                visit_opt(s.kid(0), scope);
                if (s.kid(1)) define(*s.kids[1], scope, store_kind(scope));
                visit_body(s.kids[2]->kids, scope);
                return;
            default:
                for (const auto& k : s.kids) {
                    if (!k) continue;
                    if (k->kind == NodeKind::Seq) {
                        visit_body(k->kids, scope);
                    } else if (is_statement(*k)) {
                        visit_stmt(*k, scope);
                    } else {
                        visit_expr(*k, scope);
                    }
                }
        }
    }

    static bool is_statement(const Node& n) {
        switch (n.kind) {
            case NodeKind::ExceptHandler:
            case NodeKind::FunctionDef:
            case NodeKind::ClassDef: return true;
            default: return false;
        }
    }

    bool scope_is_class(int scope) const { return scopes_[scope].info.kind == ScopeKind::Class; }

    void external(const Node& ident) {
        if (ident.occurrence >= 0) externals_.push_back(ref(ident));
    }

    void visit_alias(const Node& alias, int scope, bool from) {
        const auto& dotted = alias.kids[0]->kids;
        const Node* asname = alias.kid(1);
        if (from) {
            if (asname) {
                external(*dotted[0]);
                define(*asname, scope, BindingKind::ImportAlias, -1, true, false);
            } else {
                define(*dotted[0], scope, BindingKind::ImportAlias, -1, false, true);
            }
            return;
        }
        for (std::size_t i = 0; i < dotted.size(); ++i) {
            if (i == 0 && !asname) {
                define(*dotted[0], scope, BindingKind::ImportAlias, -1, false, true);
            } else {
                external(*dotted[i]);
            }
        }
        if (asname) define(*asname, scope, BindingKind::ImportAlias, -1, true, false);
    }

    void visit_function(const Node& f, int scope) {
        bool is_static = false;
        for (const auto& d : f.kids[1]->kids) {
            visit_expr(*d, scope);
            if (d->kind == NodeKind::Name && d->value == "staticmethod") is_static = true;
        }
        int fs = new_scope(ScopeKind::Function, scope, f.kids[0]->value, src_);
        define(*f.kids[0], scope, scope_is_class(scope) ? BindingKind::Method : BindingKind::Function, fs);
        function_nodes_[fs] = &f;
        if (scope_is_class(scope)) {
            scopes_[fs].owner_class = scope;
            scopes_[fs].is_static = is_static;
        }
        visit_parameters(*f.kids[2], scope, fs);
        visit_opt(f.kid(3), scope);
        visit_body(f.kids[4]->kids, fs);
    }

    void visit_parameters(const Node& args, int outer, int fs) {
        bool first = true;
        for (const auto& p : args.kids) {
            if (p->kind != NodeKind::Param) continue;
            visit_opt(p->kid(1), outer);
            visit_opt(p->kid(2), outer);
            define(*p->kids[0], fs, BindingKind::Parameter);
            if (p->kids[1]) {
                facts_.emplace(ref(*p->kids[0]), Fact{p->kids[1].get(), outer, true});
            }
            if (first && p->value.empty()) scopes_[fs].receiver = p->kids[0]->value;
            first = false;
        }
        if (scopes_[fs].is_static) scopes_[fs].receiver.clear();
    }

    void visit_class(const Node& c, int scope) {
        for (const auto& d : c.kids[1]->kids) visit_expr(*d, scope);
        int cs = new_scope(ScopeKind::Class, scope, c.kids[0]->value, src_);
        for (const auto& b : c.kids[2]->kids) {
            if (b->kind == NodeKind::Keyword) {
                if (b->kids[0]) external(*b->kids[0]);
                visit_expr(*b->kids[1], scope);
                if (b->kids[0] && b->kids[0]->value == "metaclass") scopes_[cs].external_base = true;
            } else {
                visit_expr(*b, scope);
                if (b->kind == NodeKind::Starred) {
                    scopes_[cs].external_base = true;
                } else {
                    scopes_[cs].bases.push_back(b.get());
                }
            }
        }
        define(*c.kids[0], scope, BindingKind::Class, cs);
        visit_body(c.kids[3]->kids, cs);
    }

    void visit_comprehension(const Node& n, int scope) {
        int cs = new_scope(ScopeKind::Comprehension, scope, "<" + std::string(frontend::kind_name(n.kind)) + ">", src_);
        for (std::size_t i = 1; i < n.kids.size(); ++i) {
            const auto& comp = *n.kids[i];
            visit_expr(*comp.kids[1], i == 1 ? scope : cs);
            visit_expr(*comp.kids[0], cs);
            for (std::size_t j = 2; j < comp.kids.size(); ++j) visit_expr(*comp.kids[j], cs);
        }
        visit_expr(*n.kids[0], cs);
    }

    void visit_expr(const Node& e, int scope) {
        switch (e.kind) {
            case NodeKind::Name:
                if (e.has(frontend::kStore)) {
                    if (!facts_.count(ref(e))) facts_.emplace(ref(e), Fact{nullptr, scope, false});
                    define(e, scope, store_kind(scope));
                } else if (e.has(frontend::kDel)) {
                    scopes_[scope].assigned.insert(e.value);
                    reference(e, scope);
                } else {
                    reference(e, scope);
                }
                return;
            case NodeKind::NamedExpr: {
                int target_scope = nearest_non_comprehension(scope);
                const auto& target = *e.kids[0];
                facts_.emplace(ref(target), Fact{e.kids[1].get(), scope, false});
                define(target, target_scope, store_kind(target_scope));
                visit_expr(*e.kids[1], scope);
                return;
            }
            case NodeKind::Lambda: {
                int fs = new_scope(ScopeKind::Function, scope, "<lambda>", src_);
                visit_parameters(*e.kids[0], scope, fs);
                scopes_[fs].receiver.clear();
                visit_expr(*e.kids[1], fs);
                return;
            }
            case NodeKind::ListComp:
            case NodeKind::SetComp:
            case NodeKind::DictComp:
            case NodeKind::GeneratorExp:
                visit_comprehension(e, scope);
                return;
            case NodeKind::Attribute:
                visit_expr(*e.kids[0], scope);
                if (e.has(frontend::kStore) && !facts_.count(ref(*e.kids[1]))) {
                    facts_.emplace(ref(*e.kids[1]), Fact{nullptr, scope, false});
                }
                attrs_.push_back({src_, &e, scope, e.has(frontend::kStore)});
                return;
            case NodeKind::Call: {
                bool keywords = false;
                for (const auto& k : e.kids) {
                    visit_expr(*k, scope);
                    if (k->kind == NodeKind::Keyword && k->kids[0]) keywords = true;
                }
                if (keywords) calls_.push_back({src_, &e, scope});
                literal_call(e);
                return;
            }
            case NodeKind::Keyword:
                visit_expr(*e.kids[1], scope);
                return;
            case NodeKind::String:
                for (const auto& part : e.kids) visit_expr(*part, scope);
                if (auto it = slots_owner_.find(&e); it != slots_owner_.end()) slot_literal(e, it->second);
                return;
            case NodeKind::Tuple:
            case NodeKind::List:
                for (const auto& k : e.kids) visit_expr(*k, scope);
                if (auto it = slots_owner_.find(&e); it != slots_owner_.end()) {
                    for (const auto& k : e.kids) slot_literal(*k, it->second);
                }
                return;
            default:
                for (const auto& k : e.kids) {
                    if (k) visit_expr(*k, scope);
                }
        }
    }

    void literal_call(const Node& call) {
        if (call.kids.size() < 3 || call.kids[0]->kind != NodeKind::Name) return;
        const auto& arg = *call.kids[2];
        if (arg.kind != NodeKind::String || arg.kids.empty() || arg.kids[0]->occurrence < 0) return;
        const auto& part = *arg.kids[0];
        literals_.push_back({ref(part), tree(src_).occurrences()[part.occurrence].name, -1});
    }

    void slot_literal(const Node& s, int cls) {
        if (s.kind != NodeKind::String || s.kids.empty() || s.kids[0]->occurrence < 0) return;
        const auto& part = *s.kids[0];
        literals_.push_back({ref(part), tree(src_).occurrences()[part.occurrence].name, cls});
    }

    // ---- pass 2: bindings and lexical resolution ------------------------------

    int enclosing_owner(int scope, const std::string& name) {
        for (int p = scopes_[scope].info.parent; p >= 0; p = scopes_[p].info.parent) {
            const auto& d = scopes_[p];
            if (d.info.kind == ScopeKind::Class) continue;
            if (d.info.kind == ScopeKind::Module) return -1;
            if (d.globals.count(name)) return 0;
            if (d.nonlocals.count(name)) return enclosing_owner(p, name);
            if (d.assigned.count(name)) return p;
        }
        return -1;
    }

    // Scope owning the binding of `name` as seen from `scope` when bound there.
    int owner_scope(int scope, const std::string& name) {
        const auto& d = scopes_[scope];
        if (d.globals.count(name)) return 0;
        if (d.nonlocals.count(name)) {
            int owner = enclosing_owner(scope, name);
            if (owner < 0) throw AnalysisError("no binding for nonlocal '" + name + "' found");
            return owner;
        }
        return scope;
    }

    int binding_in(int scope, const std::string& name, BindingKind kind) {
        auto& symbols = scopes_[scope].symbols;
        if (auto it = symbols.find(name); it != symbols.end()) return it->second;
        RawBinding b;
        b.name = name;
        b.kind = kind;
        b.scope = scope;
        raw_.push_back(std::move(b));
        symbols[name] = static_cast<int>(raw_.size() - 1);
        return symbols[name];
    }

    void create_bindings() {
        for (const auto& d : defs_) {
            int owner = owner_scope(d.scope, d.name);
            auto kind = d.kind;
            if (owner != d.scope && owner == 0 && kind != BindingKind::Class && kind != BindingKind::Function) {
                kind = BindingKind::GlobalVar;
            }
            int b = binding_in(owner, d.name, kind);
            auto& rb = raw_[b];
            if (d.ref.src == Source::Unit) rb.defined_in_unit = true;
            if (d.kind == BindingKind::Class) rb.class_scope = d.def_scope;
            if (d.kind == BindingKind::Function || d.kind == BindingKind::Method) rb.def_scopes.push_back(d.def_scope);
            if (d.import_alias) rb.saw_alias_import = true;
            if (d.import_plain) rb.saw_plain_import = true;
            set_resolution(d.ref, b);
        }
    }

    int lookup(int scope, const std::string& name) {
        const auto& d = scopes_[scope];
        if (d.globals.count(name) || d.nonlocals.count(name) || d.assigned.count(name)) {
            int owner = owner_scope(scope, name);
            auto& symbols = scopes_[owner].symbols;
            auto it = symbols.find(name);
            return it == symbols.end() ? -1 : it->second;
        }
        int owner = enclosing_owner(scope, name);
        if (owner < 0) owner = 0;
        auto& symbols = scopes_[owner].symbols;
        auto it = symbols.find(name);
        return it == symbols.end() ? -1 : it->second;
    }

    void resolve_names() {
        for (const auto& r : refs_) set_resolution(r.ref, lookup(r.scope, r.name));
    }

    // ---- pass 3: classes -----------------------------------------------------------

    int class_of_binding(int b) const { return b >= 0 ? raw_[b].class_scope : -1; }

    int resolved_name(Source src, const Node& n) const {
        if (n.occurrence < 0) return -1;
        const auto& v = src == Source::Unit ? unit_res_ : test_res_;
        return v[n.occurrence];
    }

    void link_classes() {
        for (auto& d : scopes_) {
            if (d.info.kind != ScopeKind::Class) continue;
            for (const auto* base : d.bases) {
                int cls = base->kind == NodeKind::Name ? class_of_binding(resolved_name(d.src, *base)) : -1;
                if (cls >= 0 && cls != d.info.id) {
                    d.base_classes.push_back(cls);
                } else if (!(base->kind == NodeKind::Name && base->value == "object" &&
                             resolved_name(d.src, *base) < 0)) {
                    d.external_base = true;
                }
            }
        }
        for (auto& d : scopes_) {
            if (d.info.kind != ScopeKind::Function || d.owner_class < 0 || d.receiver.empty()) continue;
            auto it = d.symbols.find(d.receiver);
            if (it == d.symbols.end()) continue;
            auto& rb = raw_[it->second];
            rb.type = TypeState::Typed;
            rb.type_class = d.owner_class;
            rb.blockers.insert("method receiver");
            receivers_.insert(it->second);
        }
    }

    std::vector<int> mro(int cls) const {
        std::vector<int> out;
        std::function<void(int)> add = [&](int c) {
            if (std::find(out.begin(), out.end(), c) != out.end()) return;
            out.push_back(c);
            for (int b : scopes_[c].base_classes) add(b);
        };
        add(cls);
        return out;
    }

    bool external_ancestry(int cls) const {
        for (int c : mro(cls)) {
            if (scopes_[c].external_base) return true;
        }
        return false;
    }

    // ---- pass 4: value types ---------------------------------------------------------

    struct ValueType {
        TypeState state = TypeState::Unknown;
        int cls = -1;
        bool none = false;
    };

    ValueType type_of(Source src, const Fact& f) const {
        ValueType t;
        const Node* v = f.value;
        if (!v) return t;
        auto name_class = [&](const Node& n) -> ValueType {
            ValueType r;
            int b = resolved_name(src, n);
            if (b < 0 || raw_[b].kind == BindingKind::ImportAlias) {
                r.state = TypeState::External;
            } else if (raw_[b].class_scope >= 0) {
                r.state = TypeState::Typed;
                r.cls = raw_[b].class_scope;
            }
            return r;
        };
        if (f.annotation) {
            if (v->kind == NodeKind::Name) return name_class(*v);
            if (v->kind == NodeKind::Constant && v->value == "None") t.none = true;
            return t;
        }
        switch (v->kind) {
            case NodeKind::Call:
                if (v->kids[0]->kind == NodeKind::Name) {
                    int b = resolved_name(src, *v->kids[0]);
                    if (b < 0 || raw_[b].kind == BindingKind::ImportAlias) {
                        t.state = TypeState::External;
                    } else if (raw_[b].class_scope >= 0) {
                        t.state = TypeState::Typed;
                        t.cls = raw_[b].class_scope;
                    }
                }
                return t;
            case NodeKind::Name: return name_class(*v);
            case NodeKind::Constant:
                if (v->value == "None") {
                    t.none = true;
                    return t;
                }
                t.state = TypeState::External;
                return t;
            case NodeKind::Number:
            case NodeKind::String:
            case NodeKind::List:
            case NodeKind::Dict:
            case NodeKind::Set:
            case NodeKind::Tuple:
            case NodeKind::ListComp:
            case NodeKind::SetComp:
            case NodeKind::DictComp:
                t.state = TypeState::External;
                return t;
            default: return t;
        }
    }

    void compute_types(bool attributes) {
        std::map<int, std::vector<ValueType>> per_binding;
        std::set<int> has_unknown;
        for (const auto& [r, fact] : facts_) {
            int b = resolution(r);
            if (b < 0 || receivers_.count(b)) continue;
            const auto& occ = tree(r.src).occurrences()[r.index];
            bool is_attr = occ.role == Role::Attribute;
            if (is_attr != attributes) continue;
            per_binding[b].push_back(type_of(r.src, fact));
        }
        for (auto& [b, types] : per_binding) {
            auto& rb = raw_[b];
            TypeState state = TypeState::Unset;
            int cls = -1;
            for (const auto& t : types) {
                if (t.none) continue;
                if (t.state == TypeState::Unknown) {
                    state = TypeState::Unknown;
                    break;
                }
                if (state == TypeState::Unset) {
                    state = t.state;
                    cls = t.cls;
                } else if (state != t.state || cls != t.cls) {
                    state = TypeState::Unknown;
                    break;
                }
            }
            if (state == TypeState::Unset) state = TypeState::External;  // only ever None
            // Parameters without annotations and other unrecorded definitions stay unknown.
            if (rb.kind == BindingKind::Parameter && types.size() < count_defs(b)) state = TypeState::Unknown;
            rb.type = state;
            rb.type_class = cls;
        }
    }

    std::size_t count_defs(int b) const {
        std::size_t n = 0;
        for (const auto& o : raw_[b].occs) {
            if (tree(o.src).occurrences()[o.index].role == Role::Definition) ++n;
        }
        return n;
    }

    // ---- pass 5: attribute slots -------------------------------------------------------

    Receiver classify(Source src, const Node& recv, int scope) {
        Receiver r;
        switch (recv.kind) {
            case NodeKind::Name: {
                int b = resolved_name(src, recv);
                if (b < 0 || raw_[b].kind == BindingKind::ImportAlias) {
                    r.kind = Receiver::External;
                } else if (raw_[b].class_scope >= 0) {
                    r.kind = Receiver::Typed;
                    r.cls = raw_[b].class_scope;
                } else if (raw_[b].type == TypeState::Typed) {
                    r.kind = Receiver::Typed;
                    r.cls = raw_[b].type_class;
                } else if (raw_[b].type == TypeState::External) {
                    r.kind = Receiver::External;
                }
                return r;
            }
            case NodeKind::Call: {
                const auto& fn = *recv.kids[0];
                if (fn.kind != NodeKind::Name) return r;
                int b = resolved_name(src, fn);
                if (b < 0 && fn.value == "super") {
                    int cls = method_class(scope);
                    if (cls >= 0) {
                        r.kind = Receiver::Super;
                        r.cls = cls;
                    }
                    return r;
                }
                if (b < 0 || raw_[b].kind == BindingKind::ImportAlias) {
                    r.kind = Receiver::External;
                } else if (raw_[b].class_scope >= 0) {
                    r.kind = Receiver::Typed;
                    r.cls = raw_[b].class_scope;
                } else if (receivers_.count(b)) {
                    r.kind = Receiver::Typed;
                    r.cls = raw_[b].type_class;
                }
                return r;
            }
            case NodeKind::Attribute: {
                auto inner = resolve_attribute(src, recv, scope);
                if (inner.status == AttrStatus::KnownExternal) {
                    r.kind = Receiver::External;
                } else if (inner.status == AttrStatus::Resolved) {
                    const auto& rb = raw_[inner.binding];
                    if (rb.class_scope >= 0) {
                        r.kind = Receiver::Typed;
                        r.cls = rb.class_scope;
                    } else if (rb.type == TypeState::Typed) {
                        r.kind = Receiver::Typed;
                        r.cls = rb.type_class;
                    } else if (rb.type == TypeState::External) {
                        r.kind = Receiver::External;
                    }
                }
                return r;
            }
            case NodeKind::String:
            case NodeKind::Number:
            case NodeKind::Constant:
            case NodeKind::List:
            case NodeKind::Dict:
            case NodeKind::Set:
            case NodeKind::Tuple:
            case NodeKind::ListComp:
            case NodeKind::SetComp:
            case NodeKind::DictComp:
            case NodeKind::GeneratorExp:
                r.kind = Receiver::External;
                return r;
            default: return r;
        }
    }

    int method_class(int scope) const {
        for (int s = scope; s >= 0; s = scopes_[s].info.parent) {
            if (scopes_[s].info.kind == ScopeKind::Function && scopes_[s].owner_class >= 0) return scopes_[s].owner_class;
        }
        return -1;
    }

    int member(int cls, const std::string& name) const {
        for (int c : mro(cls)) {
            const auto& symbols = scopes_[c].symbols;
            if (auto it = symbols.find(name); it != symbols.end()) return it->second;
        }
        return -1;
    }

    int super_member(int cls, const std::string& name) const {
        auto order = mro(cls);
        for (std::size_t i = 1; i < order.size(); ++i) {
            const auto& symbols = scopes_[order[i]].symbols;
            if (auto it = symbols.find(name); it != symbols.end()) return it->second;
        }
        return -1;
    }

    void resolve_attribute_stores() {
        for (const auto& a : attrs_) {
            if (!a.store) continue;
            auto recv_kind = a.node->kids[0]->kind;
            if (recv_kind != NodeKind::Name && recv_kind != NodeKind::Call) continue;
            auto recv = classify(a.src, *a.node->kids[0], a.scope);
            if (recv.kind != Receiver::Typed) continue;
            const auto& ident = *a.node->kids[1];
            int b = member(recv.cls, ident.value);
            if (b < 0) b = binding_in(recv.cls, ident.value, BindingKind::AttributeSlot);
            if (a.src == Source::Unit) raw_[b].defined_in_unit = true;
            record_attr(a, {AttrStatus::Resolved, b});
        }
    }

    void record_attr(const PendingAttr& a, AttrResult result) {
        attr_results_[a.node] = result;
        OccurrenceRef r{a.src, a.node->kids[1]->occurrence};
        if (result.status == AttrStatus::Resolved) {
            raw_[result.binding].attribute_accessed = true;
            set_resolution(r, result.binding);
        }
    }

    // ---- union of inherited members -------------------------------------------------------

    int find(int b) {
        while (parent_[b] != b) {
            parent_[b] = parent_[parent_[b]];
            b = parent_[b];
        }
        return b;
    }

    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

    void unify_inheritance() {
        parent_.resize(raw_.size());
        std::iota(parent_.begin(), parent_.end(), 0);
        for (const auto& d : scopes_) {
            if (d.info.kind != ScopeKind::Class) continue;
            auto order = mro(d.info.id);
            for (const auto& [name, b] : d.symbols) {
                for (std::size_t i = 1; i < order.size(); ++i) {
                    const auto& symbols = scopes_[order[i]].symbols;
                    auto it = symbols.find(name);
                    if (it == symbols.end()) continue;
                    unite(b, it->second);
                    unite_parameters(b, it->second);
                }
            }
        }
    }

    void unite_parameters(int a, int b) {
        for (int fa : raw_[a].def_scopes) {
            for (int fb : raw_[b].def_scopes) {
                for (const auto& [name, pa] : scopes_[fa].symbols) {
                    if (raw_[pa].kind != BindingKind::Parameter) continue;
                    auto it = scopes_[fb].symbols.find(name);
                    if (it != scopes_[fb].symbols.end() && raw_[it->second].kind == BindingKind::Parameter) {
                        unite(pa, it->second);
                    }
                }
            }
        }
    }

    // ---- pass 6: attribute loads -------------------------------------------------------------

    std::vector<int> member_candidates(const std::string& name) {
        std::set<int> groups;
        std::vector<int> out;
        for (const auto& d : scopes_) {
            if (d.info.kind != ScopeKind::Class) continue;
            auto it = d.symbols.find(name);
            if (it == d.symbols.end()) continue;
            out.push_back(it->second);
            groups.insert(find(it->second));
        }
        if (groups.size() > 1) {
            out.push_back(-1);  // marker: several unrelated candidates
        }
        return out;
    }

    AttrResult resolve_attribute(Source src, const Node& attr, int scope) {
        if (auto it = attr_results_.find(&attr); it != attr_results_.end()) return it->second;
        const auto& ident = *attr.kids[1];
        PendingAttr pending{src, &attr, scope, false};
        auto recv = classify(src, *attr.kids[0], scope);
        AttrResult result;
        switch (recv.kind) {
            case Receiver::Typed:
            case Receiver::Super: {
                int b = recv.kind == Receiver::Typed ? member(recv.cls, ident.value) : super_member(recv.cls, ident.value);
                result = b >= 0 ? AttrResult{AttrStatus::Resolved, b} : AttrResult{AttrStatus::KnownExternal, -1};
                break;
            }
            case Receiver::External:
                result = {AttrStatus::KnownExternal, -1};
                break;
            case Receiver::Unknown: {
                auto candidates = member_candidates(ident.value);
                bool ambiguous = !candidates.empty() && candidates.back() == -1;
                if (ambiguous) candidates.pop_back();
                if (candidates.empty()) {
                    result = {AttrStatus::Unknown, -1};
                } else if (ambiguous || kBuiltinTypeAttributes.count(ident.value)) {
                    for (int c : candidates) raw_[c].blockers.insert("attribute on untyped receiver is ambiguous");
                    result = {AttrStatus::Unknown, -1};
                } else {
                    result = {AttrStatus::Resolved, candidates.front()};
                }
                break;
            }
        }
        record_attr(pending, result);
        return result;
    }

    void resolve_attribute_loads() {
        for (const auto& a : attrs_) resolve_attribute(a.src, *a.node, a.scope);
    }

    // ---- pass 7: keyword arguments --------------------------------------------------------------

    std::vector<int> callee_scopes(int b, bool& resolved, int& dataclass) {
        resolved = false;
        dataclass = -1;
        if (b < 0) return {};
        const auto& rb = raw_[b];
        if (!rb.def_scopes.empty()) {
            resolved = true;
            return rb.def_scopes;
        }
        if (rb.class_scope >= 0) {
            resolved = true;
            int init = member(rb.class_scope, "__init__");
            if (init >= 0 && !raw_[init].def_scopes.empty()) return raw_[init].def_scopes;
            if (init < 0 && !external_ancestry(rb.class_scope)) dataclass = rb.class_scope;
            return {};
        }
        return {};
    }

    void resolve_keywords() {
        for (const auto& c : calls_) {
            const auto& fn = *c.node->kids[0];
            std::vector<int> scopes;
            bool resolved = false;
            bool known_external = false;
            int dataclass = -1;
            if (fn.kind == NodeKind::Name) {
                int b = resolved_name(c.src, fn);
                if (b < 0 || raw_[b].kind == BindingKind::ImportAlias) {
                    known_external = true;
                } else if (receivers_.count(b)) {
                    scopes = callee_scopes(b, resolved, dataclass);
                    if (!resolved) {
                        int init = member(raw_[b].type_class, "__init__");
                        if (init >= 0) scopes = raw_[init].def_scopes;
                        resolved = init >= 0;
                    }
                } else {
                    scopes = callee_scopes(b, resolved, dataclass);
                }
            } else if (fn.kind == NodeKind::Attribute) {
                auto attr = resolve_attribute(c.src, fn, c.scope);
                if (attr.status == AttrStatus::KnownExternal) {
                    known_external = true;
                } else if (attr.status == AttrStatus::Resolved) {
                    scopes = callee_scopes(attr.binding, resolved, dataclass);
                }
            }
            for (const auto& k : c.node->kids) {
                if (k->kind != NodeKind::Keyword || !k->kids[0]) continue;
                const auto& ident = *k->kids[0];
                OccurrenceRef r{c.src, ident.occurrence};
                if (known_external) continue;
                if (!resolved) {
                    demoted_keywords_.insert(ident.value);
                    continue;
                }
                int target = -1;
                for (int fs : scopes) {
                    auto it = scopes_[fs].symbols.find(ident.value);
                    if (it != scopes_[fs].symbols.end() && raw_[it->second].kind == BindingKind::Parameter) {
                        target = it->second;
                        break;
                    }
                }
                if (target < 0 && dataclass >= 0) target = member(dataclass, ident.value);
                if (target >= 0) set_resolution(r, target);
            }
        }
    }

    // ---- pass 8: reflective literals ---------------------------------------------------------------

    void resolve_literals() {
        for (const auto& lit : literals_) {
            std::vector<int> candidates;
            if (lit.slots_class >= 0) {
                int b = member(lit.slots_class, lit.name);
                if (b >= 0) candidates.push_back(b);
            } else {
                std::set<int> groups;
                for (std::size_t i = 0; i < raw_.size(); ++i) {
                    const auto& rb = raw_[i];
                    if (rb.name != lit.name) continue;
                    auto kind = scopes_[rb.scope].info.kind;
                    if (kind != ScopeKind::Class && kind != ScopeKind::Module) continue;
                    candidates.push_back(static_cast<int>(i));
                    groups.insert(find(static_cast<int>(i)));
                }
                if (groups.size() > 1) {
                    for (int c : candidates) {
                        raw_[c].reflected = true;
                        raw_[c].blockers.insert("named by an ambiguous reflective literal");
                    }
                    continue;
                }
            }
            if (candidates.empty()) continue;
            raw_[candidates.front()].reflected = true;
            set_resolution(lit.ref, candidates.front());
        }
    }

    // ---- pass 9: blockers and final graph ---------------------------------------------------------

    void apply_blockers() {
        for (std::size_t i = 0; i < raw_.size(); ++i) {
            auto& rb = raw_[i];
            if (frontend::is_dunder(rb.name)) rb.blockers.insert("dunder name");
            if (!rb.defined_in_unit) rb.blockers.insert("not defined in the unit");
            const auto& scope = scopes_[rb.scope];
            if (scope.info.kind == ScopeKind::Class && external_ancestry(scope.info.id)) {
                rb.blockers.insert("member of a class with external bases");
            }
            if (rb.kind == BindingKind::Parameter && scope.owner_class >= 0 && external_ancestry(scope.owner_class)) {
                rb.blockers.insert("parameter of a method of a class with external bases");
            }
            if (rb.kind == BindingKind::Parameter && demoted_keywords_.count(rb.name)) {
                rb.blockers.insert("keyword passed to an unresolved callee");
            }
        }
    }

    ScopeGraph finish(const RenamePolicy& policy) {
        ScopeGraph g;
        for (const auto& d : scopes_) g.scopes.push_back(d.info);

        // Group raw bindings, order groups by first occurrence (unit before test).
        std::map<int, std::vector<int>> groups;
        for (std::size_t i = 0; i < raw_.size(); ++i) {
            if (!raw_[i].occs.empty()) groups[find(static_cast<int>(i))].push_back(static_cast<int>(i));
        }
        struct Group {
            OccurrenceRef first;
            std::vector<int> members;
        };
        std::vector<Group> ordered;
        for (auto& [root, members] : groups) {
            OccurrenceRef first{Source::Test, 1 << 30};
            for (int m : members) {
                for (const auto& o : raw_[m].occs) first = std::min(first, o);
            }
            ordered.push_back({first, members});
        }
        std::sort(ordered.begin(), ordered.end(), [](const Group& a, const Group& b) { return a.first < b.first; });

        std::vector<int> final_id(raw_.size(), -1);
        for (std::size_t gi = 0; gi < ordered.size(); ++gi) {
            auto& members = ordered[gi].members;
            // Representative: member holding the first occurrence.
            int rep = members.front();
            for (int m : members) {
                if (std::find(raw_[m].occs.begin(), raw_[m].occs.end(), ordered[gi].first) != raw_[m].occs.end()) rep = m;
            }
            Binding b;
            b.id = static_cast<int>(gi);
            b.name = raw_[rep].name;
            b.kind = raw_[rep].kind;
            b.scope_id = raw_[rep].scope;
            std::set<std::string> blockers;
            bool plain = false;
            bool alias = false;
            for (int m : members) {
                final_id[m] = b.id;
                const auto& rb = raw_[m];
                b.occurrences.insert(b.occurrences.end(), rb.occs.begin(), rb.occs.end());
                blockers.insert(rb.blockers.begin(), rb.blockers.end());
                b.reflected = b.reflected || rb.reflected;
                b.attribute_accessed = b.attribute_accessed || rb.attribute_accessed;
                plain = plain || rb.saw_plain_import;
                alias = alias || rb.saw_alias_import;
            }
            std::sort(b.occurrences.begin(), b.occurrences.end());
            b.occurrences.erase(std::unique(b.occurrences.begin(), b.occurrences.end()), b.occurrences.end());
            b.first_definition = b.occurrences.front();
            for (const auto& o : b.occurrences) {
                auto role = tree(o.src).occurrences()[o.index].role;
                if (role == frontend::Role::Definition || role == frontend::Role::ImportAlias) {
                    b.first_definition = o;
                    break;
                }
            }
            b.blockers.assign(blockers.begin(), blockers.end());
            b.alias_only = alias && !plain;
            b.renameable = binding_renameable(b, policy);
            g.bindings.push_back(std::move(b));
        }

        auto map_res = [&](const std::vector<int>& in) {
            std::vector<int> out(in.size(), kExternal);
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (in[i] >= 0) out[i] = final_id[in[i]];
            }
            return out;
        };
        g.unit_resolution = map_res(unit_res_);
        g.test_resolution = map_res(test_res_);
        for (const auto& o : unit_.occurrences()) g.identifiers.insert(o.name);
        if (test_) {
            for (const auto& o : test_->occurrences()) g.identifiers.insert(o.name);
        }
        return g;
    }

    const SyntaxTree& unit_;
    const SyntaxTree* test_;
    Source src_ = Source::Unit;

    std::vector<ScopeData> scopes_;
    std::vector<RawBinding> raw_;
    std::vector<int> unit_res_;
    std::vector<int> test_res_;
    std::vector<int> parent_;

    std::vector<DefSite> defs_;
    std::vector<RefSite> refs_;
    std::vector<OccurrenceRef> externals_;
    std::map<OccurrenceRef, Fact> facts_;
    std::vector<PendingAttr> attrs_;
    std::vector<PendingCall> calls_;
    std::vector<PendingLiteral> literals_;
    std::map<const Node*, int> slots_owner_;
    std::map<int, const Node*> function_nodes_;
    std::map<const Node*, AttrResult> attr_results_;
    std::set<int> receivers_;
    std::set<std::string> demoted_keywords_;
};

}  // namespace

ScopeGraph analyze(const SyntaxTree& unit, const SyntaxTree* test, const RenamePolicy& policy) {
    return Analyzer(unit, test).run(policy);
}

}  // namespace obf::scopes
