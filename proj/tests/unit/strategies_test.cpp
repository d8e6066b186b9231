#include <gtest/gtest.h>

#include <map>
#include <regex>

#include "obf/errors.hpp"
#include "obf/frontend.hpp"
#include "obf/scopes.hpp"
#include "obf/strategies.hpp"
#include "obf/tokenizer.hpp"
#include "program_gen.hpp"
#include "test_support.hpp"

using namespace obf::strategies;
using obf::frontend::parse;
using obf::scopes::analyze;

namespace {

struct Unit {
    obf::frontend::SyntaxTree code;
    std::optional<obf::frontend::SyntaxTree> test;
    ScopeGraph graph;
};

Unit load(const std::string& code, const std::string& test = "") {
    Unit u{parse(code), std::nullopt, {}};
    if (!test.empty()) u.test = parse(test);
    u.graph = analyze(u.code, u.test ? &*u.test : nullptr);
    return u;
}

std::map<std::string, std::string> by_name(const NameMap& map) {
    std::map<std::string, std::string> out;
    for (const auto& e : map.entries) out[e.from] = e.to;
    return out;
}

Binding binding(const std::string& name, BindingKind kind) {
    Binding b;
    b.name = name;
    b.kind = kind;
    return b;
}

// Checks every NameMap invariant against the graph it was built from.
void check_map(const ScopeGraph& graph, const NameMap& map) {
    auto ids = obf::scopes::renameable_set(graph, map.policy());
    ASSERT_EQ(map.entries.size(), ids.size());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& e = map.entries[i];
        EXPECT_EQ(e.binding_id, ids[i]);
        EXPECT_EQ(e.from, graph.bindings[ids[i]].name);
        EXPECT_TRUE(obf::frontend::is_identifier(e.to)) << e.to;
        EXPECT_FALSE(obf::frontend::is_keyword(e.to)) << e.to;
        EXPECT_FALSE(obf::frontend::is_soft_keyword(e.to)) << e.to;
        EXPECT_FALSE(obf::frontend::is_dunder(e.to)) << e.to;
        EXPECT_FALSE(obf::scopes::is_builtin(e.to)) << e.to;
        EXPECT_FALSE(graph.identifiers.count(e.to)) << e.to << " collides with an existing identifier";
        EXPECT_TRUE(seen.insert(e.to).second) << e.to << " assigned twice";
        if (map.strategy.tag == Tag::Misleading) {
            auto a = stems(e.from);
            auto b = stems(e.to);
            for (const auto& s : b) EXPECT_FALSE(a.count(s)) << e.from << " -> " << e.to;
        }
    }
}

}  // namespace

TEST(Alpha, SpecExamples) {
    EXPECT_EQ(gen_alpha(BindingKind::Class, 1), "class1");
    EXPECT_EQ(gen_alpha(BindingKind::Method, 2), "method2");
    EXPECT_EQ(gen_alpha(BindingKind::Function, 4), "method4");
    EXPECT_EQ(gen_alpha(BindingKind::Local, 3), "var3");
    EXPECT_EQ(gen_alpha(BindingKind::Parameter, 1), "var1");
    EXPECT_EQ(gen_alpha(BindingKind::AttributeSlot, 7), "var7");
}

TEST(Ambiguous, AlphabetAndLength) {
    std::regex shape("^[lI][lI1]{5,13}$");
    std::regex no_digit("^[lI]{6,14}$");
    for (std::uint64_t seed : {0ull, 1ull, 42ull, 0xdeadbeefull}) {
        for (int ord = 1; ord <= 300; ++ord) {
            auto plain = gen_ambiguous(seed, ord);
            EXPECT_TRUE(std::regex_match(plain, no_digit)) << plain;
            auto digits = gen_ambiguous(seed, ord, {true});
            EXPECT_TRUE(std::regex_match(digits, shape)) << digits;
        }
    }
}

TEST(Ambiguous, DistinctPerOrdinal) {
    for (bool digit : {false, true}) {
        std::set<std::string> names;
        for (int ord = 1; ord <= 1000; ++ord) names.insert(gen_ambiguous(7, ord, {digit}));
        EXPECT_EQ(names.size(), 1000u);
    }
    std::set<std::string> first200;
    for (int ord = 1; ord <= 200; ++ord) first200.insert(gen_ambiguous(123, ord));
    EXPECT_EQ(first200.size(), 200u);
}

TEST(Ambiguous, CanProducePaperShapes) {
    for (const std::string target : {"llllIII", "IlllIllllIlI"}) {
        bool found = false;
        for (std::uint64_t seed = 0; seed < 200000 && !found; ++seed) {
            for (int ord = 1; ord <= 4 && !found; ++ord) found = gen_ambiguous(seed, ord) == target;
        }
        EXPECT_TRUE(found) << target;
    }
}

TEST(Ambiguous, SeedMatters) {
    int differ = 0;
    for (int ord = 1; ord <= 50; ++ord) differ += gen_ambiguous(1, ord) != gen_ambiguous(2, ord);
    EXPECT_GT(differ, 40);
}

TEST(CrossDomain, ShapeAndUniqueness) {
    const auto& lex = bundled_crossdomain();
    ASSERT_FALSE(lex.entries.empty());
    std::regex shape("^[a-z][a-z_]*_[a-z0-9]{2}$");
    std::set<std::string> names;
    for (int ord = 1; ord <= 2000; ++ord) {
        auto name = gen_crossdomain(99, ord, lex);
        EXPECT_TRUE(std::regex_match(name, shape)) << name;
        names.insert(name);
    }
    EXPECT_EQ(names.size(), 2000u);
}

TEST(CrossDomain, RepeatedWordsStayUnique) {
    // A one-word lexicon forces every draw onto the same word.
    auto lex = parse_lexicon("insulin\n", "tiny");
    std::set<std::string> names;
    for (int ord = 1; ord <= 1296; ++ord) {
        auto name = gen_crossdomain(5, ord, lex);
        EXPECT_EQ(name.rfind("insulin_", 0), 0u);
        names.insert(name);
    }
    EXPECT_EQ(names.size(), 1296u);
    EXPECT_THROW(gen_crossdomain(5, 1297, lex), obf::ExhaustedLexicon);
}

TEST(CrossDomain, PaperShapeReachable) {
    auto lex = parse_lexicon("# medical\nadrenaline\nglucagon\n", "medical");
    for (const std::string target : {"adrenaline_fd", "glucagon_d6"}) {
        bool found = false;
        for (std::uint64_t seed = 0; seed < 100000 && !found; ++seed) found = gen_crossdomain(seed, 1, lex) == target;
        EXPECT_TRUE(found) << target;
    }
}

TEST(CrossDomain, EmptyLexicon) {
    Lexicon empty{"empty", {}};
    EXPECT_THROW(gen_crossdomain(1, 1, empty), obf::EmptyLexicon);
    auto comments_only = parse_lexicon("# nothing here\n\n", "c");
    EXPECT_THROW(gen_crossdomain(1, 1, comments_only), obf::EmptyLexicon);
}

TEST(Lexicon, ParseKindsAndErrors) {
    auto lex = parse_lexicon("function: compute_max  # trailing\nvalue:max_value\nclass:HttpClient\nplain\n", "v9");
    ASSERT_EQ(lex.entries.size(), 4u);
    EXPECT_EQ(lex.version, "v9");
    EXPECT_EQ(lex.entries[0].name, "compute_max");
    EXPECT_EQ(lex.entries[0].kind, EntryKind::Function);
    EXPECT_EQ(lex.entries[1].kind, EntryKind::Value);
    EXPECT_EQ(lex.entries[2].kind, EntryKind::Class);
    EXPECT_EQ(lex.entries[3].kind, EntryKind::Any);
    EXPECT_THROW(parse_lexicon("widget:foo\n", "x"), obf::Error);
    EXPECT_THROW(parse_lexicon("not valid\n", "x"), obf::Error);
    EXPECT_THROW(parse_lexicon("class\n", "x"), obf::Error);
    EXPECT_EQ(bundled_misleading().version, "misleading_v1");
    EXPECT_EQ(bundled_crossdomain().version, "crossdomain_v1");
}

TEST(Lexicon, LoadFromFileUsesStem) {
    obf::testing::TempDir dir;
    auto path = dir.write("custom_v3.txt", "alpha_word\n");
    auto lex = load_lexicon(path);
    EXPECT_EQ(lex.version, "custom_v3");
    ASSERT_EQ(lex.entries.size(), 1u);
}

TEST(Stems, SplitAndNormalize) {
    EXPECT_EQ(stems("sum_values"), (std::set<std::string>{"sum", "valu"}));
    EXPECT_EQ(stems("compute_max"), (std::set<std::string>{"comput", "max"}));
    EXPECT_EQ(stems("computeMax2"), (std::set<std::string>{"comput", "max"}));
    EXPECT_EQ(stems("HTTPServer"), (std::set<std::string>{"http", "server"}));
    EXPECT_EQ(stems("computing_values"), stems("computed_value"));
    EXPECT_EQ(stems("boxes"), stems("box"));
    EXPECT_EQ(stems("class"), (std::set<std::string>{"class"}));
}

TEST(Misleading, SummingFunctionCanBecomeComputeMax) {
    auto f = binding("sum_values", BindingKind::Function);
    bool found = false;
    for (std::uint64_t seed = 0; seed < 5000 && !found; ++seed) {
        found = gen_misleading(seed, f, bundled_misleading()) == "compute_max";
    }
    EXPECT_TRUE(found);
}

TEST(Misleading, StemDisjointAndKindMatched) {
    const auto& lex = bundled_misleading();
    std::set<std::string> functions, values, classes;
    for (const auto& e : lex.entries) {
        (e.kind == EntryKind::Function ? functions : e.kind == EntryKind::Class ? classes : values).insert(e.name);
    }
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        auto name = gen_misleading(seed, binding("compute_max", BindingKind::Function), lex);
        EXPECT_FALSE(stems(name).count("max")) << name;
        EXPECT_FALSE(stems(name).count("comput")) << name;
        EXPECT_TRUE(functions.count(name)) << name;
        EXPECT_TRUE(values.count(gen_misleading(seed, binding("max_value", BindingKind::Local), lex)));
        EXPECT_TRUE(classes.count(gen_misleading(seed, binding("Game", BindingKind::Class), lex)));
        EXPECT_TRUE(functions.count(gen_misleading(seed, binding("sweep", BindingKind::Method), lex)));
    }
}

TEST(Misleading, Exhausted) {
    auto lex = parse_lexicon("function:compute_max\nfunction:max_of\nvalue:total\n", "t");
    EXPECT_THROW(gen_misleading(1, binding("max_item", BindingKind::Function), lex), obf::ExhaustedLexicon);
    EXPECT_THROW(gen_misleading(1, binding("x", BindingKind::Function), Lexicon{"e", {}}), obf::EmptyLexicon);
}

TEST(BuildMap, MinesweeperAlpha) {
    auto code = obf::testing::read_file(obf::testing::source_dir() / "data/corpus/minesweeper.py");
    auto test = obf::testing::read_file(obf::testing::source_dir() / "data/corpus/minesweeper_test.py");
    auto u = load(code, test);
    auto map = build_map(u.graph, {Tag::Alpha, 1, ""});
    auto names = by_name(map);
    EXPECT_EQ(names["MinesweeperGame"], "class1");
    EXPECT_EQ(names["sweep"], "method1");
    EXPECT_EQ(names["check_won"], "method2");
    EXPECT_EQ(names["generate_mine_sweeper_map"], "method3");
    EXPECT_EQ(names["generate_player_map"], "method4");
    EXPECT_FALSE(names.count("self"));
    EXPECT_FALSE(names.count("__init__"));
    EXPECT_FALSE(names.count("random"));
    check_map(u.graph, map);
}

TEST(BuildMap, PalindromeEveryStrategy) {
    auto u = load(obf::testing::read_file(obf::testing::source_dir() / "data/corpus/palindrome.py"));
    for (Tag tag : kAllTags) {
        auto map = build_map(u.graph, {tag, 11, ""});
        EXPECT_EQ(map.entries.size(), 5u);  // function, s, n, i, c
        check_map(u.graph, map);
    }
    auto alpha = by_name(build_map(u.graph, {Tag::Alpha, 0, ""}));
    EXPECT_EQ(alpha["makeSmallestPalindrome"], "method1");
    EXPECT_EQ(alpha["s"], "var1");
    EXPECT_EQ(alpha["n"], "var2");
    EXPECT_EQ(alpha["i"], "var3");
    EXPECT_EQ(alpha["c"], "var4");
}

TEST(BuildMap, EmptyRenameableSet) {
    auto u = load("import os\nprint(os.getcwd())\n");
    for (Tag tag : kAllTags) EXPECT_TRUE(build_map(u.graph, {tag, 3, ""}).entries.empty());
}

TEST(BuildMap, AvoidsExistingNames) {
    auto u = load("class1 = 1\nvar1 = 2\n\nclass A:\n    pass\n\ndef f(var2):\n    return var2 + class1 + var1\n",
                  "");
    auto names = by_name(build_map(u.graph, {Tag::Alpha, 0, ""}));
    EXPECT_EQ(names["A"], "class2");
    EXPECT_EQ(names["f"], "method1");
    check_map(u.graph, build_map(u.graph, {Tag::Alpha, 0, ""}));
}

TEST(BuildMap, MisleadingDuplicatesGetSuffix) {
    auto lex = parse_lexicon("function:compute_max\nvalue:max_value\nclass:HttpClient\n", "one_each");
    auto u = load("def alpha():\n    return 1\n\ndef beta():\n    return 2\n\ndef gamma():\n    return 3\n");
    BuildOptions opts;
    opts.misleading = &lex;
    auto map = build_map(u.graph, {Tag::Misleading, 0, ""}, {}, opts);
    auto names = by_name(map);
    EXPECT_EQ(names["alpha"], "compute_max");
    EXPECT_EQ(names["beta"], "compute_max_2");
    EXPECT_EQ(names["gamma"], "compute_max_3");
    EXPECT_EQ(map.strategy.lexicon_version, "one_each");
}

TEST(BuildMap, LexiconVersionRecorded) {
    auto u = load("def f(a):\n    return a\n");
    EXPECT_EQ(build_map(u.graph, {Tag::CrossDomain, 1, ""}).strategy.lexicon_version, "crossdomain_v1");
    EXPECT_EQ(build_map(u.graph, {Tag::Misleading, 1, ""}).strategy.lexicon_version, "misleading_v1");
    EXPECT_EQ(build_map(u.graph, {Tag::Alpha, 1, "junk"}).strategy.lexicon_version, "");
}

TEST(BuildMap, DeterministicSerialization) {
    for (const auto& unit : obf::testing::corpus_units()) {
        for (Tag tag : kAllTags) {
            auto a = load(unit.code, unit.test_code);
            auto b = load(unit.code, unit.test_code);
            BuildOptions opts;
            opts.task_id = unit.task_id;
            EXPECT_EQ(serialize(build_map(a.graph, {tag, 2024, ""}, {}, opts)),
                      serialize(build_map(b.graph, {tag, 2024, ""}, {}, opts)))
                << unit.task_id << " " << tag_name(tag);
        }
    }
}

TEST(BuildMap, CorpusInvariants) {
    for (const auto& unit : obf::testing::corpus_units()) {
        auto u = load(unit.code, unit.test_code);
        for (Tag tag : kAllTags) {
            for (std::uint64_t seed : {0ull, 17ull}) {
                SCOPED_TRACE(unit.task_id + " " + std::string(tag_name(tag)));
                check_map(u.graph, build_map(u.graph, {tag, seed, ""}));
            }
        }
    }
}

TEST(BuildMap, GeneratedProgramsAvoidCapture) {
    int checked = 0;
    for (unsigned seed = 1; seed <= 220; ++seed) {
        obf::testing::ProgramGenerator gen(seed);
        auto source = gen.module();
        Unit u;
        try {
            u = load(source);
        } catch (const obf::Error& e) {
            ADD_FAILURE() << "seed " << seed << ": " << e.what() << "\n" << source;
            continue;
        }
        for (Tag tag : kAllTags) {
            SCOPED_TRACE("seed " + std::to_string(seed) + " " + std::string(tag_name(tag)) + "\n" + source);
            check_map(u.graph, build_map(u.graph, {tag, seed, ""}));
        }
        ++checked;
    }
    EXPECT_GE(checked, 200);
}

TEST(NameMapJson, RoundTrip) {
    auto u = load(obf::testing::read_file(obf::testing::source_dir() / "data/corpus/bank_account.py"));
    BuildOptions opts;
    opts.task_id = "bank_account";
    auto map = build_map(u.graph, {Tag::CrossDomain, 77, ""}, {}, opts);
    auto json = to_json(map);
    EXPECT_FALSE(json["entries"][0].contains("binding_id"));
    auto back = name_map_from_json(json);
    EXPECT_EQ(serialize(back), serialize(map));
    EXPECT_EQ(back.strategy.tag, Tag::CrossDomain);
    EXPECT_EQ(back.fingerprint, u.graph.fingerprint());
    EXPECT_THROW(name_map_from_json(nlohmann::json{{"strategy", "alpha"}}), obf::Error);
    EXPECT_THROW(parse_tag("rot13"), obf::Error);
}
