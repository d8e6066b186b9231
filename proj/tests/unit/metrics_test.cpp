#include <gtest/gtest.h>

#include <sstream>

#include "obf/errors.hpp"
#include "obf/frontend.hpp"
#include "obf/metrics.hpp"
#include "obf/rewrite.hpp"
#include "program_gen.hpp"
#include "test_support.hpp"

using namespace obf;
using namespace obf::metrics;

namespace {

std::vector<std::pair<std::string, int>> oracle_cc(const std::string& code) {
    obf::testing::TempDir dir;
    auto file = dir.write("unit.py", code);
    auto script = obf::testing::source_dir() / "tests" / "support" / "cc_oracle.py";
    std::istringstream in(obf::testing::run_command("python3 " + script.string() + " " + file.string()));
    std::vector<std::pair<std::string, int>> rows;
    std::string qual;
    int cc;
    while (in >> qual >> cc) rows.emplace_back(qual, cc);
    return rows;
}

std::vector<std::pair<std::string, int>> ours(const std::string& code) {
    std::vector<std::pair<std::string, int>> rows;
    for (const auto& f : cyclomatic(frontend::parse(code)).functions) rows.emplace_back(f.qualname, f.cc);
    return rows;
}

int cc_of(const std::string& code) { return cyclomatic(frontend::parse(code)).unit_cc_max; }

IdentifierStats stats_of(const std::string& code) {
    auto tree = frontend::parse(code);
    return identifier_stats(scopes::analyze(tree));
}

std::vector<SourceUnit> corpus() {
    std::vector<SourceUnit> out;
    for (const auto& cu : obf::testing::corpus_units()) out.push_back({cu.task_id, cu.code, cu.test_code, "corpus"});
    return out;
}

}  // namespace

TEST(Cyclomatic, HandCounts) {
    EXPECT_EQ(cc_of("def f(a):\n    b = a + 1\n    return b\n"), 1);
    EXPECT_EQ(cc_of("x = 1\n"), 1);
    EXPECT_EQ(cyclomatic(frontend::parse("x = 1\n")).unit_cc_sum, 1);
    EXPECT_EQ(cc_of("def f(a):\n    if a:\n        return 1\n    elif a > 2:\n        return 2\n    else:\n        return 3\n"), 3);
    EXPECT_EQ(cc_of("def f(a, b, c):\n    return a and b or c\n"), 3);
    EXPECT_EQ(cc_of("def f(a, b, c):\n    return a and b and c\n"), 3);
    EXPECT_EQ(cc_of("def f(xs):\n    return [x for x in xs if x if x > 1]\n"), 3);
    EXPECT_EQ(cc_of("def f(xs):\n    return [x for ys in xs for x in ys]\n"), 1);
    EXPECT_EQ(cc_of("def f(a):\n    try:\n        g()\n    except ValueError:\n        pass\n    except Exception:\n        pass\n"), 3);
    EXPECT_EQ(cc_of("def f(a):\n    while a:\n        a -= 1\n    return (lambda z: 1 if z else 2)(a)\n"), 3);
    EXPECT_EQ(cc_of("def f(a):\n    for i in a:\n        pass\n    else:\n        pass\n"), 2);
}

TEST(Cyclomatic, PalindromeListingScoresTwo) {
    auto code = obf::testing::read_file(obf::testing::source_dir() / "data/corpus/palindrome.py");
    auto report = cyclomatic(frontend::parse(code));
    ASSERT_EQ(report.functions.size(), 1u);
    EXPECT_EQ(report.functions[0].qualname, "makeSmallestPalindrome");
    EXPECT_EQ(report.functions[0].cc, 2);
    EXPECT_EQ(report.unit_cc_max, 2);
}

TEST(Cyclomatic, QualifiedNames) {
    auto report = cyclomatic(frontend::parse(
        "class A:\n    def m(self):\n        def inner():\n            return 1\n        return inner\n\n"
        "def top(f=lambda q: q or 1):\n    class B:\n        def n(self):\n            pass\n    return B\n"));
    ASSERT_EQ(report.functions.size(), 4u);
    EXPECT_EQ(report.functions[0].qualname, "A.m");
    EXPECT_EQ(report.functions[1].qualname, "A.m.<locals>.inner");
    EXPECT_EQ(report.functions[2].qualname, "top");
    EXPECT_EQ(report.functions[2].cc, 1);  // default belongs to module level
    EXPECT_EQ(report.functions[3].qualname, "top.<locals>.B.n");
    EXPECT_EQ(report.unit_cc_sum, 4);
}

TEST(Cyclomatic, MatchesIndependentCounterOnCorpus) {
    for (const auto& u : corpus()) {
        EXPECT_EQ(ours(u.code), oracle_cc(u.code)) << u.task_id;
        EXPECT_EQ(ours(u.test_code), oracle_cc(u.test_code)) << u.task_id;
    }
}

TEST(Cyclomatic, MatchesIndependentCounterOnGeneratedPrograms) {
    for (unsigned seed = 1; seed <= 40; ++seed) {
        auto code = obf::testing::ProgramGenerator(seed).module();
        EXPECT_EQ(ours(code), oracle_cc(code)) << code;
    }
}

TEST(Cyclomatic, ObfuscationInvariant) {
    for (const auto& u : corpus()) {
        auto base = cyclomatic(frontend::parse(u.code));
        auto record = rewrite::obfuscate_all(u, 5);
        for (const auto& [tag, v] : record.variants) {
            auto report = cyclomatic(frontend::parse(v.code));
            ASSERT_EQ(report.functions.size(), base.functions.size());
            for (std::size_t i = 0; i < base.functions.size(); ++i) {
                EXPECT_EQ(report.functions[i].cc, base.functions[i].cc);
            }
            EXPECT_EQ(report.unit_cc_max, base.unit_cc_max);
            EXPECT_EQ(report.unit_cc_sum, base.unit_cc_sum);
        }
    }
}

TEST(FilterCorpus, Thresholds) {
    auto units = corpus();
    ASSERT_GE(units.size(), 10u);
    EXPECT_EQ(filter_corpus(units, 1).size(), units.size());
    EXPECT_TRUE(filter_corpus(units, 10000).empty());
    EXPECT_THROW(filter_corpus(units, 0), DomainError);

    std::vector<std::string> expected;
    for (const auto& u : units) {
        int best = 1;
        for (const auto& [q, cc] : oracle_cc(u.code)) best = std::max(best, cc);
        if (best >= 3) expected.push_back(u.task_id);
    }
    std::vector<std::string> got;
    for (const auto& u : filter_corpus(units, 3)) got.push_back(u.task_id);
    EXPECT_EQ(got, expected);
    EXPECT_LT(got.size(), units.size());
    EXPECT_FALSE(got.empty());
}

TEST(FilterCorpus, SumAggregate) {
    std::vector<SourceUnit> units = {{"a", "def f():\n    pass\n\ndef g():\n    pass\n", "", ""},
                                     {"b", "def f():\n    pass\n", "", ""}};
    EXPECT_EQ(filter_corpus(units, 2, Aggregate::Sum).size(), 1u);
    EXPECT_EQ(filter_corpus(units, 2, Aggregate::Max).size(), 0u);
}

TEST(IdentifierStats, ShortNames) {
    auto s = stats_of("def f(a, b):\n    n = a + b\n    return n\n");
    EXPECT_EQ(s.summary.count, 4);  // f, a, b, n
    EXPECT_EQ(s.summary.median, 1.0);
    int total = 0;
    for (auto [len, n] : s.summary.histogram) total += n;
    EXPECT_EQ(total, s.summary.count);
}

TEST(IdentifierStats, MinesweeperNames) {
    // board, sweep, check_won, minesweeper_map: lengths 5, 5, 9, 15.
    auto s = summarize_lengths({5, 5, 9, 15});
    EXPECT_DOUBLE_EQ(s.median, 7.0);
    EXPECT_DOUBLE_EQ(s.mean, 8.5);
}

TEST(IdentifierStats, PalindromeListing) {
    auto s = stats_of(obf::testing::read_file(obf::testing::source_dir() / "data/corpus/palindrome.py"));
    std::set<int> lengths;
    for (const auto& [name, len] : s.lengths) lengths.insert(len);
    EXPECT_EQ(lengths, (std::set<int>{1, 22}));
    EXPECT_EQ(s.summary.median, 1.0);
    EXPECT_EQ(s.by_kind.at("function").count, 1);
    EXPECT_EQ(s.by_kind.at("parameter").count, 1);
}

TEST(IdentifierStats, PercentilesAndCsv) {
    auto s = summarize_lengths({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    EXPECT_DOUBLE_EQ(s.median, 5.5);
    EXPECT_DOUBLE_EQ(s.p90, 9.1);
    EXPECT_EQ(histogram_csv(summarize_lengths({2, 2, 5})), "length,count\n2,2\n5,1\n");
    EXPECT_EQ(summarize_lengths({}).count, 0);
}
