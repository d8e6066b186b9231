#include <gtest/gtest.h>

#include <set>

#include "obf/datasetio.hpp"
#include "obf/rewrite.hpp"
#include "test_support.hpp"

using namespace obf;
using namespace obf::datasetio;
using strategies::Tag;

namespace {

std::string fixture(const std::string& name) { return (obf::testing::source_dir() / "data" / "fixtures" / name).string(); }
std::string corpus_dir() { return (obf::testing::source_dir() / "data" / "corpus").string(); }

// Records whose verdicts are set by hand; execution is covered by the build test.
std::vector<ObfuscationRecord> marked_records(std::uint64_t seed) {
    std::vector<ObfuscationRecord> out;
    for (const auto& u : ingest(fixture("classeval_sample.json"), Format::ClassEvalJson).units) {
        auto r = rewrite::obfuscate_all(u, seed);
        for (const auto& [tag, v] : r.variants) r.verdicts[tag].status = VerdictStatus::Equivalent;
        out.push_back(std::move(r));
    }
    return out;
}

verify::ProcessRunner& runner() {
    static verify::ProcessRunner r({"python3", (obf::testing::source_dir() / "tests" / "support" / "pyrunner.py").string()});
    return r;
}

}  // namespace

TEST(Ingest, PlainDirPairsTests) {
    obf::testing::TempDir dir;
    dir.write("foo.py", "def foo():\n    return 1\n");
    dir.write("foo_test.py", "import unittest\n");
    dir.write("notes.txt", "ignored");
    auto r = ingest(dir.path().string(), Format::PlainDir);
    ASSERT_EQ(r.units.size(), 1u);
    EXPECT_EQ(r.units[0].task_id, "foo");
    EXPECT_EQ(r.units[0].test_code, "import unittest\n");
    EXPECT_EQ(r.units[0].origin, "custom");
    EXPECT_EQ(r.warnings, 0);
    EXPECT_EQ(ingest(corpus_dir(), Format::PlainDir).units.size(), 13u);
}

TEST(Ingest, ClassEvalFixture) {
    auto r = ingest(fixture("classeval_sample.json"), Format::ClassEvalJson);
    ASSERT_EQ(r.units.size(), 10u);
    std::set<std::string> ids;
    for (const auto& u : r.units) {
        ids.insert(u.task_id);
        EXPECT_EQ(u.origin, "classeval");
        EXPECT_FALSE(u.test_code.empty());
    }
    EXPECT_EQ(ids.size(), 10u);
}

TEST(Ingest, LiveCodeBenchFixture) {
    auto r = ingest(fixture("lcb_sample.jsonl"), Format::LcbJson);
    ASSERT_EQ(r.units.size(), 3u);
    EXPECT_EQ(r.units[0].task_id, "lcb_palindrome");
    EXPECT_EQ(r.units[0].origin, "livecodebench");
}

TEST(Ingest, MalformedRecordsCarryIndex) {
    obf::testing::TempDir dir;
    auto path = dir.write("c.json", R"([{"task_id":"a","solution_code":"x = 1\n"},{"task_id":"b","test":""}])");
    try {
        ingest(path.string(), Format::ClassEvalJson);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.record_index(), 1u);
    }
    auto dup = dir.write("d.jsonl", "{\"id\":\"a\",\"code\":\"x = 1\\n\"}\n{\"id\":\"a\",\"code\":\"y = 2\\n\"}\n");
    EXPECT_THROW(ingest(dup.string(), Format::LcbJson), FormatError);
    auto broken = dir.write("e.jsonl", "{\"id\":\"a\",\"code\":\"x = 1\\n\"}\nnot json\n");
    try {
        ingest(broken.string(), Format::LcbJson);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.record_index(), 1u);
    }
    EXPECT_THROW(parse_format("csv"), Error);
}

TEST(Ingest, UnparseableUnitsAreSkippedWithWarning) {
    obf::testing::TempDir dir;
    auto path = dir.write("c.jsonl", "{\"id\":\"ok\",\"code\":\"x = 1\\n\"}\n{\"id\":\"bad\",\"code\":\"def (:\\n\"}\n"
                                     "{\"id\":\"star\",\"code\":\"from os import *\\n\"}\n");
    auto r = ingest(path.string(), Format::LcbJson);
    ASSERT_EQ(r.units.size(), 1u);
    EXPECT_EQ(r.warnings, 2);
    EXPECT_EQ(r.messages.size(), 2u);
}

TEST(Emit, WritesLinesAndManifest) {
    obf::testing::TempDir dir;
    auto out = (dir.path() / "set.jsonl").string();
    auto manifest = emit_dataset(marked_records(7), out);
    EXPECT_EQ(manifest.records.size(), 10u);
    EXPECT_EQ(manifest.seed, 7u);
    EXPECT_EQ(manifest.lexicon_versions.at("crossdomain"), "crossdomain_v1");
    EXPECT_EQ(manifest.lexicon_versions.at("misleading"), "misleading_v1");

    std::istringstream lines(obf::testing::read_file(out));
    int count = 0;
    for (std::string line; std::getline(lines, line); ++count) {
        auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.dump(), line);  // sorted keys, compact
        for (const char* key : {"task_id", "original_code", "original_test", "variants", "cc", "seed"}) {
            EXPECT_TRUE(j.contains(key)) << key;
        }
        for (const char* tag : {"alpha", "ambiguity", "crossdomain", "misleading"}) {
            EXPECT_TRUE(j["variants"][tag].contains("name_map"));
        }
    }
    EXPECT_EQ(count, 10);
    auto m = nlohmann::json::parse(obf::testing::read_file(manifest_path(out)));
    EXPECT_EQ(m["schema_version"], kSchemaVersion);
    for (const auto& e : m["records"]) {
        EXPECT_EQ(e["strategies"].size(), 4u);
        for (const auto& [tag, status] : e["verdicts"].items()) EXPECT_EQ(status, "EQUIVALENT");
    }
}

TEST(Emit, RejectsUnverifiedRecords) {
    obf::testing::TempDir dir;
    auto records = marked_records(7);
    records[3].verdicts[Tag::Alpha].status = VerdictStatus::Divergent;
    EXPECT_THROW(emit_dataset(records, (dir.path() / "a.jsonl").string()), UnverifiedRecord);
    records = marked_records(7);
    records[0].verdicts.erase(Tag::Misleading);
    EXPECT_THROW(emit_dataset(records, (dir.path() / "b.jsonl").string()), UnverifiedRecord);
    records = marked_records(7);
    records[0].variants.erase(Tag::Misleading);
    EXPECT_THROW(emit_dataset(records, (dir.path() / "c.jsonl").string()), UnverifiedRecord);
}

TEST(Emit, ReEmitIsByteIdentical) {
    obf::testing::TempDir dir;
    auto a = (dir.path() / "a" / "set.jsonl").string();
    auto b = (dir.path() / "b" / "set.jsonl").string();
    emit_dataset(marked_records(3), a);
    auto shuffled = marked_records(3);
    std::reverse(shuffled.begin(), shuffled.end());
    emit_dataset(shuffled, b);
    EXPECT_EQ(obf::testing::read_file(a), obf::testing::read_file(b));
    EXPECT_EQ(obf::testing::read_file(manifest_path(a)), obf::testing::read_file(manifest_path(b)));
}

TEST(Emit, RoundTrip) {
    obf::testing::TempDir dir;
    auto out = (dir.path() / "set.jsonl").string();
    auto records = marked_records(11);
    emit_dataset(records, out);
    auto back = read_dataset(out);
    ASSERT_EQ(back.size(), records.size());
    std::map<std::string, const ObfuscationRecord*> by_id;
    for (const auto& r : records) by_id[r.task_id] = &r;
    for (const auto& r : back) {
        const auto& orig = *by_id.at(r.task_id);
        EXPECT_EQ(r.original.code, orig.original.code);
        EXPECT_EQ(r.original.test_code, orig.original.test_code);
        EXPECT_EQ(r.original.origin, orig.original.origin);
        EXPECT_EQ(r.seed, orig.seed);
        ASSERT_EQ(r.variants.size(), 4u);
        for (const auto& [tag, v] : r.variants) {
            EXPECT_EQ(v.code, orig.variants.at(tag).code);
            EXPECT_EQ(v.test_code, orig.variants.at(tag).test_code);
            EXPECT_EQ(strategies::serialize(v.map), strategies::serialize(orig.variants.at(tag).map));
            auto again = rewrite::obfuscate(r.original, v.map);
            EXPECT_EQ(again.code, v.code);
            EXPECT_EQ(r.verdicts.at(tag).status, VerdictStatus::Equivalent);
        }
    }
}

TEST(Build, PipelineIsDeterministic) {
    auto units = ingest(corpus_dir(), Format::PlainDir).units;
    BuildOptions options;
    options.seed = 42;
    options.limits = {20, 512};
    obf::testing::TempDir dir;
    auto a = (dir.path() / "a.jsonl").string();
    auto b = (dir.path() / "b.jsonl").string();
    auto first = build_dataset(units, options, runner(), a);
    options.workers = 2;
    auto second = build_dataset(units, options, runner(), b);
    EXPECT_EQ(first.manifest.records.size(), units.size());
    EXPECT_TRUE(first.excluded.empty());
    EXPECT_EQ(obf::testing::read_file(a), obf::testing::read_file(b));
    EXPECT_EQ(obf::testing::read_file(manifest_path(a)), obf::testing::read_file(manifest_path(b)));
}

TEST(Build, ThresholdAndUnverifiedUnitsAreExcluded) {
    std::vector<SourceUnit> units = {
        {"simple", "def f(x):\n    return x\n",
         "import unittest\nclass T(unittest.TestCase):\n    def test_f(self):\n        self.assertEqual(f(1), 1)\n", "custom"},
        {"branchy", "def g(x):\n    if x:\n        return 1\n    return 2\n",
         "import unittest\nclass T(unittest.TestCase):\n    def test_g(self):\n        self.assertEqual(g(0), 3)\n", "custom"},
        {"branchy_ok", "def h(x):\n    if x:\n        return 1\n    return 2\n",
         "import unittest\nclass T(unittest.TestCase):\n    def test_h(self):\n        self.assertEqual(h(0), 2)\n", "custom"},
    };
    BuildOptions options;
    options.cc_threshold = 2;
    options.limits = {20, 512};
    obf::testing::TempDir dir;
    auto report = build_dataset(units, options, runner(), (dir.path() / "d.jsonl").string());
    ASSERT_EQ(report.manifest.records.size(), 1u);
    EXPECT_EQ(report.manifest.records[0].task_id, "branchy_ok");
    EXPECT_EQ(report.manifest.records[0].cc, 2);
    EXPECT_EQ(report.excluded.size(), 2u);
    EXPECT_EQ(report.summary.counts.at(VerdictStatus::OriginalFails), 4);
}
