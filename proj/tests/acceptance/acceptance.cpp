// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include <chrono>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

#include "../unit/program_gen.hpp"
#include "../unit/test_support.hpp"
#include "obf/datasetio.hpp"
#include "obf/eval.hpp"
#include "obf/metrics.hpp"
#include "obf/rewrite.hpp"
#include "obf/tokenizer.hpp"
#include "obf/verify.hpp"

using namespace obf;
using strategies::Tag;

namespace {

struct Check {
    bool ok = true;
    std::string why;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) why = what;
        ok = ok && cond;
    }
};

std::vector<SourceUnit> corpus() {
    std::vector<SourceUnit> out;
    for (const auto& cu : obf::testing::corpus_units()) out.push_back({cu.task_id, cu.code, cu.test_code, "custom"});
    return out;
}

verify::ProcessRunner& runner() {
    static verify::ProcessRunner r({"python3", (obf::testing::source_dir() / "tests" / "support" / "pyrunner.py").string()});
    return r;
}

Check semantics_preservation() {
    Check c;
    auto start = std::chrono::steady_clock::now();
    auto units = corpus();
    std::set<std::string> ids;
    for (const auto& u : units) ids.insert(u.task_id);
    c.expect(units.size() >= 10, "corpus has fewer than 10 units");
    c.expect(ids.count("minesweeper") && ids.count("palindrome"), "corpus lacks minesweeper or palindrome");

    std::vector<ObfuscationRecord> records;
    for (const auto& u : units) records.push_back(rewrite::obfuscate_all(u, 2026));
    auto summary = verify::verify_corpus(records, {30, 512}, runner(), 4);
    c.expect(summary.counts[VerdictStatus::Equivalent] == static_cast<int>(units.size() * 4),
             "not every variant is EQUIVALENT: " + verify::to_json(summary).dump());

    int trials = 0, divergent = 0;
    for (std::uint64_t round = 0; trials < 20 && round < 10; ++round) {
        for (const auto& r : records) {
            for (auto tag : strategies::kAllTags) {
                if (trials >= 20) break;
                auto faulty = verify::inject_fault(r, tag, round * 7919 + static_cast<std::uint64_t>(trials));
                if (!faulty) continue;
                auto copy = r;
                copy.variants[tag] = *faulty;
                ++trials;
                if (verify::verify_variant(copy, tag, {30, 512}, runner()).status == VerdictStatus::Divergent) ++divergent;
            }
        }
    }
    c.expect(trials == 20, "only " + std::to_string(trials) + " fault trials possible");
    c.expect(divergent == trials, std::to_string(divergent) + "/" + std::to_string(trials) + " faults detected");
    auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(seconds < 120, "took " + std::to_string(seconds) + " s");
    if (c.ok) {
        c.why = std::to_string(units.size() * 4) + " variants EQUIVALENT, " + std::to_string(divergent) +
                "/20 faults DIVERGENT, " + std::to_string(static_cast<int>(seconds)) + " s";
    }
    return c;
}

Check determinism() {
    Check c;
    obf::testing::TempDir dir;
    datasetio::BuildOptions o;
    o.seed = 77;
    auto units = corpus();
    std::string paths[2] = {(dir.path() / "a" / "set.jsonl").string(), (dir.path() / "b" / "set.jsonl").string()};
    for (int i = 0; i < 2; ++i) {
        o.workers = i == 0 ? 1 : 4;
        datasetio::build_dataset(units, o, runner(), paths[i]);
    }
    auto a = obf::testing::read_file(paths[0]);
    c.expect(!a.empty(), "empty dataset");
    c.expect(a == obf::testing::read_file(paths[1]), "dataset files differ");
    c.expect(obf::testing::read_file(datasetio::manifest_path(paths[0])) ==
                 obf::testing::read_file(datasetio::manifest_path(paths[1])),
             "manifests differ");
    if (c.ok) c.why = "dataset and manifest byte-identical across two runs";
    return c;
}

bool nested(const std::string& outer, const std::string& inner) {
    if (outer == "<module>" || outer == inner) return true;
    return inner.size() > outer.size() && inner.compare(0, outer.size(), outer) == 0 && inner[outer.size()] == '.';
}

Check capture_avoidance() {
    Check c;
    int programs = 0, maps = 0;
    for (unsigned seed = 1; seed <= 220 && c.ok; ++seed) {
        auto code = obf::testing::ProgramGenerator(seed).module();
        SourceUnit unit{"gen" + std::to_string(seed), code, "", "custom"};
        auto tree = frontend::parse(code);
        auto graph = scopes::analyze(tree);
        auto record = rewrite::obfuscate_all(unit, seed);
        c.expect(!record.partial(), "strategy failed on program " + std::to_string(seed));
        for (const auto& [tag, v] : record.variants) {
            const auto& entries = v.map.entries;
            for (std::size_t i = 0; i < entries.size(); ++i) {
                const auto& e = entries[i];
                std::string where = "program " + std::to_string(seed) + " " + std::string(tag_name(tag)) + ": ";
                c.expect(frontend::is_identifier(e.to) && !frontend::is_keyword(e.to) &&
                             !frontend::is_soft_keyword(e.to) && !scopes::is_builtin(e.to),
                         where + "invalid name " + e.to);
                c.expect(!graph.identifiers.count(e.to), where + e.to + " shadows an existing name");
                for (std::size_t j = i + 1; j < entries.size(); ++j) {
                    bool overlap = nested(e.scope, entries[j].scope) || nested(entries[j].scope, e.scope);
                    c.expect(!(overlap && entries[j].to == e.to), where + e.to + " assigned twice in overlapping scopes");
                }
                if (tag == Tag::Misleading) {
                    auto a = strategies::stems(e.from);
                    for (const auto& s : strategies::stems(e.to)) c.expect(!a.count(s), where + e.from + " -> " + e.to);
                }
            }
            std::string why;
            c.expect(rewrite::alpha_equivalent(unit, {unit.task_id, v.code, v.test_code, ""}, {}, &why),
                     "program " + std::to_string(seed) + " not alpha-equivalent: " + why);
            ++maps;
        }
        ++programs;
    }
    c.expect(programs >= 200, "fewer than 200 programs");
    if (c.ok) c.why = std::to_string(programs) + " programs, " + std::to_string(maps) + " maps";
    return c;
}

double enumerate_pass(int n, int c, int k) {
    int hit = 0, total = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != k) continue;
        ++total;
        if (mask & ((1u << c) - 1)) ++hit;
    }
    return static_cast<double>(hit) / total;
}

Check pass_at_k_oracle() {
    Check c;
    int cases = 0;
    for (int n = 1; n <= 8; ++n) {
        for (int k = 1; k <= n; ++k) {
            for (int x = 0; x <= n; ++x, ++cases) {
                double got = eval::pass_at_k(n, x, k), want = enumerate_pass(n, x, k);
                c.expect(std::abs(got - want) <= 1e-12, "(" + std::to_string(n) + "," + std::to_string(x) + "," +
                                                            std::to_string(k) + ") off by " + std::to_string(got - want));
            }
        }
    }
    c.expect(std::abs(eval::pass_at_k(5, 2, 3) - 0.9) <= 1e-12, "(5,2,3) != 0.9");
    if (c.ok) c.why = std::to_string(cases) + " cases exact to 1e-12, (5,2,3) = 0.9";
    return c;
}

Check cc_oracle() {
    Check c;
    auto script = obf::testing::source_dir() / "tests" / "support" / "cc_oracle.py";
    for (const auto& u : corpus()) {
        obf::testing::TempDir dir;
        auto file = dir.write("unit.py", u.code);
        std::istringstream in(obf::testing::run_command("python3 " + script.string() + " " + file.string()));
        std::vector<std::pair<std::string, int>> want, got;
        std::string q;
        int n;
        while (in >> q >> n) want.emplace_back(q, n);
        auto base = metrics::cyclomatic(frontend::parse(u.code));
        for (const auto& f : base.functions) got.emplace_back(f.qualname, f.cc);
        c.expect(got == want, u.task_id + " differs from the independent counter");
        for (const auto& [tag, v] : rewrite::obfuscate_all(u, 5).variants) {
            auto r = metrics::cyclomatic(frontend::parse(v.code));
            std::vector<int> a, b;
            for (const auto& f : base.functions) a.push_back(f.cc);
            for (const auto& f : r.functions) b.push_back(f.cc);
            c.expect(a == b && r.unit_cc_max == base.unit_cc_max && r.unit_cc_sum == base.unit_cc_sum,
                     u.task_id + "/" + std::string(tag_name(tag)) + " changes complexity");
        }
    }
    auto pal = metrics::cyclomatic(frontend::parse(
        obf::testing::read_file(obf::testing::source_dir() / "data" / "corpus" / "palindrome.py")));
    c.expect(pal.unit_cc_max == 2, "palindrome listing scores " + std::to_string(pal.unit_cc_max));
    if (c.ok) c.why = "corpus matches the counter, variants invariant, palindrome CC 2";
    return c;
}

Check judge() {
    Check c;
    c.expect(eval::judge_score({1, 1, 1, 1, 1}) == 0.0, "all ones");
    c.expect(eval::judge_score({5, 5, 5, 5, 5}) == 100.0, "all fives");
    c.expect(eval::judge_score({5, 4, 4, 3, 4}) == 75.0, "(5,4,4,3,4)");
    if (c.ok) c.why = "0, 100, 75.0";
    return c;
}

Check mock_endpoint() {
    Check c;
    auto fixtures = obf::testing::source_dir() / "data" / "fixtures";
    std::vector<eval::PredictionTask> tasks;
    for (const auto& spec : eval::load_specs((fixtures / "eval_tasks.jsonl").string())) {
        auto record = rewrite::obfuscate_all(SourceUnit{spec.task_id, spec.code, "", "fixture"}, 1);
        for (auto& t : eval::tasks_for(spec, record, {"orig", "ambiguity"}, eval::default_template())) {
            tasks.push_back(std::move(t));
        }
    }
    auto client = eval::ReplayClient::from_file((fixtures / "eval_replay.json").string());
    eval::RunOptions opts;
    opts.n = 5;
    auto report = eval::make_report(eval::run_prediction(tasks, client, opts));
    const auto& orig = report.strategies.at("orig");
    const auto& amb = report.strategies.at("ambiguity");
    c.expect(amb.tasks == 10, "fixture does not hold 10 ambiguity tasks");
    c.expect(orig.pass1 == 100.0, "pass@1(orig) = " + std::to_string(orig.pass1));
    c.expect(amb.memorization == 2, "memorization count " + std::to_string(amb.memorization));
    std::vector<std::string> ids = {"t"};
    auto d = eval::delta_report({ids, 85.7}, {{"ambiguity", {ids, 76.1}}});
    c.expect(std::abs(d.per_strategy.at("ambiguity") - 9.6) < 1e-9, "delta " + std::to_string(d.avg));
    if (c.ok) c.why = "pass@1(orig) 100, memorization 2, delta 9.6";
    return c;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Check (*run)();
    };
    const Criterion criteria[] = {
        {"semantics preservation", semantics_preservation},
        {"determinism", determinism},
        {"capture avoidance", capture_avoidance},
        {"pass@k oracle equivalence", pass_at_k_oracle},
        {"CC oracle equivalence", cc_oracle},
        {"judge arithmetic", judge},
        {"mock-endpoint evaluation", mock_endpoint},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Check c;
        try {
            c = cr.run();
        } catch (const std::exception& e) {
            c = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (c.ok ? "PASS" : "FAIL") << "  " << cr.name << ": " << c.why << std::endl;
        failed += !c.ok;
    }
    return failed ? 1 : 0;
}
