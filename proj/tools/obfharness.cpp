#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "obf/datasetio.hpp"
#include "obf/eval.hpp"
#include "obf/metrics.hpp"
#include "obf/rewrite.hpp"
#include "obf/verify.hpp"

namespace fs = std::filesystem;
using namespace obf;

namespace {

struct Common {
    std::string input;
    std::string format = "plain_dir";
    std::uint64_t seed = 0;
    std::string strategy = "all";
    std::string policy = "strict";
    bool no_attributes = false;
    bool import_aliases = false;
    double timeout = 30;
    int memory_mb = 512;
    std::string runner;
    int workers = 4;
    int cc_threshold = 1;
    std::string aggregate = "max";
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

// A single .py file (with an optional sibling _test.py) or a corpus in --format.
std::vector<SourceUnit> load_units(const Common& c) {
    fs::path p(c.input);
    if (fs::is_regular_file(p) && p.extension() == ".py") {
        auto test = p.parent_path() / (p.stem().string() + "_test.py");
        return {{p.stem().string(), read_text(p.string()), fs::exists(test) ? read_text(test.string()) : "", "custom"}};
    }
    auto result = datasetio::ingest(c.input, datasetio::parse_format(c.format));
    for (const auto& m : result.messages) std::cerr << "warning: skipped " << m << "\n";
    return result.units;
}

scopes::RenamePolicy policy_of(const Common& c) {
    return {scopes::parse_policy(c.policy), !c.no_attributes, c.import_aliases};
}

rewrite::PipelineOptions pipeline_of(const Common& c) {
    rewrite::PipelineOptions o;
    o.policy = policy_of(c);
    return o;
}

std::vector<strategies::Tag> tags_of(const Common& c) {
    if (c.strategy == "all") return {strategies::kAllTags.begin(), strategies::kAllTags.end()};
    std::vector<strategies::Tag> tags;
    std::stringstream ss(c.strategy);
    for (std::string part; std::getline(ss, part, ',');) tags.push_back(strategies::parse_tag(part));
    return tags;
}

// Keeps only the requested strategies in a record.
void restrict(ObfuscationRecord& r, const std::vector<strategies::Tag>& tags) {
    for (auto it = r.variants.begin(); it != r.variants.end();) {
        it = std::find(tags.begin(), tags.end(), it->first) == tags.end() ? r.variants.erase(it) : std::next(it);
    }
}

std::unique_ptr<verify::Runner> runner_of(const Common& c) {
    auto cmd = c.runner.empty() ? verify::runner_command_from_env() : verify::split_command(c.runner);
    return std::make_unique<verify::ProcessRunner>(cmd);
}

verify::Limits limits_of(const Common& c) { return {c.timeout, c.memory_mb}; }

metrics::Aggregate aggregate_of(const Common& c) {
    if (c.aggregate == "max") return metrics::Aggregate::Max;
    if (c.aggregate == "sum") return metrics::Aggregate::Sum;
    throw Error("unknown aggregate: " + c.aggregate);
}

void add_input(CLI::App* app, Common& c) {
    app->add_option("input", c.input, "Python file, corpus file or directory")->required();
    app->add_option("--format", c.format, "classeval_json | lcb_json | plain_dir");
}

void add_obfuscation(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "Generator seed");
    app->add_option("--strategy", c.strategy, "all or a comma list of alpha, ambiguity, crossdomain, misleading");
    app->add_option("--policy", c.policy, "Reflection policy: strict | rewrite-literals");
    app->add_flag("--no-rename-attributes", c.no_attributes, "Keep attribute names");
    app->add_flag("--rename-import-aliases", c.import_aliases, "Rename `as` import aliases");
}

void add_execution(CLI::App* app, Common& c) {
    app->add_option("--timeout", c.timeout, "Per-job time limit in seconds");
    app->add_option("--memory-mb", c.memory_mb, "Per-job address-space limit");
    app->add_option("--runner", c.runner, "Runner command (default: $OBF_RUNNER)");
    app->add_option("--workers", c.workers, "Parallel jobs");
}

int cmd_obfuscate(const Common& c, const std::string& out) {
    auto tags = tags_of(c);
    nlohmann::json all = nlohmann::json::array();
    int failures = 0;
    for (const auto& unit : load_units(c)) {
        auto record = rewrite::obfuscate_all(unit, c.seed, pipeline_of(c));
        restrict(record, tags);
        for (const auto& [tag, why] : record.failures) {
            std::cerr << unit.task_id << "/" << tag_name(tag) << ": " << why << "\n";
            ++failures;
        }
        if (!out.empty()) {
            for (const auto& [tag, v] : record.variants) {
                auto base = fs::path(out) / unit.task_id / std::string(tag_name(tag));
                write_text(base.string() + ".py", v.code);
                if (!v.test_code.empty()) write_text(base.string() + "_test.py", v.test_code);
                write_text(base.string() + ".map.json", strategies::serialize(v.map) + "\n");
            }
        } else {
            all.push_back(rewrite::to_json(record));
        }
    }
    if (out.empty()) std::cout << all.dump(2) << "\n";
    return failures ? 1 : 0;
}

int cmd_verify(const Common& c) {
    auto tags = tags_of(c);
    std::vector<ObfuscationRecord> records;
    for (const auto& unit : load_units(c)) {
        records.push_back(rewrite::obfuscate_all(unit, c.seed, pipeline_of(c)));
        restrict(records.back(), tags);
    }
    auto runner = runner_of(c);
    auto summary = verify::verify_corpus(records, limits_of(c), *runner, c.workers);
    nlohmann::json details = nlohmann::json::object();
    for (const auto& r : records) {
        for (const auto& [tag, v] : r.verdicts) {
            if (v.status != VerdictStatus::Equivalent) {
                details[r.task_id + "/" + std::string(tag_name(tag))] = {{"status", status_name(v.status)},
                                                                       {"detail", v.detail}};
            }
        }
    }
    auto j = verify::to_json(summary);
    j["details"] = details;
    std::cout << j.dump(2) << "\n";
    if (summary.any_divergent()) return 2;
    return summary.non_equivalent.empty() ? 0 : 1;
}

int cmd_stats(const Common& c, bool histogram) {
    auto units = load_units(c);
    auto kept = metrics::filter_corpus(units, c.cc_threshold, aggregate_of(c));
    std::vector<int> all_lengths;
    nlohmann::json per_unit = nlohmann::json::array();
    for (const auto& u : kept) {
        auto tree = frontend::parse(u.code);
        auto stats = metrics::identifier_stats(scopes::analyze(tree), policy_of(c));
        for (const auto& [name, len] : stats.lengths) all_lengths.push_back(len);
        per_unit.push_back({{"task_id", u.task_id},
                            {"complexity", metrics::to_json(metrics::cyclomatic(tree))},
                            {"identifiers", metrics::to_json(stats)}});
    }
    auto summary = metrics::summarize_lengths(all_lengths);
    if (histogram) {
        std::cout << metrics::histogram_csv(summary);
        return 0;
    }
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [len, n] : summary.histogram) hist[std::to_string(len)] = n;
    std::cout << nlohmann::json{{"units", per_unit},
                                {"selected", kept.size()},
                                {"total", units.size()},
                                {"identifier_lengths",
                                 {{"count", summary.count},
                                  {"median", summary.median},
                                  {"mean", summary.mean},
                                  {"p90", summary.p90},
                                  {"histogram", hist}}}}
                     .dump(2)
              << "\n";
    return 0;
}

int cmd_build(const Common& c, const std::string& out) {
    datasetio::BuildOptions o;
    o.seed = c.seed;
    o.cc_threshold = c.cc_threshold;
    o.aggregate = aggregate_of(c);
    o.pipeline = pipeline_of(c);
    o.limits = limits_of(c);
    o.workers = c.workers;
    auto runner = runner_of(c);
    auto report = datasetio::build_dataset(load_units(c), o, *runner, out);
    for (const auto& e : report.excluded) std::cerr << "excluded " << e << "\n";
    std::cout << nlohmann::json{{"dataset", out},
                                {"manifest", datasetio::manifest_path(out)},
                                {"records", report.manifest.records.size()},
                                {"excluded", report.excluded.size()},
                                {"verification", verify::to_json(report.summary)}}
                     .dump(2)
              << "\n";
    return 0;
}

struct EvalArgs {
    std::string tasks;
    std::string conditions = "orig,alpha,ambiguity,crossdomain,misleading";
    std::string replay;
    std::string record;
    std::string templ;
    std::string out;
    std::string csv;
    int n = 5;
    int concurrency = 4;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
    auto specs = eval::load_specs(a.tasks);
    bool missing = std::any_of(specs.begin(), specs.end(), [](const auto& s) { return !s.expected_output; });
    if (missing) {
        auto runner = runner_of(c);
        eval::ground_truth(specs, *runner, limits_of(c));
    }
    std::vector<std::string> conditions;
    std::stringstream ss(a.conditions);
    for (std::string part; std::getline(ss, part, ',');) conditions.push_back(part);
    auto templ = a.templ.empty() ? eval::default_template() : read_text(a.templ);

    std::vector<eval::PredictionTask> tasks;
    for (const auto& spec : specs) {
        auto record = rewrite::obfuscate_all(SourceUnit{spec.task_id, spec.code, "", "eval"}, c.seed, pipeline_of(c));
        for (auto& t : eval::tasks_for(spec, record, conditions, templ)) tasks.push_back(std::move(t));
    }

    std::unique_ptr<eval::ChatClient> base;
    if (!a.replay.empty()) {
        base = std::make_unique<eval::ReplayClient>(eval::ReplayClient::from_file(a.replay));
    } else {
        base = std::make_unique<eval::HttpChatClient>(eval::endpoint_from_env());
    }
    eval::RecordingClient recorder(*base);
    eval::RunOptions opts;
    opts.n = a.n;
    opts.concurrency = a.concurrency;
    auto result = eval::run_prediction(tasks, recorder, opts);
    if (!a.record.empty()) recorder.save(a.record);
    for (const auto& t : result.tasks) {
        if (!t.error.empty()) std::cerr << t.task.task_id << "/" << t.task.strategy << ": " << t.error << "\n";
    }
    auto report = eval::make_report(result);
    auto text = eval::to_json(report).dump(2) + "\n";
    if (!a.out.empty()) write_text(a.out, text);
    if (!a.csv.empty()) write_text(a.csv, eval::to_csv(report));
    std::cout << text;
    return 0;
}

struct ReportArgs {
    std::string scores;
    std::string judge;
    std::string dataset;
};

int cmd_report(const ReportArgs& a) {
    nlohmann::json out = nlohmann::json::object();
    if (!a.scores.empty()) {
        // {"orig": {"task_ids": [...], "score": x}, "<strategy>": {...}}
        auto j = nlohmann::json::parse(read_text(a.scores));
        auto slice = [](const nlohmann::json& s) {
            return eval::ScoreSlice{s.at("task_ids").get<std::vector<std::string>>(), s.at("score").get<double>()};
        };
        std::map<std::string, eval::ScoreSlice> variants;
        for (const auto& [name, s] : j.items()) {
            if (name != eval::kOriginal) variants[name] = slice(s);
        }
        auto d = eval::delta_report(slice(j.at(eval::kOriginal)), variants);
        out["delta"] = {{"per_strategy", d.per_strategy}, {"min", d.min}, {"max", d.max}, {"avg", d.avg}};
    }
    if (!a.judge.empty()) {
        // [[intent, coverage, adequacy, faithfulness, clarity], ...]
        auto ratings = nlohmann::json::parse(read_text(a.judge)).get<std::vector<std::array<double, 5>>>();
        out["judge_score"] = eval::judge_aggregate(ratings);
    }
    if (!a.dataset.empty()) {
        auto records = datasetio::read_dataset(a.dataset);
        std::map<std::string, int> statuses;
        for (const auto& r : records) {
            for (const auto& [tag, v] : r.verdicts) ++statuses[std::string(status_name(v.status))];
        }
        out["dataset"] = {{"records", records.size()}, {"verdicts", statuses}};
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identifier obfuscation harness for Python benchmarks"};
    app.require_subcommand(1);
    Common c;
    std::string out;
    bool histogram = false;
    EvalArgs ea;
    ReportArgs ra;

    auto* obfuscate = app.add_subcommand("obfuscate", "Write renamed variants and their name maps");
    add_input(obfuscate, c);
    add_obfuscation(obfuscate, c);
    obfuscate->add_option("--out", out, "Output directory (default: JSON on stdout)");

    auto* verify = app.add_subcommand("verify", "Run original and variant tests and compare outcomes");
    add_input(verify, c);
    add_obfuscation(verify, c);
    add_execution(verify, c);

    auto* stats = app.add_subcommand("stats", "Cyclomatic complexity and identifier-length statistics");
    add_input(stats, c);
    stats->add_option("--cc-threshold", c.cc_threshold, "Only units whose complexity reaches this value");
    stats->add_option("--aggregate", c.aggregate, "max | sum over functions");
    stats->add_option("--policy", c.policy, "Reflection policy for the renameable set");
    stats->add_flag("--histogram", histogram, "Print the length histogram as CSV");

    auto* build = app.add_subcommand("build-dataset", "Filter, obfuscate, verify and emit a JSONL dataset");
    add_input(build, c);
    add_obfuscation(build, c);
    add_execution(build, c);
    build->add_option("--cc-threshold", c.cc_threshold, "Minimum unit complexity");
    build->add_option("--aggregate", c.aggregate, "max | sum over functions");
    build->add_option("--out", out, "Dataset path (.jsonl)")->required();

    auto* ev = app.add_subcommand("eval", "Output-prediction evaluation against a chat endpoint or replay fixture");
    ev->add_option("--tasks", ea.tasks, "Prediction specs (JSON lines)")->required();
    ev->add_option("--strategies", ea.conditions, "Comma list of orig and strategy tags");
    ev->add_option("--seed", c.seed, "Generator seed");
    ev->add_option("--policy", c.policy, "Reflection policy");
    ev->add_option("-n,--samples", ea.n, "Samples per task");
    ev->add_option("--concurrency", ea.concurrency, "Concurrent requests");
    ev->add_option("--replay", ea.replay, "Replay fixture instead of the live endpoint");
    ev->add_option("--record", ea.record, "Save responses as a replay fixture");
    ev->add_option("--template", ea.templ, "Prompt template with {{code}} and {{input}}");
    ev->add_option("--out", ea.out, "Report JSON path");
    ev->add_option("--csv", ea.csv, "Report CSV path");
    add_execution(ev, c);

    auto* report = app.add_subcommand("report", "Deltas, judge scores and dataset summaries");
    report->add_option("--scores", ra.scores, "Per-strategy score slices (JSON)");
    report->add_option("--judge", ra.judge, "Judge ratings (JSON list of five-score arrays)");
    report->add_option("--dataset", ra.dataset, "Emitted dataset (.jsonl)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (obfuscate->parsed()) return cmd_obfuscate(c, out);
        if (verify->parsed()) return cmd_verify(c);
        if (stats->parsed()) return cmd_stats(c, histogram);
        if (build->parsed()) return cmd_build(c, out);
        if (ev->parsed()) return cmd_eval(c, ea);
        if (report->parsed()) return cmd_report(ra);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
