#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "obf/eval.hpp"
#include "obf/rewrite.hpp"
#include "test_support.hpp"

using namespace obf;
using namespace obf::eval;

namespace {

std::string fixture(const std::string& name) { return (obf::testing::source_dir() / "data" / "fixtures" / name).string(); }

// Fraction of k-subsets of n attempts (the first c correct) holding a correct one.
double enumerate_pass(int n, int c, int k) {
    int hit = 0, total = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != k) continue;
        ++total;
        if (mask & ((1u << c) - 1)) ++hit;
    }
    return static_cast<double>(hit) / total;
}

std::vector<PredictionTask> fixture_tasks(const std::vector<std::string>& conditions, std::uint64_t seed = 1) {
    std::vector<PredictionTask> tasks;
    for (const auto& spec : load_specs(fixture("eval_tasks.jsonl"))) {
        auto record = rewrite::obfuscate_all(SourceUnit{spec.task_id, spec.code, "", "fixture"}, seed);
        for (auto& t : tasks_for(spec, record, conditions, default_template())) tasks.push_back(std::move(t));
    }
    return tasks;
}

PredictionTask task(const std::string& id, const std::string& strategy, const std::string& expected,
                    std::optional<std::string> old = std::nullopt, DomainSize domain = DomainSize::Large) {
    return PredictionTask{id, strategy, "prompt " + id, expected, std::move(old), domain};
}

std::string fenced(const std::string& body) { return "```ANSWER\n" + body + "\n```"; }

class FunctionClient : public ChatClient {
public:
    explicit FunctionClient(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}
    std::string complete(const ChatRequest& r) override { return fn_(r); }

private:
    std::function<std::string(const ChatRequest&)> fn_;
};

RunOptions fast(int n = 5) {
    RunOptions o;
    o.n = n;
    o.backoff = std::chrono::milliseconds(1);
    return o;
}

}  // namespace

TEST(PassAtK, Examples) {
    EXPECT_DOUBLE_EQ(pass_at_k(5, 5, 1), 1.0);
    EXPECT_DOUBLE_EQ(pass_at_k(5, 0, 3), 0.0);
    EXPECT_NEAR(pass_at_k(5, 2, 3), 0.9, 1e-12);
    EXPECT_NEAR(pass_at_k(5, 2, 1), 0.4, 1e-12);
}

TEST(PassAtK, MatchesSubsetEnumeration) {
    for (int n = 1; n <= 8; ++n) {
        for (int c = 0; c <= n; ++c) {
            double prev = -1;
            for (int k = 1; k <= n; ++k) {
                double v = pass_at_k(n, c, k);
                EXPECT_NEAR(v, enumerate_pass(n, c, k), 1e-12) << n << " " << c << " " << k;
                EXPECT_GE(v, prev);
                prev = v;
            }
        }
    }
}

TEST(PassAtK, DomainErrors) {
    EXPECT_THROW(pass_at_k(5, 6, 1), DomainError);
    EXPECT_THROW(pass_at_k(5, -1, 1), DomainError);
    EXPECT_THROW(pass_at_k(5, 2, 0), DomainError);
    EXPECT_THROW(pass_at_k(5, 2, 6), DomainError);
    EXPECT_THROW(pass_at_k(0, 0, 1), DomainError);
}

TEST(Judge, Normalization) {
    EXPECT_EQ(judge_score({1, 1, 1, 1, 1}), 0.0);
    EXPECT_EQ(judge_score({5, 5, 5, 5, 5}), 100.0);
    EXPECT_EQ(judge_score({5, 4, 4, 3, 4}), 75.0);
    EXPECT_DOUBLE_EQ(judge_aggregate({{5, 5, 5, 5, 5}, {1, 1, 1, 1, 1}}), 50.0);
    EXPECT_THROW(judge_score({0, 3, 3, 3, 3}), DomainError);
    EXPECT_THROW(judge_score({3, 3, 3, 3, 5.5}), DomainError);
    EXPECT_THROW(judge_aggregate({}), DomainError);
}

TEST(Delta, Arithmetic) {
    std::vector<std::string> ids = {"a", "b"};
    auto same = delta_report({ids, 50}, {{"alpha", {ids, 50}}, {"misleading", {{"b", "a"}, 50}}});
    EXPECT_EQ(same.min, 0);
    EXPECT_EQ(same.max, 0);
    EXPECT_EQ(same.avg, 0);

    auto table = delta_report({ids, 85.7}, {{"ambiguity", {ids, 76.1}}});
    EXPECT_NEAR(table.per_strategy.at("ambiguity"), 9.6, 1e-9);

    auto four = delta_report({ids, 10}, {{"alpha", {ids, 8}}, {"ambiguity", {ids, 6}}, {"crossdomain", {ids, 4}},
                                         {"misleading", {ids, 2}}});
    EXPECT_EQ(four.min, 2);
    EXPECT_EQ(four.max, 8);
    EXPECT_EQ(four.avg, 5);

    EXPECT_THROW(delta_report({ids, 1}, {{"alpha", {{"a"}, 1}}}), MismatchedTaskSets);
    EXPECT_THROW(delta_report({ids, 1}, {{"alpha", {{"a", "c"}, 1}}}), MismatchedTaskSets);
}

TEST(Answers, Extraction) {
    EXPECT_EQ(extract_answer("text\n```ANSWER\n42\n```\nmore"), "42\n");
    EXPECT_EQ(extract_answer("```python\nx = 1\n```\n```answer\n'a'\n```"), "'a'\n");
    EXPECT_EQ(extract_answer("``` ANSWER \n[1]\n```"), "[1]\n");
    EXPECT_FALSE(extract_answer("The answer is 42"));
    EXPECT_FALSE(extract_answer("```ANSWER\n42"));
    EXPECT_FALSE(extract_answer("```ANSWERS\n42\n```"));
    EXPECT_FALSE(extract_answer("```ANSWER 42```"));
}

TEST(Answers, CanonicalFormsMatchPythonRepr) {
    std::vector<std::string> literals = {
        "\"efcfe\"", "'efcfe'", "  42  ", "[1 ,2,   3]", "( 3 ,1 ,2 )", "(1 ,)", "{ 'a' : 1 ,\"b\":2}",
        "\"it's\"", "'say \"hi\"'", "'both \\' and \"'", "'tab\\there'", "\"\\x41\\u00e9\"", "-7", "[ -1, - 2 ]",
        "True", "None", "[[3, 1], [4,2]]", "{1, 2}", "'line\\nbreak'", "3.50", "1_0.25e1", "1e16", "12345678901234567890.0", "0.00001", "2.5E-3", "100.", "{}", "[]", "()", "''"};
    obf::testing::TempDir dir;
    nlohmann::json arr = literals;
    auto file = dir.write("lits.json", arr.dump());
    auto out = obf::testing::run_command(
        "python3 -c \"import ast, json, sys; [print(json.dumps(repr(ast.literal_eval(s)))) for s in json.load(open(sys.argv[1]))]\" " +
        file.string());
    std::istringstream lines(out);
    for (const auto& lit : literals) {
        std::string line;
        ASSERT_TRUE(std::getline(lines, line)) << lit;
        EXPECT_EQ(canonicalize(lit), nlohmann::json::parse(line).get<std::string>()) << lit;
    }
}

TEST(Answers, UnparseableTextIsTrimmed) {
    EXPECT_EQ(canonicalize("  'unterminated \n"), "'unterminated");
    EXPECT_EQ(canonicalize(""), "");
}

TEST(Tasks, Validation) {
    EXPECT_NO_THROW(validate(task("t", "orig", "1", "2")));
    EXPECT_THROW(validate(task("t", "orig", "")), DomainError);
    EXPECT_THROW(validate(task("t", "orig", "'a'", "\"a\"")), DomainError);
}

TEST(Tasks, LoadSpecsReportsRecordIndex) {
    obf::testing::TempDir dir;
    auto good = R"({"task_id":"a","code":"def f():\n    return 1\n","function":"f","input":""})";
    auto path = dir.write("specs.jsonl", std::string(good) + "\n\n" + R"({"task_id":"b","function":"f","input":""})" + "\n");
    try {
        load_specs(path.string());
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.record_index(), 1u);
    }
    auto bad_domain = dir.write("d.jsonl", R"({"task_id":"a","code":"","function":"f","input":"","output_domain":"tiny"})");
    EXPECT_THROW(load_specs(bad_domain.string()), FormatError);
    auto specs = load_specs(fixture("eval_tasks.jsonl"));
    EXPECT_EQ(specs.size(), 10u);
}

TEST(Tasks, FixtureOutputsAreGroundTruth) {
    auto specs = load_specs(fixture("eval_tasks.jsonl"));
    auto stripped = specs;
    for (auto& s : stripped) s.expected_output.reset();
    verify::ProcessRunner runner(
        {"python3", (obf::testing::source_dir() / "tests" / "support" / "pyrunner.py").string()});
    ground_truth(stripped, runner, verify::Limits{10, 512});
    for (std::size_t i = 0; i < specs.size(); ++i) EXPECT_EQ(stripped[i].expected_output, specs[i].expected_output);
}

TEST(Tasks, VariantPromptsUseRenamedFunction) {
    auto tasks = fixture_tasks({"orig", "alpha", "ambiguity"});
    ASSERT_EQ(tasks.size(), 30u);
    for (const auto& t : tasks) {
        if (t.task_id != "lcb_sum_even") continue;
        if (t.strategy == "orig") {
            EXPECT_NE(t.prompt.find("Call: sum_even([1, 2, 3, 4, 10])"), std::string::npos);
        } else if (t.strategy == "alpha") {
            EXPECT_NE(t.prompt.find("Call: method1([1, 2, 3, 4, 10])"), std::string::npos) << t.prompt;
            EXPECT_EQ(t.prompt.find("sum_even"), std::string::npos);
        }
        EXPECT_EQ(t.expected_output, "16");
    }
}

TEST(Run, OracleEndpointScoresFull) {
    std::vector<PredictionTask> tasks = {task("a", "orig", "'x'"), task("b", "orig", "[1, 2]")};
    FunctionClient oracle([&](const ChatRequest& r) {
        return fenced(r.task_id == "a" ? "\"x\"" : "[1,2]");
    });
    auto result = run_prediction(tasks, oracle, fast());
    auto report = make_report(result);
    EXPECT_EQ(report.strategies.at("orig").pass1, 100.0);
    EXPECT_EQ(*report.strategies.at("orig").pass3, 100.0);
}

TEST(Run, OldOutputAnswerIsMemorizationNotCorrect) {
    std::vector<PredictionTask> tasks = {task("a", "ambiguity", "5", "3")};
    FunctionClient stale([](const ChatRequest&) { return fenced("3"); });
    auto result = run_prediction(tasks, stale, fast());
    for (const auto& s : result.tasks[0].samples) {
        EXPECT_FALSE(s.correct);
        EXPECT_TRUE(s.matches_old);
    }
    EXPECT_EQ(memorization_check(result).at("ambiguity"), 1);
}

TEST(Run, MemorizationCounting) {
    FunctionClient echo_old([](const ChatRequest& r) { return fenced(r.task_id == "flag" ? "False" : "'old'"); });
    std::vector<PredictionTask> none = {task("a", "orig", "'new'")};
    EXPECT_EQ(memorization_check(run_prediction(none, echo_old, fast())).at("orig"), 0);

    std::vector<PredictionTask> tasks = {task("a", "alpha", "'new'", "'old'"), task("b", "alpha", "'new2'", "'old'"),
                                         task("c", "alpha", "'new'", "'other'"),
                                         task("flag", "alpha", "True", "False", DomainSize::SmallFinite)};
    auto result = run_prediction(tasks, echo_old, fast());
    EXPECT_EQ(memorization_check(result).at("alpha"), 2);
}

TEST(Run, UnparseableAnswersAreIncorrect) {
    FunctionClient chatty([](const ChatRequest&) { return std::string("I think it is 5."); });
    auto result = run_prediction({task("a", "orig", "5")}, chatty, fast(1));
    EXPECT_FALSE(result.tasks[0].samples[0].answer);
    EXPECT_TRUE(result.tasks[0].error.empty());
    EXPECT_EQ(make_report(result).strategies.at("orig").pass1, 0.0);
    EXPECT_FALSE(make_report(result).strategies.at("orig").pass3);
}

TEST(Run, RetriesTransientFailures) {
    std::atomic<int> calls{0};
    FunctionClient flaky([&](const ChatRequest&) -> std::string {
        if (calls++ < 2) throw EndpointError("503");
        return fenced("1");
    });
    auto opts = fast(1);
    opts.concurrency = 1;
    auto result = run_prediction({task("a", "orig", "1")}, flaky, opts);
    EXPECT_TRUE(result.tasks[0].samples[0].correct);
    EXPECT_EQ(calls.load(), 3);
}

TEST(Run, ExhaustedRetriesAreRecordedAndRunContinues) {
    std::atomic<int> calls{0};
    FunctionClient down([&](const ChatRequest& r) -> std::string {
        ++calls;
        if (r.task_id == "a") throw EndpointError("unreachable");
        return fenced("1");
    });
    auto result = run_prediction({task("a", "orig", "1"), task("b", "orig", "1")}, down, fast(2));
    EXPECT_EQ(result.tasks[0].error, "unreachable");
    EXPECT_EQ(result.tasks[0].correct(), 0);
    EXPECT_EQ(result.tasks[1].correct(), 2);
    EXPECT_EQ(calls.load(), 2 * 4 + 2);
    auto report = make_report(result);
    EXPECT_EQ(report.strategies.at("orig").failed_tasks, 1);
    EXPECT_EQ(report.strategies.at("orig").pass1, 50.0);
}

TEST(Replay, MemorizationFixture) {
    auto tasks = fixture_tasks({"orig", "ambiguity"});
    auto client = ReplayClient::from_file(fixture("eval_replay.json"));
    auto report = make_report(run_prediction(tasks, client, fast()));
    EXPECT_EQ(report.strategies.at("orig").tasks, 10);
    EXPECT_EQ(report.strategies.at("orig").pass1, 100.0);
    EXPECT_EQ(report.strategies.at("orig").memorization, 0);
    EXPECT_EQ(report.strategies.at("ambiguity").memorization, 2);
    EXPECT_NEAR(report.strategies.at("ambiguity").pass1, 80.0, 1e-9);
    EXPECT_NEAR(report.delta_pass1->per_strategy.at("ambiguity"), 20.0, 1e-9);
    EXPECT_EQ(report.strategies.at("orig").failed_tasks, 0);
}

TEST(Replay, ByteIdenticalReports) {
    auto all = fixture_tasks({"orig"});
    std::vector<PredictionTask> three(all.begin(), all.begin() + 3);
    auto client = ReplayClient::from_file(fixture("eval_replay.json"));
    auto a = make_report(run_prediction(three, client, fast()));
    auto b = make_report(run_prediction(three, client, fast()));
    EXPECT_EQ(to_json(a).dump(2), to_json(b).dump(2));
    EXPECT_EQ(to_csv(a), to_csv(b));
    EXPECT_EQ(a.strategies.at("orig").tasks, 3);
}

TEST(Replay, MissingKeyIsEndpointError) {
    ReplayClient client(nlohmann::json{{"responses", {{"a/orig/0", "x"}}}});
    EXPECT_EQ(client.complete({"a", "orig", 0, ""}), "x");
    EXPECT_THROW(client.complete({"a", "orig", 1, ""}), EndpointError);
    EXPECT_THROW(ReplayClient(nlohmann::json::array()), Error);
}

TEST(Report, CsvLayout) {
    FunctionClient c([](const ChatRequest& r) { return fenced(r.strategy == "orig" ? "1" : "2"); });
    auto report = make_report(run_prediction({task("a", "orig", "1"), task("a", "alpha", "1")}, c, fast(3)));
    EXPECT_EQ(to_csv(report),
              "strategy,tasks,pass@1,pass@3,memorization,failed_tasks,delta_pass@1,delta_pass@3\n"
              "alpha,1,0.0000,0.0000,0,0,100.0000,100.0000\n"
              "orig,1,100.0000,100.0000,0,0,,\n");
    auto j = to_json(report);
    EXPECT_EQ(j["delta"]["pass@1"]["max"], 100.0);
    EXPECT_EQ(j["strategies"]["orig"]["pass@3"], 100.0);
}

TEST(Http, MockEndpointWithRetryAndRecording) {
    httplib::Server server;
    std::atomic<int> requests{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (requests++ == 0) {
            res.status = 503;
            return;
        }
        if (req.get_header_value("Authorization") != "Bearer secret") {
            res.status = 401;
            return;
        }
        auto body = nlohmann::json::parse(req.body);
        std::string prompt = body["messages"][0]["content"];
        std::string answer = prompt.find("sum_even") != std::string::npos ? "16" : "0";
        nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", fenced(answer)}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    std::vector<PredictionTask> tasks;
    for (auto& t : fixture_tasks({"orig"})) {
        if (t.task_id == "lcb_sum_even") tasks.push_back(t);
    }
    ASSERT_EQ(tasks.size(), 1u);
    HttpChatClient http({"http://127.0.0.1:" + std::to_string(port) + "/v1", "secret", "mock-model", 0.0, 5});
    RecordingClient recorder(http);
    auto live = make_report(run_prediction(tasks, recorder, fast()));
    EXPECT_EQ(live.strategies.at("orig").pass1, 100.0);
    EXPECT_EQ(requests.load(), 6);

    ReplayClient replay(recorder.fixture());
    auto again = make_report(run_prediction(tasks, replay, fast()));
    EXPECT_EQ(to_json(live).dump(), to_json(again).dump());

    HttpChatClient wrong_key({"http://127.0.0.1:" + std::to_string(port) + "/v1/", "nope", "mock-model", 0.0, 5});
    EXPECT_THROW(wrong_key.complete({"a", "orig", 0, "x"}), EndpointError);
    server.stop();
    thread.join();

    HttpChatClient closed({"http://127.0.0.1:" + std::to_string(port), "", "m", 0.0, 1});
    EXPECT_THROW(closed.complete({"a", "orig", 0, "x"}), EndpointError);
    EXPECT_THROW(HttpChatClient({"ftp://host", "", "m"}), EndpointError);
}

TEST(Http, EndpointFromEnvironment) {
    unsetenv("OBF_BASE_URL");
    setenv("OBF_MODEL", "m", 1);
    EXPECT_THROW(endpoint_from_env(), EndpointError);
    setenv("OBF_BASE_URL", "https://api.example.test/v1", 1);
    setenv("OBF_API_KEY", "k", 1);
    auto c = endpoint_from_env();
    EXPECT_EQ(c.base_url, "https://api.example.test/v1");
    EXPECT_EQ(c.api_key, "k");
    EXPECT_EQ(c.model, "m");
    unsetenv("OBF_BASE_URL");
    unsetenv("OBF_API_KEY");
    unsetenv("OBF_MODEL");
}
