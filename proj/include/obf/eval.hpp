#pragma once

#include <array>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "obf/errors.hpp"
#include "obf/record.hpp"
#include "obf/verify.hpp"

namespace obf::eval {

inline constexpr const char* kOriginal = "orig";

// ---- scoring ---------------------------------------------------------------------------

/// Unbiased pass@k estimate 1 - C(n-c, k) / C(n, k). Throws DomainError unless 0 <= c <= n and 1 <= k <= n.
double pass_at_k(int n, int c, int k);

/// Mean of the five rubric dimensions mapped from [1, 5] to [0, 100]. Throws DomainError.
double judge_score(const std::array<double, 5>& dimensions);
/// Mean judge score over samples. Throws DomainError when empty or out of range.
double judge_aggregate(const std::vector<std::array<double, 5>>& ratings);

struct ScoreSlice {
    std::vector<std::string> task_ids;
    double score = 0;
};

struct DeltaSummary {
    std::map<std::string, double> per_strategy;  // orig - variant; positive means degradation
    double min = 0;
    double max = 0;
    double avg = 0;
};

/// Throws MismatchedTaskSets when a variant slice covers other tasks than `orig`.
DeltaSummary delta_report(const ScoreSlice& orig, const std::map<std::string, ScoreSlice>& variants);

// ---- tasks -----------------------------------------------------------------------------

enum class DomainSize { SmallFinite, Large };

std::string_view domain_name(DomainSize size);
DomainSize parse_domain(std::string_view text);

/// One output-prediction item before rendering: a unit, a call and its outputs.
struct PredictionSpec {
    std::string task_id;
    std::string code;
    std::string function;
    std::string input;  // call arguments as literal text
    std::optional<std::string> expected_output;
    std::optional<std::string> old_output;
    DomainSize domain = DomainSize::Large;
};

struct PredictionTask {
    std::string task_id;
    std::string strategy;  // "orig" or a strategy tag
    std::string prompt;
    std::string expected_output;
    std::optional<std::string> old_output;
    DomainSize domain = DomainSize::Large;
};

/// Throws DomainError on an empty expected output or old_output == expected_output.
void validate(const PredictionTask& task);

/// Reads JSON lines {task_id, code, function, input, expected_output?, old_output?, output_domain?}.
std::vector<PredictionSpec> load_specs(const std::string& path);

/// Fills a template's {{code}} and {{input}} placeholders; `input` is the call expression.
std::string render_prompt(const std::string& templ, const std::string& code, const std::string& input);
const std::string& default_template();

/// Computes missing expected outputs by calling the function through `runner`.
void ground_truth(std::vector<PredictionSpec>& specs, verify::Runner& runner, const verify::Limits& limits);

/// Tasks for the original and for each requested variant of `record`. The call
/// target is renamed through the variant's map; outputs are shared.
std::vector<PredictionTask> tasks_for(const PredictionSpec& spec, const ObfuscationRecord& record,
                                      const std::vector<std::string>& conditions, const std::string& templ);

// ---- answers ---------------------------------------------------------------------------

/// Body of the first fenced block labelled ANSWER, or nullopt.
std::optional<std::string> extract_answer(const std::string& response);
/// Trims whitespace and normalizes literal spelling (quotes, spacing).
std::string canonicalize(const std::string& text);

// ---- endpoints -------------------------------------------------------------------------

struct ChatRequest {
    std::string task_id;
    std::string strategy;
    int sample = 0;
    std::string prompt;

    std::string key() const { return task_id + "/" + strategy + "/" + std::to_string(sample); }
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    /// Returns the model's text. Throws EndpointError on failure.
    virtual std::string complete(const ChatRequest& request) = 0;
};

struct EndpointConfig {
    std::string base_url;  // e.g. https://api.example.com/v1
    std::string api_key;
    std::string model;
    double temperature = 0.8;
    double timeout_s = 120;
};

/// Reads OBF_BASE_URL, OBF_API_KEY and OBF_MODEL. Throws EndpointError when the URL or model is missing.
EndpointConfig endpoint_from_env();

/// Chat-completions client over HTTP(S) with bearer authentication.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(EndpointConfig config);
    std::string complete(const ChatRequest& request) override;

private:
    EndpointConfig config_;
    std::string origin_;
    std::string path_;
};

/// Serves responses from a fixture {"responses": {"task/strategy/i": text}}.
class ReplayClient : public ChatClient {
public:
    explicit ReplayClient(nlohmann::json fixture);
    static ReplayClient from_file(const std::string& path);
    std::string complete(const ChatRequest& request) override;

private:
    std::map<std::string, std::string> responses_;
};

/// Forwards to another client and keeps every response for replay.
class RecordingClient : public ChatClient {
public:
    explicit RecordingClient(ChatClient& inner) : inner_(inner) {}
    std::string complete(const ChatRequest& request) override;
    nlohmann::json fixture() const;
    void save(const std::string& path) const;

private:
    ChatClient& inner_;
    mutable std::mutex mutex_;
    std::map<std::string, std::string> responses_;
};

// ---- runs ------------------------------------------------------------------------------

struct Sample {
    std::optional<std::string> answer;  // canonical; nullopt when unparseable or failed
    bool correct = false;
    bool matches_old = false;
    std::string error;
};

struct TaskResult {
    PredictionTask task;
    std::vector<Sample> samples;
    std::string error;  // set when any sample exhausted the retry budget

    int correct() const;
};

struct RunResult {
    int n = 0;
    std::vector<TaskResult> tasks;  // ordered by (strategy, task_id)
};

struct RunOptions {
    int n = 5;
    int concurrency = 4;
    int max_attempts = 4;
    std::chrono::milliseconds backoff{500};  // doubled after each failed attempt
};

/// Collects n samples per task. Failed samples count as incorrect and the run continues.
RunResult run_prediction(const std::vector<PredictionTask>& tasks, ChatClient& client, const RunOptions& options = {});

/// Tasks per strategy with at least one sample equal to old_output, small finite domains excluded.
std::map<std::string, int> memorization_check(const RunResult& result);

struct StrategyScores {
    int tasks = 0;
    double pass1 = 0;
    std::optional<double> pass3;  // needs n >= 3
    int memorization = 0;
    int failed_tasks = 0;
};

struct EvalReport {
    int n = 0;
    std::map<std::string, StrategyScores> strategies;
    std::optional<DeltaSummary> delta_pass1;
    std::optional<DeltaSummary> delta_pass3;
};

/// Corpus pass@k (mean over tasks, x100) of one strategy.
ScoreSlice score_slice(const RunResult& result, const std::string& strategy, int k);

EvalReport make_report(const RunResult& result);
nlohmann::json to_json(const EvalReport& report);
std::string to_csv(const EvalReport& report);

}  // namespace obf::eval
