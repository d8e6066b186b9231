#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "obf/errors.hpp"
#include "obf/record.hpp"

namespace obf::verify {

inline constexpr int kSchemaVersion = 1;

/// The runner broke its protocol: bad exit, no result line, or a malformed result.
class ProtocolError : public Error {
public:
    using Error::Error;
};

struct Limits {
    double timeout_s = 30;
    int memory_mb = 512;
};

struct CallSpec {
    std::string function;
    std::string args;  // literal text, e.g. "\"egcfe\", 3"
};

struct Job {
    std::string code;
    std::string test_code;
    double timeout_s = 30;
    std::optional<CallSpec> call;  // function_call entry when set, unittest_module otherwise
};

struct JobResult {
    std::string status;  // ok | crash | timeout
    std::vector<TestOutcome> tests;
    std::optional<std::string> returned_value;
    std::string stderr_tail;
};

nlohmann::json job_to_json(const Job& job);
/// Parses and validates one result line. Throws ProtocolError.
JobResult parse_result(const std::string& line, bool function_call);

class Runner {
public:
    virtual ~Runner() = default;
    /// Runs one job in a fresh process. Throws ProtocolError.
    virtual JobResult run(const Job& job, const Limits& limits) = 0;
};

/// Spawns `command` once per job, sends the job on stdin and reads one result
/// line from stdout. The child gets a scrubbed environment, a private working
/// directory and an address-space limit.
class ProcessRunner : public Runner {
public:
    explicit ProcessRunner(std::vector<std::string> command, double grace_s = 5);
    JobResult run(const Job& job, const Limits& limits) override;

private:
    std::vector<std::string> command_;
    double grace_s_;
};

/// Command from OBF_RUNNER (split on whitespace). Throws Error when unset.
std::vector<std::string> runner_command_from_env();
std::vector<std::string> split_command(const std::string& text);

/// Runs the original and the `tag` variant suites and stores the verdict in the record.
Verdict verify_variant(ObfuscationRecord& record, strategies::Tag tag, const Limits& limits, Runner& runner);

/// Verifies every variant of the record, running the original suite once.
void verify_record(ObfuscationRecord& record, const Limits& limits, Runner& runner);

struct CorpusSummary {
    std::map<VerdictStatus, int> counts;
    std::vector<std::string> non_equivalent;  // "task_id/strategy", task_id order

    bool any_divergent() const;
};

/// Verifies all records with `workers` threads; results are merged in task_id order.
CorpusSummary verify_corpus(std::vector<ObfuscationRecord>& records, const Limits& limits, Runner& runner,
                            int workers = 1);
CorpusSummary summarize(const std::vector<ObfuscationRecord>& records);

nlohmann::json to_json(const CorpusSummary& summary);

/// Copy of the `tag` variant with one renamed reference reverted to its original
/// name, chosen by `seed`. Returns nullopt when the variant has no such reference.
std::optional<Variant> inject_fault(const ObfuscationRecord& record, strategies::Tag tag, std::uint64_t seed);

}  // namespace obf::verify
