#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "obf/strategies.hpp"

namespace obf {

struct SourceUnit {
    std::string task_id;
    std::string code;
    std::string test_code;
    std::string origin;  // where the unit was ingested from
};

enum class VerdictStatus : std::uint8_t { Equivalent, Divergent, OriginalFails, RunnerError, Timeout };

std::string_view status_name(VerdictStatus status);
VerdictStatus parse_status(std::string_view text);

struct TestOutcome {
    std::string name;
    std::string outcome;  // pass | fail | error

    friend bool operator==(const TestOutcome&, const TestOutcome&) = default;
};

struct Verdict {
    VerdictStatus status = VerdictStatus::RunnerError;
    std::vector<TestOutcome> original;
    std::vector<TestOutcome> variant;
    double wall_seconds = 0;
    double limit_seconds = 0;  // set for TIMEOUT
    std::string detail;
};

struct Variant {
    std::string code;
    std::string test_code;
    strategies::NameMap map;
};

struct ObfuscationRecord {
    std::string task_id;
    SourceUnit original;
    std::uint64_t seed = 0;
    std::map<strategies::Tag, Variant> variants;
    std::map<strategies::Tag, Verdict> verdicts;
    std::map<strategies::Tag, std::string> failures;  // strategies that could not be built

    bool partial() const { return !failures.empty(); }
};

}  // namespace obf
