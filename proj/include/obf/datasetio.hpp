#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "obf/errors.hpp"
#include "obf/metrics.hpp"
#include "obf/record.hpp"
#include "obf/rewrite.hpp"
#include "obf/verify.hpp"

namespace obf::datasetio {

inline constexpr int kSchemaVersion = 1;

enum class Format { ClassEvalJson, LcbJson, PlainDir };

std::string_view format_name(Format format);
Format parse_format(std::string_view text);

struct IngestResult {
    std::vector<SourceUnit> units;
    int warnings = 0;
    std::vector<std::string> messages;  // one per skipped unit
};

/// Reads a corpus. classeval_json: array of {task_id, solution_code, test}.
/// lcb_json: array or JSON lines of {question_id|task_id, code, test?}.
/// plain_dir: `x.py` with optional `x_test.py`. Units that fail to parse or
/// analyze are skipped with a warning. Throws FormatError on malformed records.
IngestResult ingest(const std::string& path, Format format);

struct ManifestEntry {
    std::string task_id;
    std::string origin;
    int cc = 1;
    std::map<strategies::Tag, VerdictStatus> verdicts;
    std::vector<strategies::Tag> strategies;
};

struct DatasetManifest {
    int schema_version = kSchemaVersion;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> lexicon_versions;  // strategy -> lexicon
    std::vector<ManifestEntry> records;
};

nlohmann::json to_json(const DatasetManifest& manifest);

/// `dataset.jsonl` -> `dataset.manifest.json`.
std::string manifest_path(const std::string& dataset_path);

/// Writes one JSON line per record (sorted by task_id, sorted keys) and the
/// manifest beside it. Throws UnverifiedRecord unless every record has all four
/// variants verified EQUIVALENT.
DatasetManifest emit_dataset(const std::vector<ObfuscationRecord>& records, const std::string& out_path);

/// Reads an emitted dataset and its manifest back into records.
std::vector<ObfuscationRecord> read_dataset(const std::string& path);

struct BuildOptions {
    std::uint64_t seed = 0;
    int cc_threshold = 1;
    metrics::Aggregate aggregate = metrics::Aggregate::Max;
    rewrite::PipelineOptions pipeline;
    verify::Limits limits;
    int workers = 4;
};

struct BuildReport {
    DatasetManifest manifest;
    verify::CorpusSummary summary;
    std::vector<std::string> excluded;  // task ids left out: filtered, partial or not equivalent
};

/// Filters by complexity, obfuscates, verifies and emits the admitted records.
BuildReport build_dataset(const std::vector<SourceUnit>& units, const BuildOptions& options, verify::Runner& runner,
                          const std::string& out_path);

}  // namespace obf::datasetio
